import json

import numpy as np
import pytest

from spinctrl.cli import main

FAST_TRAIN = ["--epochs", "3", "--steps", "20", "--episodes-per-epoch", "2",
              "--epochs-per-update", "4", "--hidden", "8,6", "--quiet"]


def run_train(tmp_path, name, extra):
    out = tmp_path / name
    code = main(["train", "--out", str(out)] + FAST_TRAIN + extra)
    assert code == 0
    return out


class TestTrain:
    def test_writes_artifacts_and_manifest(self, tmp_path):
        out = run_train(tmp_path, "mf", ["--system", "meanfield", "--seed", "1"])
        assert (out / "checkpoint.npz").exists()
        assert (out / "learning_curve.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["system"] == "meanfield"
        assert manifest["config"]["steps"] == 20
        assert manifest["seed"] == 1
        header = (out / "learning_curve.csv").read_text().splitlines()[0]
        assert header == "epoch,mean_return,mean_final_fidelity,approx_kl"

    def test_same_seed_byte_identical_curves(self, tmp_path):
        a = run_train(tmp_path, "a", ["--system", "meanfield", "--seed", "3"])
        b = run_train(tmp_path, "b", ["--system", "meanfield", "--seed", "3"])
        assert (a / "learning_curve.csv").read_bytes() == \
            (b / "learning_curve.csv").read_bytes()

    def test_quantum_flags(self, tmp_path):
        out = run_train(tmp_path, "q", ["--system", "quantum", "--n-atoms", "4",
                                        "--init", "random"])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["n_atoms"] == 4
        assert manifest["config"]["init"] == "random"

    def test_invalid_config_rejected_without_outputs(self, tmp_path, capsys):
        out = tmp_path / "bad"
        code = main(["train", "--system", "quantum", "--n-atoms", "7",
                     "--out", str(out)])
        assert code == 2
        assert "n_atoms" in capsys.readouterr().err
        assert not out.exists()

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("system: meanfield\nsteps: 20\nseed: 2\n")
        out = tmp_path / "filecfg"
        code = main(["train", "--config", str(cfg), "--out", str(out),
                     "--epochs", "2", "--episodes-per-epoch", "1",
                     "--epochs-per-update", "2", "--hidden", "8,6",
                     "--seed", "5", "--quiet"])
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 5       # flag beats file
        assert manifest["config"]["steps"] == 20     # file beats default


@pytest.fixture(scope="module")
def quantum_ckpt(tmp_path_factory):
    out = tmp_path_factory.mktemp("ckpt")
    code = main(["train", "--system", "quantum", "--n-atoms", "4",
                 "--out", str(out)] + FAST_TRAIN)
    assert code == 0
    return out / "checkpoint.npz"


class TestEval:
    def test_rollout_mode(self, quantum_ckpt, tmp_path):
        out = tmp_path / "roll"
        assert main(["eval", "--checkpoint", str(quantum_ckpt),
                     "--mode", "rollout", "--out", str(out)]) == 0
        data = np.genfromtxt(out / "rollout.csv", delimiter=",", names=True)
        assert len(data) == 21
        summary = json.loads((out / "summary.json").read_text())
        assert 0.0 <= summary["final_fidelity"] <= 1.0

    def test_map_mode_default_grid(self, quantum_ckpt, tmp_path):
        out = tmp_path / "map"
        assert main(["eval", "--checkpoint", str(quantum_ckpt),
                     "--mode", "map", "--out", str(out)]) == 0
        rows = (out / "policy_map.csv").read_text().strip().splitlines()
        assert len(rows) == 102              # header + 101 rho nodes
        assert len(rows[0].split(",")) == 102  # label + 101 theta nodes

    def test_noise_mode(self, quantum_ckpt, tmp_path):
        out = tmp_path / "noise"
        assert main(["eval", "--checkpoint", str(quantum_ckpt), "--mode", "noise",
                     "--sigma", "0.1", "--samples", "7", "--out", str(out)]) == 0
        data = np.genfromtxt(out / "noise.csv", delimiter=",", names=True)
        assert len(data) == 21
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_samples"] == 7

    def test_generalize_mode(self, quantum_ckpt, tmp_path):
        out = tmp_path / "gen"
        assert main(["eval", "--checkpoint", str(quantum_ckpt),
                     "--mode", "generalize", "--n-list", "4,6,8,12,14",
                     "--out", str(out)]) == 0
        rows = (out / "generalize.csv").read_text().strip().splitlines()
        assert len(rows) == 6

    def test_generalize_rejects_meanfield_checkpoint(self, tmp_path, capsys):
        out = run_train(tmp_path, "mf2", ["--system", "meanfield"])
        code = main(["eval", "--checkpoint", str(out / "checkpoint.npz"),
                     "--mode", "generalize", "--out", str(tmp_path / "g")])
        assert code == 2
        assert "quantum" in capsys.readouterr().err


class TestBaseline:
    def test_constant_n2_peaks_at_qsl(self, tmp_path):
        out = tmp_path / "const"
        code = main(["baseline", "--which", "constant", "--q", "-0.25",
                     "--system", "quantum", "--n-atoms", "2", "--out", str(out)])
        assert code == 0
        data = np.genfromtxt(out / "run.csv", delimiter=",", names=True)
        i = int(np.argmax(data["fidelity"][:31]))  # first Rabi maximum
        assert data["fidelity"][i] > 0.999
        assert abs(data["t"][i] - 2.2214) < 0.1 + 1e-9

    def test_constant_requires_q(self, tmp_path, capsys):
        code = main(["baseline", "--which", "constant", "--system", "quantum",
                     "--n-atoms", "2", "--out", str(tmp_path / "x")])
        assert code == 2
        assert "--q" in capsys.readouterr().err

    def test_ramp_writes_best_triple(self, tmp_path):
        out = tmp_path / "ramp"
        code = main(["baseline", "--which", "ramp", "--system", "quantum",
                     "--n-atoms", "2", "--steps", "20", "--out", str(out)])
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        for key in ("q_i", "q_f", "t_ramp", "final_fidelity"):
            assert key in summary

    def test_analytic_rejected_on_quantum(self, tmp_path, capsys):
        code = main(["baseline", "--which", "analytic", "--system", "quantum",
                     "--n-atoms", "2", "--out", str(tmp_path / "x")])
        assert code == 2
        assert "meanfield" in capsys.readouterr().err

    def test_analytic_on_meanfield(self, tmp_path):
        out = tmp_path / "an"
        code = main(["baseline", "--which", "analytic", "--system", "meanfield",
                     "--out", str(out)])
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["final_fidelity"] > 0.999  # 1 - rho0 at the end

    def test_greedy_on_meanfield(self, tmp_path):
        out = tmp_path / "greedy"
        code = main(["baseline", "--which", "greedy", "--system", "meanfield",
                     "--steps", "30", "--out", str(out)])
        assert code == 0
        assert (out / "run.csv").exists()
