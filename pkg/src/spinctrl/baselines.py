"""Non-RL reference protocols: greedy, optimized linear ramp, analytic laws."""

from __future__ import annotations

import numpy as np

from .envs import MeanFieldEnv
from .evaluate import RunRecord, rollout

GREEDY_GRID_POINTS = 121
RAMP_GRID_POINTS = 25
RAMP_TIME_POINTS = 10

# Tolerance on |theta_s - pi/2| below which the analytic mean-field
# controller switches from the bang phase to phase-locked tracking.
PHASE_WINDOW = 0.01


def _replay(env, protocol) -> RunRecord:
    """Record an episode driven by a per-step list of controls."""
    it = iter(protocol)
    return rollout(env, lambda obs: next(it))


def greedy_rollout(env, q_grid=None) -> RunRecord:
    """Pick, at every step, the grid control with the largest one-step
    fidelity increment; ties break toward the smallest |q|."""
    if q_grid is None:
        q_grid = np.linspace(env.q_min, env.q_max, GREEDY_GRID_POINTS)
    q_grid = np.asarray(q_grid, dtype=np.float64)
    if q_grid.size == 0:
        raise ValueError("q_grid must be nonempty")
    if q_grid.min() < env.q_min or q_grid.max() > env.q_max:
        raise ValueError("q_grid must lie within the control bounds")

    env.reset()
    n = env.steps
    t = np.arange(n + 1) * env.dt
    qs = np.empty(n + 1)
    rho0 = np.empty(n + 1)
    theta = np.empty(n + 1)
    fid = np.empty(n + 1)
    rho0[0], theta[0] = env.record_state()
    fid[0] = env.metric()
    for i in range(n):
        base = env.metric()
        best = max(range(q_grid.size),
                   key=lambda j: (env.preview_metric(q_grid[j]) - base,
                                  -abs(q_grid[j])))
        _, _, _, info = env.step(q_grid[best])
        qs[i] = info["q"]
        rho0[i + 1], theta[i + 1] = env.record_state()
        fid[i + 1] = info["fidelity"]
    qs[n] = qs[n - 1]
    return RunRecord(t, qs, rho0, theta, fid)


def ramp_protocol(q_i, q_f, t_ramp, dt, steps):
    """Per-step controls of the linear ramp q_i -> q_f over [0, t_ramp]."""
    tau = np.arange(steps) * dt
    return q_i + (q_f - q_i) * np.minimum(tau / t_ramp, 1.0)


def ramp_search(env, qi_grid=None, qf_grid=None, ramp_times=None):
    """Exhaustively optimize a linear ramp for final fidelity.

    Returns ({"q_i", "q_f", "t_ramp", "final_fidelity"}, RunRecord of the
    winner).  Exact final-fidelity ties resolve to the smallest
    (q_i, q_f, t_ramp) triple, so the result does not depend on grid
    ordering.
    """
    horizon = env.steps * env.dt
    if qi_grid is None:
        qi_grid = np.linspace(env.q_min, env.q_max, RAMP_GRID_POINTS)
    if qf_grid is None:
        qf_grid = np.linspace(env.q_min, env.q_max, RAMP_GRID_POINTS)
    if ramp_times is None:
        ramp_times = np.linspace(horizon / RAMP_TIME_POINTS, horizon,
                                 RAMP_TIME_POINTS)
    for name, grid in (("qi_grid", qi_grid), ("qf_grid", qf_grid),
                       ("ramp_times", ramp_times)):
        if len(grid) == 0:
            raise ValueError(f"{name} must be nonempty")
    if np.min(qi_grid) < env.q_min or np.max(qi_grid) > env.q_max:
        raise ValueError("qi_grid must lie within the control bounds")
    if np.min(qf_grid) < env.q_min or np.max(qf_grid) > env.q_max:
        raise ValueError("qf_grid must lie within the control bounds")
    if np.min(ramp_times) <= 0 or np.max(ramp_times) > horizon + 1e-12:
        raise ValueError("ramp_times must lie in (0, horizon]")

    env.reset()
    state0 = env.state
    best = None
    best_key = None
    for t_ramp in ramp_times:
        for q_i in qi_grid:
            for q_f in qf_grid:
                protocol = ramp_protocol(q_i, q_f, t_ramp, env.dt, env.steps)
                s = state0
                for q in protocol:
                    s = env.dynamics_step(s, q)
                f = env.state_metric(s)
                key = (-f, q_i, q_f, t_ramp)
                if best_key is None or key < best_key:
                    best_key = key
                    best = (float(q_i), float(q_f), float(t_ramp), float(f))
    q_i, q_f, t_ramp, final = best
    record = _replay(env, ramp_protocol(q_i, q_f, t_ramp, env.dt, env.steps))
    summary = {"q_i": q_i, "q_f": q_f, "t_ramp": t_ramp, "final_fidelity": final}
    return summary, record


def analytic_meanfield_controller(env: MeanFieldEnv):
    """Two-phase feedback law: bang the phase onto theta_s = pi/2, then track.

    While the phase is outside the tracking window the controller bangs at
    the bound that rotates theta_s toward pi/2 fastest; when one control
    step would overshoot, it picks the intermediate q that lands on pi/2.
    Inside the window it applies the phase-locking law q = c2*(1-2*rho0).
    """
    c2 = env.cfg.c2
    dt = env.dt

    def controller(obs):
        rho0, c, s = obs
        theta = np.arctan2(s, c)
        delta = (np.pi / 2.0 - theta + np.pi) % (2.0 * np.pi) - np.pi
        if abs(delta) < PHASE_WINDOW:
            q = c2 * (1.0 - 2.0 * rho0)
        else:
            q_bang = env.q_min if delta > 0 else env.q_max
            dtheta = -2.0 * q_bang + 2.0 * c2 * (1.0 - 2.0 * rho0) * (1.0 + np.cos(theta))
            if abs(dtheta) * dt >= abs(delta):
                q = c2 * (1.0 - 2.0 * rho0) * (1.0 + np.cos(theta)) - delta / (2.0 * dt)
            else:
                q = q_bang
        return float(np.clip(q, env.q_min, env.q_max))

    return controller


def analytic_meanfield_rollout(env: MeanFieldEnv) -> RunRecord:
    """Run the analytic bang-then-track protocol on a mean-field env."""
    if not isinstance(env, MeanFieldEnv):
        raise ValueError("the analytic protocol applies to the mean-field system only")
    return rollout(env, analytic_meanfield_controller(env))


def constant_q_rollout(env, q: float) -> RunRecord:
    """Hold a fixed control for the whole horizon."""
    if not env.q_min <= q <= env.q_max:
        raise ValueError(f"q={q} outside control bounds [{env.q_min}, {env.q_max}]")
    return rollout(env, lambda obs: q)
