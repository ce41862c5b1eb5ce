"""Exact spin-mixing dynamics of N spin-1 atoms sharing one spatial mode.

States live in the zero-magnetization Fock basis |k> = |k, N-2k, k>
(k = 0..N/2, dimension N/2+1).  The spin-exchange Hamiltonian

    H = c2/(2N) * [ (2*N0-1)*(N1+N-1) + 2*(a1+ a-1+ a0 a0 + h.c.) ] - q*N0

is real, symmetric and tridiagonal in this basis.  Propagation over a
control interval uses the exact eigendecomposition of the small matrix, so
episode-level error is pure float roundoff.

Matrix elements (ladder algebra on |k, N-2k, k>):

    <k|H|k>   = c2/(2N) * (2*(N-2k)-1) * 2k  -  q*(N-2k)
    <k+1|H|k> = c2/N * (k+1) * sqrt((N-2k)*(N-2k-1))

For N=2 this reduces to a two-level system whose resonant Rabi rate is
sqrt(2)*|c2|, reached at q = c2/4.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .meanfield import wrap_angle

# Spin coherence below this magnitude has no well-defined phase; the
# convention theta_s = 0 keeps observations finite for pure Fock states.
COHERENCE_EPS = 1e-12

_NORM_TOL = 1e-9


def _check_even(n_atoms: int) -> int:
    n = int(n_atoms)
    if n <= 0 or n % 2 != 0:
        raise ValueError(f"n_atoms must be a positive even integer, got {n_atoms}")
    return n


@dataclass(frozen=True)
class FockVector:
    """Complex amplitudes over the zero-magnetization Fock basis.

    amps[k] multiplies |k, N-2k, k>.  Construction checks normalization
    (tolerance 1e-9) but evolution never silently renormalizes.
    """

    n_atoms: int
    amps: np.ndarray

    def __post_init__(self):
        n = _check_even(self.n_atoms)
        amps = np.array(self.amps, dtype=np.complex128)
        if amps.shape != (n // 2 + 1,):
            raise ValueError(
                f"amps must have length N/2+1 = {n // 2 + 1}, got shape {amps.shape}"
            )
        norm = np.sum(np.abs(amps) ** 2)
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValueError(f"state not normalized: |amps|^2 = {norm}")
        amps.setflags(write=False)
        object.__setattr__(self, "n_atoms", n)
        object.__setattr__(self, "amps", amps)

    @property
    def dim(self) -> int:
        return self.n_atoms // 2 + 1

    @classmethod
    def _wrap(cls, n_atoms: int, amps: np.ndarray) -> "FockVector":
        """Fast path for amplitudes already known to be valid (unitary output)."""
        obj = object.__new__(cls)
        amps.setflags(write=False)
        object.__setattr__(obj, "n_atoms", n_atoms)
        object.__setattr__(obj, "amps", amps)
        return obj


class SpinObservables(NamedTuple):
    rho0: float
    theta_s: float


class QslBound(NamedTuple):
    t_min: float
    energy_spread: float


def fock_state(n_atoms: int, k: int) -> FockVector:
    """Basis state |k, N-2k, k>."""
    n = _check_even(n_atoms)
    dim = n // 2 + 1
    if not 0 <= k < dim:
        raise ValueError(f"k must be in [0, {dim - 1}], got {k}")
    amps = np.zeros(dim, dtype=np.complex128)
    amps[k] = 1.0
    return FockVector(n, amps)


def polar_state(n_atoms: int) -> FockVector:
    """All atoms in m_F=0: the state |0, N, 0>."""
    return fock_state(n_atoms, 0)


def twin_fock(n_atoms: int) -> FockVector:
    """The target state |N/2, 0, N/2>."""
    n = _check_even(n_atoms)
    return fock_state(n, n // 2)


@lru_cache(maxsize=64)
def _basis_arrays(n_atoms: int):
    """Per-N constants: k index, m_F=0 occupation, spin-coherence weights."""
    dim = n_atoms // 2 + 1
    k = np.arange(dim, dtype=np.float64)
    n0 = n_atoms - 2.0 * k
    kk = k[:-1]
    coh_w = (kk + 1.0) * np.sqrt((n_atoms - 2.0 * kk) * (n_atoms - 2.0 * kk - 1.0))
    for arr in (k, n0, coh_w):
        arr.setflags(write=False)
    return k, n0, coh_w


def build_hamiltonian(n_atoms: int, q: float, c2: float) -> np.ndarray:
    """Dense real-symmetric tridiagonal Hamiltonian on the F_z=0 subspace."""
    n = _check_even(n_atoms)
    dim = n // 2 + 1
    k, n0, coh_w = _basis_arrays(n)
    diag = c2 / (2.0 * n) * (2.0 * n0 - 1.0) * (2.0 * k) - q * n0
    off = c2 / n * coh_w
    h = np.zeros((dim, dim))
    idx = np.arange(dim)
    h[idx, idx] = diag
    h[idx[:-1], idx[1:]] = off
    h[idx[1:], idx[:-1]] = off
    return h


@lru_cache(maxsize=256)
def _eigensystem(n_atoms: int, q: float, c2: float):
    evals, evecs = np.linalg.eigh(build_hamiltonian(n_atoms, q, c2))
    evals.setflags(write=False)
    evecs.setflags(write=False)
    return evals, evecs


def propagate(psi: FockVector, q: float, c2: float, dt: float) -> FockVector:
    """exp(-i*H(q)*dt) |psi> via eigendecomposition; exact and norm-preserving."""
    evals, evecs = _eigensystem(psi.n_atoms, float(q), float(c2))
    phases = np.exp(-1j * evals * dt)
    amps = evecs @ (phases * (evecs.T @ psi.amps))
    return FockVector._wrap(psi.n_atoms, amps)


def _evolve_amps(amps: np.ndarray, n_atoms: int, q: float, c2: float,
                 dt: float) -> np.ndarray:
    """Raw-amplitude propagation; fast path used by baseline grid searches."""
    evals, evecs = _eigensystem(n_atoms, float(q), float(c2))
    return evecs @ (np.exp(-1j * evals * dt) * (evecs.T @ amps))


def observables(psi: FockVector) -> SpinObservables:
    """Population fraction rho0 and spin-coherence phase theta_s in [0, 2*pi).

    theta_s = arg <a1+ a-1+ a0 a0>; when the coherence magnitude falls
    below 1e-12 (pure Fock states) the phase is set to 0 by convention.
    """
    n = psi.n_atoms
    a = psi.amps
    _, n0, coh_w = _basis_arrays(n)
    rho0 = float(np.real(np.conj(a) @ (n0 * a)) / n)
    coherence = np.conj(a[1:]) @ (coh_w * a[:-1])
    if abs(coherence) < COHERENCE_EPS:
        theta_s = 0.0
    else:
        theta_s = wrap_angle(np.angle(coherence))
    return SpinObservables(min(max(rho0, 0.0), 1.0), theta_s)


def fidelity(psi: FockVector, target: FockVector) -> float:
    """Squared overlap |<target|psi>|^2."""
    if psi.n_atoms != target.n_atoms:
        raise ValueError(
            f"atom-number mismatch: {psi.n_atoms} vs {target.n_atoms}"
        )
    return float(np.abs(np.vdot(target.amps, psi.amps)) ** 2)


def energy(psi: FockVector, q: float, c2: float) -> float:
    """Expectation <psi|H(q)|psi> (real for the symmetric H)."""
    h = build_hamiltonian(psi.n_atoms, q, c2)
    return float(np.real(np.vdot(psi.amps, h @ psi.amps)))


_POLE_EPS = 1e-6


def bloch_derivatives(theta: float, phi: float, q: float, c2: float):
    """Equations of motion of the N=2 pseudo-spin on the Bloch sphere.

    Derived from the two-level Hamiltonian
    [[-2q, c2/sqrt(2)], [c2/sqrt(2), -c2/2]] with
    |psi> = cos(theta/2)|0,2,0> + sin(theta/2) e^{i phi}|1,0,1>:

        dtheta/dt = -sqrt(2)*c2*sin(phi)
        dphi/dt   = -2q + c2/2
                    + (sqrt(2)*c2/2)*cos(phi)*(tan(theta/2) - cot(theta/2))

    Both vanish on the resonant path phi = pi/2, q = c2/4.
    """
    half = 0.5 * theta
    dtheta = -np.sqrt(2.0) * c2 * np.sin(phi)
    dphi = (-2.0 * q + 0.5 * c2
            + 0.5 * np.sqrt(2.0) * c2 * np.cos(phi)
            * (np.tan(half) - 1.0 / np.tan(half)))
    return dtheta, dphi


def bloch_oracle_step(theta: float, phi: float, q: float, c2: float,
                      dt: float) -> tuple[float, float]:
    """RK4 step of the N=2 Bloch equations; independent oracle for propagate.

    The phi equation is singular at the poles, so inputs with theta within
    1e-6 of 0 or pi are refused; oracle trajectories start slightly
    off-pole.
    """
    if min(abs(theta), abs(theta - np.pi)) < _POLE_EPS:
        raise ValueError(f"theta too close to a pole of the Bloch sphere: {theta}")
    k1 = bloch_derivatives(theta, phi, q, c2)
    k2 = bloch_derivatives(theta + 0.5 * dt * k1[0], phi + 0.5 * dt * k1[1], q, c2)
    k3 = bloch_derivatives(theta + 0.5 * dt * k2[0], phi + 0.5 * dt * k2[1], q, c2)
    k4 = bloch_derivatives(theta + dt * k3[0], phi + dt * k3[1], q, c2)
    theta_new = theta + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    phi_new = phi + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    return theta_new, phi_new


def qsl_bound(c2: float) -> QslBound:
    """Minimal N=2 transfer time pi/(sqrt(2)*|c2|) and the energy spread.

    The energy spread sqrt(2)*|c2|/2 of the initial state |0,2,0> makes the
    bound coincide with arccos(<psi_i|psi_f>)/spread for the orthogonal
    target (arccos 0 = pi/2).
    """
    if c2 == 0:
        raise ValueError("c2 must be nonzero")
    spread = np.sqrt(2.0) * abs(c2) / 2.0
    return QslBound(np.pi / (np.sqrt(2.0) * abs(c2)), spread)


def haar_random_state(n_atoms: int, rng: np.random.Generator) -> FockVector:
    """Uniform random state on the F_z=0 sphere (normalized complex Gaussians)."""
    n = _check_even(n_atoms)
    dim = n // 2 + 1
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return FockVector(n, z / np.linalg.norm(z))
