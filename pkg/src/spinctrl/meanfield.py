"""Classical mean-field spin dynamics in the zero-magnetization sector.

The population fraction ``rho0`` of the m_F=0 component and the magnetic
phase ``theta_s`` evolve as a non-rigid pendulum driven by the quadratic
Zeeman field ``q`` (hbar = 1 throughout):

    drho0/dt    =  2*c2*rho0*(1-rho0)*sin(theta_s)
    dtheta_s/dt = -2*q + 2*c2*(1-2*rho0)*(1+cos(theta_s))

For ferromagnetic coupling (c2 < 0), rho0 decays fastest along the
theta_s = pi/2 geodesic.  Holding the phase there requires the RHS of the
phase equation to vanish, which at theta_s = pi/2 gives the feedback law

    q(rho0) = c2*(1-2*rho0)

under which rho0 follows the logistic law implemented by
:func:`logistic_oracle`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# rho0 may overshoot [0, 1] by roundoff near the singular boundaries;
# anything larger would indicate an integrator bug.
_CLAMP_TOL = 1e-12


def wrap_angle(theta: float) -> float:
    """Reduce an angle to [0, 2*pi); tiny negatives must not round up to 2*pi."""
    w = float(theta) % TWO_PI
    return 0.0 if w == TWO_PI else w


@dataclass(frozen=True)
class PhaseState:
    """Point (rho0, theta_s) on the mean-field phase space.

    rho0 is clamped to [0, 1] (tolerance 1e-12) and theta_s is stored
    wrapped to [0, 2*pi).
    """

    rho0: float
    theta_s: float

    def __post_init__(self):
        r = float(self.rho0)
        if r < -_CLAMP_TOL or r > 1.0 + _CLAMP_TOL:
            raise ValueError(f"rho0 out of range [0, 1]: {r}")
        object.__setattr__(self, "rho0", min(max(r, 0.0), 1.0))
        object.__setattr__(self, "theta_s", wrap_angle(self.theta_s))


@dataclass(frozen=True)
class MeanFieldConfig:
    """Interaction, control bounds and episode discretization.

    ``dt`` is the control interval; each interval is integrated with
    ``substeps`` internal RK4 steps.
    """

    c2: float = -1.0
    q_min: float = -6.0
    q_max: float = 6.0
    dt: float = 0.05
    steps: int = 100
    substeps: int = 5

    def __post_init__(self):
        if self.c2 >= 0:
            raise ValueError(f"c2 must be negative (ferromagnetic), got {self.c2}")
        if self.q_min >= self.q_max:
            raise ValueError(f"q_min must be < q_max, got [{self.q_min}, {self.q_max}]")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.steps <= 0:
            raise ValueError(f"steps must be positive, got {self.steps}")
        if self.substeps <= 0:
            raise ValueError(f"substeps must be positive, got {self.substeps}")


def _derivatives(rho0, theta_s, q, c2):
    drho0 = 2.0 * c2 * rho0 * (1.0 - rho0) * np.sin(theta_s)
    dtheta = -2.0 * q + 2.0 * c2 * (1.0 - 2.0 * rho0) * (1.0 + np.cos(theta_s))
    return drho0, dtheta


def mf_derivatives(state: PhaseState, q: float, c2: float) -> tuple[float, float]:
    """Time derivatives (drho0/dt, dtheta_s/dt) at constant control q."""
    return _derivatives(state.rho0, state.theta_s, q, c2)


def rk4_step(state: PhaseState, q: float, dt: float, c2: float) -> PhaseState:
    """One classical RK4 step with q held constant over dt.

    The result is clamped/wrapped per the PhaseState invariants.  Negative
    dt integrates backward in time.
    """
    r, th = state.rho0, state.theta_s
    k1 = _derivatives(r, th, q, c2)
    k2 = _derivatives(r + 0.5 * dt * k1[0], th + 0.5 * dt * k1[1], q, c2)
    k3 = _derivatives(r + 0.5 * dt * k2[0], th + 0.5 * dt * k2[1], q, c2)
    k4 = _derivatives(r + dt * k3[0], th + dt * k3[1], q, c2)
    r_new = r + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    th_new = th + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    return PhaseState(min(max(r_new, 0.0), 1.0), th_new)


def advance(state: PhaseState, q: float, cfg: MeanFieldConfig) -> PhaseState:
    """Advance one control interval (cfg.dt) with cfg.substeps RK4 substeps."""
    h = cfg.dt / cfg.substeps
    for _ in range(cfg.substeps):
        state = rk4_step(state, q, h, cfg.c2)
    return state


def analytic_optimal_q(state: PhaseState, cfg: MeanFieldConfig) -> float:
    """Feedback law that freezes theta_s at pi/2, clipped to the control bounds.

    Stationarity of the phase equation at theta_s = pi/2 requires
    q = c2*(1-2*rho0); rho0 then decays logistically at rate 2*c2.
    """
    return float(np.clip(cfg.c2 * (1.0 - 2.0 * state.rho0), cfg.q_min, cfg.q_max))


def logistic_oracle(rho0_init: float, t: float, c2: float) -> float:
    """Closed-form rho0(t) with theta_s pinned at pi/2.

    Solves drho0/dt = 2*c2*rho0*(1-rho0); independent oracle for the
    integrated optimal trajectory.
    """
    g = np.exp(2.0 * c2 * t)
    return float(rho0_init * g / (1.0 - rho0_init + rho0_init * g))


def integrate_optimal(state: PhaseState, cfg: MeanFieldConfig,
                      steps: int | None = None):
    """Integrate the closed-loop optimal protocol over a full episode.

    The feedback q(rho0) = c2*(1-2*rho0) is re-evaluated at every RK4 stage
    (clipped to bounds), so theta_s = pi/2 is an exact invariant of the
    integration, not just of the continuous dynamics.

    Returns arrays (t, q, rho0, theta_s) of length steps+1; q holds the
    feedback value at each sample time.
    """
    n = cfg.steps if steps is None else steps
    h = cfg.dt / cfg.substeps

    def q_of(r):
        return min(max(cfg.c2 * (1.0 - 2.0 * r), cfg.q_min), cfg.q_max)

    def f(r, th):
        return _derivatives(r, th, q_of(r), cfg.c2)

    ts = np.arange(n + 1) * cfg.dt
    rho = np.empty(n + 1)
    theta = np.empty(n + 1)
    qs = np.empty(n + 1)
    r, th = state.rho0, state.theta_s
    rho[0], theta[0], qs[0] = r, wrap_angle(th), q_of(r)
    for i in range(1, n + 1):
        for _ in range(cfg.substeps):
            k1 = f(r, th)
            k2 = f(r + 0.5 * h * k1[0], th + 0.5 * h * k1[1])
            k3 = f(r + 0.5 * h * k2[0], th + 0.5 * h * k2[1])
            k4 = f(r + h * k3[0], th + h * k3[1])
            r += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            th += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        r = min(max(r, 0.0), 1.0)
        rho[i], theta[i], qs[i] = r, wrap_angle(th), q_of(r)
    return ts, qs, rho, theta
