"""Critic: value estimate, Hamiltonian errors, and the momentum-with-restarts update.

The critic state is ``y = (theta_c, p, tau)``.  In momentum-restart mode it
flows as

    theta_c' = (2 / tau) (p - theta_c)
    p'       = -2 k_c grad e(theta_c, x, u)
    tau'     = 1/2

on ``tau in [T0, T]`` and jumps ``(theta_c, p, tau) -> (theta_c, theta_c, T0)``
when ``tau = T``.  The gradient-baseline mode is plain gradient descent on the
same joint error with ``p`` and ``tau`` inert.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import RecordedDataset
from .errors import CertificateRequired, UsageError
from .features import BasisSet, psi
from .plant import ControlAffinePlant, QuadraticCost

MOMENTUM = "momentum-restart"
BASELINE = "gradient-baseline"
MODES = (MOMENTUM, BASELINE)


@dataclass(frozen=True)
class CriticState:
    theta_c: np.ndarray
    p: np.ndarray
    tau: float

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.theta_c, self.p, [self.tau]])

    @classmethod
    def from_vector(cls, v, l_c: int) -> "CriticState":
        v = np.asarray(v, dtype=float)
        return cls(v[:l_c].copy(), v[l_c : 2 * l_c].copy(), float(v[2 * l_c]))


@dataclass(frozen=True)
class CriticTuning:
    k_c: float = 1.0
    rho_i: float = 1.0
    rho_d: float = 1.0
    T0: float = 0.1
    T: float = 5.5
    mode: str = MOMENTUM

    def __post_init__(self):
        if self.mode not in MODES:
            raise UsageError(f"unknown critic mode {self.mode!r}; expected one of {MODES}")
        if not self.k_c > 0:
            raise UsageError(f"k_c must be positive, got {self.k_c}")
        if not self.rho_d > 0:
            raise UsageError(f"rho_d must be positive, got {self.rho_d}")
        if self.rho_i < 0:
            raise UsageError(f"rho_i must be nonnegative, got {self.rho_i}")
        if not (self.T > self.T0 > 0):
            raise UsageError(f"need T > T0 > 0, got T0={self.T0}, T={self.T}")


@dataclass(frozen=True)
class TuningVerdict:
    ok: bool
    lower_gap: float
    upper_gap: float
    excitation_gap: float


def critic_value(basis: BasisSet, theta_c, x) -> float:
    return float(np.asarray(theta_c, dtype=float) @ basis.eval(np.asarray(x, dtype=float)))


def hamiltonian_estimate(theta_c, x, u, basis, plant, cost) -> float:
    """``theta_c' psi(x, u) + Q(x) + R(u)``; equals the instantaneous HJB error."""
    x = np.asarray(x, dtype=float)
    return float(np.asarray(theta_c) @ psi(basis, plant, x, u) + cost.state_cost(x) + cost.input_cost(u))


def data_errors(theta_c, ds: RecordedDataset) -> np.ndarray:
    """Data-dependent Hamiltonian errors ``e^d_k`` for every recorded sample."""
    return ds.psi_matrix @ np.asarray(theta_c, dtype=float) + ds.costs


def joint_error(
    theta_c,
    x,
    u,
    ds: RecordedDataset,
    rho_i: float,
    rho_d: float,
    basis: BasisSet,
    plant: ControlAffinePlant,
    cost: QuadraticCost,
) -> float:
    theta_c = np.asarray(theta_c, dtype=float)
    ps = psi(basis, plant, x, u)
    e_i = theta_c @ ps + cost.state_cost(x) + cost.input_cost(u)
    inst = e_i**2 / (1.0 + ps @ ps) ** 2
    e_d = data_errors(theta_c, ds)
    norms = (1.0 + np.sum(ds.psi_matrix**2, axis=1)) ** 2
    return 0.5 * (rho_i * inst + rho_d * float(np.sum(e_d**2 / norms)))


def _gradient(theta_c, ps, r, rho_i, rho_d, Lambda, drive):
    d = 1.0 + ps @ ps
    P = ps / d
    inst = P * (P @ theta_c) + ps * (r / (d * d))
    return rho_i * inst + rho_d * (Lambda @ theta_c + drive)


def grad_joint_error(
    theta_c,
    x,
    u,
    ds: RecordedDataset,
    rho_i: float,
    rho_d: float,
    basis: BasisSet,
    plant: ControlAffinePlant,
    cost: QuadraticCost,
) -> np.ndarray:
    """Gradient of the joint error with respect to ``theta_c``."""
    theta_c = np.asarray(theta_c, dtype=float)
    x = np.asarray(x, dtype=float)
    ps = psi(basis, plant, x, u)
    r = cost.state_cost(x) + cost.input_cost(u)
    return _gradient(theta_c, ps, r, rho_i, rho_d, ds.Lambda, ds.data_drive)


def _flow_from_gradient(y: CriticState, grad, tuning: CriticTuning) -> CriticState:
    if tuning.mode == MOMENTUM:
        if not y.tau > 0:
            raise UsageError(f"timer must be positive during flows, got {y.tau}")
        return CriticState((2.0 / y.tau) * (y.p - y.theta_c), -2.0 * tuning.k_c * grad, 0.5)
    return CriticState(-tuning.k_c * grad, np.zeros_like(y.p), 0.0)


def critic_flow(
    y: CriticState,
    x,
    u,
    tuning: CriticTuning,
    ds: RecordedDataset,
    basis: BasisSet,
    plant: ControlAffinePlant,
    cost: QuadraticCost,
) -> CriticState:
    """Time derivative of the critic state, returned as a ``CriticState`` of rates."""
    grad = grad_joint_error(y.theta_c, x, u, ds, tuning.rho_i, tuning.rho_d, basis, plant, cost)
    return _flow_from_gradient(y, grad, tuning)


def critic_jump(y: CriticState, tuning: CriticTuning, tol: float = 1e-3) -> CriticState:
    """Restart: momentum copies the weights and the timer returns to ``T0``.

    ``tol`` is the accepted distance of ``tau`` from ``T``.
    """
    if abs(y.tau - tuning.T) > tol:
        raise UsageError(f"restart requested at tau={y.tau}, but T={tuning.T}")
    theta = np.array(y.theta_c, dtype=float)
    return CriticState(theta, theta.copy(), tuning.T0)


def validate_tuning(tuning: CriticTuning, lambda_min: float) -> TuningVerdict:
    """Check ``2 rho_d lam > rho_i`` and ``T0^2 + 1/(2 k_c lam rho_d) < T^2 < 8 rho_d lam / (k_c rho_i^2)``."""
    if not lambda_min > 0:
        raise CertificateRequired(f"tuning validation needs a positive richness level, got {lambda_min}")
    k_c, rho_i, rho_d, T0, T = tuning.k_c, tuning.rho_i, tuning.rho_d, tuning.T0, tuning.T
    lower_gap = T**2 - T0**2 - 1.0 / (2.0 * k_c * lambda_min * rho_d)
    if rho_i == 0:
        upper_gap = math.inf
    else:
        upper_gap = 8.0 * rho_d * lambda_min / (k_c * rho_i**2) - T**2
    excitation_gap = 2.0 * rho_d * lambda_min - rho_i
    ok = lower_gap > 0 and upper_gap > 0 and excitation_gap > 0
    return TuningVerdict(ok, lower_gap, upper_gap, excitation_gap)


def optimal_restart_period(k_c: float, rho_d: float, lambda_min: float, T0: float) -> float:
    if min(k_c, rho_d, lambda_min, T0) <= 0:
        raise UsageError("restart period needs positive k_c, rho_d, lambda_min and T0")
    return math.e * math.sqrt(1.0 / (2.0 * k_c * rho_d * lambda_min) + T0**2)


def decrease_matrix(tau: float, tuning: CriticTuning, lambda_min: float) -> np.ndarray:
    """2x2 matrix bounding the flow decrease of the critic Lyapunov function at timer ``tau``."""
    off = -0.5 * tuning.rho_i
    return np.array([[2.0 / (tuning.k_c * tau**2), off], [off, tuning.rho_d * lambda_min]])


def hjb_propagated_error(theta_c_star, x, basis, plant, cost, policy) -> float:
    """Residual of the parameterized HJB equation at ``x`` under the optimal policy."""
    x = np.asarray(x, dtype=float)
    u_star = np.atleast_1d(policy(x))
    return hamiltonian_estimate(theta_c_star, x, u_star, basis, plant, cost)


def deviation_gradient(theta_c, x, u, ds, rho_i, rho_d, basis, plant, cost, theta_c_star, policy):
    """Gradient of the joint error rebuilt from deviation variables.

    Returns ``Theta(x, u)(theta_c - theta_c*) + upsilon + chi`` where ``upsilon``
    collects the HJB residuals and ``chi`` the mismatch between ``u`` and the
    optimal input.  Agrees with :func:`grad_joint_error` for any ``u``.
    """
    theta_c = np.asarray(theta_c, dtype=float)
    theta_c_star = np.asarray(theta_c_star, dtype=float)
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    ps = psi(basis, plant, x, u)
    d2 = (1.0 + ps @ ps) ** 2
    P = ps / (1.0 + ps @ ps)
    Theta = rho_i * np.outer(P, P) + rho_d * ds.Lambda

    eps_inst = hjb_propagated_error(theta_c_star, x, basis, plant, cost, policy)
    eps_data = np.array([
        hjb_propagated_error(theta_c_star, s.x_k, basis, plant, cost, policy) for s in ds.samples
    ])
    norms = (1.0 + np.sum(ds.psi_matrix**2, axis=1)) ** 2
    upsilon = rho_i * ps * eps_inst / d2 + rho_d * ds.psi_matrix.T @ (eps_data / norms)

    u_star = np.atleast_1d(policy(x))
    input_shift = basis.jacobian(x) @ plant.g(x) @ (u - u_star)
    chi = rho_i * ps * ((input_shift @ theta_c_star) + cost.input_cost(u) - cost.input_cost(u_star)) / d2
    return Theta @ (theta_c - theta_c_star) + upsilon + chi
