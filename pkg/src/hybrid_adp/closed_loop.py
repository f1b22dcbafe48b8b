"""Plant, critic and actor interconnected as one hybrid system, plus Lyapunov diagnostics.

The closed-loop state vector is laid out as ``z = (x, theta_c, p, tau, theta_u)``
with sizes ``n, l_c, l_c, 1, l_c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .actor import ActorTuning
from .critic import MOMENTUM, CriticState, CriticTuning, _gradient, critic_jump
from .data import DEFAULT_RICHNESS_FLOOR, RecordedDataset, RichnessCertificate, certify_richness
from .errors import ConfigurationError, DiagnosticUnavailable, UsageError
from .features import ActorRegressor, BasisSet
from .hybrid import BOUNDARY_TOL, HybridArc, HybridSystemSpec, IntegratorConfig, solve_hybrid
from .plant import ControlAffinePlant, QuadraticCost, ReferenceSolution


@dataclass(frozen=True)
class ClosedLoopState:
    x: np.ndarray
    y: CriticState
    theta_u: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.y.as_vector(), self.theta_u])

    @classmethod
    def from_vector(cls, z, n: int, l_c: int) -> "ClosedLoopState":
        z = np.asarray(z, dtype=float)
        if z.shape != (n + 3 * l_c + 1,):
            raise UsageError(f"closed-loop vector has shape {z.shape}, expected ({n + 3 * l_c + 1},)")
        return cls(z[:n].copy(), CriticState.from_vector(z[n : n + 2 * l_c + 1], l_c), z[n + 2 * l_c + 1 :].copy())


@dataclass(frozen=True)
class TargetSet:
    theta_c_star: np.ndarray
    T0: float
    T: float

    def __post_init__(self):
        if not self.T > self.T0:
            raise UsageError(f"target timer interval needs T > T0, got [{self.T0}, {self.T}]")
        object.__setattr__(self, "theta_c_star", np.asarray(self.theta_c_star, dtype=float))


@dataclass(frozen=True)
class ClosedLoopSpec(HybridSystemSpec):
    """A :class:`HybridSystemSpec` that also remembers what it was built from."""

    n: int
    l_c: int
    plant: ControlAffinePlant
    cost: QuadraticCost
    basis: BasisSet
    reg: ActorRegressor
    dataset: RecordedDataset
    certificate: RichnessCertificate
    critic_tuning: CriticTuning
    actor_tuning: ActorTuning

    def unpack(self, z) -> ClosedLoopState:
        return ClosedLoopState.from_vector(z, self.n, self.l_c)


def build_closed_loop(
    plant: ControlAffinePlant,
    cost: QuadraticCost,
    basis: BasisSet,
    reg: ActorRegressor,
    ds: RecordedDataset,
    critic_tuning: CriticTuning,
    actor_tuning: ActorTuning,
    richness_floor: float = DEFAULT_RICHNESS_FLOOR,
    jump_tol: float = 10 * BOUNDARY_TOL,
) -> ClosedLoopSpec:
    n, l_c = plant.n, basis.l_c
    if ds.l_c != l_c:
        raise ConfigurationError(f"dataset has l_c={ds.l_c} but basis has l_c={l_c}")
    cert = certify_richness(ds, richness_floor)
    momentum = critic_tuning.mode == MOMENTUM
    if momentum and critic_tuning.rho_d > 0 and not cert.rich:
        raise ConfigurationError(
            f"dataset is not sufficiently rich (lambda_min={cert.lambda_min:.3e} <= {richness_floor:.1e})"
        )

    f, g, jac = plant.f, plant.g, basis.jacobian
    Pi_x, Pi_u, Pi_u_inv = cost.Pi_x, cost.Pi_u, cost.Pi_u_inv
    Lambda, drive = ds.Lambda, ds.data_drive
    k_c, rho_i, rho_d = critic_tuning.k_c, critic_tuning.rho_i, critic_tuning.rho_d
    k_u, a1, a2 = actor_tuning.k_u, actor_tuning.alpha1, actor_tuning.alpha2
    T0, T = critic_tuning.T0, critic_tuning.T
    i_th, i_p, i_tau, i_thu = n, n + l_c, n + 2 * l_c, n + 2 * l_c + 1
    eye = np.eye(l_c)

    def flow_map(z):
        x = z[:i_th]
        th = z[i_th:i_p]
        p = z[i_p:i_tau]
        tau = z[i_tau]
        thu = z[i_thu:]
        J = jac(x)
        gx = g(x)
        w = -0.5 * J @ gx @ Pi_u_inv
        u = w.T @ thu
        xdot = f(x) + gx @ u
        ps = J @ xdot
        r = x @ Pi_x @ x + u @ Pi_u @ u
        grad = _gradient(th, ps, r, rho_i, rho_d, Lambda, drive)
        Om = a1 * (w @ w.T) / (1.0 + np.sum(w * w)) + a2 * eye
        thu_dot = -k_u * Om @ (thu - th)
        if momentum:
            y_dot = np.concatenate([(2.0 / tau) * (p - th), -2.0 * k_c * grad, [0.5]])
        else:
            y_dot = np.concatenate([-k_c * grad, np.zeros(l_c), [0.0]])
        return np.concatenate([xdot, y_dot, thu_dot])

    def jump_map(z):
        y = CriticState.from_vector(z[i_th:i_thu], l_c)
        y_plus = critic_jump(y, critic_tuning, tol=jump_tol)
        out = z.copy()
        out[i_p:i_tau] = y_plus.p
        out[i_tau] = y_plus.tau
        return out

    if momentum:
        def in_flow_set(z):
            return T0 <= z[i_tau] <= T

        def in_jump_set(z):
            return T - jump_tol <= z[i_tau] <= T
    else:
        def in_flow_set(z):
            return True

        def in_jump_set(z):
            return False

    return ClosedLoopSpec(
        state_dim=n + 3 * l_c + 1,
        flow_map=flow_map,
        jump_map=jump_map,
        in_flow_set=in_flow_set,
        in_jump_set=in_jump_set,
        n=n,
        l_c=l_c,
        plant=plant,
        cost=cost,
        basis=basis,
        reg=reg,
        dataset=ds,
        certificate=cert,
        critic_tuning=critic_tuning,
        actor_tuning=actor_tuning,
    )


def lyapunov_Vc(y: CriticState, target: TargetSet, Lambda, k_c: float, rho_d: float) -> float:
    d_p = y.p - y.theta_c
    d_star = y.p - target.theta_c_star
    e = y.theta_c - target.theta_c_star
    return float(d_p @ d_p / 4.0 + d_star @ d_star / 4.0 + k_c * rho_d * y.tau**2 * (e @ Lambda @ e) / 2.0)


def vc_quadratic_bounds(tuning: CriticTuning, lambda_min: float, lambda_max: float):
    """Constants ``(c_lo, c_hi)`` with ``c_lo |y|^2 <= V_c(y) <= c_hi |y|^2`` for ``tau in [T0, T]``."""
    kr = tuning.k_c * tuning.rho_d
    c_lo = min(0.25, kr * tuning.T0**2 * lambda_min / 2.0)
    c_hi = max(0.75, 0.5 * (1.0 + kr * tuning.T**2 * lambda_max))
    return c_lo, c_hi


def jump_decrease_factor(tuning: CriticTuning, lambda_min: float) -> float:
    if not lambda_min > 0:
        raise UsageError(f"jump decrease factor needs lambda_min > 0, got {lambda_min}")
    T0, T = tuning.T0, tuning.T
    return 1.0 - T0**2 / T**2 - 1.0 / (2.0 * tuning.k_c * tuning.rho_d * lambda_min * T**2)


def _interval_distance(tau, lo, hi):
    return max(lo - tau, 0.0, tau - hi)


def critic_distance(y: CriticState, target: TargetSet) -> float:
    """Distance of the critic state to its target set."""
    e = y.theta_c - target.theta_c_star
    d = y.p - target.theta_c_star
    return math.sqrt(float(e @ e + d @ d) + _interval_distance(y.tau, target.T0, target.T) ** 2)


def distance_to_target(z: ClosedLoopState, target: TargetSet) -> float:
    eu = z.theta_u - target.theta_c_star
    return math.sqrt(float(z.x @ z.x) + critic_distance(z.y, target) ** 2 + float(eu @ eu))


def lyapunov_full(
    z: ClosedLoopState,
    target: TargetSet,
    ref: Optional[ReferenceSolution],
    Lambda,
    critic_tuning: CriticTuning,
) -> float:
    """Composite function ``V*(x) + V_c(y) + |theta_u - theta_c*|^2 / 2``."""
    if ref is None:
        raise DiagnosticUnavailable("composite Lyapunov function needs the optimal value function")
    eu = z.theta_u - target.theta_c_star
    Vc = lyapunov_Vc(z.y, target, Lambda, critic_tuning.k_c, critic_tuning.rho_d)
    return float(ref.value(z.x)) + Vc + 0.5 * float(eu @ eu)


@dataclass
class DiagnosticsLog:
    Vc: np.ndarray
    Vfull: np.ndarray
    dist_A: np.ndarray
    theta_c_err: np.ndarray
    theta_u_err: np.ndarray
    hjb_residual: np.ndarray


def instantaneous_residual(spec: ClosedLoopSpec, z: ClosedLoopState) -> float:
    """Hamiltonian error ``theta_c' psi(x, u) + Q(x) + R(u)`` under the actor's input."""
    J = spec.basis.jacobian(z.x)
    gx = spec.plant.g(z.x)
    u = spec.reg.omega(z.x).T @ z.theta_u
    ps = J @ (spec.plant.f(z.x) + gx @ u)
    return float(z.y.theta_c @ ps + spec.cost.state_cost(z.x) + spec.cost.input_cost(u))


def diagnose(spec: ClosedLoopSpec, arc: HybridArc, target: TargetSet, ref=None) -> DiagnosticsLog:
    Lambda = spec.certificate.Lambda
    tuning = spec.critic_tuning
    rows = []
    for _, vec in arc.samples:
        z = spec.unpack(vec)
        Vc = lyapunov_Vc(z.y, target, Lambda, tuning.k_c, tuning.rho_d)
        Vfull = lyapunov_full(z, target, ref, Lambda, tuning) if ref is not None else math.nan
        rows.append((
            Vc,
            Vfull,
            distance_to_target(z, target),
            float(np.linalg.norm(z.y.theta_c - target.theta_c_star)),
            float(np.linalg.norm(z.theta_u - target.theta_c_star)),
            instantaneous_residual(spec, z),
        ))
    cols = np.array(rows, dtype=float).reshape(-1, 6).T
    return DiagnosticsLog(*cols)


def simulate_closed_loop(
    spec: ClosedLoopSpec,
    z0,
    cfg: IntegratorConfig,
    diagnostics: bool = True,
    target: Optional[TargetSet] = None,
    ref: Optional[ReferenceSolution] = None,
):
    """Run the closed loop from ``z0``; returns ``(arc, log)`` with ``log`` None when diagnostics are off."""
    if isinstance(z0, ClosedLoopState):
        z0 = z0.as_vector()
    arc = solve_hybrid(spec, z0, cfg)
    if not diagnostics:
        return arc, None
    if target is None:
        if ref is None or ref.theta_c_star is None:
            raise DiagnosticUnavailable("diagnostics need a target set or a reference with theta_c*")
        target = TargetSet(ref.theta_c_star, spec.critic_tuning.T0, spec.critic_tuning.T)
    return arc, diagnose(spec, arc, target, ref)
