"""Control-affine plants, quadratic running costs and reference optimal solutions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import UsageError


@dataclass(frozen=True)
class ControlAffinePlant:
    """Dynamics ``xdot = f(x) + g(x) u`` with ``g(x)`` an ``n x m`` matrix."""

    n: int
    m: int
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"


@dataclass(frozen=True)
class QuadraticCost:
    """Running cost ``r(x, u) = x' Pi_x x + u' Pi_u u``."""

    Pi_x: np.ndarray
    Pi_u: np.ndarray

    def __post_init__(self):
        for label in ("Pi_x", "Pi_u"):
            M = np.atleast_2d(np.asarray(getattr(self, label), dtype=float))
            if M.shape[0] != M.shape[1]:
                raise UsageError(f"{label} must be square, got shape {M.shape}")
            if not np.allclose(M, M.T, rtol=0.0, atol=1e-12):
                raise UsageError(f"{label} is not symmetric")
            if np.linalg.eigvalsh(M)[0] <= 0:
                raise UsageError(f"{label} is not positive definite")
            object.__setattr__(self, label, M)

    @property
    def Pi_u_inv(self) -> np.ndarray:
        return np.linalg.inv(self.Pi_u)

    def state_cost(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.Pi_x @ x)

    def input_cost(self, u) -> float:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return float(u @ self.Pi_u @ u)


@dataclass(frozen=True)
class ReferenceSolution:
    """Known optimal value function, its gradient and the optimal policy."""

    value: Callable[[np.ndarray], float]
    value_gradient: Callable[[np.ndarray], np.ndarray]
    policy: Callable[[np.ndarray], np.ndarray]
    theta_c_star: Optional[np.ndarray] = None


def _as_state(plant: ControlAffinePlant, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (plant.n,):
        raise UsageError(f"state has shape {x.shape}, expected ({plant.n},)")
    return x


def _as_input(plant: ControlAffinePlant, u) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (plant.m,):
        raise UsageError(f"input has shape {u.shape}, expected ({plant.m},)")
    return u


def eval_dynamics(plant: ControlAffinePlant, x, u) -> np.ndarray:
    x = _as_state(plant, x)
    u = _as_input(plant, u)
    return plant.f(x) + plant.g(x) @ u


def eval_running_cost(cost: QuadraticCost, x, u) -> float:
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if x.shape != (cost.Pi_x.shape[0],) or u.shape != (cost.Pi_u.shape[0],):
        raise UsageError(
            f"cost expects x of size {cost.Pi_x.shape[0]} and u of size "
            f"{cost.Pi_u.shape[0]}, got {x.shape} and {u.shape}"
        )
    return cost.state_cost(x) + cost.input_cost(u)


def reference_policy(ref: ReferenceSolution, x) -> np.ndarray:
    return np.atleast_1d(ref.policy(np.asarray(x, dtype=float)))


# Builtin benchmark: two-state nonlinear plant with V*(x) = x1^2/2 + x2^2.
# The second drift row is written so that the HJB equation holds exactly for
# this V* (the known closed-form benchmark).


def _example_f(x):
    x1, x2 = x
    c = np.cos(2.0 * x1) + 2.0
    return np.array([-x1 + x2, -0.5 * x1 - 0.5 * x2 * (1.0 - c * c)])


def _example_g(x):
    return np.array([[0.0], [np.cos(2.0 * x[0]) + 2.0]])


def _example_value(x):
    return 0.5 * x[0] ** 2 + x[1] ** 2


def _example_value_gradient(x):
    return np.array([x[0], 2.0 * x[1]])


def _example_policy(x):
    return np.array([-(np.cos(2.0 * x[0]) + 2.0) * x[1]])


def builtin_example_plant():
    """Return ``(plant, cost, reference)`` for the two-state benchmark."""
    plant = ControlAffinePlant(n=2, m=1, f=_example_f, g=_example_g, name="builtin-example")
    cost = QuadraticCost(Pi_x=np.eye(2), Pi_u=np.eye(1))
    ref = ReferenceSolution(
        value=_example_value,
        value_gradient=_example_value_gradient,
        policy=_example_policy,
        theta_c_star=np.array([0.5, 0.0, 1.0]),
    )
    return plant, cost, ref
