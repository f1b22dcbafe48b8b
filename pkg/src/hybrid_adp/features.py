"""Critic basis functions and the regressors derived from them."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Callable, Iterable

import numpy as np

from .errors import UsageError
from .plant import ControlAffinePlant, QuadraticCost, _as_input, _as_state


@dataclass(frozen=True)
class BasisSet:
    """Basis ``phi_c: R^n -> R^l_c`` with its analytic ``l_c x n`` Jacobian."""

    l_c: int
    eval: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"


def quadratic_monomial_basis(n: int) -> BasisSet:
    """All monomials ``x_i x_j`` with ``i <= j`` in lexicographic order.

    For ``n = 2`` this is ``(x1^2, x1 x2, x2^2)``.
    """
    pairs = list(combinations_with_replacement(range(n), 2))

    def phi(x):
        return np.array([x[i] * x[k] for i, k in pairs])

    def jac(x):
        J = np.zeros((len(pairs), n))
        for row, (i, k) in enumerate(pairs):
            J[row, i] += x[k]
            J[row, k] += x[i]
        return J

    return BasisSet(l_c=len(pairs), eval=phi, jacobian=jac, name="quadratic-monomials")


@dataclass(frozen=True)
class ActorRegressor:
    """``omega(x) = -1/2 dphi_c/dx(x) g(x) Pi_u^{-1}``, an ``l_c x m`` matrix."""

    basis: BasisSet
    plant: ControlAffinePlant
    Pi_u_inv: np.ndarray

    @classmethod
    def build(cls, basis: BasisSet, plant: ControlAffinePlant, cost: QuadraticCost):
        return cls(basis=basis, plant=plant, Pi_u_inv=cost.Pi_u_inv)

    def omega(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return -0.5 * self.basis.jacobian(x) @ self.plant.g(x) @ self.Pi_u_inv


def psi(basis: BasisSet, plant: ControlAffinePlant, x, u) -> np.ndarray:
    """Regressor ``dphi_c/dx(x) (f(x) + g(x) u)``."""
    x = _as_state(plant, x)
    u = _as_input(plant, u)
    return basis.jacobian(x) @ (plant.f(x) + plant.g(x) @ u)


def normalized_psi(psi_val) -> np.ndarray:
    psi_val = np.asarray(psi_val, dtype=float)
    return psi_val / (1.0 + psi_val @ psi_val)


def capital_omega(reg: ActorRegressor, x, alpha1: float, alpha2: float) -> np.ndarray:
    """Actor curvature matrix ``alpha1 w w'/(1 + tr(w'w)) + alpha2 I``."""
    if not alpha2 > 0:
        raise UsageError(f"alpha2 must be positive, got {alpha2}")
    if alpha1 < 0:
        raise UsageError(f"alpha1 must be nonnegative, got {alpha1}")
    w = reg.omega(x)
    return alpha1 * (w @ w.T) / (1.0 + np.trace(w.T @ w)) + alpha2 * np.eye(w.shape[0])


@dataclass(frozen=True)
class BasisBounds:
    phi_bar: float
    dphi_bar: float
    g_bar: float


def estimate_bounds(basis: BasisSet, plant: ControlAffinePlant, K_grid: Iterable) -> BasisBounds:
    """Sample maxima of ``|phi_c|``, ``|dphi_c/dx|`` and ``|g|`` over a grid.

    Matrix norms are induced 2-norms.
    """
    pts = [np.asarray(x, dtype=float) for x in K_grid]
    if not pts:
        raise UsageError("bound estimation needs a nonempty grid")
    phi_bar = max(float(np.linalg.norm(basis.eval(x))) for x in pts)
    dphi_bar = max(float(np.linalg.norm(basis.jacobian(x), 2)) for x in pts)
    g_bar = max(float(np.linalg.norm(np.atleast_2d(plant.g(x)), 2)) for x in pts)
    return BasisBounds(phi_bar, dphi_bar, g_bar)
