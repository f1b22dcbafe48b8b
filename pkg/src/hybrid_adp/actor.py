"""Actor: feedback law ``u = omega(x)' theta_u`` and its gradient flow toward the critic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .features import ActorRegressor, capital_omega


@dataclass(frozen=True)
class ActorState:
    theta_u: np.ndarray


@dataclass(frozen=True)
class ActorTuning:
    k_u: float = 1.0
    alpha1: float = 1.0
    alpha2: float = 1.0

    def __post_init__(self):
        if self.k_u < 0:
            raise UsageError(f"k_u must be nonnegative, got {self.k_u}")
        if self.alpha1 < 0:
            raise UsageError(f"alpha1 must be nonnegative, got {self.alpha1}")
        if not self.alpha2 > 0:
            raise UsageError(f"alpha2 must be positive, got {self.alpha2}")


def actor_output(reg: ActorRegressor, theta_u, x) -> np.ndarray:
    return reg.omega(x).T @ np.asarray(theta_u, dtype=float)


def actor_error(x, theta_c, theta_u, reg: ActorRegressor, tuning: ActorTuning) -> float:
    w = reg.omega(x)
    eps_b = np.asarray(theta_u, dtype=float) - np.asarray(theta_c, dtype=float)
    eps_a = w.T @ eps_b
    return 0.5 * (
        tuning.alpha1 * float(eps_a @ eps_a) / (1.0 + np.trace(w.T @ w))
        + tuning.alpha2 * float(eps_b @ eps_b)
    )


def actor_flow(theta_u, x, theta_c, reg: ActorRegressor, tuning: ActorTuning) -> np.ndarray:
    """``-k_u Omega(x) (theta_u - theta_c)``."""
    Om = capital_omega(reg, x, tuning.alpha1, tuning.alpha2)
    return -tuning.k_u * Om @ (np.asarray(theta_u, dtype=float) - np.asarray(theta_c, dtype=float))
