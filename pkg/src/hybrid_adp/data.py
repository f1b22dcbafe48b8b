"""Recorded expert data and data-richness certification.

The information matrix of a dataset is the sum of outer products of the
normalized regressors ``Psi_k = psi_k / (1 + |psi_k|^2)``.  A dataset is
certified rich when the smallest eigenvalue of that matrix exceeds a floor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from pathlib import Path
from typing import List, Sequence

import numpy as np

from .errors import AdpError, UsageError
from .features import BasisSet, normalized_psi, psi
from .plant import ControlAffinePlant, QuadraticCost, ReferenceSolution, reference_policy

DEFAULT_RICHNESS_FLOOR = 1e-8
FORMAT_VERSION = 1


@dataclass(frozen=True)
class DataSample:
    x_k: np.ndarray
    u_k: np.ndarray
    psi_k: np.ndarray
    Q_k: float
    R_k: float


@dataclass(frozen=True)
class RecordedDataset:
    samples: List[DataSample]
    l_c: int
    plant_id: str = "custom"
    basis_id: str = "custom"

    def __post_init__(self):
        if len(self.samples) < 1:
            raise UsageError("a recorded dataset needs at least one sample")
        for s in self.samples:
            if s.psi_k.shape != (self.l_c,):
                raise UsageError(f"sample regressor has shape {s.psi_k.shape}, expected ({self.l_c},)")

    def __len__(self):
        return len(self.samples)

    @cached_property
    def psi_matrix(self) -> np.ndarray:
        """Stacked raw regressors, one row per sample."""
        return np.array([s.psi_k for s in self.samples])

    @cached_property
    def costs(self) -> np.ndarray:
        return np.array([s.Q_k + s.R_k for s in self.samples])

    @cached_property
    def Lambda(self) -> np.ndarray:
        P = self.psi_matrix / (1.0 + np.sum(self.psi_matrix**2, axis=1))[:, None]
        L = P.T @ P
        return 0.5 * (L + L.T)

    @cached_property
    def data_drive(self) -> np.ndarray:
        """``sum_k psi_k (Q_k + R_k) / (1 + |psi_k|^2)^2``, the constant data term of the gradient."""
        d = (1.0 + np.sum(self.psi_matrix**2, axis=1)) ** 2
        return self.psi_matrix.T @ (self.costs / d)

    def subset(self, indices: Sequence[int]) -> "RecordedDataset":
        idx = list(indices)
        if not idx:
            raise UsageError("dataset subset must be nonempty")
        return RecordedDataset([self.samples[i] for i in idx], self.l_c, self.plant_id, self.basis_id)

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "plant": self.plant_id,
            "basis": self.basis_id,
            "l_c": self.l_c,
            "samples": [
                {
                    "x": s.x_k.tolist(),
                    "u": s.u_k.tolist(),
                    "psi": s.psi_k.tolist(),
                    "Q": s.Q_k,
                    "R": s.R_k,
                }
                for s in self.samples
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RecordedDataset":
        samples = [
            DataSample(
                x_k=np.asarray(s["x"], dtype=float),
                u_k=np.atleast_1d(np.asarray(s["u"], dtype=float)),
                psi_k=np.asarray(s["psi"], dtype=float),
                Q_k=float(s["Q"]),
                R_k=float(s["R"]),
            )
            for s in doc["samples"]
        ]
        l_c = int(doc.get("l_c", len(samples[0].psi_k) if samples else 0))
        return cls(samples, l_c, doc.get("plant", "custom"), doc.get("basis", "custom"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    @classmethod
    def load(cls, path) -> "RecordedDataset":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class RichnessCertificate:
    Lambda: np.ndarray
    lambda_min: float
    lambda_max: float
    rich: bool
    richness_floor: float = field(default=DEFAULT_RICHNESS_FLOOR)


def lattice_grid(extent: float, counts: Sequence[int]) -> List[np.ndarray]:
    """Equispaced lattice over ``[-extent, extent]`` with ``counts[i]`` points per axis."""
    axes = [np.linspace(-extent, extent, c) for c in counts]
    return [np.array(p) for p in product(*axes)]


def record_expert_grid(
    plant: ControlAffinePlant,
    cost: QuadraticCost,
    basis: BasisSet,
    ref: ReferenceSolution,
    grid,
) -> RecordedDataset:
    """Record expert samples ``u_k = u*(x_k)`` with their regressors and costs."""
    samples = []
    for x in grid:
        x = np.asarray(x, dtype=float)
        u = reference_policy(ref, x)
        samples.append(
            DataSample(
                x_k=x,
                u_k=u,
                psi_k=psi(basis, plant, x, u),
                Q_k=cost.state_cost(x),
                R_k=cost.input_cost(u),
            )
        )
    if not samples:
        raise UsageError("expert grid must be nonempty")
    return RecordedDataset(samples, basis.l_c, plant.name, basis.name)


def certify_richness(ds: RecordedDataset, richness_floor: float = DEFAULT_RICHNESS_FLOOR) -> RichnessCertificate:
    L = np.zeros((ds.l_c, ds.l_c))
    for s in ds.samples:
        P = normalized_psi(s.psi_k)
        L += np.outer(P, P)
    if np.max(np.abs(L - L.T), initial=0.0) > 1e-10:
        raise AdpError("information matrix accumulated asymmetrically")
    ev = np.linalg.eigvalsh(L)
    lam_min = max(float(ev[0]), 0.0)
    lam_max = max(float(ev[-1]), 0.0)
    return RichnessCertificate(L, lam_min, lam_max, lam_min > richness_floor, richness_floor)


def theta_matrix(psi_val, Lambda, rho_i: float, rho_d: float) -> np.ndarray:
    """Curvature of the joint error: ``rho_i Psi Psi' + rho_d Lambda``."""
    P = normalized_psi(psi_val)
    return rho_i * np.outer(P, P) + rho_d * np.asarray(Lambda)
