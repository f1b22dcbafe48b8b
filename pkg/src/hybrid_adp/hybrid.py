"""Hybrid dynamical system engine.

A hybrid system is given by a flow set C, flow map F, jump set D and jump map
G.  Solutions are stored on hybrid time domains: every sample carries a stamp
``(t, j)`` where ``t`` is continuous time and ``j`` counts the jumps so far.

Flows are integrated with a fixed-step classical Runge-Kutta scheme.  When a
step would leave C ∪ D, the step length is bisected so the state lands on the
boundary; the jump/termination rule is then applied from there.  Jumps take
priority over flows on C ∩ D.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Tuple

import numpy as np

from .errors import NumericalFailure, UsageError

BOUNDARY_TOL = 1e-9


class HybridStamp(NamedTuple):
    t: float
    j: int


@dataclass(frozen=True)
class HybridSystemSpec:
    state_dim: int
    flow_map: Callable[[np.ndarray], np.ndarray]
    jump_map: Callable[[np.ndarray], np.ndarray]
    in_flow_set: Callable[[np.ndarray], bool]
    in_jump_set: Callable[[np.ndarray], bool]


@dataclass(frozen=True)
class IntegratorConfig:
    step: float = 1e-3
    t_max: float = 60.0
    j_max: int = 10_000
    record_every: int = 10

    def __post_init__(self):
        if not self.step > 0:
            raise UsageError(f"integrator step must be positive, got {self.step}")
        if self.t_max < 0:
            raise UsageError(f"t_max must be nonnegative, got {self.t_max}")
        if self.t_max > 0 and self.step > self.t_max:
            raise UsageError(f"step {self.step} exceeds t_max {self.t_max}")
        if self.j_max < 1:
            raise UsageError(f"j_max must be at least 1, got {self.j_max}")
        if self.record_every < 1:
            raise UsageError(f"record_every must be at least 1, got {self.record_every}")


@dataclass
class HybridArc:
    samples: List[Tuple[HybridStamp, np.ndarray]] = field(default_factory=list)
    jump_stamps: List[HybridStamp] = field(default_factory=list)

    def __len__(self):
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s, _ in self.samples])

    @property
    def jumps(self) -> np.ndarray:
        return np.array([s.j for s, _ in self.samples], dtype=int)

    @property
    def states(self) -> np.ndarray:
        return np.array([x for _, x in self.samples])

    @property
    def final_state(self) -> np.ndarray:
        return self.samples[-1][1]

    @property
    def final_stamp(self) -> HybridStamp:
        return self.samples[-1][0]

    def jump_pairs(self):
        """Yield ``(stamp, pre_state, post_state)`` for every jump in the arc."""
        index = {stamp: k for k, (stamp, _) in enumerate(self.samples)}
        for stamp in self.jump_stamps:
            k = index[stamp]
            post_stamp, post = self.samples[k + 1]
            assert post_stamp.j == stamp.j + 1
            yield stamp, self.samples[k][1], post


def _checked(values: np.ndarray, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NumericalFailure(
            f"{what} produced non-finite value {values[bad[0]]} in component {bad[0]}"
        )
    return values


def flow_step(spec: HybridSystemSpec, state: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step of the flow map over duration ``h``."""
    if not h > 0:
        raise UsageError(f"step must be positive, got {h}")
    F = spec.flow_map
    x = np.asarray(state, dtype=float)
    k1 = _checked(F(x), "flow map")
    k2 = _checked(F(x + 0.5 * h * k1), "flow map")
    k3 = _checked(F(x + 0.5 * h * k2), "flow map")
    k4 = _checked(F(x + h * k3), "flow map")
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _in_domain(spec, x):
    return bool(spec.in_flow_set(x) or spec.in_jump_set(x))


def _land_on_boundary(spec, x, h):
    """Largest step in [0, h] (to within BOUNDARY_TOL) keeping the state in C ∪ D."""
    lo, hi = 0.0, h
    x_lo = x
    while hi - lo > BOUNDARY_TOL:
        mid = 0.5 * (lo + hi)
        x_mid = flow_step(spec, x, mid)
        if _in_domain(spec, x_mid):
            lo, x_lo = mid, x_mid
        else:
            hi = mid
    return lo, x_lo


def solve_hybrid(spec: HybridSystemSpec, x0, cfg: IntegratorConfig) -> HybridArc:
    """Compute a solution of ``spec`` from ``x0`` until ``t_max`` or ``j_max``.

    Stored samples are: the initial point, every ``record_every``-th flow step
    counted from the last jump, the states immediately before and after each
    jump, and the final point.
    """
    x = np.array(x0, dtype=float)
    if x.shape != (spec.state_dim,):
        raise UsageError(f"initial state has shape {x.shape}, expected ({spec.state_dim},)")
    _checked(x, "initial state")
    if not _in_domain(spec, x):
        raise UsageError("initial state is outside the flow and jump sets")

    arc = HybridArc()
    t, j = 0.0, 0
    arc.samples.append((HybridStamp(t, j), x.copy()))
    steps_since_jump = 0
    # float slack so accumulated t reaches t_max exactly
    t_eps = 1e-12 * max(1.0, cfg.t_max)

    while t < cfg.t_max - t_eps and j < cfg.j_max:
        if spec.in_jump_set(x):
            stamp = HybridStamp(t, j)
            if arc.samples[-1][0] != stamp:
                arc.samples.append((stamp, x.copy()))
            try:
                x_new = _checked(spec.jump_map(x), "jump map")
            except NumericalFailure as exc:
                exc.stamp = stamp
                raise
            arc.jump_stamps.append(stamp)
            j += 1
            x = x_new
            arc.samples.append((HybridStamp(t, j), x.copy()))
            steps_since_jump = 0
            continue
        if not spec.in_flow_set(x):
            break

        h = min(cfg.step, cfg.t_max - t)
        try:
            x_new = flow_step(spec, x, h)
        except NumericalFailure as exc:
            exc.stamp = HybridStamp(t, j)
            raise
        if not _in_domain(spec, x_new):
            h, x_new = _land_on_boundary(spec, x, h)
            if h == 0.0:
                # cannot flow and not in D: the solution ends here
                break
        t += h
        x = x_new
        steps_since_jump += 1
        if steps_since_jump % cfg.record_every == 0:
            arc.samples.append((HybridStamp(t, j), x.copy()))

    final = HybridStamp(t, j)
    if arc.samples[-1][0] != final:
        arc.samples.append((final, x.copy()))
    return arc
