import numpy as np
import pytest

from hybrid_adp.actor import ActorTuning
from hybrid_adp.closed_loop import ClosedLoopState, TargetSet, build_closed_loop, simulate_closed_loop
from hybrid_adp.critic import BASELINE, MOMENTUM, CriticState, CriticTuning
from hybrid_adp.data import certify_richness, lattice_grid, record_expert_grid
from hybrid_adp.features import ActorRegressor, quadratic_monomial_basis
from hybrid_adp.hybrid import IntegratorConfig
from hybrid_adp.plant import builtin_example_plant

THETA_STAR = np.array([0.5, 0.0, 1.0])


class Example:
    """The builtin benchmark with its 16-point expert dataset."""

    def __init__(self):
        self.plant, self.cost, self.ref = builtin_example_plant()
        self.basis = quadratic_monomial_basis(2)
        self.reg = ActorRegressor.build(self.basis, self.plant, self.cost)
        self.grid = lattice_grid(2.0, [4, 4])
        self.ds = record_expert_grid(self.plant, self.cost, self.basis, self.ref, self.grid)
        self.cert = certify_richness(self.ds)

    def spec(self, mode=MOMENTUM, actor=None, **critic):
        tuning = CriticTuning(mode=mode, **critic)
        return build_closed_loop(self.plant, self.cost, self.basis, self.reg, self.ds, tuning,
                                 actor or ActorTuning())

    @staticmethod
    def benchmark_z0(T0=0.1):
        return ClosedLoopState(np.array([-10.0, 10.0]), CriticState(np.ones(3), np.ones(3), T0), np.full(3, 0.5))


@pytest.fixture(scope="session")
def example():
    return Example()


def _run(example, mode, **critic):
    spec = example.spec(mode, **critic)
    target = TargetSet(THETA_STAR, spec.critic_tuning.T0, spec.critic_tuning.T)
    arc, log = simulate_closed_loop(spec, example.benchmark_z0(), IntegratorConfig(), target=target, ref=example.ref)
    return spec, arc, log


@pytest.fixture(scope="session")
def momentum_run(example):
    """Full 60 s run of the default configuration in momentum-restart mode."""
    return _run(example, MOMENTUM)


@pytest.fixture(scope="session")
def baseline_run(example):
    return _run(example, BASELINE)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)
