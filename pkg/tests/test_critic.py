import math

import numpy as np
import pytest

from hybrid_adp.critic import (
    BASELINE,
    CriticState,
    CriticTuning,
    critic_flow,
    critic_jump,
    critic_value,
    data_errors,
    decrease_matrix,
    deviation_gradient,
    grad_joint_error,
    hamiltonian_estimate,
    joint_error,
    optimal_restart_period,
    validate_tuning,
)
from hybrid_adp.data import RecordedDataset, DataSample
from hybrid_adp.errors import CertificateRequired, UsageError

from conftest import THETA_STAR


def args(example):
    return dict(basis=example.basis, plant=example.plant, cost=example.cost)


def fd_gradient(fun, theta, h=1e-6):
    return np.array([(fun(theta + h * e) - fun(theta - h * e)) / (2 * h) for e in np.eye(len(theta))])


def test_critic_value_examples(example):
    assert critic_value(example.basis, THETA_STAR, [2, 1]) == 3
    assert critic_value(example.basis, np.zeros(3), [1.7, -3]) == 0
    assert critic_value(example.basis, np.ones(3), [1, 1]) == 3


def test_hamiltonian_examples(rng, example):
    a = args(example)
    for x in rng.uniform(-2, 2, size=(20, 2)):
        assert abs(hamiltonian_estimate(THETA_STAR, x, example.ref.policy(x), **a)) < 1e-9
    assert hamiltonian_estimate(rng.normal(size=3), [0, 0], [0], **a) == 0
    assert hamiltonian_estimate(THETA_STAR, [1, 0], [0], **a) == pytest.approx(0, abs=1e-15)


def test_joint_error_examples(rng, example):
    a = args(example)
    x = rng.uniform(-2, 2, size=2)
    e = joint_error(THETA_STAR, x, example.ref.policy(x), example.ds, 1.0, 1.0, **a)
    assert e < 1e-16
    assert joint_error(rng.normal(size=3), x, [0.3], example.ds, 0.0, 0.0, **a) == 0
    one = RecordedDataset([DataSample(np.zeros(2), np.zeros(1), np.zeros(3), 1.5, 0.5)], 3)
    assert joint_error(rng.normal(size=3), x, [0.3], one, 0.0, 0.7, **a) == pytest.approx(0.5 * 0.7 * 4.0)


def test_gradient_matches_finite_differences(rng, example):
    a = args(example)
    for _ in range(50):
        theta = rng.normal(size=3) * 2
        x = rng.uniform(-2, 2, size=2)
        u = rng.normal(size=1) * 2
        rho_i, rho_d = rng.uniform(0, 2), rng.uniform(0.1, 2)
        g = grad_joint_error(theta, x, u, example.ds, rho_i, rho_d, **a)
        fd = fd_gradient(lambda th: joint_error(th, x, u, example.ds, rho_i, rho_d, **a), theta)
        assert np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(g))


def test_gradient_vanishes_at_optimum(rng, example):
    a = args(example)
    for x in rng.uniform(-2, 2, size=(20, 2)):
        g = grad_joint_error(THETA_STAR, x, example.ref.policy(x), example.ds, 1.0, 1.0, **a)
        assert np.max(np.abs(g)) < 1e-9


def test_data_only_gradient_ignores_measurement(rng, example):
    a = args(example)
    theta = rng.normal(size=3)
    g1 = grad_joint_error(theta, [1, 2], [0.5], example.ds, 0.0, 1.0, **a)
    g2 = grad_joint_error(theta, [-0.3, 0.8], [-4.0], example.ds, 0.0, 1.0, **a)
    np.testing.assert_array_equal(g1, g2)


def test_deviation_form(rng, example):
    a = args(example)
    for _ in range(30):
        theta = rng.normal(size=3)
        x = rng.uniform(-2, 2, size=2)
        for u in (example.ref.policy(x), rng.normal(size=1)):
            g = grad_joint_error(theta, x, u, example.ds, 0.8, 1.3, **a)
            d = deviation_gradient(theta, x, u, example.ds, 0.8, 1.3, theta_c_star=THETA_STAR,
                                   policy=example.ref.policy, **a)
            np.testing.assert_allclose(g, d, atol=1e-9)


def test_data_errors_vanish_at_optimum(example):
    assert np.max(np.abs(data_errors(THETA_STAR, example.ds))) < 1e-9


def test_critic_flow_cases(rng, example):
    a = args(example)
    tuning = CriticTuning()
    th = rng.normal(size=3)
    d = critic_flow(CriticState(th, th.copy(), 2.0), [0.4, 0.1], [0.2], tuning, example.ds, **a)
    np.testing.assert_array_equal(d.theta_c, 0)
    assert d.tau == 0.5
    x = np.array([0.7, -0.2])
    d = critic_flow(CriticState(THETA_STAR, THETA_STAR.copy(), 1.0), x, example.ref.policy(x), tuning, example.ds, **a)
    assert np.max(np.abs(d.theta_c)) < 1e-9 and np.max(np.abs(d.p)) < 1e-9 and d.tau == 0.5
    with pytest.raises(UsageError):
        critic_flow(CriticState(th, th, 0.0), x, [0.0], tuning, example.ds, **a)


def test_baseline_flow_is_gradient_descent(rng, example):
    a = args(example)
    tuning = CriticTuning(mode=BASELINE, k_c=2.0)
    th, p = rng.normal(size=3), rng.normal(size=3)
    x, u = np.array([0.3, 0.5]), np.array([0.1])
    d = critic_flow(CriticState(th, p, 0.1), x, u, tuning, example.ds, **a)
    np.testing.assert_allclose(d.theta_c, -2.0 * grad_joint_error(th, x, u, example.ds, 1.0, 1.0, **a))
    np.testing.assert_array_equal(d.p, 0)
    assert d.tau == 0


def test_critic_jump():
    tuning = CriticTuning(T0=0.1, T=5.5)
    th = np.array([1.0, 2.0, 3.0])
    y = critic_jump(CriticState(th, np.full(3, 9.0), 5.5), tuning)
    np.testing.assert_array_equal(y.theta_c, th)
    np.testing.assert_array_equal(y.p, th)
    assert y.tau == 0.1
    again = critic_jump(CriticState(y.theta_c, y.p, 5.5), tuning)
    np.testing.assert_array_equal(again.p, y.p)
    with pytest.raises(UsageError):
        critic_jump(CriticState(th, th, 3.0), tuning)


def test_validate_worked_case():
    v = validate_tuning(CriticTuning(k_c=1, rho_i=1, rho_d=1, T0=0.1, T=5.5), 4.0)
    assert v.lower_gap == pytest.approx(30.115, abs=1e-12)
    assert v.upper_gap == pytest.approx(1.75, abs=1e-12)
    assert v.excitation_gap == pytest.approx(7.0, abs=1e-12)
    assert v.ok


def test_validate_boundaries():
    v = validate_tuning(CriticTuning(rho_i=8.0, rho_d=1.0), 4.0)
    assert v.excitation_gap == 0 and not v.ok
    v = validate_tuning(CriticTuning(rho_i=0.0, T=5.5), 0.031)
    assert v.upper_gap == math.inf and v.ok == (v.lower_gap > 0) and v.ok
    v = validate_tuning(CriticTuning(rho_i=0.0, T=1.0), 0.031)
    assert not v.ok and v.lower_gap < 0
    with pytest.raises(CertificateRequired):
        validate_tuning(CriticTuning(), 0.0)


def test_restart_period():
    assert optimal_restart_period(1, 1, 0.5, 0.1) == pytest.approx(math.e * math.sqrt(1.01), rel=1e-15)
    assert optimal_restart_period(1, 1, 0.5, 0.1) == pytest.approx(2.73184, abs=1e-5)
    assert optimal_restart_period(1, 1, 50, 0.1) == pytest.approx(0.38442, abs=1e-5)
    assert optimal_restart_period(1, 1, 1e12, 0.1) == pytest.approx(math.e * 0.1, rel=1e-9)
    with pytest.raises(UsageError):
        optimal_restart_period(1, 1, 0, 0.1)


def test_decrease_matrix_positive_when_tuning_valid(rng):
    for _ in range(200):
        lam = rng.uniform(0.01, 2)
        tuning = CriticTuning(k_c=rng.uniform(0.1, 3), rho_i=rng.uniform(0, 1), rho_d=rng.uniform(0.1, 3),
                              T0=0.1, T=rng.uniform(0.2, 20))
        if validate_tuning(tuning, lam).ok:
            for tau in (tuning.T0, 0.5 * (tuning.T0 + tuning.T), tuning.T):
                assert np.linalg.eigvalsh(decrease_matrix(tau, tuning, lam))[0] > 0


@pytest.mark.parametrize("kw", [dict(k_c=0), dict(rho_d=0), dict(rho_i=-1), dict(T0=1, T=1), dict(mode="nope")])
def test_tuning_checks(kw):
    with pytest.raises(UsageError):
        CriticTuning(**kw)
