# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#

import math

import numpy as np
import pytest

from common.errors import (
    DomainError,
    InvalidParameterError,
    ModelMismatchError,
)
from observables.exclusion import ssep_autocorrelation
from observables.temporal import (
    autocorrelation_moments,
    default_max_lag,
    density_autocorrelation,
    reduce_autocorrelation,
    ssep_autocorrelation_fit,
    telegraph_moments,
    telegraph_reduced,
    telegraph_reference,
    unconditional_c0_fc,
    unconditional_c0_om,
    zeno_telegraph_reference,
)
from trajectories.gaussian import run_trajectory
from trajectories.models import ModelKind, SimParams


def test_default_max_lag():
    assert default_max_lag(101) == 25
    assert default_max_lag(2) == 1


def test_constant_signal_has_no_connected_correlation():
    z = np.ones((3, 20, 4))
    moments = autocorrelation_moments(z, 5)
    assert moments["raw"].shape == (3, 6)
    estimate = reduce_autocorrelation(moments["raw"], moments["lead"],
                                      moments["lag"], dt=0.5)
    assert np.allclose(estimate.connected.mean, 0.0)
    assert np.allclose(estimate.raw.mean, 1.0)
    assert np.allclose(estimate.lags, 0.5 * np.arange(6))


def test_lag_must_fit_in_window():
    with pytest.raises(InvalidParameterError):
        autocorrelation_moments(np.ones((4, 2)), 4)


def test_telegraph_sign_string():
    z = np.array([[1.0], [-1.0], [1.0], [1.0]])
    counts = np.array([[0], [1], [2], [2]])
    values = telegraph_moments(z, counts, 2)
    # every flip is paired with a jump, so the reduced signal is constant
    assert np.allclose(values, 1.0)


def test_telegraph_at_zero_lag_equals_raw_moment(make_params):
    trajectory = run_trajectory(make_params(t_sample=4.0))
    raw = autocorrelation_moments(trajectory.z, 3)["raw"]
    reduced = telegraph_moments(trajectory.z, trajectory.jump_counts, 3)
    assert reduced[0] == pytest.approx(raw[0], abs=1e-14)


def test_telegraph_needs_fermion_counting(make_params):
    trajectory = run_trajectory(
        make_params(model=ModelKind.OCCUPATION_MEASUREMENT))
    with pytest.raises(ModelMismatchError):
        telegraph_reduced([trajectory])


def test_telegraph_limit_without_hopping():
    gamma = 1.0
    params = SimParams(L=40, J=0.0, gamma=gamma, seed=21, t_burn=2.0,
                       t_sample=20.0, dt_sample=0.1, n_traj=20)
    trajectories = [run_trajectory(params, seed=params.trajectory_seed(i))
                    for i in range(params.n_traj)]
    estimate = density_autocorrelation(trajectories, max_lag=10)
    normalized = estimate.connected.mean / estimate.connected.mean[0]
    expected = telegraph_reference(estimate.lags, gamma)
    assert np.allclose(normalized, expected, atol=0.05)

    reduced = telegraph_reduced(trajectories, max_lag=10)
    # without hopping every flip is a recorded jump
    assert np.allclose(reduced.y, reduced.y[0], atol=1e-12)


@pytest.mark.slow
def test_generalized_zeno_decay():
    J, gamma = 1.0, 20.0
    nu = J ** 2 / gamma
    params = SimParams(L=40, J=J, gamma=gamma, seed=4, t_burn=5.0,
                       t_sample=60.0, dt_sample=0.5, n_traj=20)
    trajectories = [run_trajectory(params, seed=params.trajectory_seed(i))
                    for i in range(params.n_traj)]
    curve = telegraph_reduced(trajectories, max_lag=40)
    mask = nu * curve.x <= 1.0
    normalized = curve.y[mask] / curve.y[0]
    expected = zeno_telegraph_reference(curve.x[mask], J, gamma)
    assert np.all(np.abs(normalized - expected) <= 0.1 * expected + 0.01)


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_bessel_sum_rule(t):
    gamma = 0.7
    l = np.arange(-200, 201)
    total = unconditional_c0_fc(l, t, J=1.0, gamma=gamma).sum()
    assert total == pytest.approx(0.25 * math.exp(-2 * gamma * t), abs=1e-10)


def test_unconditional_fc_at_equal_times():
    assert unconditional_c0_fc(0, 0.0) == pytest.approx(0.25)
    assert unconditional_c0_fc(3, 0.0) == pytest.approx(0.0)


def test_unconditional_om_diffusive_form():
    n, J, gamma, t = 0.5, 1.0, 10.0, 4.0
    nu = 2 * n * J ** 2 / gamma
    value = unconditional_c0_om(0, t, n, J, gamma)
    assert value == pytest.approx(0.25 / math.sqrt(4 * math.pi * nu * t))
    with pytest.raises(DomainError):
        unconditional_c0_om(0, 0.0)


def test_reference_decays():
    assert telegraph_reference(0.0, 3.0) == 1.0
    assert zeno_telegraph_reference(10.0, 1.0, 20.0) == pytest.approx(
        math.exp(-1.0))


def test_power_law_fit_recovers_exponent():
    lags = np.linspace(0.5, 50.0, 100)
    K = 0.2 * lags ** -0.58
    alpha, error = ssep_autocorrelation_fit(lags, K, (2.0, 40.0))
    assert alpha == pytest.approx(0.58, abs=1e-8)
    assert error == pytest.approx(0.0, abs=1e-6)


def test_power_law_fit_needs_positive_values():
    lags = np.arange(1.0, 10.0)
    with pytest.raises(InvalidParameterError):
        ssep_autocorrelation_fit(lags, -lags, (1.0, 9.0))


def _ensemble(params):
    return [run_trajectory(params, seed=params.trajectory_seed(i))
            for i in range(params.n_traj)]


def _normalized(curve_y, curve_yerr):
    return curve_y / curve_y[0], curve_yerr / abs(curve_y[0])


@pytest.mark.slow
def test_telegraph_limit_with_hopping():
    J, gamma = 1.0, 20.0
    params = SimParams(L=40, J=J, gamma=gamma, seed=17, t_burn=1.0,
                       t_sample=2.0, dt_sample=0.005, n_traj=10)
    # 20 lags of 0.005 reach gamma tau = 2
    estimate = density_autocorrelation(_ensemble(params), max_lag=20)
    K, sigma = _normalized(estimate.connected.mean,
                           estimate.connected.stderr)
    expected = telegraph_reference(estimate.lags, gamma)
    # hopping adds O(J^2 / gamma) corrections to the flip statistics
    allowance = 2.0 * J ** 2 / gamma * estimate.lags * expected + 0.01
    assert np.all(np.abs(K - expected) <= 3.0 * sigma + allowance)


@pytest.mark.slow
def test_generalized_zeno_curves_collapse():
    J = 1.0
    curves = {}
    for gamma in (5.0, 10.0, 20.0):
        # equal nu * dt, so the lag grids coincide after rescaling
        dt = 0.025 * gamma
        params = SimParams(L=40, J=J, gamma=gamma, seed=int(gamma),
                           t_burn=5.0, t_sample=3.0 * gamma, dt_sample=dt,
                           n_traj=20)
        curve = telegraph_reduced(_ensemble(params), max_lag=40)
        curves[gamma] = (J ** 2 / gamma * curve.x,
                         *_normalized(curve.y, curve.yerr))
    reference_x, reference, reference_err = curves[20.0]
    for gamma in (5.0, 10.0):
        x, values, errors = curves[gamma]
        assert np.allclose(x, reference_x)
        # the collapse holds up to O((J / gamma)^2) at gamma = 5 J
        assert np.all(np.abs(values - reference)
                      <= 3.0 * np.hypot(errors, reference_err) + 0.05)


@pytest.mark.slow
def test_occupation_measurement_follows_exclusion_process():
    J, gamma, L = 1.0, 20.0, 40
    nu = J ** 2 / gamma
    params = SimParams(L=L, J=J, gamma=gamma,
                       model=ModelKind.OCCUPATION_MEASUREMENT, seed=23,
                       t_burn=40.0, t_sample=80.0, dt_sample=1.0, n_traj=40)
    monitored = density_autocorrelation(_ensemble(params), max_lag=40)
    exclusion = ssep_autocorrelation(L, L // 2, 2.0 * nu, 80.0, 1.0, 2000,
                                     np.random.default_rng(5), max_lag=40)
    assert np.allclose(monitored.lags, exclusion.lags)
    K, sigma = _normalized(monitored.connected.mean,
                           monitored.connected.stderr)
    reference, reference_err = _normalized(exclusion.connected.mean,
                                           exclusion.connected.stderr)
    assert np.all(np.abs(K - reference)
                  <= 5.0 * np.hypot(sigma, reference_err) + 0.03)
