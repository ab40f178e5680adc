# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#

from dataclasses import dataclass

import numpy as np
from scipy.special import jv

from analysis.fitting import power_law_fit
from common.errors import (
    DomainError,
    InvalidParameterError,
    ModelMismatchError,
)
from common.statistics import Curve, EnsembleStatistic
from trajectories.models import ModelKind


def default_max_lag(n_times):
    return max(n_times // 4, 1)


def _check_lag(n_times, max_lag):
    max_lag = default_max_lag(n_times) if max_lag is None else int(max_lag)
    if max_lag < 0 or max_lag >= n_times:
        raise InvalidParameterError(
            f"max_lag {max_lag} exceeds a window of {n_times} samples")
    return max_lag


def autocorrelation_moments(z, max_lag=None):
    """Origin- and site-averaged lag products of z.

    Args:
        z (np.ndarray): shape (..., n_t, L); leading axes are kept
        max_lag (int, optional): largest lag in samples.
            Defaults to n_t // 4.

    Returns:
        dict: `raw`, `lead` and `lag`, each of shape (..., max_lag + 1),
            holding the means of z(t+tau) z(t), z(t+tau) and z(t)
    """
    z = np.asarray(z, dtype=float)
    n_times = z.shape[-2]
    max_lag = _check_lag(n_times, max_lag)
    raw, lead, lag = [], [], []
    for tau in range(max_lag + 1):
        later = z[..., tau:, :]
        earlier = z[..., :n_times - tau, :]
        raw.append((later * earlier).mean(axis=(-2, -1)))
        lead.append(later.mean(axis=(-2, -1)))
        lag.append(earlier.mean(axis=(-2, -1)))
    return {name: np.stack(values, axis=-1)
            for name, values in (("raw", raw), ("lead", lead), ("lag", lag))}


def telegraph_moments(z, jump_counts, max_lag=None):
    """Origin- and site-averaged z(t+tau) (-1)^(N(t+tau) - N(t)) z(t)."""
    z = np.asarray(z, dtype=float)
    jump_counts = np.asarray(jump_counts)
    n_times = z.shape[-2]
    max_lag = _check_lag(n_times, max_lag)
    values = []
    for tau in range(max_lag + 1):
        parity = (jump_counts[..., tau:, :]
                  - jump_counts[..., :n_times - tau, :]) % 2
        sign = 1.0 - 2.0 * parity
        values.append((z[..., tau:, :] * sign
                       * z[..., :n_times - tau, :]).mean(axis=(-2, -1)))
    return np.stack(values, axis=-1)


@dataclass
class AutocorrelationEstimate:
    """Connected K(tau) together with the raw second moment."""

    lags: np.ndarray
    connected: EnsembleStatistic
    raw: EnsembleStatistic

    def curve(self):
        return Curve.from_statistic(self.lags, self.connected)


def reduce_autocorrelation(raw, lead, lag, dt):
    """Combine per-trajectory moments into K(tau).

    K = <raw> - <lead> <lag> with ensemble means; errors come from the
    per-trajectory connected values.

    Args:
        raw, lead, lag (array_like): shape (n_traj, n_lags)
        dt (float): sample spacing

    Returns:
        AutocorrelationEstimate: K on the lag grid
    """
    raw, lead, lag = (np.atleast_2d(np.asarray(v, dtype=float))
                      for v in (raw, lead, lag))
    n_traj = raw.shape[0]
    connected = raw.mean(axis=0) - lead.mean(axis=0) * lag.mean(axis=0)
    raw_statistic = EnsembleStatistic.from_trajectory_values(raw)
    blocks = EnsembleStatistic.from_trajectory_values(raw - lead * lag)
    lags = dt * np.arange(raw.shape[1])
    return AutocorrelationEstimate(
        lags, EnsembleStatistic(connected, blocks.stderr, n_traj),
        raw_statistic)


def density_autocorrelation(trajectories, max_lag=None):
    """Conditional density autocorrelation K(tau) of sampled trajectories.

    Args:
        trajectories (list): SampledTrajectory objects on a common grid
        max_lag (int, optional): largest lag in samples.
            Defaults to a quarter of the window.

    Returns:
        AutocorrelationEstimate: connected and raw K(tau)
    """
    if not trajectories:
        raise InvalidParameterError("no trajectories to average")
    moments = [autocorrelation_moments(t.z, max_lag) for t in trajectories]
    dt = trajectories[0].times[1] - trajectories[0].times[0]
    return reduce_autocorrelation(
        [m["raw"] for m in moments], [m["lead"] for m in moments],
        [m["lag"] for m in moments], dt)


def reduce_telegraph(values, dt):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    statistic = EnsembleStatistic.from_trajectory_values(values)
    return Curve.from_statistic(dt * np.arange(values.shape[1]), statistic)


def telegraph_reduced(trajectories, max_lag=None):
    """Telegraph-reduced autocorrelation Q(tau); not mean-subtracted.

    Raises:
        ModelMismatchError: for occupation-measurement trajectories, whose
            jump counts carry no loss/gain information
    """
    if not trajectories:
        raise InvalidParameterError("no trajectories to average")
    for trajectory in trajectories:
        if trajectory.model is not ModelKind.FERMION_COUNTING:
            raise ModelMismatchError(
                "the telegraph-reduced correlator needs fermion-counting "
                f"trajectories, got {trajectory.model.value}")
    values = [telegraph_moments(t.z, t.jump_counts, max_lag)
              for t in trajectories]
    dt = trajectories[0].times[1] - trajectories[0].times[0]
    return reduce_telegraph(values, dt)


def unconditional_c0_fc(l, t, J=1.0, gamma=1.0):
    """(1/4) exp(-2 gamma |t|) J_l(2J|t|)^2 at half filling.

    Bessel functions come from scipy.special.jv, which evaluates integer
    orders with the AMOS routines (backward recurrence where needed).
    """
    l = np.asarray(l)
    t = np.abs(np.asarray(t, dtype=float))
    tau0 = 0.5 / gamma
    return 0.25 * np.exp(-t / tau0) * jv(l, 2.0 * J * t) ** 2


def unconditional_c0_om(l, t, n=0.5, J=1.0, gamma=1.0):
    """Diffusive form n(1-n) exp(-l^2/(4 nu t)) / sqrt(4 pi nu t).

    Raises:
        DomainError: at t = 0, where only the asymptotic form is known
    """
    t = np.abs(np.asarray(t, dtype=float))
    if np.any(t == 0):
        raise DomainError("the occupation-measurement form needs |t| > 0")
    nu = 2.0 * n * J ** 2 / gamma
    l = np.asarray(l, dtype=float)
    return (n * (1.0 - n) * np.exp(-l ** 2 / (4.0 * nu * t))
            / np.sqrt(4.0 * np.pi * nu * t))


def telegraph_reference(t, gamma):
    """exp(-2 gamma t), the J = 0 random-telegraph autocorrelation."""
    return np.exp(-2.0 * gamma * np.abs(np.asarray(t, dtype=float)))


def zeno_telegraph_reference(t, J, gamma):
    """exp(-2 nu t) with nu = J^2 / gamma, the strong-monitoring Q(t)."""
    nu = J ** 2 / gamma
    return np.exp(-2.0 * nu * np.abs(np.asarray(t, dtype=float)))


def ssep_autocorrelation_fit(lags, K, window, errors=None):
    """Exponent alpha of K ~ tau^(-alpha) over a lag window.

    Args:
        lags (array_like): lag times
        K (array_like): autocorrelation values
        window (tuple): (lower, upper) lag bounds, inclusive
        errors (array_like, optional): standard errors of K.
            Defaults to None.

    Returns:
        tuple: alpha and its standard error
    """
    curve = Curve(lags, K, errors).window(*window)
    if np.any(curve.y <= 0) or np.any(curve.x <= 0):
        raise InvalidParameterError(
            "power-law fit needs positive lags and values in the window")
    fit = power_law_fit(curve)
    return -fit.exponent, fit.exponent_error
