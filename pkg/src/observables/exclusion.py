# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#
"""Symmetric simple exclusion process on a ring.

Every particle attempts hops at a fixed rate, to the left or right with equal
probability; an attempt onto an occupied site is blocked but still consumes
the event. The total attempt rate N * rate is the same for every
configuration, so the number of attempts between two sample times is Poisson
distributed and independent of the path. Realizations are advanced in
batches, attempt by attempt.
"""

from dataclasses import dataclass
from typing import List

import numpy as np
from tqdm import tqdm

from common.errors import InvalidParameterError
from common.logging import logger
from common.statistics import EnsembleStatistic
from .temporal import autocorrelation_moments, reduce_autocorrelation


@dataclass(frozen=True)
class SsepState:
    occupations: np.ndarray
    time: float


@dataclass
class SsepRun:
    """Sampled exclusion-process realizations.

    Attributes:
        times (np.ndarray): sample grid, shape (n_t,)
        occupations (np.ndarray): shape (n_realizations, n_t, L), bool
        displacement (np.ndarray): unwrapped particle displacements,
            shape (n_realizations, n_t, N)
    """

    times: np.ndarray
    occupations: np.ndarray
    displacement: np.ndarray

    def states(self, realization=0) -> List[SsepState]:
        return [SsepState(self.occupations[realization, i].copy(), t)
                for i, t in enumerate(self.times)]


def random_configurations(L, N, n_realizations, rng):
    """Particle positions of uniformly random configurations, sorted."""
    if N < 0 or N > L:
        raise InvalidParameterError(f"N must lie in [0, {L}], got {N}")
    order = np.argsort(rng.random((n_realizations, L)), axis=1)
    return np.sort(order[:, :N], axis=1)


def _advance(occupied, positions, displacement, attempts, rng):
    n_realizations, N = positions.shape
    L = occupied.shape[1]
    if N == 0 or N == L:
        return
    rows = np.arange(n_realizations)
    for step in range(int(attempts.max(initial=0))):
        active = rows[attempts > step]
        particle = rng.integers(N, size=active.size)
        direction = 2 * rng.integers(2, size=active.size) - 1
        source = positions[active, particle]
        target = (source + direction) % L
        free = ~occupied[active, target]
        active, particle, direction = (
            active[free], particle[free], direction[free])
        source, target = source[free], target[free]
        occupied[active, source] = False
        occupied[active, target] = True
        positions[active, particle] = target
        displacement[active, particle] += direction


def ssep_simulate(L, N, rate, t_max, dt_sample, rng, n_realizations=1,
                  positions=None):
    """Sample exclusion-process realizations on a regular grid.

    Args:
        L (int): ring size
        N (int): particle number
        rate (float): hop-attempt rate per particle
        t_max (float): last sample time
        dt_sample (float): sample spacing
        rng (np.random.Generator): random number generator
        n_realizations (int, optional): batch size. Defaults to 1.
        positions (np.ndarray, optional): initial positions, shape
            (n_realizations, N). Defaults to uniformly random configurations.

    Returns:
        SsepRun: occupations and displacements at every sample time
    """
    if rate <= 0:
        raise InvalidParameterError(f"rate must be positive, got {rate}")
    if dt_sample <= 0 or t_max < 0:
        raise InvalidParameterError("need dt_sample > 0 and t_max >= 0")
    if positions is None:
        positions = random_configurations(L, N, n_realizations, rng)
    positions = np.array(positions, dtype=np.int64)
    positions = positions.reshape(n_realizations, N)

    times = dt_sample * np.arange(int(round(t_max / dt_sample)) + 1)
    occupied = np.zeros((n_realizations, L), dtype=bool)
    np.put_along_axis(occupied, positions, True, axis=1)
    if occupied.sum() != n_realizations * N:
        raise InvalidParameterError("initial positions must be distinct")
    displacement = np.zeros((n_realizations, N), dtype=np.int64)

    occupations = np.empty((n_realizations, len(times), L), dtype=bool)
    displacements = np.empty((n_realizations, len(times), N), dtype=np.int64)
    occupations[:, 0] = occupied
    displacements[:, 0] = displacement
    for i in range(1, len(times)):
        attempts = rng.poisson(N * rate * dt_sample, size=n_realizations)
        _advance(occupied, positions, displacement, attempts, rng)
        occupations[:, i] = occupied
        displacements[:, i] = displacement
    return SsepRun(times, occupations, displacements)


def ssep_autocorrelation(L, N, rate, t_max, dt_sample, n_realizations, rng,
                         batch_size=250, max_lag=None):
    """K(tau) of the exclusion process with the trajectory estimator.

    Random initial configurations are already stationary, so the whole
    window enters the origin average.

    Returns:
        AutocorrelationEstimate: connected and raw K(tau), one block per
            realization
    """
    raw, lead, lag = [], [], []
    n_batches = -(-n_realizations // batch_size)
    for batch in tqdm(range(n_batches), desc="SSEP", disable=n_batches < 2):
        size = min(batch_size, n_realizations - batch * batch_size)
        run = ssep_simulate(L, N, rate, t_max, dt_sample, rng, size)
        moments = autocorrelation_moments(
            2.0 * run.occupations.astype(float) - 1.0, max_lag)
        raw.append(moments["raw"])
        lead.append(moments["lead"])
        lag.append(moments["lag"])
    logger.info(f"Simulated {n_realizations} exclusion-process realizations "
                f"(L={L}, N={N}, rate={rate})")
    return reduce_autocorrelation(np.concatenate(raw), np.concatenate(lead),
                                  np.concatenate(lag), dt_sample)


def ssep_tracer_msd(L, rate, t_max, dt_sample, n_realizations, rng):
    """Mean-square displacement of a single particle, equal to rate * t.

    Returns:
        tuple: sample times and the EnsembleStatistic of x(t)^2
    """
    run = ssep_simulate(L, 1, rate, t_max, dt_sample, rng, n_realizations)
    squared = run.displacement[:, :, 0].astype(float) ** 2
    return run.times, EnsembleStatistic.from_trajectory_values(squared)
