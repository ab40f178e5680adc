# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#

import numpy as np
from .errors import InvalidParameterError


class EnsembleStatistic:
    """Mean and standard error of an observable over an ensemble.

    The standard error is always computed from trajectory-level values
    (one number per trajectory, already averaged over that trajectory's
    snapshots and reference positions), because consecutive snapshots of one
    trajectory are correlated.
    """

    def __init__(self, mean, stderr, n_samples):
        """Initialize the statistic.

        Args:
            mean (float or np.ndarray): ensemble mean
            stderr (float or np.ndarray): standard error of the mean
            n_samples (int): number of trajectory-level values
        """
        self.mean = np.asarray(mean, dtype=float)
        self.stderr = np.asarray(stderr, dtype=float)
        self.n_samples = int(n_samples)

        if np.any(self.stderr < 0):
            raise InvalidParameterError("stderr must be nonnegative")

    @classmethod
    def from_trajectory_values(cls, values):
        """Reduce trajectory-level values along the first axis.

        Args:
            values (array-like): shape (n_traj, ...) with one entry per
                trajectory

        Returns:
            EnsembleStatistic: mean and stderr along the trajectory axis
        """
        values = np.asarray(values, dtype=float)
        if values.shape[0] == 0:
            raise InvalidParameterError("no trajectory values to reduce")

        n = values.shape[0]
        mean = values.mean(axis=0)
        if n > 1:
            stderr = values.std(axis=0, ddof=1) / np.sqrt(n)
        else:
            stderr = np.zeros_like(mean)
        return cls(mean, stderr, n)

    def __repr__(self):
        return (f"EnsembleStatistic(mean={self.mean}, stderr={self.stderr}, "
                f"n_samples={self.n_samples})")


class Curve:
    """Tabulated curve y(x) with standard errors.

    x is a chord length, a time lag or a momentum depending on the caller.
    """

    def __init__(self, x, y, yerr=None):
        """Initialize the curve and check its invariants.

        Args:
            x (array-like): strictly increasing abscissa
            y (array-like): values
            yerr (array-like, optional): standard errors. Defaults to zeros.
        """
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        if yerr is None:
            yerr = np.zeros_like(self.y)
        self.yerr = np.asarray(yerr, dtype=float)

        if not (self.x.shape == self.y.shape == self.yerr.shape):
            raise InvalidParameterError(
                f"curve arrays differ in shape: {self.x.shape}, "
                f"{self.y.shape}, {self.yerr.shape}")
        if self.x.ndim != 1:
            raise InvalidParameterError("curves are one dimensional")
        if np.any(np.diff(self.x) <= 0):
            raise InvalidParameterError("curve abscissa must increase")

    def __len__(self):
        return self.x.shape[0]

    def window(self, lower=None, upper=None):
        """Restrict the curve to lower <= x <= upper."""
        mask = np.ones_like(self.x, dtype=bool)
        if lower is not None:
            mask &= self.x >= lower
        if upper is not None:
            mask &= self.x <= upper
        return Curve(self.x[mask], self.y[mask], self.yerr[mask])

    def scaled(self, factor):
        """Return the curve with y and yerr multiplied by factor."""
        return Curve(self.x, factor * self.y, abs(factor) * self.yerr)

    @classmethod
    def from_statistic(cls, x, statistic):
        """Build a curve from an abscissa and an EnsembleStatistic."""
        return cls(x, statistic.mean, statistic.stderr)
