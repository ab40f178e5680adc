# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import curve_fit

from common.errors import InvalidParameterError, NumericalError
from common.statistics import Curve

BEYOND_WINDOW = math.inf


@dataclass
class PowerLawFit:
    exponent: float
    exponent_error: float
    amplitude: float
    amplitude_error: float
    n_points: int

    def to_dict(self):
        return asdict(self)


@dataclass
class CrossoverResult:
    """Scale where the data leave the tangent x^-2 line.

    Attributes:
        scale (float): crossover abscissa, BEYOND_WINDOW if none was found
        tangent_point (float): abscissa where the line touches the data
        intercept (float): ln of the line amplitude
    """

    scale: float
    tangent_point: float
    intercept: float

    @property
    def found(self):
        return math.isfinite(self.scale)

    def to_dict(self):
        return asdict(self)


@dataclass
class MaximumResult:
    x_max: float
    y_max: float
    x_err: float
    y_err: float
    at_boundary: bool

    def to_dict(self):
        return asdict(self)


def _linear(u, intercept, slope):
    return intercept + slope * u


def power_law_fit(curve, window=None):
    """Weighted least squares of ln y against ln x.

    Args:
        curve (Curve): data with y > 0 in the window
        window (tuple, optional): (lower, upper) bounds on x.
            Defaults to None, which uses the whole curve.

    Returns:
        PowerLawFit: exponent p and amplitude A of y = A x^p
    """
    if window is not None:
        curve = curve.window(*window)
    if len(curve) < 3:
        raise InvalidParameterError(
            f"power-law fit needs at least 3 points, got {len(curve)}")
    if np.any(curve.y <= 0) or np.any(curve.x <= 0):
        raise InvalidParameterError("power-law fit needs x > 0 and y > 0")

    u, v = np.log(curve.x), np.log(curve.y)
    sigma = curve.yerr / curve.y
    weighted = bool(np.all(sigma > 0))
    slope0, intercept0 = np.polyfit(u, v, 1)
    try:
        popt, pcov = curve_fit(_linear, u, v, p0=(intercept0, slope0),
                               sigma=sigma if weighted else None,
                               absolute_sigma=weighted)
    except (RuntimeError, ValueError) as err:
        raise NumericalError(f"power-law fit failed: {err}",
                             diagnostics={"n_points": len(curve)})
    errors = np.sqrt(np.clip(np.diag(pcov), 0.0, None))
    amplitude = math.exp(popt[0])
    return PowerLawFit(exponent=float(popt[1]),
                       exponent_error=float(errors[1]),
                       amplitude=amplitude,
                       amplitude_error=float(amplitude * errors[0]),
                       n_points=len(curve))


def crossover_scale(curve, lower=None, threshold=0.1, persistence=3):
    """Detect where |y| drops below the tangent A / x^2 line.

    The line has the largest amplitude not exceeded by x^2 |y| from `lower`
    on, so it touches the data where x^2 |y| peaks. The crossover is the
    first abscissa after the touching point from which the relative
    deviation 1 - |y| / line exceeds `threshold` for `persistence`
    consecutive points; a run that reaches the end of the data also counts.

    Args:
        curve (Curve): |C| against chord length
        lower (float, optional): start of the search window, typically
            2 l0. Defaults to None.
        threshold (float, optional): relative deviation. Defaults to 0.1.
        persistence (int, optional): consecutive points. Defaults to 3.

    Returns:
        CrossoverResult: scale is BEYOND_WINDOW when the data never leave
            the line
    """
    data = curve.window(lower=lower)
    x, y = data.x, np.abs(data.y)
    keep = (y > 0) & (x > 0)
    x, y = x[keep], y[keep]
    if len(x) < 2:
        raise InvalidParameterError("crossover search needs 2 positive points")

    log_amplitude = np.log(y) + 2.0 * np.log(x)
    touch = int(np.argmax(log_amplitude))
    intercept = float(log_amplitude[touch])
    deviation = 1.0 - y * x ** 2 / math.exp(intercept)
    exceeded = deviation > threshold
    for i in range(touch + 1, len(x)):
        run = exceeded[i:i + persistence]
        if run.all() and (len(run) == persistence or i + len(run) == len(x)):
            return CrossoverResult(float(x[i]), float(x[touch]), intercept)
    return CrossoverResult(BEYOND_WINDOW, float(x[touch]), intercept)


def _parabola_vertex(u, y):
    i = int(np.argmax(y))
    if i == 0 or i == len(y) - 1:
        return u[i], y[i], True
    a, b, c = np.polyfit(u[i - 1:i + 2], y[i - 1:i + 2], 2)
    if a >= 0:
        return u[i], y[i], False
    vertex = -b / (2.0 * a)
    return vertex, c - b ** 2 / (4.0 * a), False


def locate_maximum(curve, n_bootstrap=1000, rng=None):
    """Interior maximum of y by a parabola in (ln x, y).

    The parabola passes through the grid argmax and its two neighbours.
    Errors come from resampling y within yerr.

    Args:
        curve (Curve): data on a positive abscissa
        n_bootstrap (int, optional): resamples. Defaults to 1000.
        rng (np.random.Generator, optional): Defaults to default_rng(0).

    Returns:
        MaximumResult: location, height, errors and a boundary flag
    """
    if len(curve) < 3:
        raise InvalidParameterError("locating a maximum needs 3 points")
    if np.any(curve.x <= 0):
        raise InvalidParameterError("maxima are located in ln x; need x > 0")
    u = np.log(curve.x)
    vertex, height, at_boundary = _parabola_vertex(u, curve.y)
    x_err = y_err = 0.0
    if not at_boundary and np.any(curve.yerr > 0) and n_bootstrap > 1:
        rng = np.random.default_rng(0) if rng is None else rng
        samples = curve.y + curve.yerr * rng.standard_normal(
            (n_bootstrap, len(curve)))
        vertices = np.array([_parabola_vertex(u, s)[:2] for s in samples])
        x_err = float(np.std(np.exp(vertices[:, 0]), ddof=1))
        y_err = float(np.std(vertices[:, 1], ddof=1))
    return MaximumResult(float(np.exp(vertex)), float(height), x_err, y_err,
                         bool(at_boundary))


def scaling_exponent(control, values, errors=None):
    """Exponent of values ~ control^p, e.g. a length scale against gamma."""
    order = np.argsort(control)
    control = np.asarray(control, dtype=float)[order]
    values = np.asarray(values, dtype=float)[order]
    errors = None if errors is None else np.asarray(errors)[order]
    return power_law_fit(Curve(control, values, errors))
