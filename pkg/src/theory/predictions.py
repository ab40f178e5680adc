# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#
"""Closed-form predictions for monitored free fermions.

All lengths are in lattice sites and all times in 1/J. The Gaussian
correlation function C_q is tabulated once per (n, l0) on a momentum grid
that is dense near q = 0 and interpolated with a cubic spline; the inverse
Fourier transform and the entropy integral work on that table.
"""

import math
import warnings
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.special import sici

from common.errors import DomainError, NumericalError

QUAD_TOLERANCE = 1e-8
TABLE_POINTS = 513
GAUSS_LEGENDRE_ORDER = 16


class TheoryParams(BaseModel):
    """Model parameters entering the analytical predictions.

    beta is 1/2 for a particle-hole symmetric hopping matrix and 1 when that
    symmetry is broken.
    """

    model_config = ConfigDict(frozen=True)

    n: float = Field(0.5, gt=0.0, lt=1.0)
    J: float = Field(1.0, gt=0.0)
    gamma: float = Field(gt=0.0)
    beta: float = 0.5

    @field_validator("beta")
    @classmethod
    def _check_beta(cls, beta):
        if beta not in (0.5, 1.0):
            raise ValueError(f"beta must be 1/2 or 1, got {beta}")
        return beta

    @property
    def tau0(self):
        return self.n / self.gamma

    @property
    def l0(self):
        return math.sqrt(2.0) * self.J * self.n / self.gamma

    @property
    def nu(self):
        return 2.0 * self.n * self.J ** 2 / self.gamma

    @property
    def g0(self):
        return self.l0 * self.n * math.sqrt(2.0 * (1.0 - self.n))

    @property
    def v0(self):
        return self.l0 / self.tau0 * math.sqrt(2.0 * (1.0 - self.n))


def b_kernel(u, v):
    """b(u, v) = [(1 - iv)^2 + 2u^2]^(-1/2) on the principal branch."""
    radicand = (1.0 - 1j * np.asarray(v)) ** 2 + 2.0 * np.asarray(u) ** 2
    if np.any(radicand == 0):
        raise DomainError("b(u, v) radicand vanishes")
    return 1.0 / np.sqrt(radicand)


def _tilde_c_integrand(v, u, n):
    b = b_kernel(2.0 * u, v)
    real, weight = b.real, abs(b) ** 2
    f = 1.0 - 2.0 * n
    return ((2.0 * n * real - weight)
            / (4.0 * n ** 2 * (1.0 - real) - f * weight))


def tilde_c(u, n=0.5):
    """Dimensionless Gaussian correlation function c~(u).

    c~(u) = (4n/pi) int_0^inf dv (2n Re b - |b|^2)
                                / (4n^2 (1 - Re b) - (1 - 2n) |b|^2),
    with b = b(2u, v). At n = 1/2 the integrand reduces to
    (Re b - |b|^2) / (1 - Re b) with prefactor 2/pi.
    The half line is mapped onto [0, pi/2] by v = tan(theta).

    Since |b| <= 1 and Re b >= |b|^2, the integrand is nonnegative and its
    denominator positive for n >= 1/2. Below half filling the denominator
    changes sign on the v axis, so the form has a pole there and is not
    evaluated. At u = 0 the integral is sqrt(2n - 1) in closed form, which
    is the u -> 0 limit.

    Raises:
        DomainError: for u < 0 or n < 1/2
        NumericalError: when the quadrature reports a failure
    """
    if u < 0:
        raise DomainError(f"tilde_c needs u >= 0, got {u}")
    if n < 0.5:
        raise DomainError(
            f"the Gaussian correlation function has a pole below half "
            f"filling, got n={n}")
    if u == 0:
        return math.sqrt(2.0 * n - 1.0)

    def integrand(theta):
        v = math.tan(theta)
        return _tilde_c_integrand(v, u, n) * (1.0 + v * v)

    points = sorted({math.atan(s) for s in (u, 2.0 * u, 20.0 * u, 1.0)})
    result = quad(integrand, 0.0, 0.5 * math.pi, epsabs=QUAD_TOLERANCE,
                  epsrel=1e-10, limit=200, points=points, full_output=1)
    if len(result) > 3:
        raise NumericalError(f"tilde_c quadrature failed at u={u}",
                             diagnostics={"u": u, "n": n,
                                          "message": result[3],
                                          "abserr": result[1]})
    return 4.0 * n / math.pi * result[0]


def gaussian_cq(q, params):
    """C_q = n (1 - n) c~(q l0) by direct quadrature."""
    q = np.asarray(q, dtype=float)
    if np.any(q < 0) or np.any(q > math.pi + 1e-12):
        raise DomainError("q must lie in [0, pi]")
    values = [params.n * (1.0 - params.n) * tilde_c(qi * params.l0, params.n)
              for qi in np.atleast_1d(q)]
    return float(values[0]) if q.ndim == 0 else np.array(values)


@lru_cache(maxsize=32)
def _cq_table(n, l0):
    s = np.linspace(0.0, 1.0, TABLE_POINTS)
    q = math.pi * s ** 2
    values = np.array([n * (1.0 - n) * tilde_c(qi * l0, n) for qi in q])
    return CubicSpline(q, values)


def gaussian_cq_table(params):
    """Cached cubic spline of C_q on [0, pi]."""
    return _cq_table(params.n, params.l0)


def gaussian_cl(l, params):
    """C_l = (1/pi) int_0^pi dq C_q cos(q l) on the lattice."""
    spline = gaussian_cq_table(params)

    def one(distance):
        if distance == 0:
            value, _ = quad(spline, 0.0, math.pi, limit=200)
        else:
            value, _ = quad(spline, 0.0, math.pi, weight="cos",
                            wvar=float(distance), limit=400)
        return value / math.pi

    l = np.asarray(l)
    if np.any(l < 0):
        raise DomainError("distance must be non-negative")
    values = np.array([one(distance) for distance in np.atleast_1d(l)])
    return float(values[0]) if l.ndim == 0 else values


def _entropy_tail(ell, c_pi):
    si, _ = sici(math.pi * ell)
    return c_pi * (1.0 / math.pi - math.cos(math.pi * ell) / math.pi
                   + ell * (0.5 * math.pi - si))


def gaussian_entropy(ell, params, include_tail=True):
    """S_ell = (2 pi / 3) int_0^inf dq C_q [1 - cos(q ell)] / q^2.

    The integrand is finite at q = 0 since C_q ~ g0 q. The integral on
    [0, pi] uses composite Gauss-Legendre panels that resolve both the
    period 2 pi / ell and the scale 1 / l0. Beyond pi, C_q is frozen at C_pi
    and the remainder is integrated in closed form.
    """
    spline = gaussian_cq_table(params)
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_LEGENDRE_ORDER)
    c_pi = float(spline(math.pi))

    def one(length):
        if length < 1:
            raise DomainError(f"ell must be >= 1, got {length}")
        edges = np.unique(np.concatenate([
            [0.0], np.geomspace(1e-6, math.pi, 64),
            np.linspace(0.0, math.pi, int(math.ceil(length)) + 2)]))
        left, right = edges[:-1], edges[1:]
        half = 0.5 * (right - left)
        q = (0.5 * (right + left))[:, None] + half[:, None] * nodes[None, :]
        integrand = spline(q) * (1.0 - np.cos(q * length)) / q ** 2
        total = float((integrand * weights[None, :] * half[:, None]).sum())
        if include_tail:
            total += _entropy_tail(length, c_pi)
        return 2.0 * math.pi / 3.0 * total

    ell = np.asarray(ell, dtype=float)
    values = np.array([one(length) for length in np.atleast_1d(ell)])
    return float(values[0]) if ell.ndim == 0 else values


def renormalized_cq_ratio(q, params):
    """C_q / (g0 q) = 1 - 2 q l0 + ln(q l0) / (4 pi beta g0).

    Valid for 0 < q l0 < 1; values outside are returned with a warning.
    """
    u = np.asarray(q, dtype=float) * params.l0
    if np.any(u <= 0):
        raise DomainError("renormalized C_q needs q > 0")
    if np.any(u >= 1):
        warnings.warn("renormalized C_q evaluated beyond q l0 < 1.")
    return (1.0 - 2.0 * u
            + np.log(u) / (4.0 * math.pi * params.beta * params.g0))


def _check_asymptotic(ell, params):
    if np.any(np.asarray(ell) <= params.l0):
        warnings.warn(f"Asymptotic prediction used at ell <= l0 "
                      f"({params.l0:.4g}).")


def predicted_entropy(ell, params, s0):
    """(2 pi g0 / 3) [ln(ell/l0) + s0 + 7 l0^2/ell^2
    - ln(ell/l0)^2 / (8 pi beta g0)]; s0 is a fit constant."""
    _check_asymptotic(ell, params)
    ell = np.asarray(ell, dtype=float)
    log = np.log(ell / params.l0)
    g0, beta, l0 = params.g0, params.beta, params.l0
    return 2.0 * math.pi * g0 / 3.0 * (
        log + s0 + 7.0 * l0 ** 2 / ell ** 2
        - log ** 2 / (8.0 * math.pi * beta * g0))


def predicted_c_ell(ell, params):
    """2 pi g0 [1 - 14 l0^2/ell^2 - ln(ell/l0) / (4 pi beta g0)]."""
    _check_asymptotic(ell, params)
    ell = np.asarray(ell, dtype=float)
    g0, beta, l0 = params.g0, params.beta, params.l0
    return 2.0 * math.pi * g0 * (
        1.0 - 14.0 * l0 ** 2 / ell ** 2
        - np.log(ell / l0) / (4.0 * math.pi * beta * g0))


def predicted_I2(ell, x, params):
    """Mutual information of A = C = ell at cross ratio x."""
    _check_asymptotic(ell, params)
    if np.any(np.asarray(x) >= 1) or np.any(np.asarray(x) <= 0):
        raise DomainError("cross ratio must lie in (0, 1)")
    ell = np.asarray(ell, dtype=float)
    g0, beta, l0 = params.g0, params.beta, params.l0
    log_x = np.log(1.0 / (1.0 - x))
    return 2.0 * math.pi * g0 / 3.0 * (
        log_x * (1.0 - np.log(ell / l0) / (4.0 * math.pi * beta * g0))
        - 14.0 * (3.0 - x) * x ** 2 * l0 ** 2 / ((1.0 - x) ** 2 * ell ** 2))


def predicted_I3(ell, x, params):
    """Zero at the order of the other predictions."""
    return np.zeros_like(np.asarray(ell, dtype=float) * np.asarray(x))


@dataclass
class Scales:
    """Characteristic scales; maxima follow from the stationarity of the
    predicted c_ell and I2 for general filling."""

    l0: float
    tau0: float
    nu: float
    g0: float
    v0: float
    l_star: float
    q_c: float
    l_c: float
    ell_max_c: float
    c_gaussian: float
    beta: float

    def ell_max_I2(self, x):
        if x <= 0 or x >= 1:
            raise DomainError("cross ratio must lie in (0, 1)")
        log_x = math.log(1.0 / (1.0 - x))
        squared = (112.0 * math.pi * self.beta * self.g0 * (3.0 - x)
                   * x ** 2 * self.l0 ** 2 / ((1.0 - x) ** 2 * log_x))
        return math.sqrt(squared)

    def to_dict(self, x=1.0 / 16.0):
        values = asdict(self)
        values["ell_max_I2"] = self.ell_max_I2(x)
        values["cross_ratio"] = x
        return values


def scales(params):
    """All characteristic scales of the monitored system."""
    l0, g0, beta = params.l0, params.g0, params.beta
    with np.errstate(over="ignore"):
        l_star = float(l0 * np.exp(4.0 * math.pi * beta * g0))
    q_c = 1.0 / (8.0 * math.pi * beta * l0 * g0)
    return Scales(l0=l0, tau0=params.tau0, nu=params.nu, g0=g0, v0=params.v0,
                  l_star=l_star, q_c=q_c, l_c=1.0 / q_c,
                  ell_max_c=math.sqrt(112.0 * math.pi * beta * g0) * l0,
                  c_gaussian=2.0 * math.pi * g0, beta=beta)
