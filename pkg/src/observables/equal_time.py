# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy, zeta

from common.errors import DomainError, InvalidParameterError
from common.statistics import Curve, EnsembleStatistic
from trajectories.gaussian import SingleParticleDensityMatrix

EIGENVALUE_CLAMP = 1e-12
HERMITICITY_TOLERANCE = 1e-8
ENTROPY_KEYS = ("A", "B", "C", "AB", "BC", "AC", "ABC")


def _as_matrix(d):
    return np.asarray(getattr(d, "d", d))


def _indices(segment, L):
    if isinstance(segment, slice):
        segment = np.arange(L)[segment]
    segment = np.asarray(segment, dtype=int)
    if segment.size == 0:
        raise InvalidParameterError("segment must not be empty")
    return np.mod(segment, L)


def interval(origin, length, L):
    """Sites origin, ..., origin + length - 1 on the ring."""
    return np.mod(origin + np.arange(length), L)


def fermi_sea_orbitals(L, N):
    """Plane-wave orbitals of the N lowest ring modes, shape (L, N).

    Degenerate modes at the Fermi level are filled in FFT order, so the state
    is the closed-shell sea whenever N is odd.
    """
    if N < 0 or N > L:
        raise InvalidParameterError(f"N must lie in [0, {L}], got {N}")
    k = np.arange(L)
    xi = -np.cos(2.0 * np.pi * k / L)
    filled = np.argsort(np.round(xi, 12), kind="stable")[:N]
    sites = np.arange(L)[:, None]
    return np.exp(2j * np.pi * sites * k[filled][None, :] / L) / math.sqrt(L)


def fermi_sea_density_matrix(L, N):
    """Ground-state density matrix D = sum_k phi_k phi_k^dag of the ring."""
    orbitals = fermi_sea_orbitals(L, N)
    return SingleParticleDensityMatrix(orbitals @ orbitals.conj().T)


def entropy_from_eigenvalues(eigenvalues):
    """S = -sum [p ln p + (1-p) ln(1-p)] over clamped mode occupations."""
    p = np.clip(np.asarray(eigenvalues, dtype=float),
                EIGENVALUE_CLAMP, 1.0 - EIGENVALUE_CLAMP)
    return float(-(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p)).sum())


def reduced_eigenvalues(d, segment):
    d = _as_matrix(d)
    sites = _indices(segment, d.shape[0])
    block = d[np.ix_(sites, sites)]
    defect = np.abs(block - block.conj().T).max()
    if defect > HERMITICITY_TOLERANCE:
        raise InvalidParameterError(
            f"reduced density matrix is not Hermitian (defect {defect:.3g})")
    return np.linalg.eigvalsh(0.5 * (block + block.conj().T))


def subsystem_entropy(d, segment):
    """Entanglement entropy of a set of sites in nats.

    Args:
        d (array_like or SingleParticleDensityMatrix): L x L density matrix
        segment (array_like or slice): site indices, contiguous or not

    Returns:
        float: von Neumann entropy
    """
    return entropy_from_eigenvalues(reduced_eigenvalues(d, segment))


def second_cumulant(d, segment):
    """C_A^(2) = sum_{l,l' in A} (delta_{ll'} d_ll - |d_ll'|^2)."""
    d = _as_matrix(d)
    sites = _indices(segment, d.shape[0])
    block = d[np.ix_(sites, sites)]
    return float(np.trace(block).real - (np.abs(block) ** 2).sum())


def bernoulli_cumulants(p, n_max):
    """Cumulants 1..n_max of independent Bernoulli modes, summed over modes.

    Uses kappa_{n+1} = p (1 - p) d kappa_n / dp starting from kappa_1 = p.
    """
    p = np.asarray(p, dtype=float)
    polynomial = np.polynomial.Polynomial([0.0, 1.0])
    variance = np.polynomial.Polynomial([0.0, 1.0, -1.0])
    cumulants = []
    for _ in range(n_max):
        cumulants.append(float(polynomial(p).sum()))
        polynomial = variance * polynomial.deriv()
    return np.array(cumulants)


def entropy_cumulant_series(d, segment, k_max=5):
    """Partial sums of S = sum_k 2 zeta(2k) C_A^(2k).

    The even cumulants are exact, from the eigenvalues of the reduced
    density matrix. The series is asymptotic: partial sums approach S when
    every mode is close to 0 or 1 and drift away when modes sit near 1/2.

    Returns:
        np.ndarray: partial sums for k = 1..k_max
    """
    if k_max < 1:
        raise InvalidParameterError(f"k_max must be >= 1, got {k_max}")
    eigenvalues = np.clip(reduced_eigenvalues(d, segment), 0.0, 1.0)
    cumulants = bernoulli_cumulants(eigenvalues, 2 * k_max)
    k = np.arange(1, k_max + 1)
    terms = 2.0 * zeta(2 * k) * cumulants[2 * k - 1]
    return np.cumsum(terms)


def density_correlation_profile(d):
    """delta_{l,0}/2 - |d_{l0+l,l0}|^2 averaged over l0, for l = 0..L/2."""
    d = _as_matrix(d)
    L = d.shape[0]
    weights = np.abs(d) ** 2
    origins = np.arange(L)
    profile = np.array([weights[(origins + l) % L, origins].mean()
                        for l in range(L // 2 + 1)])
    profile = -profile
    profile[0] += 0.5
    return profile


def connected_density_correlation(snapshots, filling_tolerance=0.05):
    """Connected density correlation C_l at half filling.

    Args:
        snapshots (iterable): one entry per trajectory, each an iterable of
            L x L density matrices
        filling_tolerance (float, optional): allowed deviation of the mean
            density from 1/2. Defaults to 0.05.

    Returns:
        EnsembleStatistic: C_l for l = 0..L/2 with trajectory-blocked errors
    """
    per_trajectory = []
    fillings = []
    for trajectory in snapshots:
        matrices = [_as_matrix(d) for d in trajectory]
        if not matrices:
            continue
        per_trajectory.append(np.mean(
            [density_correlation_profile(d) for d in matrices], axis=0))
        fillings.append(np.mean([d.diagonal().real.mean() for d in matrices]))
    return reduce_density_correlation(per_trajectory, fillings,
                                      filling_tolerance)


def reduce_density_correlation(profiles, fillings, filling_tolerance=0.05):
    """Ensemble C_l from per-trajectory profiles and mean fillings."""
    if len(profiles) == 0:
        raise InvalidParameterError("no snapshots to average")
    filling = float(np.mean(fillings))
    if abs(filling - 0.5) > filling_tolerance:
        raise InvalidParameterError(
            f"density correlation assumes half filling, got n={filling:.4f}")
    return EnsembleStatistic.from_trajectory_values(np.asarray(profiles))


def chord_length(ell, L):
    """Chord length (L/pi) sin(pi ell / L)."""
    ell = np.asarray(ell, dtype=float)
    if np.any(ell < 0) or np.any(ell > L):
        raise InvalidParameterError(f"ell must lie in [0, {L}]")
    chord = L / np.pi * np.sin(np.pi * ell / L)
    return float(chord) if chord.ndim == 0 else chord


def inverse_chord_length(chord, L):
    """Length ell in [0, L/2] with the given chord length."""
    ratio = np.clip(np.asarray(chord, dtype=float) * np.pi / L, 0.0, 1.0)
    return L / np.pi * np.arcsin(ratio)


def _greedy_grid(L, epsilon):
    half = L // 2
    largest = chord_length(half, L)
    grid = [1]
    while grid[-1] < half:
        target = chord_length(grid[-1], L) * math.exp(epsilon)
        if target >= largest * (1.0 - 1e-12):
            following = half
        else:
            following = int(round(inverse_chord_length(target, L)))
        grid.append(min(max(following, grid[-1] + 1), half))
    return grid


def build_ell_grid(L, n_ell):
    """Integer lengths 1 = ell_1 < ... < ell_N = L/2 with near-uniform
    chord-ratio exponents ln(chord(ell_{i+1}) / chord(ell_i)).

    The common exponent is found by bisection; below it the grid falls back
    to consecutive integers. Asking for more points than L/2 returns every
    length with a warning.
    """
    if n_ell < 2:
        raise InvalidParameterError(f"n_ell must be >= 2, got {n_ell}")
    if L < 2 or L % 2 != 0:
        raise InvalidParameterError(f"L must be even and >= 2, got {L}")
    half = L // 2
    if n_ell >= half:
        if n_ell > half:
            warnings.warn(f"Requested {n_ell} lengths but only {half} exist; "
                          "returning the full range.")
        return np.arange(1, half + 1)

    low, high = 0.0, math.log(chord_length(half, L))
    for _ in range(100):
        middle = 0.5 * (low + high)
        if len(_greedy_grid(L, middle)) > n_ell:
            low = middle
        else:
            high = middle
    return np.array(_greedy_grid(L, high))


def effective_central_charge(entropies, ell, L, errors=None):
    """Scale-dependent central charge 3 dS / d ln(chord) on grid midpoints.

    Args:
        entropies (array_like): S on the grid
        ell (array_like): grid lengths
        L (int): system size
        errors (array_like, optional): standard errors of S. Defaults to None.

    Returns:
        Curve: c_ell against the geometric mean of neighbouring chords
    """
    entropies = np.asarray(entropies, dtype=float)
    chords = chord_length(np.asarray(ell), L)
    ratio = chords[1:] / chords[:-1]
    if np.any(ratio <= 1.0):
        raise InvalidParameterError("neighbouring chord lengths coincide")
    log_ratio = np.log(ratio)
    values = 3.0 * np.diff(entropies) / log_ratio
    midpoints = np.sqrt(chords[1:] * chords[:-1])
    yerr = None
    if errors is not None:
        errors = np.asarray(errors, dtype=float)
        yerr = 3.0 * np.hypot(errors[1:], errors[:-1]) / np.abs(log_ratio)
    return Curve(midpoints, values, yerr)


@dataclass(frozen=True)
class SegmentLayout:
    """Regions A, B and C laid out contiguously from `origin` on a ring."""

    ell_A: int
    ell_B: int
    ell_C: int
    L: int
    origin: int = 0

    def __post_init__(self):
        lengths = (self.ell_A, self.ell_B, self.ell_C)
        if min(lengths) < 0:
            raise InvalidParameterError(f"negative region length in {lengths}")
        if sum(lengths) > self.L:
            raise InvalidParameterError(
                f"regions {lengths} overlap on a ring of {self.L} sites")

    def region(self, name):
        starts = {"A": 0, "B": self.ell_A, "C": self.ell_A + self.ell_B}
        lengths = {"A": self.ell_A, "B": self.ell_B, "C": self.ell_C}
        return interval(self.origin + starts[name], lengths[name], self.L)

    def sites(self, key):
        return np.concatenate([self.region(name) for name in key])

    def shifted(self, origin):
        return SegmentLayout(self.ell_A, self.ell_B, self.ell_C, self.L,
                             origin)


def layout_entropies(d, layout):
    """Entropies of A, B, C and their unions; empty regions give 0."""
    entropies = {}
    for key in ENTROPY_KEYS:
        sites = layout.sites(key)
        entropies[key] = subsystem_entropy(d, sites) if sites.size else 0.0
    return entropies


def i2_from_entropies(entropies):
    return entropies["A"] + entropies["C"] - entropies["AC"]


def i3_from_entropies(entropies):
    return (entropies["A"] + entropies["B"] + entropies["C"]
            - entropies["AB"] - entropies["BC"] - entropies["AC"]
            + entropies["ABC"])


def mutual_information_I2(d, layout):
    """I2 = S_A + S_C - S_AC."""
    return i2_from_entropies(layout_entropies(d, layout))


def tripartite_I3(d, layout):
    """I3 = S_A + S_B + S_C - S_AB - S_BC - S_AC + S_ABC."""
    return i3_from_entropies(layout_entropies(d, layout))


def cross_ratio(layout, L=None):
    """x = chord(A) chord(C) / (chord(A+B) chord(B+C))."""
    L = layout.L if L is None else L
    denominators = (chord_length(layout.ell_A + layout.ell_B, L),
                    chord_length(layout.ell_B + layout.ell_C, L))
    if min(denominators) <= 0:
        raise InvalidParameterError(
            "composite intervals A+B and B+C must have nonzero chord length")
    return (chord_length(layout.ell_A, L) * chord_length(layout.ell_C, L)
            / (denominators[0] * denominators[1]))


@dataclass
class CollapseCheck:
    residuals: np.ndarray
    relative_residuals: np.ndarray
    max_relative_residual: float
    n_points: int


def cft_collapse_check(I2, I3, x, c, probe=None, window=None):
    """Compare I2 - I3 with (c/3) ln(1/(1-x)).

    Args:
        I2, I3, x (array_like): matched values
        c (float): central charge
        probe (array_like, optional): probe scale of every point.
            Defaults to None.
        window (tuple, optional): (lower, upper) bounds on the probe scale
            for the summary. Defaults to None, which uses every point.

    Returns:
        CollapseCheck: residuals and the largest relative residual
    """
    I2, I3, x = (np.asarray(v, dtype=float) for v in (I2, I3, x))
    if np.any(x >= 1) or np.any(x < 0):
        raise DomainError("cross ratio must lie in [0, 1)")
    prediction = c / 3.0 * np.log(1.0 / (1.0 - x))
    residuals = (I2 - I3) - prediction
    with np.errstate(divide="ignore", invalid="ignore"):
        relative = np.where(prediction != 0, np.abs(residuals / prediction),
                            np.where(residuals == 0, 0.0, np.inf))
    mask = np.ones_like(x, dtype=bool)
    if window is not None:
        if probe is None:
            raise InvalidParameterError("a probe window needs probe scales")
        probe = np.asarray(probe, dtype=float)
        mask = (probe >= window[0]) & (probe <= window[1])
    summary = float(relative[mask].max()) if mask.any() else float("nan")
    return CollapseCheck(residuals, relative, summary, int(mask.sum()))


def entropy_profile(d, ell_grid, origins):
    """Interval entropies on the grid, averaged over reference positions."""
    L = _as_matrix(d).shape[0]
    return np.array([
        np.mean([subsystem_entropy(d, interval(o, ell, L)) for o in origins])
        for ell in ell_grid])


def mutual_information_lengths(ell_grid, L, separation_ratio):
    """Grid lengths ell for which A, B = ratio * ell and C fit on the ring.

    The layout must leave at least one site between C and A, otherwise the
    cross ratio degenerates to 1.
    """
    ell_grid = np.asarray(ell_grid)
    separations = np.rint(separation_ratio * ell_grid).astype(int)
    return ell_grid[2 * ell_grid + separations < L]


def ratio_layouts(lengths, L, separation_ratio):
    """Layouts A = C = ell with B = round(ratio * ell), one per length."""
    return [SegmentLayout(int(ell), int(round(separation_ratio * ell)),
                          int(ell), L)
            for ell in lengths]


def sweep_layouts(collapse_lengths, ell_grid, L):
    """Layouts A = C = ell at fixed ell with B running over the grid.

    Only separations that leave a gap between C and A are kept, so the cross
    ratio sweeps (0, 1) at every fixed length.
    """
    layouts = []
    for ell in collapse_lengths:
        for ell_B in np.asarray(ell_grid):
            if 2 * ell + ell_B < L:
                layouts.append(SegmentLayout(int(ell), int(ell_B), int(ell),
                                             L))
    if not layouts:
        raise InvalidParameterError(
            f"no layout of lengths {list(collapse_lengths)} fits on L={L}")
    return layouts


def layout_columns(layouts):
    """Per-layout ell, ell_B, cross ratio and probe chord chord(ell_B)."""
    L = layouts[0].L
    ell_B = np.array([layout.ell_B for layout in layouts])
    return {
        "ell": np.array([layout.ell_A for layout in layouts]),
        "ell_B": ell_B,
        "cross_ratio": np.array([cross_ratio(layout) for layout in layouts]),
        "probe_chord": chord_length(ell_B, L),
    }


def layout_entropy_profile(d, layouts, origins):
    """Layout entropies averaged over origins, shape (len(layouts), 7).

    Columns follow ENTROPY_KEYS.
    """
    return np.array([
        np.mean([[layout_entropies(d, layout.shifted(o))[key]
                  for key in ENTROPY_KEYS]
                 for o in origins], axis=0)
        for layout in layouts])
