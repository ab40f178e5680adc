# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#
"""Exact many-body trajectories in the full Fock space.

Basis states are labelled by the integer b = sum_j n_j 2^j, so site 0 is the
least significant bit. The Jordan-Wigner string of site m runs over the sites
j < m: psi_m |b> = (-1)^(n_0 + ... + n_{m-1}) |b - 2^m> when site m is
occupied. The full 2^L space is used for both measurement models.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List

import numpy as np
from scipy import sparse
from scipy.special import xlogy

from common.errors import (
    CapacityError,
    DegenerateJumpError,
    InvalidParameterError,
)
from common.logging import logger
from .gaussian import (
    EPS_JUMP,
    SingleParticleDensityMatrix,
    apply_jump,
    sample_jump,
    sample_waiting_time,
)
from .models import JumpKind

MAX_SITES = 10


def _check_capacity(L):
    if L > MAX_SITES:
        raise CapacityError(
            f"Fock-space oracle holds at most {MAX_SITES} sites, got {L}")
    if L < 1:
        raise InvalidParameterError(f"L must be positive, got {L}")


@lru_cache(maxsize=None)
def annihilation_operator(L, m):
    """Sparse psi_m on the 2^L dimensional Fock space."""
    _check_capacity(L)
    index = np.arange(2 ** L)
    occupied = ((index >> m) & 1) == 1
    parity = np.zeros(2 ** L, dtype=np.int64)
    for j in range(m):
        parity += (index >> j) & 1
    sign = np.where(parity % 2 == 0, 1.0, -1.0)
    cols = index[occupied]
    rows = cols ^ (1 << m)
    op = sparse.csr_matrix((sign[occupied], (rows, cols)),
                           shape=(2 ** L, 2 ** L))
    op.eliminate_zeros()
    return op


@lru_cache(maxsize=None)
def creation_operator(L, m):
    return sparse.csr_matrix(annihilation_operator(L, m).conj().T)


@lru_cache(maxsize=None)
def number_operator(L, m):
    index = np.arange(2 ** L)
    data = ((index >> m) & 1).astype(float)
    return sparse.dia_matrix((data[None, :], [0]),
                             shape=(2 ** L, 2 ** L)).tocsr()


@lru_cache(maxsize=None)
def occupation_table(L):
    """0/1 occupations of every basis state, shape (2^L, L)."""
    index = np.arange(2 ** L)
    return ((index[:, None] >> np.arange(L)[None, :]) & 1).astype(float)


@lru_cache(maxsize=8)
def hopping_eigensystem(L, J):
    """Eigen-decomposition of H = -J sum_l (psi^dag_l psi_{l+1} + h.c.).

    Bonds are (l, (l+1) mod L), so for L = 2 the single bond appears twice and
    the hopping amplitude is 2J, as for the ring dispersion.
    """
    _check_capacity(L)
    H = sparse.csr_matrix((2 ** L, 2 ** L), dtype=float)
    for l in range(L):
        r = (l + 1) % L
        hop = creation_operator(L, l) @ annihilation_operator(L, r)
        H = H - J * (hop + hop.conj().T)
    energies, vectors = np.linalg.eigh(H.toarray())
    logger.debug(f"Diagonalized Fock-space hopping model for L={L}, J={J}")
    return energies, vectors


class FockState:
    """Many-body state vector at a trajectory time.

    Args:
        amplitudes (array_like): vector of dimension 2^L
        time (float, optional): trajectory time. Defaults to 0.0.
    """

    def __init__(self, amplitudes, time=0.0):
        amplitudes = np.array(amplitudes, dtype=complex)
        L = int(round(math.log2(len(amplitudes))))
        if 2 ** L != len(amplitudes):
            raise InvalidParameterError(
                f"dimension {len(amplitudes)} is not a power of two")
        _check_capacity(L)
        self.amplitudes = amplitudes
        self.time = float(time)
        self.L = L
        self.born_weight = None

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self):
        return np.abs(self.amplitudes) ** 2

    def occupations(self):
        return self.probabilities() @ occupation_table(self.L)

    def particle_number(self):
        return float(self.occupations().sum())

    def evolve(self, tau, J=1.0):
        return oracle_evolve(self, tau, J)

    def apply_jump(self, kind, m):
        state, weight = oracle_apply_jump(self, kind, m)
        state.born_weight = weight
        return state


def oracle_classical(occupations):
    """Product state with the given 0/1 site occupations."""
    occupations = np.asarray(occupations)
    _check_capacity(len(occupations))
    if not np.all((occupations == 0) | (occupations == 1)):
        raise InvalidParameterError("occupations must be 0 or 1")
    b = int(sum(1 << j for j, n in enumerate(occupations) if n))
    amplitudes = np.zeros(2 ** len(occupations), dtype=complex)
    amplitudes[b] = 1.0
    return FockState(amplitudes)


def oracle_neel(L):
    """Néel product state, sites 0, 2, 4, ... occupied."""
    if L < 2 or L % 2 != 0:
        raise InvalidParameterError(f"L must be even and >= 2, got {L}")
    occupations = np.zeros(L, dtype=int)
    occupations[0::2] = 1
    return oracle_classical(occupations)


def oracle_slater(orbitals):
    """Slater determinant prod_k (sum_j phi_jk psi^dag_j) |0>.

    Args:
        orbitals (array_like): shape (L, N), orthonormal columns

    Returns:
        FockState: normalized many-body state
    """
    orbitals = np.atleast_2d(np.asarray(orbitals, dtype=complex))
    L = orbitals.shape[0]
    _check_capacity(L)
    amplitudes = np.zeros(2 ** L, dtype=complex)
    amplitudes[0] = 1.0
    for k in range(orbitals.shape[1]):
        created = orbitals[0, k] * (creation_operator(L, 0) @ amplitudes)
        for j in range(1, L):
            created = created + orbitals[j, k] * (
                creation_operator(L, j) @ amplitudes)
        amplitudes = created
    norm = np.linalg.norm(amplitudes)
    if norm <= EPS_JUMP:
        raise InvalidParameterError("orbitals are linearly dependent")
    return FockState(amplitudes / norm)


def oracle_evolve(state, tau, J=1.0):
    """Apply exp(-i H tau) with the cached many-body eigenbasis."""
    if tau < 0:
        raise InvalidParameterError(f"tau must be non-negative, got {tau}")
    if tau == 0:
        return FockState(state.amplitudes, state.time)
    energies, vectors = hopping_eigensystem(state.L, float(J))
    coefficients = vectors.conj().T @ state.amplitudes
    amplitudes = vectors @ (np.exp(-1j * energies * tau) * coefficients)
    return FockState(amplitudes, state.time + tau)


_OPERATORS = {
    JumpKind.LOSS: annihilation_operator,
    JumpKind.GAIN: creation_operator,
    JumpKind.OCCUPATION: number_operator,
}


def oracle_apply_jump(state, kind, m):
    """Apply a jump operator and renormalize.

    Args:
        state (FockState): state before the jump
        kind (JumpKind): loss, gain or occupation
        m (int): site

    Returns:
        tuple: post-jump FockState and the Born weight ||O|Psi>||^2
    """
    kind = JumpKind(kind)
    amplitudes = _OPERATORS[kind](state.L, m) @ state.amplitudes
    weight = float(np.vdot(amplitudes, amplitudes).real)
    if weight <= EPS_JUMP:
        raise DegenerateJumpError(
            f"{kind.value} at site {m} has Born weight {weight:.3g}",
            site=m, kind=kind.value, weight=weight)
    return FockState(amplitudes / math.sqrt(weight), state.time), weight


def oracle_density_matrix(state):
    """D_{l,l'} = <psi^dag_{l'} psi_l> of a Fock state."""
    lowered = np.array([annihilation_operator(state.L, l) @ state.amplitudes
                        for l in range(state.L)])
    return SingleParticleDensityMatrix(lowered @ lowered.conj().T, state.time)


def oracle_subsystem_entropy(state, ell):
    """Von Neumann entropy of sites 0..ell-1 from the Schmidt spectrum.

    The block is leading in the Jordan-Wigner order, so the spin and fermion
    reduced density matrices coincide.
    """
    if ell < 0 or ell > state.L:
        raise InvalidParameterError(f"ell must lie in [0, {state.L}]")
    if ell in (0, state.L):
        return 0.0
    matrix = state.amplitudes.reshape(2 ** (state.L - ell), 2 ** ell)
    weights = np.linalg.svd(matrix, compute_uv=False) ** 2
    weights = weights / weights.sum()
    return float(-xlogy(weights, weights).sum())


@dataclass
class LockstepReport:
    """Outcome of running both engines on one random stream."""

    n_jumps: int
    jumps_gaussian: List = field(default_factory=list)
    jumps_oracle: List = field(default_factory=list)
    max_density_difference: float = 0.0
    max_weight_difference: float = 0.0
    max_trace_drift: float = 0.0
    records_match: bool = True
    tolerance: float = 1e-10

    @property
    def passed(self):
        return (self.records_match
                and self.max_density_difference < self.tolerance
                and self.max_weight_difference < self.tolerance)

    def summary(self):
        return {
            "n_jumps": self.n_jumps,
            "records_match": self.records_match,
            "max_density_difference": self.max_density_difference,
            "max_weight_difference": self.max_weight_difference,
            "max_trace_drift": self.max_trace_drift,
            "passed": self.passed,
        }


def _gaussian_weight(state, kind, m):
    n_m = state.d[m, m].real
    return 1.0 - n_m if kind is JumpKind.GAIN else n_m


def lockstep_compare(params, n_jumps, initial_occupations=None,
                     tolerance=1e-10):
    """Drive the Gaussian and Fock engines with identically seeded streams.

    Args:
        params (SimParams): model definition, L <= 10
        n_jumps (int): number of jumps to compare
        initial_occupations (array_like, optional): classical initial state.
            Defaults to the Néel pattern.
        tolerance (float, optional): density-matrix agreement threshold.
            Defaults to 1e-10.

    Returns:
        LockstepReport: jump records and worst-case differences
    """
    _check_capacity(params.L)
    if initial_occupations is None:
        initial_occupations = np.zeros(params.L, dtype=int)
        initial_occupations[0::2] = 1
    initial_occupations = np.asarray(initial_occupations)
    gaussian = SingleParticleDensityMatrix(
        np.diag(initial_occupations.astype(float)))
    oracle = oracle_classical(initial_occupations)
    n0 = gaussian.particle_number()
    rng_gaussian = np.random.default_rng(params.seed)
    rng_oracle = np.random.default_rng(params.seed)
    report = LockstepReport(n_jumps=0, tolerance=tolerance)
    net_gain = 0

    for _ in range(n_jumps):
        tau_gaussian = sample_waiting_time(params, gaussian, rng_gaussian)
        tau_oracle = sample_waiting_time(params, oracle, rng_oracle)
        if math.isinf(tau_gaussian) or math.isinf(tau_oracle):
            report.records_match = math.isinf(tau_gaussian) == math.isinf(
                tau_oracle)
            break
        gaussian = gaussian.evolve(tau_gaussian, params.J)
        oracle = oracle.evolve(tau_oracle, params.J)
        event_gaussian = sample_jump(params, gaussian, rng_gaussian)
        event_oracle = sample_jump(params, oracle, rng_oracle)
        report.jumps_gaussian.append(event_gaussian)
        report.jumps_oracle.append(event_oracle)
        if (event_gaussian.site, event_gaussian.kind) != (
                event_oracle.site, event_oracle.kind):
            report.records_match = False
            logger.warning(f"Jump records diverge after {report.n_jumps} "
                           f"jumps: {event_gaussian} vs {event_oracle}")
            break

        weight = _gaussian_weight(gaussian, event_gaussian.kind,
                                  event_gaussian.site)
        gaussian = apply_jump(gaussian, event_gaussian.kind,
                              event_gaussian.site)
        oracle, oracle_weight = oracle_apply_jump(
            oracle, event_oracle.kind, event_oracle.site)
        report.n_jumps += 1
        if event_gaussian.kind is JumpKind.GAIN:
            net_gain += 1
        elif event_gaussian.kind is JumpKind.LOSS:
            net_gain -= 1

        difference = np.abs(oracle_density_matrix(oracle).d - gaussian.d)
        expected = n0 if params.model.conserves_particles else n0 + net_gain
        report.max_density_difference = max(report.max_density_difference,
                                            float(difference.max()))
        report.max_weight_difference = max(report.max_weight_difference,
                                           abs(weight - oracle_weight))
        report.max_trace_drift = max(
            report.max_trace_drift,
            abs(gaussian.particle_number() - expected))

    logger.info(f"Lockstep L={params.L} model={params.model.value}: "
                f"{report.n_jumps} jumps, "
                f"max|dD|={report.max_density_difference:.3g}, "
                f"passed={report.passed}")
    return report
