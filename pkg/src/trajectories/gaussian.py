# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#
"""Quantum-jump trajectories of Gaussian fermionic states.

A trajectory is a Slater determinant, so its full state is the single-particle
density matrix D_{l,l'} = <psi^dag_{l'} psi_l>. Between jumps the state evolves
with the nearest-neighbour hopping Hamiltonian on a ring. Jumps are loss and
gain (fermion counting) or occupation projections (occupation measurement).

For both models the sum over jump operators of L^dag L is proportional to the
identity on the sector the trajectory lives in: gamma * L for fermion counting
(n_l + (1 - n_l) = 1 on every site) and 2 gamma * N for occupation
measurement (N is conserved). The non-Hermitian part of the effective
Hamiltonian is therefore a constant, it only shrinks the norm uniformly, and
the no-jump evolution is purely unitary after normalization. Waiting times
are exact exponential variates with the constant total rate, and no norm is
tracked.

Random draws follow a fixed order: one uniform for the waiting time, then one
uniform for the jump outcome. The exact Fock-space engine consumes the same
stream in the same order, which makes the two engines comparable jump by jump.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional

import numpy as np

from common.errors import (
    DegenerateJumpError,
    InternalInconsistencyError,
    InvalidParameterError,
    InvariantViolationError,
)
from common.logging import logger
from .models import JumpEvent, JumpKind, ModelKind

EPS_JUMP = 1e-10
PROBABILITY_CLAMP = 1e-12
PURITY_TOLERANCE = 1e-8
HERMITICITY_TOLERANCE = 1e-10
DIAGONAL_TOLERANCE = 1e-10
TRACE_TOLERANCE = 1e-8


class SingleParticleDensityMatrix:
    """Gaussian state D_{l,l'} = <psi^dag_{l'} psi_l> at a trajectory time.

    Args:
        d (array_like): L x L Hermitian matrix
        time (float, optional): trajectory time. Defaults to 0.0.
    """

    def __init__(self, d, time=0.0):
        d = np.array(d, dtype=complex)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InvalidParameterError(
                f"density matrix must be square, got shape {d.shape}")
        self.d = d
        self.time = float(time)

    @property
    def L(self):
        return self.d.shape[0]

    def occupations(self):
        return self.d.diagonal().real.copy()

    def particle_number(self):
        return float(np.trace(self.d).real)

    def z_values(self):
        """z_l = 2 d_ll - 1, i.e. +1 occupied and -1 empty."""
        return 2.0 * self.occupations() - 1.0

    def purity_defect(self):
        return float(np.abs(self.d @ self.d - self.d).max())

    def hermiticity_defect(self):
        return float(np.abs(self.d - self.d.conj().T).max())

    def copy(self):
        return SingleParticleDensityMatrix(self.d.copy(), self.time)

    def evolve(self, tau, J=1.0):
        return evolve_unitary(self, tau, J)

    def apply_jump(self, kind, m):
        return apply_jump(self, kind, m)

    def __repr__(self):
        return (f"SingleParticleDensityMatrix(L={self.L}, "
                f"N={self.particle_number():.6g}, time={self.time:.6g})")


@dataclass
class SampledTrajectory:
    """Record of one trajectory on the sample grid.

    Attributes:
        times (np.ndarray): sample times, shape (n_t,)
        z (np.ndarray): z_l at each sample time, shape (n_t, L)
        jump_counts (np.ndarray): cumulative per-site jump counts N_l(t) of
            all kinds, shape (n_t, L)
        jumps (list): every JumpEvent in order
        seed (int): stream seed of the trajectory
        model (ModelKind): measurement model
        snapshots (list, optional): density matrices at the sample times
        observations (dict): values returned by observers, keyed by name
    """

    times: np.ndarray
    z: np.ndarray
    jump_counts: np.ndarray
    jumps: List[JumpEvent]
    seed: int
    model: ModelKind
    snapshots: Optional[List[np.ndarray]] = None
    observations: dict = field(default_factory=dict)

    @property
    def n_jumps(self):
        return len(self.jumps)

    @property
    def L(self):
        return self.z.shape[1]


def init_neel(L):
    """Néel state with sites 0, 2, 4, ... occupied.

    Args:
        L (int): even lattice size

    Returns:
        SingleParticleDensityMatrix: diagonal state with N = L/2
    """
    if not isinstance(L, (int, np.integer)) or L < 2 or L % 2 != 0:
        raise InvalidParameterError(f"L must be even and >= 2, got {L}")
    occupations = np.zeros(L)
    occupations[0::2] = 1.0
    return SingleParticleDensityMatrix(np.diag(occupations))


def init_random_classical(L, N, rng):
    """Uniformly random classical configuration with N particles.

    Args:
        L (int): lattice size
        N (int): number of particles, 0 <= N <= L
        rng (np.random.Generator): random number generator

    Returns:
        SingleParticleDensityMatrix: diagonal 0/1 state
    """
    if L < 1:
        raise InvalidParameterError(f"L must be positive, got {L}")
    if N < 0 or N > L:
        raise InvalidParameterError(f"N must lie in [0, {L}], got {N}")
    occupations = np.zeros(L)
    occupations[rng.choice(L, size=N, replace=False)] = 1.0
    return SingleParticleDensityMatrix(np.diag(occupations))


@lru_cache(maxsize=64)
def dispersion(L, J):
    """xi_k = -2J cos(2 pi k / L) in FFT order."""
    xi = -2.0 * J * np.cos(2.0 * np.pi * np.arange(L) / L)
    xi.setflags(write=False)
    return xi


def evolve_unitary(state, tau, J=1.0):
    """Conjugate D with the hopping propagator, D <- U D U^dag.

    U = F^dag diag(exp(-i xi tau)) F is applied with FFTs along rows and
    columns, which is exact for periodic boundary conditions.

    Args:
        state (SingleParticleDensityMatrix): state at time t
        tau (float): duration, tau >= 0
        J (float, optional): hopping amplitude. Defaults to 1.0.

    Returns:
        SingleParticleDensityMatrix: state at time t + tau
    """
    if tau < 0:
        raise InvalidParameterError(f"tau must be non-negative, got {tau}")
    if tau == 0 or J == 0:
        return SingleParticleDensityMatrix(state.d, state.time + tau)
    phase = np.exp(-1j * dispersion(state.L, float(J)) * tau)
    a = np.fft.fft(state.d, axis=0, norm="ortho")
    a *= phase[:, None]
    a = np.fft.ifft(a, axis=0, norm="ortho")
    a = np.fft.ifft(a, axis=1, norm="ortho")
    a *= phase.conj()[None, :]
    a = np.fft.fft(a, axis=1, norm="ortho")
    return SingleParticleDensityMatrix(a, state.time + tau)


def single_particle_propagator(L, J, tau):
    """Dense single-particle propagator U = exp(-i h tau) on the ring."""
    phase = np.exp(-1j * dispersion(L, float(J)) * tau)
    F = np.fft.fft(np.eye(L), axis=0, norm="ortho")
    return np.fft.ifft(phase[:, None] * F, axis=0, norm="ortho")


def total_jump_rate(params, state):
    """gamma L for fermion counting, 2 gamma N for occupation measurement."""
    if params.model is ModelKind.FERMION_COUNTING:
        return params.gamma * state.L
    return 2.0 * params.gamma * max(state.particle_number(), 0.0)


def sample_waiting_time(params, state, rng):
    """Exponential waiting time until the next jump.

    Returns:
        float: waiting time, math.inf when the total rate vanishes
    """
    u = rng.random()
    rate = total_jump_rate(params, state)
    if rate <= 0:
        return math.inf
    return -math.log1p(-u) / rate


def jump_distribution(params, occupations):
    """Outcome table of the next jump.

    Fermion counting orders outcomes as all losses by site, then all gains by
    site; occupation measurement has one outcome per site.

    Args:
        params (SimParams): model definition
        occupations (np.ndarray): d_ll

    Returns:
        tuple: kinds (list of JumpKind), sites (np.ndarray) and normalized
            probabilities (np.ndarray)
    """
    L = len(occupations)
    sites = np.arange(L)
    if params.model is ModelKind.FERMION_COUNTING:
        p = np.concatenate([occupations, 1.0 - occupations]) / L
        kinds = [JumpKind.LOSS] * L + [JumpKind.GAIN] * L
        sites = np.concatenate([sites, sites])
    else:
        n_particles = occupations.sum()
        if n_particles <= PROBABILITY_CLAMP:
            raise InternalInconsistencyError(
                "occupation jump requested on an empty lattice")
        p = occupations / n_particles
        kinds = [JumpKind.OCCUPATION] * L
    p = np.where(np.abs(p) < PROBABILITY_CLAMP, 0.0, p)
    if np.any(p < 0):
        raise InternalInconsistencyError(
            f"negative jump probability {p.min():.3g}")
    total = p.sum()
    if total <= 0:
        raise InternalInconsistencyError("all jump probabilities vanish")
    return kinds, sites, p / total


def sample_jump(params, state, rng):
    """Draw the kind and site of the next jump at the current state time."""
    u = rng.random()
    kinds, sites, p = jump_distribution(params, state.occupations())
    cdf = np.cumsum(p)
    index = int(np.searchsorted(cdf, u, side="right"))
    if index >= len(p):
        index = int(np.flatnonzero(p > 0)[-1])
    return JumpEvent(state.time, int(sites[index]), kinds[index])


def _unit_vector(L, m):
    e = np.zeros(L, dtype=complex)
    e[m] = 1.0
    return e


def _finish_jump(d, m, occupied, time):
    d[m, :] = 0.0
    d[:, m] = 0.0
    if occupied:
        d[m, m] = 1.0
    d = 0.5 * (d + d.conj().T)
    return SingleParticleDensityMatrix(d, time)


def apply_loss(state, m):
    """Remove a particle at site m, ψ_m|Ψ> normalized."""
    d = state.d
    weight = d[m, m].real
    if weight <= EPS_JUMP:
        raise DegenerateJumpError(
            f"loss at site {m} with weight {weight:.3g}",
            site=m, kind=JumpKind.LOSS.value, weight=weight)
    new = d - np.outer(d[:, m], d[m, :]) / weight
    return _finish_jump(new, m, False, state.time)


def apply_gain(state, m):
    """Add a particle at site m, ψ^dag_m|Ψ> normalized."""
    d = state.d
    weight = 1.0 - d[m, m].real
    if weight <= EPS_JUMP:
        raise DegenerateJumpError(
            f"gain at site {m} with weight {weight:.3g}",
            site=m, kind=JumpKind.GAIN.value, weight=weight)
    e = _unit_vector(state.L, m)
    new = d + np.outer(e - d[:, m], e - d[m, :]) / weight
    return _finish_jump(new, m, True, state.time)


def apply_occupation(state, m):
    """Project onto site m occupied, n_m|Ψ> normalized."""
    d = state.d
    weight = d[m, m].real
    if weight <= EPS_JUMP:
        raise DegenerateJumpError(
            f"occupation jump at site {m} with weight {weight:.3g}",
            site=m, kind=JumpKind.OCCUPATION.value, weight=weight)
    new = d - np.outer(d[:, m], d[m, :]) / weight
    return _finish_jump(new, m, True, state.time)


_JUMPS = {
    JumpKind.LOSS: apply_loss,
    JumpKind.GAIN: apply_gain,
    JumpKind.OCCUPATION: apply_occupation,
}


def apply_jump(state, kind, m):
    return _JUMPS[JumpKind(kind)](state, m)


def check_invariants(state, params, n0, net_gain=0):
    """Raise InvariantViolationError if the state left the Slater manifold.

    Args:
        state (SingleParticleDensityMatrix): state to check
        params (SimParams): model definition
        n0 (float): initial particle number
        net_gain (int, optional): gains minus losses so far. Defaults to 0.
    """
    purity = state.purity_defect()
    if purity >= PURITY_TOLERANCE:
        raise InvariantViolationError(
            f"purity defect {purity:.3g} at t={state.time:.6g}")
    hermiticity = state.hermiticity_defect()
    if hermiticity >= HERMITICITY_TOLERANCE:
        raise InvariantViolationError(
            f"hermiticity defect {hermiticity:.3g} at t={state.time:.6g}")
    occupations = state.occupations()
    if (occupations.min() < -DIAGONAL_TOLERANCE
            or occupations.max() > 1.0 + DIAGONAL_TOLERANCE):
        raise InvariantViolationError(
            f"occupation outside [0, 1] at t={state.time:.6g}")
    expected = n0 if params.model.conserves_particles else n0 + net_gain
    drift = abs(state.particle_number() - expected)
    if drift >= TRACE_TOLERANCE:
        raise InvariantViolationError(
            f"particle number {state.particle_number():.12g} differs from "
            f"{expected} at t={state.time:.6g}")


def propagate(params, state, rng, sample_times, on_sample, on_jump=None):
    """Run the jump loop and stop at every sample time.

    Works with any state exposing `time`, `L`, `occupations()`,
    `particle_number()`, `evolve(tau, J)` and `apply_jump(kind, m)`.

    Args:
        params (SimParams): model definition
        state: initial state
        rng (np.random.Generator): stream consumed in the documented order
        sample_times (array_like): increasing times >= state.time
        on_sample (callable): called as on_sample(index, state)
        on_jump (callable, optional): called as on_jump(event, state) with
            the post-jump state. Defaults to None.

    Returns:
        the state at the last sample time
    """
    next_jump = state.time + sample_waiting_time(params, state, rng)
    for index, t_sample in enumerate(sample_times):
        if t_sample < state.time:
            raise InvalidParameterError(
                f"sample time {t_sample} precedes state time {state.time}")
        while next_jump <= t_sample:
            state = state.evolve(next_jump - state.time, params.J)
            event = sample_jump(params, state, rng)
            state = state.apply_jump(event.kind, event.site)
            if on_jump is not None:
                on_jump(event, state)
            next_jump = state.time + sample_waiting_time(params, state, rng)
        state = state.evolve(t_sample - state.time, params.J)
        on_sample(index, state)
    return state


def propagate_jumps(params, state, rng, n_jumps, on_jump):
    """Run the jump loop for a fixed number of jumps.

    Returns:
        the state right after the last jump
    """
    for _ in range(n_jumps):
        tau = sample_waiting_time(params, state, rng)
        if math.isinf(tau):
            break
        state = state.evolve(tau, params.J)
        event = sample_jump(params, state, rng)
        state = state.apply_jump(event.kind, event.site)
        on_jump(event, state)
    return state


def initial_state(params, rng):
    if params.initial_state == "neel":
        return init_neel(params.L)
    return init_random_classical(params.L, params.L // 2, rng)


def run_trajectory(params, observers=None, record_snapshots=False, seed=None):
    """Sample one trajectory on the grid of `params`.

    Args:
        params (SimParams): experiment definition
        observers (dict, optional): maps a name to a callable
            observer(state) evaluated at every sample time; the results are
            stored in `observations[name]`. Defaults to None.
        record_snapshots (bool, optional): keep D at every sample time.
            Defaults to False.
        seed (int, optional): stream seed, overrides params.seed.
            Defaults to None.

    Returns:
        SampledTrajectory: the sampled record
    """
    seed = params.seed if seed is None else int(seed)
    observers = observers or {}
    rng = np.random.default_rng(seed)
    state = initial_state(params, rng)
    n0 = state.particle_number()

    times = params.sample_times()
    z = np.empty((len(times), params.L))
    jump_counts = np.zeros((len(times), params.L), dtype=np.int64)
    running = np.zeros(params.L, dtype=np.int64)
    jumps = []
    snapshots = [] if record_snapshots else None
    observations = {name: [] for name in observers}
    bookkeeping = {"net_gain": 0}

    def on_jump(event, new_state):
        jumps.append(event)
        running[event.site] += 1
        if event.kind is JumpKind.GAIN:
            bookkeeping["net_gain"] += 1
        elif event.kind is JumpKind.LOSS:
            bookkeeping["net_gain"] -= 1
        if len(jumps) % params.check_every == 0:
            check_invariants(new_state, params, n0, bookkeeping["net_gain"])

    def on_sample(index, sampled):
        z[index] = sampled.z_values()
        jump_counts[index] = running
        if snapshots is not None:
            snapshots.append(sampled.d.copy())
        for name, observer in observers.items():
            observations[name].append(observer(sampled))

    try:
        state = propagate(params, state, rng, times, on_sample, on_jump)
    except DegenerateJumpError as err:
        raise err.with_context(seed=seed, model=params.model.value,
                               n_jumps=len(jumps))
    check_invariants(state, params, n0, bookkeeping["net_gain"])
    logger.debug(f"Trajectory seed={seed} finished with {len(jumps)} jumps")

    return SampledTrajectory(
        times=times, z=z, jump_counts=jump_counts, jumps=jumps, seed=seed,
        model=params.model, snapshots=snapshots,
        observations={k: np.asarray(v) for k, v in observations.items()})


def empirical_jump_rate(trajectory):
    """Jumps per unit time per site over the sampled window."""
    window = trajectory.times[-1] - trajectory.times[0]
    if window <= 0:
        raise InvalidParameterError("sample window has zero length")
    n_jumps = (trajectory.jump_counts[-1].sum()
               - trajectory.jump_counts[0].sum())
    return float(n_jumps) / (window * trajectory.L)
