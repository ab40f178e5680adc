# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#

import numpy as np
import pytest

from common.errors import CapacityError, DegenerateJumpError
from observables.equal_time import fermi_sea_orbitals, subsystem_entropy
from trajectories.fock import (
    FockState,
    annihilation_operator,
    creation_operator,
    lockstep_compare,
    oracle_apply_jump,
    oracle_classical,
    oracle_density_matrix,
    oracle_evolve,
    oracle_neel,
    oracle_slater,
    oracle_subsystem_entropy,
)
from trajectories.gaussian import apply_jump, evolve_unitary, init_neel
from trajectories.models import JumpKind, ModelKind, SimParams


def test_canonical_anticommutators():
    L = 3
    identity = np.eye(2 ** L)
    for i in range(L):
        for j in range(L):
            anti = (annihilation_operator(L, i) @ creation_operator(L, j)
                    + creation_operator(L, j) @ annihilation_operator(L, i))
            assert np.allclose(anti.toarray(), identity * (i == j))
            a_i, a_j = annihilation_operator(L, i), annihilation_operator(L, j)
            same = a_i @ a_j + a_j @ a_i
            assert np.allclose(same.toarray(), 0.0)


def test_neel_density_matrix_matches_gaussian():
    assert np.array_equal(oracle_density_matrix(oracle_neel(6)).d,
                          init_neel(6).d)


def test_evolution_matches_gaussian_engine(evolved_neel):
    state = oracle_evolve(oracle_neel(6), 0.5, J=1.0)
    assert state.norm() == pytest.approx(1.0, abs=1e-12)
    difference = oracle_density_matrix(state).d - evolved_neel.d
    assert np.abs(difference).max() < 1e-10


@pytest.mark.parametrize("kind, site", [
    (JumpKind.LOSS, 2),
    (JumpKind.GAIN, 4),
    (JumpKind.OCCUPATION, 1),
])
def test_jump_updates_match_gaussian_engine(evolved_neel, kind, site):
    oracle = oracle_evolve(oracle_neel(6), 0.5, J=1.0)
    new_oracle, weight = oracle_apply_jump(oracle, kind, site)
    n_m = evolved_neel.d[site, site].real
    expected_weight = 1.0 - n_m if kind is JumpKind.GAIN else n_m
    assert weight == pytest.approx(expected_weight, abs=1e-12)
    gaussian = apply_jump(evolved_neel, kind, site)
    assert np.abs(oracle_density_matrix(new_oracle).d
                  - gaussian.d).max() < 1e-10


def test_degenerate_oracle_jump():
    with pytest.raises(DegenerateJumpError):
        oracle_apply_jump(oracle_classical([1, 0]), JumpKind.LOSS, 1)


@pytest.mark.parametrize("L", [2, 4, 6, 8])
def test_lockstep_equivalence(L, model):
    params = SimParams(L=L, J=1.0, gamma=1.0, model=model, seed=100 + L)
    report = lockstep_compare(params, 200)
    assert report.records_match
    assert report.n_jumps == 200
    assert report.max_density_difference < 1e-10
    assert report.max_trace_drift < 1e-8
    assert report.passed


def test_lockstep_without_hopping_is_telegraph():
    params = SimParams(L=2, J=0.0, gamma=1.0, seed=3)
    report = lockstep_compare(params, 50)
    assert report.passed
    for event in report.jumps_gaussian:
        assert event.kind in (JumpKind.LOSS, JumpKind.GAIN)


def test_capacity_limit():
    with pytest.raises(CapacityError):
        lockstep_compare(SimParams(L=12, gamma=1.0), 10)
    with pytest.raises(CapacityError):
        FockState(np.ones(2 ** 11))


def test_slater_state_density_matrix():
    orbitals = fermi_sea_orbitals(6, 3)
    state = oracle_slater(orbitals)
    assert state.particle_number() == pytest.approx(3.0, abs=1e-12)
    expected = orbitals @ orbitals.conj().T
    assert np.abs(oracle_density_matrix(state).d - expected).max() < 1e-12


@pytest.mark.parametrize("ell", range(1, 8))
def test_fermi_sea_entropy_matches_schmidt_spectrum(ell):
    orbitals = fermi_sea_orbitals(8, 3)
    state = oracle_slater(orbitals)
    d = orbitals @ orbitals.conj().T
    assert oracle_subsystem_entropy(state, ell) == pytest.approx(
        subsystem_entropy(d, np.arange(ell)), abs=1e-9)


def test_gaussian_entropy_after_jumps_matches_oracle():
    params = SimParams(L=6, gamma=1.0, model=ModelKind.OCCUPATION_MEASUREMENT)
    gaussian = evolve_unitary(init_neel(6), 0.4)
    oracle = oracle_evolve(oracle_neel(6), 0.4)
    for site in (0, 3):
        gaussian = apply_jump(gaussian, JumpKind.OCCUPATION, site)
        oracle, _ = oracle_apply_jump(oracle, JumpKind.OCCUPATION, site)
        gaussian = evolve_unitary(gaussian, 0.3, params.J)
        oracle = oracle_evolve(oracle, 0.3, params.J)
    for ell in (1, 2, 3):
        assert oracle_subsystem_entropy(oracle, ell) == pytest.approx(
            subsystem_entropy(gaussian, np.arange(ell)), abs=1e-9)
