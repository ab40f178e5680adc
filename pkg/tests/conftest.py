# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#

import numpy as np
import pytest

from trajectories.gaussian import (
    SingleParticleDensityMatrix,
    evolve_unitary,
    init_neel,
)
from trajectories.models import ModelKind, SimParams


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def evolved_neel():
    """Néel state on six sites after a generic unitary segment."""
    return evolve_unitary(init_neel(6), 0.5, J=1.0)


@pytest.fixture
def random_slater(rng):
    """Random pure Gaussian state with L = 8 and N = 3."""
    L, N = 8, 3
    matrix = rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L))
    q, _ = np.linalg.qr(matrix)
    orbitals = q[:, :N]
    return SingleParticleDensityMatrix(orbitals @ orbitals.conj().T)


@pytest.fixture(params=[ModelKind.FERMION_COUNTING,
                        ModelKind.OCCUPATION_MEASUREMENT],
                ids=["fc", "om"])
def model(request):
    return request.param


def small_params(**overrides):
    values = dict(L=6, J=1.0, gamma=1.0, seed=5, t_burn=1.0, t_sample=2.0,
                  dt_sample=0.25, n_traj=4)
    values.update(overrides)
    return SimParams(**values)


@pytest.fixture
def make_params():
    return small_params
