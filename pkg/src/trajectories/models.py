# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#

from dataclasses import dataclass
from enum import Enum
from typing import Literal, Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_validator,
    model_validator,
)


class JumpKind(str, Enum):
    """Kind of a detected quantum jump."""

    LOSS = "loss"
    GAIN = "gain"
    OCCUPATION = "occupation"


class ModelKind(str, Enum):
    """Measurement model: monitored loss and gain, or occupation numbers."""

    FERMION_COUNTING = "fermion_counting"
    OCCUPATION_MEASUREMENT = "occupation_measurement"

    @property
    def jump_kinds(self):
        if self is ModelKind.FERMION_COUNTING:
            return (JumpKind.LOSS, JumpKind.GAIN)
        return (JumpKind.OCCUPATION,)

    @property
    def conserves_particles(self):
        return self is ModelKind.OCCUPATION_MEASUREMENT


class SimParams(BaseModel):
    """Complete definition of a trajectory experiment.

    Units: J = 1 fixes the energy scale unless stated otherwise, so times are
    in 1/J and rates in J. Loss and gain rates are both gamma.
    """

    model_config = ConfigDict(frozen=True)

    L: int = Field(ge=2, description="lattice size, even")
    J: float = Field(1.0, ge=0.0, description="hopping amplitude")
    gamma: float = Field(gt=0.0, description="jump rate per site")
    model: ModelKind = ModelKind.FERMION_COUNTING
    seed: int = Field(0, ge=0, lt=2 ** 64)
    t_burn: Optional[float] = Field(None, ge=0.0)
    t_sample: Optional[float] = Field(None, ge=0.0)
    dt_sample: Optional[float] = Field(None, gt=0.0)
    n_traj: int = Field(1, ge=1)
    initial_state: Literal["neel", "random_classical"] = "neel"
    check_every: int = Field(100, ge=1)

    @field_validator("L")
    @classmethod
    def _check_even(cls, L):
        if L % 2 != 0:
            raise ValueError(f"L must be even, got {L}")
        return L

    @model_validator(mode="after")
    def _check_sample_grid(self):
        steps = self.sample_window / self.sample_spacing
        if abs(steps - round(steps)) > 1e-9 * max(steps, 1.0):
            raise ValueError(
                f"t_sample={self.sample_window} is not a whole multiple of "
                f"dt_sample={self.sample_spacing}")
        return self

    @property
    def burn_in(self):
        """Burn-in time; defaults to max(10/gamma, 10 L/J)."""
        if self.t_burn is not None:
            return self.t_burn
        if self.J == 0:
            return 10.0 / self.gamma
        return max(10.0 / self.gamma, 10.0 * self.L / self.J)

    @property
    def sample_spacing(self):
        """Spacing of the sample grid; defaults to 1/gamma."""
        if self.dt_sample is not None:
            return self.dt_sample
        return 1.0 / self.gamma

    @property
    def sample_window(self):
        """Length of the sampling window; defaults to 10/gamma."""
        if self.t_sample is not None:
            return self.t_sample
        return 10.0 / self.gamma

    def sample_times(self):
        """Grid t_burn, t_burn + dt, ..., t_burn + t_sample.

        The window is a whole multiple of the spacing, so the last sample
        sits at t_burn + t_sample.
        """
        n_steps = int(round(self.sample_window / self.sample_spacing))
        return self.burn_in + self.sample_spacing * np.arange(n_steps + 1)

    def trajectory_seed(self, index):
        """Stream seed of trajectory `index` within an ensemble."""
        return int(self.seed) ^ int(index)

    def with_seed(self, seed):
        return self.model_copy(update={"seed": int(seed)})


@dataclass(frozen=True)
class JumpEvent:
    """One entry of the monitoring record."""

    time: float
    site: int
    kind: JumpKind
