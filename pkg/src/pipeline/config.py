# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#
"""Run configurations of the four subcommands, read from JSON files."""

import hashlib
import json
import math
from typing import List, Literal, Optional, Tuple, get_args

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    model_validator,
)

from common.data_utils import CODE_VERSION
from common.errors import InvalidParameterError
from trajectories.models import ModelKind, SimParams
from theory.predictions import TheoryParams

Observable = Literal["correlation", "entropy", "mutual_information",
                     "mutual_information_sweep", "autocorrelation",
                     "telegraph", "ssep"]
AnalyzeTask = Literal["crossover", "central-charge", "power-law",
                      "cft-collapse", "mutual-information-maximum"]

ANALYZE_TASKS = get_args(AnalyzeTask)
UNITS = "J = 1; lengths in sites, times in 1/J, rates in J"


class ExperimentConfig(BaseModel):
    """Definition of a `simulate` run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    params: SimParams
    observables: List[Observable] = Field(
        default_factory=lambda: ["correlation", "entropy"])
    output_dir: str = "results"
    workers: int = Field(1, description="joblib n_jobs; -1 uses every core")
    checkpoint_every: int = Field(16, ge=1)
    n_ell: int = Field(66, ge=2)
    n_origins: int = Field(8, ge=1)
    separation_ratio: float = Field(3.0, gt=0.0)
    collapse_lengths: List[int] = Field(
        default_factory=list,
        description="fixed A = C lengths of the mutual-information sweep")
    max_lag_fraction: float = Field(0.25, gt=0.0, le=1.0)
    filling_tolerance: float = Field(0.05, gt=0.0)
    ssep_realizations: int = Field(1000, ge=1)
    engine_version: str = CODE_VERSION

    @model_validator(mode="after")
    def _check_layouts(self):
        if self.workers == 0:
            raise ValueError("workers must be nonzero")
        if len(set(self.observables)) != len(self.observables):
            raise ValueError("observables must not repeat")
        if ("telegraph" in self.observables
                and self.params.model is not ModelKind.FERMION_COUNTING):
            raise ValueError("the telegraph-reduced correlator needs the "
                             "fermion_counting model")
        if "mutual_information" in self.observables:
            separation = max(int(round(self.separation_ratio)), 1)
            if 2 + separation >= self.params.L:
                raise ValueError(
                    f"no mutual-information layout with separation ratio "
                    f"{self.separation_ratio} fits on L={self.params.L}")
        if "mutual_information_sweep" in self.observables:
            if not self.collapse_lengths:
                raise ValueError("mutual_information_sweep needs "
                                 "collapse_lengths")
            for ell in self.collapse_lengths:
                if ell < 1 or 2 * ell + 1 >= self.params.L:
                    raise ValueError(
                        f"collapse length {ell} leaves no separation on "
                        f"L={self.params.L}")
        elif self.collapse_lengths:
            raise ValueError("collapse_lengths are only used by "
                             "mutual_information_sweep")
        if self.n_origins > self.params.L:
            raise ValueError("n_origins cannot exceed L")
        return self

    def max_lag(self):
        n_times = len(self.params.sample_times())
        return max(int(math.floor(self.max_lag_fraction * (n_times - 1))), 1)

    def with_overrides(self, workers=None, seed=None):
        """Apply command-line overrides of the worker count and seed."""
        update = {}
        if workers is not None:
            update["workers"] = int(workers)
        if seed is not None:
            update["params"] = self.params.with_seed(seed)
        return self.model_copy(update=update) if update else self

    def fingerprint(self):
        """Hash of everything that determines the numeric output."""
        payload = self.model_dump(mode="json",
                                  exclude={"workers", "output_dir"})
        encoded = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(encoded).hexdigest()


class TheoryConfig(BaseModel):
    """Grids on which `theory` tabulates the predictions."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    params: TheoryParams
    output_dir: str = "theory"
    n_q: int = Field(129, ge=2)
    l_max: int = Field(200, ge=1)
    ell_min: float = Field(1.0, ge=1.0)
    ell_max: float = Field(1000.0, gt=1.0)
    n_ell: int = Field(66, ge=2)
    cross_ratio: float = Field(1.0 / 16.0, gt=0.0, lt=1.0)
    s0: float = 0.0

    @model_validator(mode="after")
    def _check_grid(self):
        if self.ell_max <= self.ell_min:
            raise ValueError("ell_max must exceed ell_min")
        return self


class AnalyzeConfig(BaseModel):
    """Inputs and options of an `analyze` task."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    task: AnalyzeTask
    inputs: List[str] = Field(min_length=1)
    output: str = "report.json"
    window: Optional[Tuple[float, float]] = None
    central_charge: Optional[float] = None
    probe_factor: float = Field(8.0, gt=0.0)
    threshold: float = Field(0.1, gt=0.0, lt=1.0)
    persistence: int = Field(3, ge=1)
    n_bootstrap: int = Field(1000, ge=0)
    beta: float = 0.5

    @model_validator(mode="after")
    def _check_inputs(self):
        if self.task == "cft-collapse" and len(self.inputs) != 2:
            raise ValueError("cft-collapse takes the I2 and I3 files")
        if self.window is not None and self.window[0] >= self.window[1]:
            raise ValueError("window must satisfy lower < upper")
        return self


def load_config(path, schema):
    """Read and validate a JSON config file.

    Args:
        path (str): JSON file
        schema (type): pydantic model to validate against

    Returns:
        the validated config

    Raises:
        InvalidParameterError: on unreadable files or schema violations
    """
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as err:
        raise InvalidParameterError(f"cannot read config {path}: {err}")
    try:
        return schema.model_validate_json(text)
    except ValidationError as err:
        raise InvalidParameterError(f"invalid config {path}:\n{err}")
