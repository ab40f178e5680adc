# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#
"""Desk-scale runs in the critical range; every test here is slow."""

import math
import os

import numpy as np
import pytest

from common.data_utils import read_result_file
from pipeline.config import AnalyzeConfig, ExperimentConfig
from pipeline.tasks import analyze, simulate
from theory.predictions import TheoryParams, gaussian_cl, scales
from trajectories.models import ModelKind, SimParams

L = 200
GAMMAS = (0.3, 0.5, 1.0)


def _simulate(output_dir, gamma, model, observables, n_traj, **extra):
    params = SimParams(L=L, J=1.0, gamma=gamma, model=model, seed=1,
                       t_burn=100.0, t_sample=20.0, dt_sample=2.0,
                       n_traj=n_traj)
    simulate(ExperimentConfig(params=params, observables=observables,
                              output_dir=str(output_dir), workers=-1,
                              **extra))
    return str(output_dir)


@pytest.fixture(scope="module")
def half_gamma_runs(tmp_path_factory):
    """FC and OM ensembles at gamma = J / 2."""
    runs = {}
    for model in ModelKind:
        runs[model] = _simulate(
            tmp_path_factory.mktemp(model.value), 0.5, model,
            ["correlation", "entropy", "mutual_information",
             "mutual_information_sweep"],
            n_traj=32, n_origins=4, collapse_lengths=[10, 20])
    return runs


@pytest.fixture(scope="module")
def gamma_scan(tmp_path_factory):
    """FC ensembles across the monitoring rates in GAMMAS."""
    return [_simulate(tmp_path_factory.mktemp(f"gamma-{gamma}"), gamma,
                      ModelKind.FERMION_COUNTING, ["correlation", "entropy"],
                      n_traj=16, n_ell=33)
            for gamma in GAMMAS]


def _read(directory, filename):
    return read_result_file(os.path.join(directory, filename))[0]


@pytest.mark.slow
def test_correlations_match_gaussian_theory(half_gamma_runs):
    params = TheoryParams(gamma=0.5)
    l = np.arange(math.ceil(2.0 * params.l0),
                  math.floor(scales(params).l_c) + 1)
    theory = gaussian_cl(l, params)
    measured = {model: _read(path, "correlation.csv")
                for model, path in half_gamma_runs.items()}
    for columns in measured.values():
        assert np.all(np.abs(columns["mean"][l] - theory)
                      <= 0.2 * np.abs(theory))
    fc = measured[ModelKind.FERMION_COUNTING]
    om = measured[ModelKind.OCCUPATION_MEASUREMENT]
    combined = np.hypot(fc["stderr"][l], om["stderr"][l])
    assert np.all(np.abs(fc["mean"][l] - om["mean"][l])
                  <= 3.0 * combined + 0.1 * np.abs(theory))


@pytest.mark.slow
def test_cft_collapse_inside_critical_range(half_gamma_runs, tmp_path):
    directory = half_gamma_runs[ModelKind.FERMION_COUNTING]
    central = analyze(AnalyzeConfig(
        task="central-charge",
        inputs=[os.path.join(directory, "central_charge.csv")],
        output=str(tmp_path / "central.json"), n_bootstrap=200))
    c_max = central["entries"][0]["c_max"]
    report = analyze(AnalyzeConfig(
        task="cft-collapse",
        inputs=[os.path.join(directory, "mutual_information_sweep_I2.csv"),
                os.path.join(directory, "mutual_information_sweep_I3.csv")],
        output=str(tmp_path / "collapse.json"), central_charge=c_max))
    assert report["n_points"] > 0
    assert report["max_relative_residual"] < 0.25
    assert report["max_relative_residual_outside"] > 0.25


@pytest.mark.slow
def test_tripartite_sign_pattern(half_gamma_runs):
    l0 = TheoryParams(gamma=0.5).l0
    fc = _read(half_gamma_runs[ModelKind.FERMION_COUNTING],
               "mutual_information_I3.csv")
    beyond = fc["abscissa"] >= 2
    assert np.all(fc["mean"][beyond] <= fc["stderr"][beyond])

    om = _read(half_gamma_runs[ModelKind.OCCUPATION_MEASUREMENT],
               "mutual_information_I3.csv")
    assert np.any(om["mean"] < -om["stderr"])
    past = om["abscissa"] > l0
    assert np.any(om["mean"][past] > om["stderr"][past])


@pytest.mark.slow
def test_crossover_scale_exponent(gamma_scan, tmp_path):
    report = analyze(AnalyzeConfig(
        task="crossover",
        inputs=[os.path.join(d, "correlation.csv") for d in gamma_scan],
        output=str(tmp_path / "crossover.json")))
    assert all(entry["found"] for entry in report["entries"])
    assert report["scaling"] is not None
    assert -2.4 <= report["scaling"]["exponent"] <= -1.6


@pytest.mark.slow
def test_central_charge_maximum_exponent(gamma_scan, tmp_path):
    report = analyze(AnalyzeConfig(
        task="central-charge",
        inputs=[os.path.join(d, "central_charge.csv") for d in gamma_scan],
        output=str(tmp_path / "central.json"), n_bootstrap=200))
    entries = report["entries"]
    assert not any(entry["at_boundary"] for entry in entries)
    assert report["scaling"] is not None
    assert -1.8 <= report["scaling"]["exponent"] <= -1.2
    # c_max falls smoothly as the monitoring rate grows
    c_max = [entry["c_max"] for entry in entries]
    assert all(a > b for a, b in zip(c_max, c_max[1:]))
