# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#

import json
import math
import os

import numpy as np
import pytest
from pydantic import ValidationError

from common.data_utils import read_result_file, write_result_file
from common.errors import InvalidParameterError
from pipeline.config import (
    UNITS,
    AnalyzeConfig,
    ExperimentConfig,
    TheoryConfig,
    load_config,
)
from observables.equal_time import layout_columns, sweep_layouts
from pipeline.tasks import analyze, oracle_check, simulate, theory
from theory.predictions import TheoryParams, scales
from trajectories.models import ModelKind, SimParams


def _experiment(output_dir, model=ModelKind.OCCUPATION_MEASUREMENT,
                observables=("correlation", "entropy", "mutual_information",
                             "autocorrelation", "ssep"), **extra):
    params = SimParams(L=8, J=1.0, gamma=1.0, model=model, seed=3,
                       t_burn=1.0, t_sample=2.0, dt_sample=0.25, n_traj=3)
    return ExperimentConfig(params=params, observables=list(observables),
                            output_dir=str(output_dir), n_ell=4, n_origins=2,
                            checkpoint_every=2, ssep_realizations=20,
                            **extra)


def _all_columns(manifest, output_dir):
    return {name: read_result_file(os.path.join(output_dir, filename))[0]
            for name, filename in manifest["files"].items()}


def _assert_same_columns(a, b):
    assert set(a) == set(b)
    for name in a:
        assert set(a[name]) == set(b[name])
        for column in a[name]:
            assert np.array_equal(a[name][column], b[name][column],
                                  equal_nan=True), (name, column)


def test_telegraph_requires_fermion_counting(tmp_path):
    with pytest.raises(ValidationError):
        _experiment(tmp_path, observables=["telegraph"])


def test_layout_must_fit(tmp_path):
    with pytest.raises(ValidationError):
        _experiment(tmp_path, observables=["mutual_information"],
                    separation_ratio=7.0)


@pytest.mark.parametrize("observables, lengths", [
    (["mutual_information_sweep"], []),
    (["mutual_information_sweep"], [4]),
    (["entropy"], [2]),
])
def test_collapse_lengths_are_validated(tmp_path, observables, lengths):
    with pytest.raises(ValidationError):
        _experiment(tmp_path, observables=observables,
                    collapse_lengths=lengths)


def test_simulate_sweeps_the_separation(tmp_path):
    config = _experiment(tmp_path, observables=["mutual_information_sweep"],
                         collapse_lengths=[1, 2])
    manifest = simulate(config)
    assert set(manifest["files"]) == {"mutual_information_sweep_I2",
                                      "mutual_information_sweep_I3"}
    columns, header = read_result_file(
        str(tmp_path / "mutual_information_sweep_I2.csv"))
    assert header["observable"] == "mutual_information_sweep_I2"
    # ell_B runs over 1..4 with 2 ell + ell_B < 8
    assert np.array_equal(columns["ell"], [1, 1, 1, 1, 2, 2, 2])
    assert np.array_equal(columns["ell_B"], [1, 2, 3, 4, 1, 2, 3])
    assert np.array_equal(columns["abscissa"], columns["ell_B"])
    assert np.allclose(columns["probe_chord"],
                       8.0 / math.pi * np.sin(math.pi * columns["ell_B"]
                                              / 8.0))
    x = columns["cross_ratio"]
    assert np.all(np.diff(x[:3]) < 0)
    assert np.all((x > 0) & (x < 1))


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"params": {"L": 8, "gamma": 1.0},
                                "colour": "blue"}))
    with pytest.raises(InvalidParameterError):
        load_config(str(path), ExperimentConfig)
    with pytest.raises(InvalidParameterError):
        load_config(str(tmp_path / "missing.json"), ExperimentConfig)


def test_fingerprint_ignores_workers_and_output(tmp_path):
    config = _experiment(tmp_path)
    moved = config.model_copy(update={"output_dir": "elsewhere"})
    assert config.with_overrides(workers=4).fingerprint() == \
        config.fingerprint()
    assert moved.fingerprint() == config.fingerprint()
    assert config.with_overrides(seed=4).fingerprint() != \
        config.fingerprint()


def test_simulate_writes_every_observable(tmp_path):
    config = _experiment(tmp_path / "run")
    manifest = simulate(config)
    assert set(manifest["files"]) == {
        "correlation", "entropy", "central_charge",
        "mutual_information_I2", "mutual_information_I3",
        "autocorrelation", "ssep"}
    for filename in manifest["files"].values():
        assert os.path.exists(tmp_path / "run" / filename)
    assert os.path.exists(tmp_path / "run" / "manifest.json")
    assert os.path.exists(tmp_path / "run" / "run.log")

    columns, header = read_result_file(str(tmp_path / "run" /
                                           "correlation.csv"))
    assert header["units"] == UNITS
    assert header["seed"] == 3
    assert header["fingerprint"] == config.fingerprint()
    assert np.array_equal(columns["abscissa"], np.arange(5))
    assert np.all(columns["n_samples"] == 3)
    # particle number is conserved, so the profile sums to zero on the ring
    C = columns["mean"]
    assert C[0] + 2 * C[1:4].sum() + C[4] == pytest.approx(0.0, abs=1e-10)


def test_simulation_is_reproducible(tmp_path):
    first = simulate(_experiment(tmp_path / "a"))
    second = simulate(_experiment(tmp_path / "b"))
    _assert_same_columns(_all_columns(first, str(tmp_path / "a")),
                         _all_columns(second, str(tmp_path / "b")))
    assert first["n_jumps"] == second["n_jumps"]


def test_resume_gives_the_same_files(tmp_path):
    config = _experiment(tmp_path / "run")
    manifest = simulate(config)
    before = _all_columns(manifest, str(tmp_path / "run"))
    resumed = simulate(config, resume=True)
    _assert_same_columns(before, _all_columns(resumed, str(tmp_path / "run")))


def test_fermion_counting_telegraph(tmp_path):
    config = _experiment(tmp_path, model=ModelKind.FERMION_COUNTING,
                         observables=["autocorrelation", "telegraph"])
    manifest = simulate(config)
    telegraph, _ = read_result_file(str(tmp_path / "telegraph.csv"))
    raw, _ = read_result_file(str(tmp_path / "autocorrelation.csv"))
    assert telegraph["mean"][0] == pytest.approx(raw["raw_mean"][0])
    assert manifest["jump_rate"]["mean"] > 0


def test_zeno_regime_has_short_ranged_correlations(tmp_path):
    params = SimParams(L=40, J=1.0, gamma=20.0, seed=12, t_burn=2.0,
                       t_sample=1.0, dt_sample=0.25, n_traj=2)
    config = ExperimentConfig(params=params, observables=["correlation"],
                              output_dir=str(tmp_path),
                              filling_tolerance=0.3)
    simulate(config)
    columns, _ = read_result_file(str(tmp_path / "correlation.csv"))
    C = columns["mean"]
    assert C[1] < 0.0
    assert np.all(np.abs(C[11:]) < 1e-3)


def test_oracle_check_passes(tmp_path):
    output = str(tmp_path / "oracle.json")
    summary = oracle_check(6, "fermion_counting", 20, seed=9, output=output)
    assert summary["passed"]
    assert summary["records_match"]
    with open(output) as f:
        assert json.load(f)["L"] == 6


def test_theory_manifest(tmp_path):
    config = TheoryConfig(params=TheoryParams(gamma=0.1),
                          output_dir=str(tmp_path), n_q=17, l_max=10,
                          ell_max=200.0, n_ell=8)
    manifest = theory(config)
    assert manifest["scales"]["l0"] == pytest.approx(7.0710678, rel=1e-7)
    entropy, _ = read_result_file(str(tmp_path / "entropy.csv"))
    short = entropy["abscissa"] <= 7.0710678
    assert np.all(np.isnan(entropy["c_ell"][short]))
    assert np.all(np.isfinite(entropy["c_ell"][~short]))
    cq, _ = read_result_file(str(tmp_path / "cq.csv"))
    assert cq["gaussian"][0] == pytest.approx(0.0, abs=1e-8)


def _write_input(path, observable, columns, gamma=0.5, units=UNITS):
    header = {"observable": observable, "units": units,
              "config": {"params": {"J": 1.0, "gamma": gamma}}}
    write_result_file(str(path), columns, header)
    return str(path)


def test_analyze_crossover(tmp_path):
    chord = np.geomspace(1.0, 200.0, 50)
    mean = -np.where(chord <= 50.0, chord ** -2.0, 2500.0 * chord ** -4.0)
    path = _write_input(tmp_path / "correlation.csv", "correlation",
                        {"abscissa": np.arange(50.0), "chord": chord,
                         "mean": mean, "stderr": np.zeros(50)})
    report = analyze(AnalyzeConfig(task="crossover", inputs=[path],
                                   output=str(tmp_path / "report.json")))
    entry = report["entries"][0]
    assert entry["found"]
    assert 50.0 < entry["l_c"] < 60.0
    assert report["scaling"] is None
    assert os.path.exists(tmp_path / "report.json")


def test_analyze_mutual_information_maximum(tmp_path):
    ell = np.geomspace(2.0, 200.0, 21)
    mean = 1.0 - (np.log(ell) - math.log(30.0)) ** 2
    path = _write_input(tmp_path / "I2.csv", "mutual_information_I2",
                        {"abscissa": ell, "mean": mean,
                         "stderr": np.zeros(21),
                         "cross_ratio": np.full(21, 1.0 / 16.0)})
    report = analyze(AnalyzeConfig(task="mutual-information-maximum",
                                   inputs=[path],
                                   output=str(tmp_path / "report.json")))
    entry = report["entries"][0]
    assert entry["ell_max"] == pytest.approx(30.0, rel=1e-6)
    assert not entry["at_boundary"]


def _collapse_inputs(tmp_path, layouts, I2, I3,
                     family="mutual_information_sweep", gamma=0.5):
    columns = layout_columns(layouts)
    zeros = np.zeros(len(layouts))
    paths = []
    for quantity, mean in (("I2", I2), ("I3", I3)):
        paths.append(_write_input(
            tmp_path / f"{quantity}.csv", f"{family}_{quantity}",
            dict(columns, abscissa=columns["ell_B"], mean=mean,
                 stderr=zeros), gamma=gamma))
    return paths, columns


def test_analyze_cft_collapse_windows_on_probe_chord(tmp_path):
    L, c = 400, 2.0
    layouts = sweep_layouts([20, 40], np.arange(1, 201), L)
    columns = layout_columns(layouts)
    x, probe = columns["cross_ratio"], columns["probe_chord"]
    assert x.min() < 0.05 and x.max() > 0.9
    inside = (probe >= 10.0) & (probe <= 50.0)
    exact = c / 3.0 * np.log(1.0 / (1.0 - x))
    # off the conformal curve only where the separation leaves the window
    I2 = exact + np.where(inside, 0.0, 0.3)
    (i2, i3), _ = _collapse_inputs(tmp_path, layouts, I2,
                                   np.zeros(len(layouts)))
    output = str(tmp_path / "report.json")
    with pytest.raises(InvalidParameterError):
        analyze(AnalyzeConfig(task="cft-collapse", inputs=[i2, i3],
                              output=output))
    report = analyze(AnalyzeConfig(task="cft-collapse", inputs=[i2, i3],
                                   output=output, central_charge=c,
                                   window=(10.0, 50.0)))
    assert report["family"] == "mutual_information_sweep"
    assert report["n_points"] == int(inside.sum())
    assert report["max_relative_residual"] == pytest.approx(0.0, abs=1e-12)
    assert report["max_relative_residual_outside"] > 0.0
    # a window on the fixed lengths 20 and 40 would keep every row
    assert int(inside.sum()) < len(layouts)
    assert np.array_equal(report["ell_B"], columns["ell_B"])


def test_analyze_cft_collapse_default_window_uses_scales(tmp_path):
    L, c, gamma = 200, 2.0, 0.1
    layouts = sweep_layouts([30], np.arange(1, 140), L)
    columns = layout_columns(layouts)
    x = columns["cross_ratio"]
    (i2, i3), _ = _collapse_inputs(
        tmp_path, layouts, c / 3.0 * np.log(1.0 / (1.0 - x)),
        np.zeros(len(layouts)), gamma=gamma)
    report = analyze(AnalyzeConfig(task="cft-collapse", inputs=[i2, i3],
                                   output=str(tmp_path / "report.json"),
                                   central_charge=c))
    params = TheoryParams(gamma=gamma)
    lower, upper = 8.0 * params.l0, scales(params).l_c
    assert report["window"] == pytest.approx([lower, upper])
    probe = columns["probe_chord"]
    assert report["n_points"] == int(((probe >= lower)
                                      & (probe <= upper)).sum())
    assert report["n_points"] > 0


def test_analyze_cft_collapse_rejects_mismatched_inputs(tmp_path):
    layouts = sweep_layouts([5], np.arange(1, 20), 40)
    zeros = np.zeros(len(layouts))
    (i2, i3), columns = _collapse_inputs(tmp_path, layouts, zeros, zeros)
    output = str(tmp_path / "report.json")
    ratio = _write_input(tmp_path / "ratio_I3.csv", "mutual_information_I3",
                         dict(columns, abscissa=columns["ell"], mean=zeros,
                              stderr=zeros))
    with pytest.raises(InvalidParameterError):
        analyze(AnalyzeConfig(task="cft-collapse", inputs=[i2, ratio],
                              output=output, central_charge=1.0))
    shifted = dict(columns, abscissa=columns["ell_B"], mean=zeros,
                   stderr=zeros, probe_chord=columns["probe_chord"] + 1.0)
    other = _write_input(tmp_path / "other_I3.csv",
                         "mutual_information_sweep_I3", shifted)
    with pytest.raises(InvalidParameterError):
        analyze(AnalyzeConfig(task="cft-collapse", inputs=[i2, other],
                              output=output, central_charge=1.0))
    bare = _write_input(tmp_path / "bare_I3.csv",
                        "mutual_information_sweep_I3",
                        {"abscissa": columns["ell_B"], "mean": zeros,
                         "stderr": zeros,
                         "cross_ratio": columns["cross_ratio"]})
    with pytest.raises(InvalidParameterError):
        analyze(AnalyzeConfig(task="cft-collapse", inputs=[i2, bare],
                              output=output, central_charge=1.0))


def test_analyze_power_law(tmp_path):
    lags = np.linspace(0.5, 20.0, 40)
    path = _write_input(tmp_path / "ssep.csv", "ssep",
                        {"abscissa": lags, "mean": 0.3 * lags ** -0.5,
                         "stderr": np.zeros(40)})
    report = analyze(AnalyzeConfig(task="power-law", inputs=[path],
                                   output=str(tmp_path / "report.json"),
                                   window=(2.0, 20.0)))
    assert report["entries"][0]["alpha"] == pytest.approx(0.5, abs=1e-8)


def test_analyze_rejects_foreign_units(tmp_path):
    path = _write_input(tmp_path / "correlation.csv", "correlation",
                        {"abscissa": np.arange(3.0), "chord": np.arange(3.0),
                         "mean": np.zeros(3), "stderr": np.zeros(3)},
                        units="gamma = 1")
    with pytest.raises(InvalidParameterError):
        analyze(AnalyzeConfig(task="crossover", inputs=[path],
                              output=str(tmp_path / "report.json")))


def test_analyze_rejects_wrong_observable(tmp_path):
    path = _write_input(tmp_path / "entropy.csv", "entropy",
                        {"abscissa": np.arange(1.0, 4.0),
                         "mean": np.ones(3), "stderr": np.zeros(3)})
    with pytest.raises(InvalidParameterError):
        analyze(AnalyzeConfig(task="crossover", inputs=[path],
                              output=str(tmp_path / "report.json")))
