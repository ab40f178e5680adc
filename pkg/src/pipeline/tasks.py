# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#
"""The simulate, oracle-check, theory and analyze operations."""

import math
import os
from functools import lru_cache

import numpy as np

from analysis.fitting import (
    crossover_scale,
    locate_maximum,
    power_law_fit,
    scaling_exponent,
)
from common.data_utils import (
    CODE_VERSION,
    read_result_file,
    write_json,
    write_result_file,
)
from common.errors import InvalidParameterError
from common.logging import add_file_handler, logger
from common.statistics import Curve, EnsembleStatistic
from observables.equal_time import (
    ENTROPY_KEYS,
    build_ell_grid,
    chord_length,
    cft_collapse_check,
    density_correlation_profile,
    effective_central_charge,
    entropy_profile,
    i2_from_entropies,
    i3_from_entropies,
    layout_columns,
    layout_entropy_profile,
    mutual_information_lengths,
    ratio_layouts,
    reduce_density_correlation,
    sweep_layouts,
)
from observables.exclusion import ssep_autocorrelation
from observables.temporal import (
    autocorrelation_moments,
    reduce_autocorrelation,
    reduce_telegraph,
    telegraph_moments,
)
from theory.predictions import (
    TheoryParams,
    gaussian_cl,
    gaussian_cq,
    gaussian_entropy,
    predicted_c_ell,
    predicted_entropy,
    predicted_I2,
    renormalized_cq_ratio,
    scales,
)
from trajectories.fock import lockstep_compare
from trajectories.gaussian import empirical_jump_rate, run_trajectory
from trajectories.models import SimParams
from trajectories.simulation_utils import Timer, run_ensemble, stack_results
from .config import UNITS

SEED_RULE = "trajectory i uses stream seed (seed XOR i)"


@lru_cache(maxsize=8)
def _ell_grid(L, n_ell):
    return build_ell_grid(L, n_ell)


def reference_positions(L, n_origins):
    """Evenly spaced reference sites for the position average."""
    return np.unique(np.linspace(0, L, n_origins, endpoint=False).astype(int))


def _layouts(config, observable):
    """Segment layouts of a mutual-information observable."""
    L = config.params.L
    grid = _ell_grid(L, config.n_ell)
    if observable == "mutual_information_sweep":
        return sweep_layouts(config.collapse_lengths, grid, L)
    lengths = mutual_information_lengths(grid, L, config.separation_ratio)
    return ratio_layouts(lengths, L, config.separation_ratio)


def trajectory_worker(config, index):
    """Run trajectory `index` of an ExperimentConfig and reduce it.

    Snapshot observables are averaged over the sample grid inside the
    trajectory, so only one row per observable leaves the worker.

    Returns:
        dict: per-trajectory arrays keyed by observable
    """
    params = config.params
    requested = set(config.observables)
    origins = reference_positions(params.L, config.n_origins)
    observers = {}
    if "correlation" in requested:
        observers["correlation"] = (
            lambda state: density_correlation_profile(state.d))
        observers["filling"] = lambda state: state.occupations().mean()
    if "entropy" in requested:
        grid = _ell_grid(params.L, config.n_ell)
        observers["entropy"] = (
            lambda state: entropy_profile(state.d, grid, origins))
    for observable in ("mutual_information", "mutual_information_sweep"):
        if observable in requested:
            layouts = _layouts(config, observable)
            observers[f"{observable}_entropies"] = (
                lambda state, layouts=layouts: layout_entropy_profile(
                    state.d, layouts, origins))

    trajectory = run_trajectory(params, observers,
                                seed=params.trajectory_seed(index))
    result = {name: values.mean(axis=0)
              for name, values in trajectory.observations.items()}
    if "autocorrelation" in requested:
        moments = autocorrelation_moments(trajectory.z, config.max_lag())
        result.update({f"K_{name}": value for name, value in moments.items()})
    if "telegraph" in requested:
        result["Q"] = telegraph_moments(trajectory.z, trajectory.jump_counts,
                                        config.max_lag())
    if len(trajectory.times) > 1:
        result["jump_rate"] = np.array(empirical_jump_rate(trajectory))
    result["n_jumps"] = np.array(trajectory.n_jumps)
    return result


def _header(config, observable, abscissa):
    return {
        "observable": observable,
        "abscissa": abscissa,
        "units": UNITS,
        "config": config.model_dump(mode="json", exclude={"workers"}),
        "seed": config.params.seed,
        "seed_rule": SEED_RULE,
        "burn_in": config.params.burn_in,
        "fingerprint": config.fingerprint(),
    }


def _curve_columns(abscissa, statistic, **extra):
    columns = {"abscissa": abscissa}
    columns.update(extra)
    columns.update({
        "mean": statistic.mean,
        "stderr": statistic.stderr,
        "n_samples": np.full(np.shape(statistic.mean), statistic.n_samples),
    })
    return columns


def _write_correlation(config, results, output_dir):
    L = config.params.L
    fillings = stack_results(results, "filling")
    statistic = reduce_density_correlation(
        stack_results(results, "correlation"), fillings,
        config.filling_tolerance)
    distance = np.arange(L // 2 + 1)
    path = os.path.join(output_dir, "correlation.csv")
    write_result_file(
        path, _curve_columns(distance, statistic,
                             chord=chord_length(distance, L)),
        _header(config, "correlation", "distance l"))
    return {"correlation": path}


def _write_entropy(config, results, output_dir):
    L = config.params.L
    grid = _ell_grid(L, config.n_ell)
    values = stack_results(results, "entropy")
    statistic = EnsembleStatistic.from_trajectory_values(values)
    files = {}
    path = os.path.join(output_dir, "entropy.csv")
    write_result_file(
        path, _curve_columns(grid, statistic, chord=chord_length(grid, L)),
        _header(config, "entropy", "subsystem length ell"))
    files["entropy"] = path
    if len(grid) < 2:
        logger.warning("Grid too short for a central-charge estimate")
        return files

    # c_ell is linear in S, so per-trajectory values carry the errors
    per_trajectory = np.array([effective_central_charge(row, grid, L).y
                               for row in values])
    curve = effective_central_charge(statistic.mean, grid, L)
    c_statistic = EnsembleStatistic.from_trajectory_values(per_trajectory)
    path = os.path.join(output_dir, "central_charge.csv")
    write_result_file(
        path, _curve_columns(curve.x, c_statistic),
        _header(config, "central_charge",
                "geometric mean of neighbouring chord lengths"))
    files["central_charge"] = path
    return files


def _write_mutual_information(config, results, output_dir,
                              observable="mutual_information"):
    layouts = _layouts(config, observable)
    columns = layout_columns(layouts)
    entropies = stack_results(results, f"{observable}_entropies")
    by_key = {key: entropies[..., i] for i, key in enumerate(ENTROPY_KEYS)}
    if observable == "mutual_information":
        abscissa, label = columns["ell"], "segment length ell"
    else:
        abscissa, label = columns["ell_B"], "separation ell_B at fixed ell"
    files = {}
    for quantity, combine in (("I2", i2_from_entropies),
                              ("I3", i3_from_entropies)):
        statistic = EnsembleStatistic.from_trajectory_values(combine(by_key))
        name = f"{observable}_{quantity}"
        path = os.path.join(output_dir, f"{name}.csv")
        write_result_file(
            path, _curve_columns(abscissa, statistic,
                                 chord=chord_length(columns["ell"],
                                                    config.params.L),
                                 **columns),
            _header(config, name, label))
        files[name] = path
    return files


def _write_mutual_information_sweep(config, results, output_dir):
    return _write_mutual_information(config, results, output_dir,
                                     "mutual_information_sweep")


def _write_autocorrelation(config, results, output_dir):
    params = config.params
    estimate = reduce_autocorrelation(
        stack_results(results, "K_raw"), stack_results(results, "K_lead"),
        stack_results(results, "K_lag"), params.sample_spacing)
    path = os.path.join(output_dir, "autocorrelation.csv")
    write_result_file(
        path, _curve_columns(estimate.lags, estimate.connected,
                             raw_mean=estimate.raw.mean,
                             raw_stderr=estimate.raw.stderr),
        _header(config, "autocorrelation", "lag time"))
    return {"autocorrelation": path}


def _write_telegraph(config, results, output_dir):
    curve = reduce_telegraph(stack_results(results, "Q"),
                             config.params.sample_spacing)
    statistic = EnsembleStatistic(curve.y, curve.yerr, len(results))
    path = os.path.join(output_dir, "telegraph.csv")
    write_result_file(path, _curve_columns(curve.x, statistic),
                      _header(config, "telegraph", "lag time"))
    return {"telegraph": path}


def _write_ssep(config, output_dir):
    params = config.params
    if params.J == 0:
        raise InvalidParameterError(
            "the exclusion-process reference needs J > 0")
    nu = params.J ** 2 / params.gamma
    rng = np.random.default_rng(params.seed)
    estimate = ssep_autocorrelation(
        params.L, params.L // 2, 2.0 * nu, params.sample_window,
        params.sample_spacing, config.ssep_realizations, rng,
        max_lag=config.max_lag())
    header = _header(config, "ssep", "lag time")
    header["hop_rate"] = 2.0 * nu
    path = os.path.join(output_dir, "ssep_autocorrelation.csv")
    write_result_file(
        path, _curve_columns(estimate.lags, estimate.connected,
                             raw_mean=estimate.raw.mean,
                             raw_stderr=estimate.raw.stderr),
        header)
    return {"ssep": path}


_WRITERS = {
    "correlation": _write_correlation,
    "entropy": _write_entropy,
    "mutual_information": _write_mutual_information,
    "mutual_information_sweep": _write_mutual_information_sweep,
    "autocorrelation": _write_autocorrelation,
    "telegraph": _write_telegraph,
}


def simulate(config, resume=False):
    """Run an ensemble and write one result file per observable.

    Args:
        config (ExperimentConfig): run definition
        resume (bool, optional): continue from `<output_dir>/checkpoint.h5`.
            Defaults to False.

    Returns:
        dict: the manifest written to `<output_dir>/manifest.json`
    """
    output_dir = config.output_dir
    handler = add_file_handler(output_dir)
    try:
        params = config.params
        logger.info(f"Simulating {params.n_traj} {params.model.value} "
                    f"trajectories, L={params.L}, gamma={params.gamma}, "
                    f"burn-in {params.burn_in:.6g}")
        files = {}
        jump_rate = None
        n_jumps = 0
        trajectory_observables = [o for o in config.observables if o != "ssep"]
        with Timer() as timer:
            if trajectory_observables or "ssep" not in config.observables:
                results = run_ensemble(
                    trajectory_worker, config, params.n_traj,
                    workers=config.workers,
                    checkpoint_path=os.path.join(output_dir, "checkpoint.h5"),
                    checkpoint_every=config.checkpoint_every, resume=resume,
                    metadata={"fingerprint": config.fingerprint(),
                              "code_version": CODE_VERSION})
                for observable in trajectory_observables:
                    files.update(_WRITERS[observable](config, results,
                                                      output_dir))
                if "jump_rate" in results[0]:
                    jump_rate = EnsembleStatistic.from_trajectory_values(
                        stack_results(results, "jump_rate"))
                n_jumps = int(stack_results(results, "n_jumps").sum())
            if "ssep" in config.observables:
                files.update(_write_ssep(config, output_dir))
        logger.info(f"Simulation took {timer.interval:.2f}s")

        manifest = {
            "config": config.model_dump(mode="json", exclude={"workers"}),
            "code_version": CODE_VERSION,
            "fingerprint": config.fingerprint(),
            "units": UNITS,
            "seed": params.seed,
            "seed_rule": SEED_RULE,
            "burn_in": params.burn_in,
            "sample_spacing": params.sample_spacing,
            "sample_window": params.sample_window,
            "n_jumps": n_jumps,
            "files": {name: os.path.basename(path)
                      for name, path in files.items()},
        }
        if jump_rate is not None:
            manifest["jump_rate"] = {"mean": float(jump_rate.mean),
                                     "stderr": float(jump_rate.stderr)}
        write_json(os.path.join(output_dir, "manifest.json"), manifest)
        return manifest
    finally:
        logger.removeHandler(handler)
        handler.close()


def oracle_check(L, model, n_jumps, seed, J=1.0, gamma=1.0, output=None):
    """Lockstep comparison of the Gaussian engine with the Fock oracle.

    Returns:
        dict: the comparison summary, also written to `output` if given
    """
    params = SimParams(L=L, J=J, gamma=gamma, model=model, seed=seed)
    report = lockstep_compare(params, n_jumps)
    summary = report.summary()
    summary.update({"L": L, "model": params.model.value, "seed": seed,
                    "J": J, "gamma": gamma,
                    "requested_jumps": n_jumps})
    if output is not None:
        write_json(output, summary)
    return summary


def theory(config):
    """Tabulate the Gaussian and renormalized predictions.

    Returns:
        dict: the manifest written to `<output_dir>/manifest.json`
    """
    params = config.params
    characteristic = scales(params)
    header = {"units": UNITS,
              "params": params.model_dump(mode="json"),
              "observable": "theory"}
    files = {}

    q = np.linspace(0.0, math.pi, config.n_q)
    ratio = np.full_like(q, np.nan)
    valid = (q > 0) & (q * params.l0 < 1.0)
    if valid.any():
        ratio[valid] = renormalized_cq_ratio(q[valid], params)
    path = os.path.join(config.output_dir, "cq.csv")
    write_result_file(path, {"abscissa": q, "gaussian": gaussian_cq(q, params),
                             "renormalized_ratio": ratio},
                      dict(header, abscissa="momentum q"))
    files["cq"] = path

    distance = np.arange(config.l_max + 1)
    path = os.path.join(config.output_dir, "cl.csv")
    write_result_file(path, {"abscissa": distance,
                             "gaussian": gaussian_cl(distance, params)},
                      dict(header, abscissa="distance l"))
    files["cl"] = path

    ell = np.geomspace(config.ell_min, config.ell_max, config.n_ell)
    asymptotic = ell > params.l0
    columns = {"abscissa": ell, "gaussian": gaussian_entropy(ell, params)}
    for name, function in (
            ("entropy", lambda e: predicted_entropy(e, params, config.s0)),
            ("c_ell", lambda e: predicted_c_ell(e, params)),
            ("I2", lambda e: predicted_I2(e, config.cross_ratio, params))):
        values = np.full_like(ell, np.nan)
        if asymptotic.any():
            values[asymptotic] = function(ell[asymptotic])
        columns[name] = values
    path = os.path.join(config.output_dir, "entropy.csv")
    write_result_file(path, columns,
                      dict(header, abscissa="subsystem length ell",
                           cross_ratio=config.cross_ratio, s0=config.s0))
    files["entropy"] = path

    manifest = {
        "params": params.model_dump(mode="json"),
        "scales": characteristic.to_dict(config.cross_ratio),
        "units": UNITS,
        "code_version": CODE_VERSION,
        "files": {name: os.path.basename(p) for name, p in files.items()},
    }
    write_json(os.path.join(config.output_dir, "manifest.json"), manifest)
    logger.info(f"l0 = {characteristic.l0:.6g}, "
                f"l_c = {characteristic.l_c:.6g}, "
                f"c_gaussian = {characteristic.c_gaussian:.6g}")
    return manifest


def _read_input(path, observables):
    columns, header = read_result_file(path)
    if header.get("units") != UNITS:
        raise InvalidParameterError(
            f"{path} uses units {header.get('units')!r}, expected {UNITS!r}")
    if header.get("observable") not in observables:
        raise InvalidParameterError(
            f"{path} holds {header.get('observable')!r}, expected one of "
            f"{sorted(observables)}")
    return columns, header


def _theory_params(header, beta):
    params = header["config"]["params"]
    return TheoryParams(J=params["J"], gamma=params["gamma"], beta=beta)


def _curve(columns, window=None):
    curve = Curve(columns["abscissa"], columns["mean"], columns["stderr"])
    return curve if window is None else curve.window(*window)


def _gamma_scaling(entries, key):
    found = [e for e in entries if math.isfinite(e[key])]
    gammas = sorted({e["gamma"] for e in found})
    if len(gammas) < 3 or len(gammas) != len(found):
        return None
    errors = [e.get(f"{key}_err", 0.0) for e in found]
    if not all(error > 0 for error in errors):
        errors = None
    fit = scaling_exponent([e["gamma"] for e in found],
                           [e[key] for e in found], errors)
    return fit.to_dict()


def _analyze_crossover(config):
    entries = []
    for path in config.inputs:
        columns, header = _read_input(path, {"correlation"})
        params = _theory_params(header, config.beta)
        curve = Curve(columns["chord"][1:], np.abs(columns["mean"][1:]),
                      columns["stderr"][1:])
        lower = 2.0 * params.l0 if config.window is None else config.window[0]
        if config.window is not None:
            curve = curve.window(upper=config.window[1])
        result = crossover_scale(curve, lower, config.threshold,
                                 config.persistence)
        entries.append(dict(result.to_dict(), input=path,
                            gamma=params.gamma, l0=params.l0,
                            l_c=result.scale, found=result.found,
                            predicted_l_c=scales(params).l_c))
    return {"entries": entries, "scaling": _gamma_scaling(entries, "l_c")}


def _analyze_central_charge(config):
    entries = []
    rng = np.random.default_rng(0)
    for path in config.inputs:
        columns, header = _read_input(path, {"central_charge"})
        params = _theory_params(header, config.beta)
        result = locate_maximum(_curve(columns, config.window),
                                config.n_bootstrap, rng)
        characteristic = scales(params)
        entries.append({"input": path, "gamma": params.gamma,
                        "c_max": result.y_max, "c_max_err": result.y_err,
                        "ell_max": result.x_max, "ell_max_err": result.x_err,
                        "at_boundary": result.at_boundary,
                        "predicted_ell_max": characteristic.ell_max_c,
                        "c_gaussian": characteristic.c_gaussian})
    return {"entries": entries, "scaling": _gamma_scaling(entries, "ell_max")}


def _analyze_power_law(config):
    entries = []
    for path in config.inputs:
        columns, header = _read_input(
            path, {"autocorrelation", "ssep", "telegraph", "correlation",
                   "central_charge", "entropy"})
        curve = _curve(columns, config.window)
        keep = (curve.x > 0) & (curve.y > 0)
        fit = power_law_fit(Curve(curve.x[keep], curve.y[keep],
                                  curve.yerr[keep]))
        params = header["config"]["params"]
        entries.append(dict(fit.to_dict(), input=path,
                            observable=header["observable"],
                            alpha=-fit.exponent,
                            nu=params["J"] ** 2 / params["gamma"]))
    return {"entries": entries}


def _analyze_cft_collapse(config):
    if config.central_charge is None:
        raise InvalidParameterError(
            "cft-collapse needs the central charge, e.g. c_max from the "
            "central-charge task")
    i2_columns, i2_header = _read_input(
        config.inputs[0],
        {"mutual_information_I2", "mutual_information_sweep_I2"})
    family = i2_header["observable"][:-len("_I2")]
    i3_columns, _ = _read_input(config.inputs[1], {f"{family}_I3"})
    for key in ("ell", "ell_B", "probe_chord"):
        if key not in i2_columns or key not in i3_columns:
            raise InvalidParameterError(
                f"cft-collapse inputs need the {key!r} column")
        if not np.array_equal(i2_columns[key], i3_columns[key]):
            raise InvalidParameterError("I2 and I3 files use different "
                                        "layouts")
    params = _theory_params(i2_header, config.beta)
    characteristic = scales(params)
    window = config.window or (config.probe_factor * params.l0,
                               characteristic.l_c)
    probe = i2_columns["probe_chord"]
    check = cft_collapse_check(i2_columns["mean"], i3_columns["mean"],
                               i2_columns["cross_ratio"],
                               config.central_charge,
                               probe=probe, window=window)
    outside = (probe < window[0]) | (probe > window[1])
    if check.n_points == 0:
        logger.warning(f"No probe chord lies in [{window[0]:.4g}, "
                       f"{window[1]:.4g}]")
    return {
        "central_charge": config.central_charge,
        "family": family,
        "window": list(window),
        "ell": i2_columns["ell"],
        "ell_B": i2_columns["ell_B"],
        "probe_chord": probe,
        "cross_ratio": i2_columns["cross_ratio"],
        "residuals": check.residuals,
        "relative_residuals": check.relative_residuals,
        "max_relative_residual": check.max_relative_residual,
        "n_points": check.n_points,
        "max_relative_residual_outside": (
            float(check.relative_residuals[outside].max())
            if outside.any() else None),
    }


def _analyze_mutual_information_maximum(config):
    entries = []
    rng = np.random.default_rng(0)
    for path in config.inputs:
        columns, header = _read_input(path, {"mutual_information_I2"})
        params = _theory_params(header, config.beta)
        result = locate_maximum(_curve(columns, config.window),
                                config.n_bootstrap, rng)
        x = float(np.mean(columns["cross_ratio"]))
        entries.append({"input": path, "gamma": params.gamma,
                        "I2_max": result.y_max, "I2_max_err": result.y_err,
                        "ell_max": result.x_max, "ell_max_err": result.x_err,
                        "at_boundary": result.at_boundary, "cross_ratio": x,
                        "predicted_ell_max": scales(params).ell_max_I2(x)})
    return {"entries": entries, "scaling": _gamma_scaling(entries, "ell_max")}


_TASKS = {
    "crossover": _analyze_crossover,
    "central-charge": _analyze_central_charge,
    "power-law": _analyze_power_law,
    "cft-collapse": _analyze_cft_collapse,
    "mutual-information-maximum": _analyze_mutual_information_maximum,
}


def analyze(config):
    """Run one analysis task on result files and write a JSON report.

    Returns:
        dict: the report
    """
    report = _TASKS[config.task](config)
    report.update({"task": config.task, "inputs": list(config.inputs),
                   "code_version": CODE_VERSION, "units": UNITS})
    write_json(config.output, report)
    return report
