"""Experiment orchestration: seeding, slices, sweeps, and result persistence.

A "slice" is one (filter, g, sigma2, epsilon) experiment: one truth
trajectory, R observation realizations, the chosen filter run from both the
unbiased and the biased initial distribution per realization, divergence and
error series, the exponential decay fit, and the RMSE correlation.
"""

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import bpf, enkf, metrics
from .exceptions import ConfigurationError, FilterStabError
from .lorenz96 import (
    ModelConfig,
    ObservationModel,
    generate_truth,
    make_propagator,
    observe,
    spin_up,
)
from .measures import GaussianSpec
from .sinkhorn import SinkhornConfig

FILTER_KINDS = ("enkf", "bpf")


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    sigma2: float = 0.4
    n_steps: int = None  # None -> 10 model time units, i.e. round(10 / g)
    n_realizations: int = 10
    ensemble_size: int = 500
    localization_radius: float = 2.0
    jitter_sigma: float = bpf.DEFAULT_JITTER_SIGMA
    epsilon: float = 0.01
    sinkhorn_rel_tol: float = 1e-3
    sinkhorn_max_iter: int = 10_000
    unbiased_variance: float = 0.1
    biased_offset: float = 4.0
    biased_variance: float = 1.0
    spin_up_iterations: int = 100_000
    fit_start_time: float = 0.0
    master_seed: int = 0
    truth_seed: int = None  # None -> derived from master_seed
    # sweep axes; None means "use the single scalar above"
    sweep_g: list = None
    sweep_sigma2: list = None
    sweep_epsilon: list = None
    sweep_realizations: list = None

    def steps_for(self, g):
        return self.n_steps if self.n_steps is not None else round(10.0 / g)

    def sinkhorn_config(self, epsilon=None):
        return SinkhornConfig(
            epsilon=self.epsilon if epsilon is None else epsilon,
            rel_tol=self.sinkhorn_rel_tol,
            max_iter=self.sinkhorn_max_iter,
        )

    def to_dict(self):
        d = asdict(self)
        d["model"] = asdict(self.model)
        return d

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# flat config-file keys -> (target, type)
_CONFIG_KEYS = {
    "d": int, "F": float, "g": float, "dt": float,
    "sigma2": float, "n_steps": int, "n_realizations": int,
    "ensemble_size": int, "localization_radius": float, "jitter_sigma": float,
    "epsilon": float, "sinkhorn_rel_tol": float, "sinkhorn_max_iter": int,
    "unbiased_variance": float, "biased_offset": float, "biased_variance": float,
    "spin_up_iterations": int, "fit_start_time": float,
    "master_seed": int, "truth_seed": int,
    "g_list": list, "sigma2_list": list, "epsilon_list": list,
    "realizations_list": list,
}

_LIST_TO_FIELD = {
    "g_list": "sweep_g",
    "sigma2_list": "sweep_sigma2",
    "epsilon_list": "sweep_epsilon",
    "realizations_list": "sweep_realizations",
}


def load_config(path):
    """Parse a flat JSON config file; unknown keys are rejected."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a flat JSON object")
    unknown = sorted(set(raw) - set(_CONFIG_KEYS))
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    model_kwargs = {}
    cfg_kwargs = {}
    for key, value in raw.items():
        want = _CONFIG_KEYS[key]
        if want is list:
            if not isinstance(value, list) or not value:
                raise ConfigurationError(f"config key {key} must be a nonempty list")
            cfg_kwargs[_LIST_TO_FIELD[key]] = value
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigurationError(f"config key {key} must be a number")
            value = want(value)
            if key in ("d", "F", "g", "dt"):
                model_kwargs[key] = value
            else:
                cfg_kwargs[key] = value
    return ExperimentConfig(model=ModelConfig(**model_kwargs), **cfg_kwargs)


def derive_seeds(master_seed, role, index=0):
    """Deterministic, collision-resistant child seed for (master, role, index)."""
    digest = hashlib.sha256(f"{master_seed}\x1f{role}\x1f{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class SliceResult:
    filter_kind: str
    g: float
    sigma2: float
    epsilon: float
    n_realizations: int
    div: metrics.DivergenceSeries
    err_unbiased: metrics.ErrorSeries
    err_biased: metrics.ErrorSeries
    fit: metrics.FitResult
    corr: metrics.CorrelationSummary
    provenance: dict


@dataclass
class SweepResult:
    slices: list
    failures: list  # (key, error message) pairs


def _filter_runner(filter_kind, config, sigma2):
    if filter_kind == "enkf":
        fcfg = enkf.EnkfConfig(
            N=config.ensemble_size,
            localization_radius=config.localization_radius,
            sigma2=sigma2,
        )
        return lambda init, rec, obs, prop, seed: enkf.enkf_run(
            init, rec, obs, fcfg, prop, seed
        )
    if filter_kind == "bpf":
        fcfg = bpf.BpfConfig(
            N=config.ensemble_size, jitter_sigma=config.jitter_sigma, sigma2=sigma2
        )
        return lambda init, rec, obs, prop, seed: bpf.bpf_run(
            init, rec, obs, fcfg, prop, seed
        )
    raise ConfigurationError(f"unknown filter kind {filter_kind!r}")


def truth_initial_state(config):
    """Spin-up onto the attractor; shared across a sweep for comparability."""
    seed = (
        config.truth_seed
        if config.truth_seed is not None
        else derive_seeds(config.master_seed, "spinup")
    )
    return spin_up(seed, config.model, config.spin_up_iterations)


def run_single(
    config,
    g=None,
    sigma2=None,
    filter_kind="bpf",
    x0_true=None,
    epsilons=None,
    n_realizations=None,
    n_jobs=1,
):
    """Run one experiment slice.

    With `epsilons` a list, the filter runs are shared and one SliceResult per
    epsilon is returned; otherwise a single SliceResult for config.epsilon.
    """
    single = epsilons is None
    eps_list = [config.epsilon] if single else list(epsilons)
    g = config.model.g if g is None else g
    sigma2 = config.sigma2 if sigma2 is None else sigma2
    R = config.n_realizations if n_realizations is None else n_realizations
    model = replace(config.model, g=g)
    if x0_true is None:
        x0_true = truth_initial_state(replace(config, model=model))
    n = config.steps_for(g)
    truth = generate_truth(x0_true, n, model)
    obs_model = ObservationModel.alternate(model.d, sigma2)
    propagate = make_propagator(model)
    runner = _filter_runner(filter_kind, config, sigma2)
    init_unbiased = GaussianSpec(mean=x0_true, variance_scale=config.unbiased_variance)
    init_biased = GaussianSpec(
        mean=x0_true + config.biased_offset * np.ones(model.d),
        variance_scale=config.biased_variance,
    )

    slice_tag = f"{filter_kind}/g={g!r}/sigma2={sigma2!r}"
    runs_unbiased, runs_biased = [], []
    for r in range(R):
        rec = observe(truth, obs_model, derive_seeds(config.master_seed, "obs", r), r)
        runs_unbiased.append(
            runner(init_unbiased, rec, obs_model, propagate,
                   derive_seeds(config.master_seed, f"{slice_tag}/unbiased", r))
        )
        runs_biased.append(
            runner(init_biased, rec, obs_model, propagate,
                   derive_seeds(config.master_seed, f"{slice_tag}/biased", r))
        )

    err_u = metrics.error_series(truth.times, runs_unbiased, truth.states)
    err_b = metrics.error_series(truth.times, runs_biased, truth.states)

    results = []
    for eps in eps_list:
        scfg = config.sinkhorn_config(eps)
        div = metrics.divergence_series(
            truth.times, runs_unbiased, runs_biased, scfg, n_jobs=n_jobs
        )
        fit = metrics.exp_fit(truth.times, div.mean, config.fit_start_time)
        corr = metrics.rmse_vs_divergence(err_b, div)
        results.append(
            SliceResult(
                filter_kind=filter_kind,
                g=g,
                sigma2=sigma2,
                epsilon=eps,
                n_realizations=R,
                div=div,
                err_unbiased=err_u,
                err_biased=err_b,
                fit=fit,
                corr=corr,
                provenance={
                    "config_hash": config.config_hash(),
                    "master_seed": config.master_seed,
                    "slice_tag": slice_tag,
                    "epsilon": eps,
                },
            )
        )
    return results[0] if single else results


def run_sweep(config, filter_kinds=FILTER_KINDS, n_jobs=1):
    """Cartesian sweep over the configured axes; failures are recorded per
    slice and do not stop the sweep."""
    gs = config.sweep_g or [config.model.g]
    sigma2s = config.sweep_sigma2 or [config.sigma2]
    epsilons = config.sweep_epsilon or [config.epsilon]
    r_counts = config.sweep_realizations or [config.n_realizations]
    x0_true = truth_initial_state(config)
    slices, failures = [], []
    for fk in filter_kinds:
        for g in gs:
            for s2 in sigma2s:
                for R in r_counts:
                    key = (fk, g, s2, tuple(epsilons), R)
                    try:
                        slices.extend(
                            run_single(
                                config, g=g, sigma2=s2, filter_kind=fk,
                                x0_true=x0_true, epsilons=epsilons,
                                n_realizations=R, n_jobs=n_jobs,
                            )
                        )
                    except FilterStabError as exc:
                        failures.append((key, str(exc)))
    return SweepResult(slices=slices, failures=failures)


# --- persistence ---


def _fmt(v):
    return f"{v:.17g}"


SERIES_HEADER = (
    "filter,g,sigma2,epsilon,realization,step,time,d_eps,"
    "e2_unbiased,e2_biased,s2_unbiased,s2_biased"
)


def write_series_csv(slices, path):
    with open(path, "w", newline="") as fh:
        fh.write(SERIES_HEADER + "\n")
        for sl in slices:
            prefix = f"{sl.filter_kind},{_fmt(sl.g)},{_fmt(sl.sigma2)},{_fmt(sl.epsilon)}"
            n = len(sl.div.times)
            for r in range(sl.n_realizations):
                for k in range(n):
                    fh.write(
                        f"{prefix},{r},{k},{_fmt(sl.div.times[k])},"
                        f"{_fmt(sl.div.per_realization[r, k])},"
                        f"{_fmt(sl.err_unbiased.e2[r, k])},"
                        f"{_fmt(sl.err_biased.e2[r, k])},"
                        f"{_fmt(sl.err_unbiased.s2[r, k])},"
                        f"{_fmt(sl.err_biased.s2[r, k])}\n"
                    )
            for k in range(n):
                fh.write(
                    f"{prefix},mean,{k},{_fmt(sl.div.times[k])},"
                    f"{_fmt(sl.div.mean[k])},"
                    f"{_fmt(sl.err_unbiased.e2_mean[k])},"
                    f"{_fmt(sl.err_biased.e2_mean[k])},"
                    f"{_fmt(sl.err_unbiased.s2_mean[k])},"
                    f"{_fmt(sl.err_biased.s2_mean[k])}\n"
                )


def fit_record(sl):
    return {
        "filter": sl.filter_kind,
        "g": sl.g,
        "sigma2": sl.sigma2,
        "a": sl.fit.a,
        "ci_a": sl.fit.ci_a,
        "lambda": sl.fit.lam,
        "ci_lambda": sl.fit.ci_lam,
        "c": sl.fit.c,
        "ci_c": sl.fit.ci_c,
        "r2": sl.fit.r2,
        "pearson_rmse_deps": sl.corr.pearson_r,
    }


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_fits_json(slices, path):
    records = [
        {k: _json_safe(v) for k, v in fit_record(sl).items()} for sl in slices
    ]
    with open(path, "w") as fh:
        json.dump(records, fh, indent=2)
        fh.write("\n")


def format_fit_table(slices, axis="g"):
    """Plain-text table: rows (a, lambda, c) x filters, columns the axis values."""
    values = sorted({getattr(sl, axis) for sl in slices})
    filters = sorted({sl.filter_kind for sl in slices})
    by_key = {(sl.filter_kind, getattr(sl, axis)): sl for sl in slices}
    lines = [axis + "\t" + "\t".join(f"{v:g}" for v in values)]
    for param, attr in (("a", "a"), ("lambda", "lam"), ("c", "c")):
        for fk in filters:
            cells = []
            for v in values:
                sl = by_key.get((fk, v))
                if sl is None or not sl.fit.success:
                    cells.append("-")
                else:
                    est = getattr(sl.fit, attr)
                    ci = getattr(sl.fit, "ci_" + ("lam" if attr == "lam" else attr))
                    cells.append(f"{est:.4g} +/- {ci:.2g}")
            lines.append(f"{param} {fk}\t" + "\t".join(cells))
    return "\n".join(lines) + "\n"


def report(slices, out_dir):
    """Write the series CSV, the fit/correlation JSON, and fit tables.

    Returns the list of written paths. Output is a pure function of the
    slice data, so identical runs produce byte-identical files.
    """
    if not slices:
        raise ValueError("no results to report")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    try:
        series_path = os.path.join(out_dir, "series.csv")
        write_series_csv(slices, series_path)
        paths.append(series_path)
        fits_path = os.path.join(out_dir, "fits.json")
        write_fits_json(slices, fits_path)
        paths.append(fits_path)
        tables_path = os.path.join(out_dir, "tables.txt")
        with open(tables_path, "w") as fh:
            for axis in ("g", "sigma2"):
                fh.write(f"# fits by {axis}\n")
                fh.write(format_fit_table(slices, axis=axis))
                fh.write("\n")
        paths.append(tables_path)
    except OSError as exc:
        raise FilterStabError(f"failed writing report to {out_dir}: {exc}") from exc
    return paths


def load_series_csv(path):
    """Re-parse a series CSV into per-(filter, g, sigma2, epsilon) groups.

    Returns a dict mapping that key to a dict with times, d_eps rows per
    realization, the stored mean row, and the error/spread columns.
    """
    groups = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != SERIES_HEADER:
            raise ConfigurationError(f"unexpected series header in {path}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            key = (parts[0], float(parts[1]), float(parts[2]), float(parts[3]))
            realization = parts[4]
            rec = groups.setdefault(key, {})
            rows = rec.setdefault(realization, {"time": [], "d_eps": [],
                                                "e2_unbiased": [], "e2_biased": [],
                                                "s2_unbiased": [], "s2_biased": []})
            rows["time"].append(float(parts[6]))
            rows["d_eps"].append(float(parts[7]))
            rows["e2_unbiased"].append(float(parts[8]))
            rows["e2_biased"].append(float(parts[9]))
            rows["s2_unbiased"].append(float(parts[10]))
            rows["s2_biased"].append(float(parts[11]))
    for rec in groups.values():
        for rows in rec.values():
            for col in rows:
                rows[col] = np.asarray(rows[col])
    return groups


def refit_series(path, fit_start_time=0.0):
    """Recompute exponential fits and correlations from a stored series CSV.

    Returns fit-record dicts in the same schema as write_fits_json.
    """
    groups = load_series_csv(path)
    records = []
    for (fk, g, s2, eps), rec in sorted(groups.items()):
        mean = rec["mean"]
        fit = metrics.exp_fit(mean["time"], mean["d_eps"], fit_start_time)
        rmse = np.sqrt(mean["e2_biased"])
        r = metrics.pearson(mean["d_eps"], rmse)
        records.append({
            "filter": fk, "g": g, "sigma2": s2,
            "a": fit.a, "ci_a": fit.ci_a,
            "lambda": fit.lam, "ci_lambda": fit.ci_lam,
            "c": fit.c, "ci_c": fit.ci_c,
            "r2": fit.r2, "pearson_rmse_deps": r,
        })
    return records
