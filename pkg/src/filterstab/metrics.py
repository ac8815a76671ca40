"""Evaluation quantities: scaled l2 error, ensemble spread, divergence time
series between paired filter runs, the exponential decay fit, and the
RMSE-vs-divergence correlation."""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.stats

from .exceptions import (
    InsufficientSampleError,
    SinkhornConvergenceError,
    UndefinedCorrelationError,
)
from .measures import measure_covariance_trace, measure_mean
from .sinkhorn import pairwise_d_eps

# cap on per-call cost-tensor memory when batching divergence evaluations
_BATCH_ELEMENTS = 8_000_000


@dataclass
class DivergenceSeries:
    """Per-step D_eps values for each observation realization plus their mean."""

    times: np.ndarray  # (n+1,)
    per_realization: np.ndarray  # (R, n+1)
    mean: np.ndarray  # (n+1,)


@dataclass
class FitResult:
    """Parameters of a * exp(-lambda t) + c with 95% CI half-widths."""

    a: float
    lam: float
    c: float
    ci_a: float
    ci_lam: float
    ci_c: float
    r2: float
    success: bool
    message: str = ""


@dataclass
class ErrorSeries:
    """Squared scaled error and squared spread per realization, plus RMSE."""

    times: np.ndarray
    e2: np.ndarray  # (R, n+1)
    e2_mean: np.ndarray
    s2: np.ndarray  # (R, n+1)
    s2_mean: np.ndarray
    rmse: np.ndarray  # sqrt of e2_mean


@dataclass
class CorrelationSummary:
    pairs: np.ndarray  # (n+1, 2) columns (mean D_eps, rmse)
    pearson_r: float
    slope: float
    intercept: float
    r2: float


def scaled_l2_error(m, x_true):
    """||mean(m) - x_true||_2 / sqrt(d)."""
    diff = measure_mean(m) - np.asarray(x_true, dtype=float)
    return float(np.linalg.norm(diff) / math.sqrt(diff.shape[0]))


def ensemble_spread(m):
    """sqrt(trace of sample covariance / d)."""
    if m.n < 2:
        raise InsufficientSampleError("spread needs at least 2 atoms")
    return float(math.sqrt(measure_covariance_trace(m) / m.dim))


def _stack_run(run):
    return np.stack([m.points for m in run])


def divergence_series(times, runs_a, runs_b, scfg, n_jobs=1):
    """D_eps between corresponding measures of two run collections.

    runs_a, runs_b : lists (one entry per realization) of per-step measure
    sequences with identical shapes. Evaluations are batched; with n_jobs > 1
    realizations are distributed over worker processes and reassembled in
    realization order, so results do not depend on scheduling.
    """
    if len(runs_a) != len(runs_b):
        raise ValueError("realization counts differ")
    times = np.asarray(times, dtype=float)
    jobs = [( _stack_run(a), _stack_run(b)) for a, b in zip(runs_a, runs_b)]
    if n_jobs > 1:
        from joblib import Parallel, delayed

        rows = Parallel(n_jobs=n_jobs)(
            delayed(_series_for_realization)(r, pa, pb, scfg)
            for r, (pa, pb) in enumerate(jobs)
        )
    else:
        rows = [
            _series_for_realization(r, pa, pb, scfg)
            for r, (pa, pb) in enumerate(jobs)
        ]
    per = np.stack(rows)
    return DivergenceSeries(times=times, per_realization=per, mean=per.mean(axis=0))


def _series_for_realization(realization, pts_a, pts_b, scfg):
    n_steps, N, _ = pts_a.shape
    M = pts_b.shape[1]
    chunk = max(1, _BATCH_ELEMENTS // (N * M))
    out = np.empty(n_steps)
    for lo in range(0, n_steps, chunk):
        hi = min(lo + chunk, n_steps)
        try:
            out[lo:hi] = pairwise_d_eps(pts_a[lo:hi], pts_b[lo:hi], scfg)
        except SinkhornConvergenceError as exc:
            steps = [lo + s for s in (exc.context or [])]
            raise SinkhornConvergenceError(
                f"divergence failed at realization {realization}, steps {steps}: {exc}",
                last_rel_err=exc.last_rel_err,
                context={"realization": realization, "steps": steps},
            ) from exc
    return out


def error_series(times, runs, truth_states):
    """ErrorSeries for one collection of filter runs against the truth."""
    times = np.asarray(times, dtype=float)
    e2 = np.empty((len(runs), len(times)))
    s2 = np.empty_like(e2)
    for r, run in enumerate(runs):
        for k, m in enumerate(run):
            e2[r, k] = scaled_l2_error(m, truth_states[k]) ** 2
            s2[r, k] = ensemble_spread(m) ** 2
    e2_mean = e2.mean(axis=0)
    return ErrorSeries(
        times=times,
        e2=e2,
        e2_mean=e2_mean,
        s2=s2,
        s2_mean=s2.mean(axis=0),
        rmse=np.sqrt(e2_mean),
    )


# --- exponential decay fit ---


def exp_model(t, a, lam, c):
    return a * np.exp(np.clip(-lam * t, -700.0, 700.0)) + c


def exp_jacobian(t, a, lam, c):
    """Analytic Jacobian of exp_model w.r.t. (a, lambda, c)."""
    e = np.exp(np.clip(-lam * t, -700.0, 700.0))
    return np.column_stack([e, -a * t * e, np.ones_like(t)])


def _fit_failure(message, a=np.nan, lam=np.nan, c=np.nan, r2=np.nan):
    return FitResult(
        a=a, lam=lam, c=c, ci_a=np.nan, ci_lam=np.nan, ci_c=np.nan,
        r2=r2, success=False, message=message,
    )


def exp_fit(times, values, fit_start_time=0.0):
    """Least-squares fit of a * exp(-lambda t) + c by Levenberg-Marquardt.

    Initialization: c0 = mean of the last 10% of values, a0 = values[0] - c0,
    lambda0 = 1 / t_half with t_half the first time the series crosses the
    halfway level (fallback 1). Confidence intervals come from the linearized
    parameter covariance with the residual variance; failures (divergence or
    a nonpositive decay rate) are reported in the result, not raised.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(t) != len(v) or len(t) < 4:
        raise ValueError("need >= 4 aligned points")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    if fit_start_time > 0:
        keep = t >= fit_start_time
        t, v = t[keep], v[keep]
        if len(t) < 4:
            raise ValueError("fit window leaves fewer than 4 points")

    tail = max(1, int(round(0.1 * len(v))))
    c0 = float(v[-tail:].mean())
    a0 = float(v[0] - c0)
    if abs(a0) < 1e-12 * max(1.0, abs(c0)) or np.ptp(v) == 0:
        return _fit_failure("series has no decaying component", a=0.0, c=c0)
    half = c0 + 0.5 * a0
    below = np.nonzero(v < half)[0] if a0 > 0 else np.nonzero(v > half)[0]
    lam0 = 1.0 / t[below[0]] if len(below) and t[below[0]] > 0 else 1.0

    def residuals(p):
        return exp_model(t, *p) - v

    def jac(p):
        return exp_jacobian(t, *p)

    try:
        sol = scipy.optimize.least_squares(
            residuals, x0=[a0, lam0, c0], jac=jac, method="lm", xtol=1e-12,
            ftol=1e-12, gtol=1e-12, max_nfev=2000,
        )
    except Exception as exc:  # noqa: BLE001 - reported, not raised
        return _fit_failure(f"optimizer error: {exc}")
    if not sol.success:
        return _fit_failure(f"optimizer did not converge: {sol.message}")
    a, lam, c = sol.x
    ss_res = float((sol.fun**2).sum())
    ss_tot = float(((v - v.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else np.nan
    if lam <= 0:
        return _fit_failure(
            f"fitted decay rate {lam:.4g} is not positive", a=a, lam=lam, c=c, r2=r2
        )
    dof = len(t) - 3
    J = exp_jacobian(t, a, lam, c)
    try:
        cov = scipy.linalg.inv(J.T @ J) * (ss_res / max(dof, 1))
        tq = scipy.stats.t.ppf(0.975, max(dof, 1))
        ci = tq * np.sqrt(np.diag(cov))
    except scipy.linalg.LinAlgError:
        ci = np.full(3, np.nan)
    return FitResult(
        a=float(a), lam=float(lam), c=float(c),
        ci_a=float(ci[0]), ci_lam=float(ci[1]), ci_c=float(ci[2]),
        r2=r2, success=True,
    )


def pearson(x, y):
    """Sample Pearson correlation coefficient."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("need equal-length inputs with >= 2 points")
    xd = x - x.mean()
    yd = y - y.mean()
    sx = float((xd**2).sum())
    sy = float((yd**2).sum())
    if sx == 0 or sy == 0:
        raise UndefinedCorrelationError("zero variance input")
    return float(np.clip((xd @ yd) / math.sqrt(sx * sy), -1.0, 1.0))


def rmse_vs_divergence(err, div):
    """Scatter of (mean D_eps, RMSE) with Pearson r and the OLS best-fit line."""
    if len(err.times) != len(div.times):
        raise ValueError("time grids are not aligned")
    x = div.mean
    y = err.rmse
    r = pearson(x, y)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else np.nan
    return CorrelationSummary(
        pairs=np.column_stack([x, y]),
        pearson_r=r,
        slope=float(slope),
        intercept=float(intercept),
        r2=r2,
    )
