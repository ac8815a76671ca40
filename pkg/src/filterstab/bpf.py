"""Bootstrap particle filter with systematic tagging of significant particles
and Gaussian-jitter offspring resampling."""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DegenerateWeightsError
from .measures import EmpiricalMeasure, sample_gaussian

# Default jitter std: jitter covariance 0.5 * I_d.
DEFAULT_JITTER_SIGMA = math.sqrt(0.5)


@dataclass(frozen=True)
class BpfConfig:
    N: int = 500
    jitter_sigma: float = DEFAULT_JITTER_SIGMA
    sigma2: float = 0.4

    def __post_init__(self):
        if self.N < 2:
            raise ConfigurationError(f"particle count N={self.N} must be >= 2")
        if self.jitter_sigma <= 0:
            raise ConfigurationError("jitter_sigma must be positive")


def log_likelihood(y, x, obs):
    """log N(y; Hx, sigma2 I_q); x may be a single state or an (N, d) batch."""
    if obs.sigma2 <= 0:
        raise ConfigurationError("log_likelihood needs sigma2 > 0")
    resid = np.asarray(y, dtype=float) - obs.project(x)
    q = obs.q
    with np.errstate(over="ignore"):  # inf residuals become -inf log weights
        sq = (resid**2).sum(axis=-1)
    return -0.5 * q * math.log(2.0 * math.pi * obs.sigma2) - sq / (2.0 * obs.sigma2)


def significant_particles(weights, u):
    """Systematic selection: particle i is significant iff some comb point
    U_j = u + (j-1)/N falls in its cumulative-weight interval.

    Returns (indices, hit_counts); hit counts always sum to N.
    """
    w = np.asarray(weights, dtype=float)
    N = len(w)
    cum = np.cumsum(w)
    cum[-1] = 1.0  # guard rounding at the top end
    U = u + np.arange(N) / N
    hits = np.searchsorted(cum, U, side="left")
    counts = np.bincount(hits, minlength=N)
    idx = np.nonzero(counts)[0]
    return idx, counts[idx]


def allocate_offspring(sig_weights, N):
    """Offspring counts proportional to the (renormalized) significant weights,
    largest-remainder rounding, each count >= 1, total exactly N."""
    w = np.asarray(sig_weights, dtype=float)
    m = len(w)
    if m < 1 or np.any(w <= 0):
        raise ConfigurationError("significant weights must be positive")
    if m > N:
        raise ConfigurationError(f"cannot give {m} particles >= 1 offspring from N={N}")
    quota = w / w.sum() * N
    counts = np.floor(quota).astype(int)
    rem = N - counts.sum()
    if rem > 0:
        order = np.argsort(-(quota - counts), kind="stable")
        counts[order[:rem]] += 1
    # enforce the >= 1 floor by moving offspring from the largest allocations
    while np.any(counts == 0):
        counts[np.argmax(counts)] -= 1
        counts[np.argmin(counts)] += 1
    return counts


def resample_with_jitter(sig_points, counts, jitter_sigma, seed):
    """Keep each significant particle once plus counts[j]-1 jittered clones.

    Clones are N(parent, jitter_sigma^2 I_d) draws; output has uniform weights.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sig_points = np.atleast_2d(np.asarray(sig_points, dtype=float))
    counts = np.asarray(counts, dtype=int)
    parents = np.repeat(sig_points, counts - 1, axis=0)
    clones = parents + jitter_sigma * rng.standard_normal(parents.shape)
    return EmpiricalMeasure.uniform(np.vstack([sig_points, clones]))


def _bpf_step(X, y, obs, pcfg, rng, step):
    """Weight, tag, and resample one particle cloud; returns the new cloud."""
    logw = log_likelihood(y, X, obs)
    mx = logw.max()
    if not np.isfinite(mx):
        raise DegenerateWeightsError(step)
    w = np.exp(logw - mx)
    w /= w.sum()
    u = rng.uniform(0.0, 1.0 / pcfg.N)
    idx, counts = significant_particles(w, u)
    return resample_with_jitter(X[idx], counts, pcfg.jitter_sigma, rng)


def bpf_run(init, obsrec, obs, pcfg, propagate, seed):
    """Run the BPF for the whole observation record.

    The step-0 observation is assimilated without propagation; from k >= 1
    every particle is pushed one observation gap forward first. Returns the
    n+1 uniform post-resampling measures.
    """
    rng = np.random.default_rng(seed)
    n = obsrec.y.shape[0] - 1
    X = sample_gaussian(init, pcfg.N, rng).points
    m0 = _bpf_step(X, obsrec.y[0], obs, pcfg, rng, step=0)
    out = [m0]
    X = m0.points
    for k in range(1, n + 1):
        X = propagate(X)
        mk = _bpf_step(X, obsrec.y[k], obs, pcfg, rng, step=k)
        out.append(mk)
        X = mk.points
    return out
