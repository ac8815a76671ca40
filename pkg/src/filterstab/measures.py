"""Weighted empirical measures in state space and Gaussian ensemble sampling."""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, InsufficientSampleError, InvalidStateError

WEIGHT_SUM_TOL = 1e-12


@dataclass
class EmpiricalMeasure:
    """N weighted atoms in R^d; the common representation for filter outputs
    and Sinkhorn inputs."""

    points: np.ndarray  # (N, d)
    weights: np.ndarray  # (N,)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.points.shape[0] != self.weights.shape[0]:
            raise ConfigurationError("points and weights length mismatch")
        if self.points.shape[0] < 1:
            raise ConfigurationError("measure needs at least one atom")
        if not np.all(np.isfinite(self.points)):
            raise InvalidStateError("non-finite atom coordinates")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ConfigurationError("weights must be finite and nonnegative")
        if abs(self.weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ConfigurationError(
                f"weights sum to {self.weights.sum()!r}, expected 1"
            )

    @classmethod
    def uniform(cls, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        n = points.shape[0]
        return cls(points=points, weights=np.full(n, 1.0 / n))

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class GaussianSpec:
    """Isotropic Gaussian N(mean, variance_scale * I_d)."""

    mean: np.ndarray
    variance_scale: float

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).ravel())
        if self.variance_scale <= 0:
            raise ConfigurationError(
                f"variance_scale={self.variance_scale} must be positive"
            )


def sample_gaussian(spec, N, seed):
    """N iid draws from the spec's Gaussian, with uniform weights."""
    if N < 1:
        raise ConfigurationError(f"N={N} must be >= 1")
    rng = np.random.default_rng(seed)
    d = spec.mean.shape[0]
    points = spec.mean + math.sqrt(spec.variance_scale) * rng.standard_normal((N, d))
    return EmpiricalMeasure.uniform(points)


def measure_mean(m):
    """Weighted mean of the atoms."""
    return m.weights @ m.points


def measure_covariance_trace(m):
    """Trace of the unbiased sample covariance.

    For uniform weights this is the usual N-1 divisor; general weights use
    the 1/(1 - sum w_i^2) correction, which reduces to N/(N-1) when uniform.
    """
    if m.n < 2:
        raise InsufficientSampleError("covariance needs at least 2 atoms")
    mean = measure_mean(m)
    dev2 = ((m.points - mean) ** 2).sum(axis=1)
    denom = 1.0 - float(m.weights @ m.weights)
    if denom <= 0:  # single effective atom
        return 0.0
    return float((m.weights @ dev2) / denom)


def save_measure_csv(m, path):
    d = m.dim
    header = ["weight"] + [f"x_{i + 1}" for i in range(d)]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for w, row in zip(m.weights, m.points):
            fields = [f"{w:.17g}"] + [f"{v:.17g}" for v in row]
            fh.write(",".join(fields) + "\n")


def load_measure_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return EmpiricalMeasure(points=data[:, 1:], weights=data[:, 0])
