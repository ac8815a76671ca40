"""Lorenz-96 dynamics: RK4 flow map, attractor spin-up, truth trajectories,
and the sparse (alternate-coordinate) observation operator."""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DivergenceError, InvalidStateError

BLOWUP_THRESHOLD = 1e6


@dataclass(frozen=True)
class ModelConfig:
    """Model and integrator parameters.

    d : state dimension (>= 4, the cyclic RHS needs four distinct indices)
    F : forcing constant
    g : observation gap in model time units (must be a multiple of dt)
    dt : internal RK4 step
    """

    d: int = 10
    F: float = 10.0
    g: float = 0.05
    dt: float = 0.01

    def __post_init__(self):
        if self.d < 4:
            raise ConfigurationError(f"state dimension d={self.d} must be >= 4")
        if self.dt <= 0:
            raise ConfigurationError(f"dt={self.dt} must be positive")
        if self.g <= 0:
            raise ConfigurationError(f"observation gap g={self.g} must be positive")
        n = round(self.g / self.dt)
        if n < 1 or abs(n * self.dt - self.g) > 1e-12 * max(1.0, abs(self.g)):
            raise ConfigurationError(
                f"g={self.g} is not an integer multiple of dt={self.dt}"
            )

    @property
    def steps_per_gap(self):
        return round(self.g / self.dt)


@dataclass
class Trajectory:
    """Sequence of states sampled every g time units; times[k] = k * g."""

    states: np.ndarray  # (n+1, d)
    times: np.ndarray  # (n+1,)


@dataclass(frozen=True)
class ObservationModel:
    """Linear projection onto a subset of coordinates plus iid Gaussian noise.

    `observed_indices` are 0-based internal indices. The standard setup
    observes alternate coordinates starting from the first one; use
    `ObservationModel.alternate` for that.
    """

    d: int
    observed_indices: np.ndarray
    sigma2: float

    def __post_init__(self):
        idx = np.asarray(self.observed_indices, dtype=np.intp)
        object.__setattr__(self, "observed_indices", idx)
        if self.sigma2 < 0:
            raise ConfigurationError(f"sigma2={self.sigma2} must be >= 0")
        if idx.size == 0 or idx.min() < 0 or idx.max() >= self.d:
            raise ConfigurationError("observed indices out of range")

    @classmethod
    def alternate(cls, d, sigma2):
        """Observe coordinates 1, 3, 5, ... (1-based), i.e. q = ceil(d/2)."""
        return cls(d=d, observed_indices=np.arange(0, d, 2), sigma2=sigma2)

    @property
    def q(self):
        return len(self.observed_indices)

    def project(self, x):
        """Apply H to a state (..., d) -> (..., q)."""
        return np.asarray(x)[..., self.observed_indices]


@dataclass
class ObservationRecord:
    """Noisy observations of one trajectory for one noise realization."""

    y: np.ndarray  # (n+1, q)
    realization_id: int = 0
    seed: int = 0


def l96_rhs(x, F):
    """Cyclic Lorenz-96 right-hand side, dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F.

    Operates on the last axis, so an (N, d) ensemble works directly.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidStateError("non-finite entries in state vector")
    xp1 = np.roll(x, -1, axis=-1)
    xm1 = np.roll(x, 1, axis=-1)
    xm2 = np.roll(x, 2, axis=-1)
    return (xp1 - xm2) * xm1 - x + F


def _rk4_step(x, dt, F):
    k1 = l96_rhs(x, F)
    k2 = l96_rhs(x + 0.5 * dt * k1, F)
    k3 = l96_rhs(x + 0.5 * dt * k2, F)
    k4 = l96_rhs(x + dt * k3, F)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def flow(x0, t, cfg):
    """Integrate the model for time t with classical RK4 at fixed step cfg.dt.

    t must be a nonnegative integer multiple of cfg.dt. Accepts a single
    state (d,) or an ensemble (N, d). Deterministic given (x0, t, cfg).
    """
    x = np.asarray(x0, dtype=float)
    if t < 0:
        raise ConfigurationError(f"flow time t={t} must be >= 0")
    n = round(t / cfg.dt)
    if abs(n * cfg.dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ConfigurationError(f"t={t} is not an integer multiple of dt={cfg.dt}")
    if n == 0:
        return x.copy()
    for _ in range(n):
        x = _rk4_step(x, cfg.dt, cfg.F)
        if np.abs(x).max() > BLOWUP_THRESHOLD:
            raise DivergenceError("state magnitude exceeded blow-up threshold")
    return x


def spin_up(seed, cfg, n_iterations=100_000):
    """Draw a standard-normal point and apply f_g n_iterations times.

    Returns a point on (near) the attractor, used as the true initial state.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(cfg.d)
    x = flow(x, n_iterations * cfg.g, cfg)
    return x


def generate_truth(x0, n, cfg):
    """Trajectory of n+1 states starting at x0, sampled every g time units."""
    x0 = np.asarray(x0, dtype=float)
    states = np.empty((n + 1, cfg.d))
    states[0] = x0
    x = x0
    for k in range(n):
        x = flow(x, cfg.g, cfg)
        states[k + 1] = x
    times = np.arange(n + 1) * cfg.g
    return Trajectory(states=states, times=times)


def observe(traj, obs, seed, realization_id=0):
    """Project each trajectory state through H and add N(0, sigma2) noise."""
    rng = np.random.default_rng(seed)
    clean = obs.project(traj.states)
    noise = math.sqrt(obs.sigma2) * rng.standard_normal(clean.shape)
    return ObservationRecord(y=clean + noise, realization_id=realization_id, seed=seed)


def make_propagator(cfg):
    """One-observation-gap flow map f_g as a callable on states/ensembles."""

    def propagate(x):
        return flow(x, cfg.g, cfg)

    return propagate


# --- CSV serialization (17 significant digits, lossless for float64) ---


def _write_csv(path, header, times, values):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for t, row in zip(times, values):
            fields = [f"{t:.17g}"] + [f"{v:.17g}" for v in row]
            fh.write(",".join(fields) + "\n")


def save_trajectory_csv(traj, path):
    d = traj.states.shape[1]
    header = ["time"] + [f"x_{i + 1}" for i in range(d)]
    _write_csv(path, header, traj.times, traj.states)


def load_trajectory_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(states=data[:, 1:], times=data[:, 0])


def save_observations_csv(rec, path, g=1.0):
    q = rec.y.shape[1]
    header = ["time"] + [f"y_{j + 1}" for j in range(q)]
    times = np.arange(rec.y.shape[0], dtype=float) * g
    _write_csv(path, header, times, rec.y)


def load_observations_csv(path, realization_id=0, seed=0):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return ObservationRecord(y=data[:, 1:], realization_id=realization_id, seed=seed)
