"""Debiased entropic optimal transport in the log domain.

Dual fixed-point iterations give OT_eps; the Sinkhorn divergence
S_eps(mu, nu) = OT_eps(mu, nu) - OT_eps(mu, mu)/2 - OT_eps(nu, nu)/2 and its
square root D_eps serve as the W2 surrogate. A brute-force permutation
solver for small uniform instances is included as an independent oracle.
"""

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ConfigurationError,
    SinkhornConvergenceError,
    UnsupportedInstanceError,
)

logger = logging.getLogger(__name__)

# Arguments below this are irrelevant to any LSE sum (exp < 1e-304) but
# clipping keeps the exp call out of the subnormal slow path.
_EXP_FLOOR = -700.0

NEGATIVE_S_WARN = -1e-6


@dataclass(frozen=True)
class SinkhornConfig:
    epsilon: float
    rel_tol: float = 1e-3
    max_iter: int = 10_000

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")
        if not 0 < self.rel_tol < 1:
            raise ConfigurationError("rel_tol must be in (0, 1)")
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be >= 1")


@dataclass
class DualPotentials:
    a: np.ndarray
    b: np.ndarray
    iterations: int


def _sqdist_batch(X, Y):
    """Pairwise squared euclidean distances, (B, N, d) x (B, M, d) -> (B, N, M)."""
    xx = (X**2).sum(-1)
    yy = (Y**2).sum(-1)
    C = xx[..., :, None] + yy[..., None, :] - 2.0 * np.matmul(X, np.swapaxes(Y, -1, -2))
    np.maximum(C, 0.0, out=C)
    return C


def cost_matrix(mu, nu):
    """Squared-distance cost matrix between the atoms of two measures."""
    if mu.dim != nu.dim:
        raise ConfigurationError(
            f"ambient dimension mismatch: {mu.dim} vs {nu.dim}"
        )
    return _sqdist_batch(mu.points[None], nu.points[None])[0]


def _log_weights(w):
    with np.errstate(divide="ignore"):
        return np.log(w)


def _lse(Z, axis):
    """Stable log-sum-exp along an axis.

    Shifted values are floored at -700 before exp: those terms are below
    1e-304 relative to the row maximum, and the floor keeps exp out of the
    subnormal slow path. Rows that are entirely -inf are mapped to the floor.
    """
    m = Z.max(axis=axis, keepdims=True)
    m[~np.isfinite(m)] = _EXP_FLOOR
    s = np.exp(np.maximum(Z - m, _EXP_FLOOR)).sum(axis=axis)
    return np.squeeze(m, axis=axis) + np.log(s)


def _rel_l1(new, old):
    denom = np.abs(old).sum(axis=-1)
    np.maximum(denom, 1e-30, out=denom)
    return np.abs(new - old).sum(axis=-1) / denom


def _dual_batch(C, log_mu, log_nu, eps, rel_tol, max_iter):
    """Batched alternating dual updates.

    C : (B, N, M) costs; log_mu : (B, N); log_nu : (B, M).
    Returns (a, b, ot_values, iterations); every batch element stops at its
    own convergence point, so results match the unbatched iteration exactly.
    """
    B, N, M = C.shape
    out_a = np.empty((B, N))
    out_b = np.empty((B, M))
    iters = np.zeros(B, dtype=int)
    active = np.arange(B)
    Ce = C / eps
    lm, ln = log_mu, log_nu
    a = np.zeros((len(active), N))
    b = np.zeros((len(active), M))
    last_err = np.inf
    for it in range(1, max_iter + 1):
        a_new = -eps * _lse((ln + b / eps)[:, None, :] - Ce, axis=2)
        b_new = -eps * _lse((lm + a_new / eps)[:, :, None] - Ce, axis=1)
        ra = _rel_l1(a_new, a)
        rb = _rel_l1(b_new, b)
        a, b = a_new, b_new
        err = np.minimum(ra, rb)
        done = err <= rel_tol
        if done.any():
            out_a[active[done]] = a[done]
            out_b[active[done]] = b[done]
            iters[active[done]] = it
            keep = ~done
            active = active[keep]
            if len(active) == 0:
                break
            Ce, lm, ln, a, b = Ce[keep], lm[keep], ln[keep], a[keep], b[keep]
        last_err = float(err.min())
    else:
        raise SinkhornConvergenceError(
            f"dual iteration hit max_iter={max_iter} "
            f"(last relative error {last_err:.3e})",
            last_rel_err=last_err,
            context=active.tolist(),
        )
    ot = (np.exp(log_mu) * out_a).sum(-1) + (np.exp(log_nu) * out_b).sum(-1)
    return out_a, out_b, ot, iters


def _sym_batch(C, log_mu, eps, rel_tol, max_iter):
    """Batched damped self-updates for OT_eps(mu, mu).

    Returns (a, values, iterations) with value = 2 * sum_i mu_i a_i.
    """
    B, N, _ = C.shape
    out_a = np.empty((B, N))
    iters = np.zeros(B, dtype=int)
    active = np.arange(B)
    Ce = C / eps
    lm = log_mu
    a = np.zeros((len(active), N))
    last_err = np.inf
    for it in range(1, max_iter + 1):
        a_new = 0.5 * (a - eps * _lse((lm + a / eps)[:, None, :] - Ce, axis=2))
        ra = _rel_l1(a_new, a)
        a = a_new
        done = ra <= rel_tol
        if done.any():
            out_a[active[done]] = a[done]
            iters[active[done]] = it
            keep = ~done
            active = active[keep]
            if len(active) == 0:
                break
            Ce, lm, a = Ce[keep], lm[keep], a[keep]
        last_err = float(ra.min())
    else:
        raise SinkhornConvergenceError(
            f"symmetric iteration hit max_iter={max_iter} "
            f"(last relative error {last_err:.3e})",
            last_rel_err=last_err,
            context=active.tolist(),
        )
    values = 2.0 * (np.exp(log_mu) * out_a).sum(-1)
    return out_a, values, iters


def ot_dual(mu, nu, cfg):
    """Entropic OT value via alternating log-domain dual updates.

    Returns (DualPotentials, ot_value). Stops once the smaller of the L1
    relative changes in a and b drops to cfg.rel_tol.
    """
    C = cost_matrix(mu, nu)
    a, b, ot, iters = _dual_batch(
        C[None],
        _log_weights(mu.weights)[None],
        _log_weights(nu.weights)[None],
        cfg.epsilon,
        cfg.rel_tol,
        cfg.max_iter,
    )
    return DualPotentials(a=a[0], b=b[0], iterations=int(iters[0])), float(ot[0])


def symmetric_potential(mu, cfg):
    """Damped self-update potentials for the debiasing term OT_eps(mu, mu).

    Returns (a, value) with value = 2 * sum_i mu_i a_i.
    """
    C = _sqdist_batch(mu.points[None], mu.points[None])
    a, values, _ = _sym_batch(
        C, _log_weights(mu.weights)[None], cfg.epsilon, cfg.rel_tol, cfg.max_iter
    )
    return a[0], float(values[0])


def sinkhorn_divergence(mu, nu, cfg):
    """S_eps(mu, nu) = OT_eps(mu, nu) - OT_eps(mu, mu)/2 - OT_eps(nu, nu)/2."""
    _, ot = ot_dual(mu, nu, cfg)
    _, vmu = symmetric_potential(mu, cfg)
    _, vnu = symmetric_potential(nu, cfg)
    s = ot - 0.5 * vmu - 0.5 * vnu
    if s < NEGATIVE_S_WARN:
        logger.warning(
            "Sinkhorn divergence %.3e is negative beyond tolerance; "
            "treat as a convergence failure", s,
        )
    return s


def d_eps(mu, nu, cfg):
    """Wasserstein surrogate sqrt(max(S_eps, 0))."""
    return float(np.sqrt(max(sinkhorn_divergence(mu, nu, cfg), 0.0)))


def pairwise_d_eps(points_a, points_b, cfg):
    """D_eps for a batch of uniform-weight point clouds.

    points_a : (B, N, d), points_b : (B, M, d). Returns (B,) values. This is
    the bulk path used when evaluating many (realization, step) pairs; each
    batch element converges independently, so values equal the one-pair API.
    """
    points_a = np.asarray(points_a, dtype=float)
    points_b = np.asarray(points_b, dtype=float)
    B, N, _ = points_a.shape
    M = points_b.shape[1]
    log_mu = np.full((B, N), -np.log(N))
    log_nu = np.full((B, M), -np.log(M))
    C = _sqdist_batch(points_a, points_b)
    _, _, ot, _ = _dual_batch(C, log_mu, log_nu, cfg.epsilon, cfg.rel_tol, cfg.max_iter)
    del C
    Caa = _sqdist_batch(points_a, points_a)
    _, va, _ = _sym_batch(Caa, log_mu, cfg.epsilon, cfg.rel_tol, cfg.max_iter)
    del Caa
    Cbb = _sqdist_batch(points_b, points_b)
    _, vb, _ = _sym_batch(Cbb, log_nu, cfg.epsilon, cfg.rel_tol, cfg.max_iter)
    del Cbb
    s = ot - 0.5 * va - 0.5 * vb
    if s.min() < NEGATIVE_S_WARN:
        logger.warning(
            "batched Sinkhorn divergence reached %.3e (negative beyond tolerance)",
            float(s.min()),
        )
    return np.sqrt(np.maximum(s, 0.0))


def w2_exact_small(mu, nu):
    """Exact W2 between small uniform equal-size measures by enumerating all
    permutation couplings (optimal for this case by Birkhoff's theorem)."""
    n = mu.n
    if n != nu.n or n > 8:
        raise UnsupportedInstanceError(
            f"exact solver supports uniform N = M <= 8, got N={mu.n}, M={nu.n}"
        )
    if not (
        np.allclose(mu.weights, 1.0 / n) and np.allclose(nu.weights, 1.0 / n)
    ):
        raise UnsupportedInstanceError("exact solver needs uniform weights")
    C = cost_matrix(mu, nu)
    rows = range(n)
    best = min(sum(C[i, p[i]] for i in rows) for p in itertools.permutations(rows))
    return float(np.sqrt(best / n))
