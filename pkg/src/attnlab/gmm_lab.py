"""Gaussian mixture reading of attention.

Two directions are supported. With keys as unit-variance cluster centers and
queries as data, the responsibilities are UNAS weights and the fixed-point
update of the data is UNAS attention over the keys. With queries as centers
and keys as data, the responsibilities are the column-normalized DNAS
intermediate and the mean update of the centers is DNAS attention.

All responsibility matrices are laid out query-major: entry ``[i, j]``
pairs query ``i`` with key ``j`` regardless of direction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .tensor_core import as_matrix, col_softmax, row_normalize, row_softmax

LOWER_AS_CENTERS = "lower_as_centers"
UPPER_AS_CENTERS = "upper_as_centers"


def default_priors(vectors) -> np.ndarray:
    """Priors proportional to ``exp(|v|^2 / 2)`` over the rows of ``vectors``."""
    v = as_matrix(vectors, "vectors")
    half_sq = 0.5 * np.sum(v * v, axis=1)
    w = np.exp(half_sq - half_sq.max())
    return w / w.sum()


@dataclass(frozen=True)
class GmmConfig:
    direction: str
    centers: np.ndarray
    data: np.ndarray
    priors: np.ndarray

    def __post_init__(self):
        if self.direction not in (LOWER_AS_CENTERS, UPPER_AS_CENTERS):
            raise ValueError(f"unknown direction {self.direction!r}")
        c = as_matrix(self.centers, "centers")
        d = as_matrix(self.data, "data")
        if c.shape[1] != d.shape[1]:
            raise ValueError(f"centers dim {c.shape[1]} != data dim {d.shape[1]}")
        p = np.asarray(self.priors, dtype=np.float64).reshape(-1)
        if p.size != c.shape[0]:
            raise ValueError(f"{p.size} priors for {c.shape[0]} centers")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("priors must be finite and nonnegative")
        if not np.any(p > 0):
            raise ValueError("priors are all zero")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"priors sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "data", d)
        object.__setattr__(self, "priors", p)

    @classmethod
    def for_attention(cls, q, k, direction=LOWER_AS_CENTERS, priors=None) -> "GmmConfig":
        """Keys as centers (UNAS view) or queries as centers (DNAS view)."""
        centers, data = (k, q) if direction == LOWER_AS_CENTERS else (q, k)
        if priors is None:
            priors = default_priors(centers)
        return cls(direction, centers, data, priors)


def _log_joint(cfg):
    """``log prior_c + log N(x | c, I)`` with shape (n_data, n_centers)."""
    x, c = cfg.data, cfg.centers
    d = x.shape[1]
    sq = np.sum((x[:, None, :] - c[None, :, :]) ** 2, axis=2)
    with np.errstate(divide="ignore"):
        logp = np.log(cfg.priors)
    return logp[None, :] - 0.5 * sq - 0.5 * d * np.log(2.0 * np.pi)


def log_likelihood(cfg: GmmConfig) -> float:
    """``sum_data log sum_c prior_c N(x | c, I)``, via log-sum-exp."""
    return float(np.sum(logsumexp(_log_joint(cfg), axis=1)))


def responsibilities(cfg: GmmConfig) -> np.ndarray:
    """Posterior of each center given each datum, query-major layout."""
    lj = _log_joint(cfg)
    keep = np.broadcast_to(cfg.priors > 0, lj.shape)
    # zero-prior centers become masked entries rather than -inf logits
    lj = np.where(keep, lj, 0.0)
    if cfg.direction == LOWER_AS_CENTERS:
        return row_softmax(lj, keep)
    return col_softmax(lj.T, keep.T)


def fixed_point_unas(q, k, priors=None) -> np.ndarray:
    """One update of every datum ``q_i`` to the responsibility-weighted mean of the centers."""
    k = as_matrix(k, "k")
    pi = responsibilities(GmmConfig.for_attention(q, k, LOWER_AS_CENTERS, priors))
    return pi @ k


def fixed_point_dnas(q, k, priors=None) -> np.ndarray:
    """One mean update of every center ``q_i`` from its (row-normalized) responsibilities."""
    k = as_matrix(k, "k")
    xi = responsibilities(GmmConfig.for_attention(q, k, UPPER_AS_CENTERS, priors))
    return row_normalize(xi) @ k


def dnas_ascent_report(n_instances=20, seed=0, n_range=(2, 9), dim_range=(1, 5)) -> dict:
    """Log-likelihood change of one DNAS update with the priors held fixed.

    Returns the per-instance deltas and the count of decreases. Nothing is
    asserted here: the fixed-point view does not promise monotone ascent.
    """
    rng = np.random.default_rng(seed)
    deltas = []
    for _ in range(n_instances):
        n = int(rng.integers(*n_range))
        m = int(rng.integers(*n_range))
        d = int(rng.integers(*dim_range))
        q = rng.normal(size=(n, d))
        k = rng.normal(size=(m, d))
        beta = default_priors(q)
        before = log_likelihood(GmmConfig(UPPER_AS_CENTERS, q, k, beta))
        q_new = fixed_point_dnas(q, k, beta)
        after = log_likelihood(GmmConfig(UPPER_AS_CENTERS, q_new, k, beta))
        deltas.append(after - before)
    deltas = np.array(deltas)
    return {"deltas": deltas, "violations": int(np.sum(deltas < -1e-12))}
