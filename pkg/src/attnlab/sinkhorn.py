"""Entropic optimal transport view of attention normalization.

Alternating column/row normalization of ``exp(z)`` is the Sinkhorn
algorithm for ``min sum p*D + p*log p`` with ``D = -z`` under both marginal
constraints; its first iteration is exactly DNAS. Dropping the column
constraint gives a problem whose minimizer is ordinary row softmax.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .tensor_core import as_matrix, col_normalize, col_softmax, row_normalize

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 1000


@dataclass(frozen=True)
class SinkhornReport:
    final: np.ndarray
    iterations: int
    residual_history: tuple
    converged: bool


def ds_residual(p) -> float:
    """max |row sum - 1| + max |column sum - 1|."""
    p = np.asarray(p, dtype=np.float64)
    return float(np.max(np.abs(p.sum(axis=1) - 1.0)) + np.max(np.abs(p.sum(axis=0) - 1.0)))


def sinkhorn_run(z, max_iters: int = DEFAULT_MAX_ITERS, tol: float = DEFAULT_TOL) -> SinkhornReport:
    """Iterate column-then-row normalization of ``exp(z)`` until doubly stochastic.

    The first column step is a max-subtracted column softmax, so iteration 1
    goes through the same kernels as :func:`attnlab.attention.dnas_weights`
    and returns the identical matrix. Stops once the residual drops below
    ``tol`` or after ``max_iters`` iterations.
    """
    if int(max_iters) < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    z = as_matrix(z, "logits")
    if z.shape[0] != z.shape[1]:
        raise ValueError(f"transport plan needs a square kernel, got {z.shape}")
    p = row_normalize(col_softmax(z))
    history = [ds_residual(p)]
    while history[-1] >= tol and len(history) < max_iters:
        p = row_normalize(col_normalize(p))
        history.append(ds_residual(p))
    return SinkhornReport(p, len(history), tuple(history), history[-1] < tol)


def transport_objective(p, z) -> float:
    """``sum p*(-z) + p*log p`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=np.float64)
    z = as_matrix(z, "logits")
    if p.shape != z.shape:
        raise ValueError(f"plan shape {p.shape} != logits shape {z.shape}")
    if np.any(p < 0):
        raise ValueError("transport plan has negative entries")
    pos = p > 0
    ent = np.zeros_like(p)
    ent[pos] = p[pos] * np.log(p[pos])
    return float(np.sum(-p * z) + np.sum(ent))


def unas_closed_form(z) -> np.ndarray:
    """Minimizer of the transport objective under the row constraint only.

    Stationarity of the Lagrangian gives ``log p_ij = z_ij - 1 - lam_i``;
    the row constraint fixes ``lam_i = logsumexp_j(z_ij) - 1``.
    """
    z = as_matrix(z, "logits")
    lam = logsumexp(z, axis=1, keepdims=True) - 1.0
    return np.exp(z - 1.0 - lam)
