"""UNAS, DNAS and HNAS attention forward passes.

UNAS normalizes ``exp(q_i . k_j)`` over keys for every query (ordinary softmax
attention). DNAS first normalizes over queries for every key, then
renormalizes each query row. HNAS mixes the two per head with a weight
``u = logistic(u_logit)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from .tensor_core import as_matrix, col_softmax, row_normalize, row_softmax

SCHEMES = ("unas", "dnas", "hnas")


@dataclass(frozen=True)
class HeadParams:
    """Per-head transforms, each ``d_h x D``, plus the unconstrained hybrid weight.

    ``u_logit`` is the trainable parameter; ``u`` is its logistic image in
    [0, 1]. ``u_logit=0`` gives the default u = 0.5.
    """

    Q: np.ndarray
    K: np.ndarray
    V: np.ndarray
    u_logit: float = 0.0

    def __post_init__(self):
        Q = as_matrix(self.Q, "Q")
        K = as_matrix(self.K, "K")
        V = as_matrix(self.V, "V")
        if not (Q.shape == K.shape == V.shape):
            raise ValueError(f"head transforms disagree: Q {Q.shape}, K {K.shape}, V {V.shape}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "u_logit", float(self.u_logit))

    @classmethod
    def with_u(cls, Q, K, V, u: float = 0.5) -> "HeadParams":
        if not 0.0 <= u <= 1.0:
            raise ValueError(f"hybrid weight u={u} outside [0, 1]")
        return cls(Q, K, V, float(logit(u)))

    @property
    def u(self) -> float:
        return float(expit(self.u_logit))

    @property
    def head_dim(self) -> int:
        return self.Q.shape[0]

    @property
    def model_dim(self) -> int:
        return self.Q.shape[1]


@dataclass(frozen=True)
class HeadCache:
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    z: np.ndarray
    xi: np.ndarray | None
    pi_u: np.ndarray | None
    pi_d: np.ndarray | None
    pi: np.ndarray
    u: float


@dataclass(frozen=True)
class AttentionOutput:
    """Result of :func:`attention_forward`.

    ``weights`` stacks the per-head attention matrices, shape ``(H, S, S)``;
    ``output`` is the concatenation of head outputs, shape ``(S, D)``.
    """

    weights: np.ndarray
    output: np.ndarray
    scheme: str
    x: np.ndarray
    params: tuple
    mask: np.ndarray | None
    heads: tuple = field(repr=False)


def logits(q, k) -> np.ndarray:
    q = as_matrix(q, "queries")
    k = as_matrix(k, "keys")
    if q.shape[1] != k.shape[1]:
        raise ValueError(f"query dim {q.shape[1]} != key dim {k.shape[1]} (shapes {q.shape}, {k.shape})")
    return q @ k.T


def unas_weights(z, mask=None) -> np.ndarray:
    return row_softmax(z, mask)


def _dnas_parts(z, mask):
    xi = col_softmax(z, mask)
    return xi, row_normalize(xi)


def dnas_weights(z, mask=None) -> np.ndarray:
    """Column softmax followed by row renormalization."""
    return _dnas_parts(z, mask)[1]


def _check_u(u):
    u = float(u)
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"hybrid weight u={u} outside [0, 1]")
    return u


def _mix(pi_d, pi_u, u):
    return u * pi_d + (1.0 - u) * pi_u


def hnas_weights(z, u, mask=None) -> np.ndarray:
    u = _check_u(u)
    return _mix(dnas_weights(z, mask), unas_weights(z, mask), u)


def _head_forward(x, hp, scheme, mask):
    q = x @ hp.Q.T
    k = x @ hp.K.T
    v = x @ hp.V.T
    z = q @ k.T
    xi = pi_u = pi_d = None
    u = hp.u
    if scheme == "unas":
        pi = pi_u = row_softmax(z, mask)
    elif scheme == "dnas":
        xi, pi_d = _dnas_parts(z, mask)
        pi = pi_d
    else:
        pi_u = row_softmax(z, mask)
        xi, pi_d = _dnas_parts(z, mask)
        pi = _mix(pi_d, pi_u, u)
    return HeadCache(q, k, v, z, xi, pi_u, pi_d, pi, u)


def check_params(params, D):
    params = tuple(params)
    if not params:
        raise ValueError("need at least one head")
    for h, hp in enumerate(params):
        if hp.model_dim != D:
            raise ValueError(f"head {h} transforms take {hp.model_dim}-dim inputs, x has D={D}")
    total = sum(hp.head_dim for hp in params)
    if total != D:
        raise ValueError(f"head dims sum to {total}, expected D={D}")
    return params


def attention_forward(x, params, scheme: str = "unas", mask=None) -> AttentionOutput:
    """Multi-head attention with the chosen normalization.

    Per head: ``q = x Q^T``, ``k = x K^T``, ``v = x V^T``, weights from
    ``z = q k^T``, head output ``pi v``; head outputs are concatenated
    column-wise.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    x = as_matrix(x, "x")
    params = check_params(params, x.shape[1])
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
    heads = tuple(_head_forward(x, hp, scheme, mask) for hp in params)
    weights = np.stack([hc.pi for hc in heads])
    output = np.concatenate([hc.pi @ hc.v for hc in heads], axis=1)
    return AttentionOutput(weights, output, scheme, x, params, mask, heads)


def split_heads(W, H: int) -> list[np.ndarray]:
    """Split a ``D x D`` transform into H row blocks of ``D/H x D``."""
    W = as_matrix(W, "transform")
    D = W.shape[0]
    if H < 1 or D % H:
        raise ValueError(f"cannot split {D} rows into {H} heads")
    dh = D // H
    return [W[h * dh:(h + 1) * dh] for h in range(H)]


def padded_query_transform(Qh, h: int, H: int) -> np.ndarray:
    """Embed head ``h``'s query transform in an otherwise zero ``D x D`` matrix.

    Paired with the full, shared ``D x D`` key transform, the padded query
    reproduces head ``h``'s logits exactly.
    """
    Qh = as_matrix(Qh, "Qh")
    dh, D = Qh.shape
    if H < 1 or not 0 <= h < H:
        raise ValueError(f"head index {h} out of range for H={H}")
    if dh * H != D:
        raise ValueError(f"head dim {dh} x H={H} != D={D}")
    out = np.zeros((D, D))
    out[h * dh:(h + 1) * dh] = Qh
    return out
