"""Hand-derived backward passes for the three schemes, and a finite-difference checker.

Given the upstream gradient ``dY`` of a scalar loss with respect to the
attention output, the backward functions return gradients for the input,
every head's ``Q``, ``K``, ``V`` and every head's ``u_logit``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import AttentionOutput, HeadParams, attention_forward


@dataclass(frozen=True)
class GradBundle:
    """Gradients mirroring the forward parameters.

    ``d_u[h]`` is taken with respect to head h's ``u_logit`` (the logistic
    pre-image of u), i.e. already chained through the logistic map. It is 0
    for UNAS and DNAS, where u does not enter the forward pass.
    """

    d_x: np.ndarray
    d_Q: list
    d_K: list
    d_V: list
    d_u: list

    def as_dict(self) -> dict:
        out = {"x": self.d_x}
        for h in range(len(self.d_Q)):
            out[f"Q{h}"] = self.d_Q[h]
            out[f"K{h}"] = self.d_K[h]
            out[f"V{h}"] = self.d_V[h]
            out[f"u{h}"] = np.array([self.d_u[h]])
        return out


def softmax_rows_vjp(p, dp):
    # p = row_softmax(z): dz = p * (dp - <dp, p>_row)
    return p * (dp - np.sum(dp * p, axis=1, keepdims=True))


def softmax_cols_vjp(p, dp):
    return p * (dp - np.sum(dp * p, axis=0, keepdims=True))


def dnas_vjp(xi, pi, dpi):
    """Pull ``dpi`` back through ``pi = row_normalize(xi)``, ``xi = col_softmax(z)``."""
    r = xi.sum(axis=1, keepdims=True)
    dxi = (dpi - np.sum(dpi * pi, axis=1, keepdims=True)) / r
    return softmax_cols_vjp(xi, dxi)


def _slices(params):
    start = 0
    for hp in params:
        yield slice(start, start + hp.head_dim)
        start += hp.head_dim


def _check(out, dY, scheme):
    if not isinstance(out, AttentionOutput):
        raise TypeError("expected the AttentionOutput of a forward call")
    if out.scheme != scheme:
        raise ValueError(f"cache was produced by scheme {out.scheme!r}, not {scheme!r}")
    dY = np.asarray(dY, dtype=np.float64)
    if dY.shape != out.output.shape:
        raise ValueError(f"dY shape {dY.shape} does not match output shape {out.output.shape}")
    return dY


def _backward(out: AttentionOutput, dY, dz_fn) -> GradBundle:
    x = out.x
    d_x = np.zeros_like(x)
    d_Q, d_K, d_V, d_u = [], [], [], []
    for hp, hc, sl in zip(out.params, out.heads, _slices(out.params)):
        dy = dY[:, sl]
        dpi = dy @ hc.v.T
        dv = hc.pi.T @ dy
        dz, du = dz_fn(hc, dpi)
        dq = dz @ hc.k
        dk = dz.T @ hc.q
        d_Q.append(dq.T @ x)
        d_K.append(dk.T @ x)
        d_V.append(dv.T @ x)
        d_u.append(du)
        d_x += dq @ hp.Q + dk @ hp.K + dv @ hp.V
    return GradBundle(d_x, d_Q, d_K, d_V, d_u)


def unas_backward(out: AttentionOutput, dY) -> GradBundle:
    dY = _check(out, dY, "unas")
    return _backward(out, dY, lambda hc, dpi: (softmax_rows_vjp(hc.pi, dpi), 0.0))


def dnas_backward(out: AttentionOutput, dY) -> GradBundle:
    dY = _check(out, dY, "dnas")
    return _backward(out, dY, lambda hc, dpi: (dnas_vjp(hc.xi, hc.pi_d, dpi), 0.0))


def _hnas_dz(hc, dpi):
    u = hc.u
    dz = u * dnas_vjp(hc.xi, hc.pi_d, dpi) + (1.0 - u) * softmax_rows_vjp(hc.pi_u, dpi)
    du = float(np.sum((hc.pi_d - hc.pi_u) * dpi))
    return dz, du * u * (1.0 - u)


def hnas_backward(out: AttentionOutput, dY) -> GradBundle:
    dY = _check(out, dY, "hnas")
    return _backward(out, dY, _hnas_dz)


_BACKWARD = {"unas": unas_backward, "dnas": dnas_backward, "hnas": hnas_backward}


def attention_backward(out: AttentionOutput, dY) -> GradBundle:
    return _BACKWARD[out.scheme](out, dY)


def finite_diff_check(func, params: dict, analytic: dict, step: float = 1e-5) -> float:
    """Largest relative error between ``analytic`` and central differences of ``func``.

    ``params`` maps names to float arrays; ``func(params)`` returns a scalar.
    Every scalar entry of every array is perturbed by ``+-step``. For each
    array the error is ``max|analytic - numeric|`` divided by
    ``max(max|analytic|, max|numeric|, 1e-8)``; the worst array wins.
    """
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    worst = 0.0
    for name, arr in params.items():
        if name not in analytic:
            raise KeyError(f"no analytic gradient for {name!r}")
        a = np.asarray(analytic[name], dtype=np.float64).reshape(arr.shape)
        num = np.zeros_like(arr)
        flat = arr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = func(params)
            flat[i] = orig - step
            fm = func(params)
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise ValueError(f"non-finite forward value perturbing {name}[{i}]")
            num.reshape(-1)[i] = (fp - fm) / (2.0 * step)
        denom = max(np.max(np.abs(a)), np.max(np.abs(num)), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - num)) / denom))
    return worst


def _pack(x, params):
    out = {"x": x}
    for h, hp in enumerate(params):
        out[f"Q{h}"] = hp.Q
        out[f"K{h}"] = hp.K
        out[f"V{h}"] = hp.V
        out[f"u{h}"] = np.array([hp.u_logit])
    return out


def _unpack(flat, H):
    heads = [HeadParams(flat[f"Q{h}"], flat[f"K{h}"], flat[f"V{h}"], float(flat[f"u{h}"][0])) for h in range(H)]
    return flat["x"], heads


def random_instance(rng, S, D, H, u=None):
    """Random input and head parameters at a scale where every scheme has curvature."""
    if D % H:
        raise ValueError(f"D={D} not divisible by H={H}")
    dh = D // H
    x = rng.normal(size=(S, D))
    scale = 1.0 / np.sqrt(D)
    params = []
    for _ in range(H):
        u_logit = rng.normal() if u is None else float(np.log(u / (1 - u)))
        params.append(HeadParams(*(rng.normal(scale=scale, size=(dh, D)) for _ in range(3)), u_logit))
    return x, params


def check_scheme(x, params, scheme, dY, mask=None, step=1e-5, corrupt=0.0) -> float:
    """Relative error of the analytic gradient of ``sum(dY * Y)`` for one instance.

    ``corrupt`` scales every analytic gradient by ``1 + corrupt`` before
    comparing; used to prove the checker notices wrong gradients.
    """
    params = list(params)
    H = len(params)
    out = attention_forward(x, params, scheme, mask)
    grads = attention_backward(out, dY).as_dict()
    if corrupt:
        grads = {k: v * (1.0 + corrupt) for k, v in grads.items()}

    def loss(flat):
        xx, pp = _unpack(flat, H)
        return float(np.sum(dY * attention_forward(xx, pp, scheme, mask).output))

    packed = _pack(x, params)
    if scheme != "hnas":
        # u does not enter UNAS/DNAS: checking it only re-verifies a zero
        packed = {k: v for k, v in packed.items() if not k.startswith("u")}
        grads = {k: v for k, v in grads.items() if not k.startswith("u")}
    return finite_diff_check(lambda flat: loss({**_pack(x, params), **flat}), packed, grads, step)


def gradcheck_suite(n_instances=20, seed=0, schemes=("unas", "dnas", "hnas"), S=None, D=None, H=None,
                    corrupt=0.0) -> dict:
    """Max relative error per scheme over seeded random instances.

    Sizes default to S, D in 2..8 and H in {1, 2}, drawn per instance; pass
    S/D/H to pin them.
    """
    rng = np.random.default_rng(seed)
    results = {}
    for scheme in schemes:
        worst = 0.0
        for _ in range(n_instances):
            h = H if H is not None else int(rng.integers(1, 3))
            s = S if S is not None else int(rng.integers(2, 9))
            d = D if D is not None else h * int(rng.integers(max(1, 2 // h), 8 // h + 1))
            x, params = random_instance(rng, s, d, h)
            dY = rng.normal(size=(s, d))
            worst = max(worst, check_scheme(x, params, scheme, dY, corrupt=corrupt))
        results[scheme] = worst
    return results
