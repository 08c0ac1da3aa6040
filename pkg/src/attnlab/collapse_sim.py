"""Mode collapse under repeated attention.

Closed-form center distances for two 1-D point masses after one attention
step, a replicated-point simulation of the same setup, and the multi-step
2-D point-cloud experiment (Q = K = I, no residual connection).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .gmm_lab import fixed_point_dnas, fixed_point_unas
from .tensor_core import as_matrix

UNBALANCED_CENTERS = ((1.8, 0.7), (-1.0, -1.0))
CLUSTER_VARIANCE = 0.1


@dataclass(frozen=True)
class TwoClusterSpec:
    """Clusters of relative mass ``r = N0 / N1`` at ``+a`` and ``-a``."""

    a: float
    r: float

    def __post_init__(self):
        if not self.a >= 0:
            raise ValueError(f"half distance a must be >= 0, got {self.a}")
        if not self.r > 0:
            raise ValueError(f"mass ratio r must be > 0, got {self.r}")

    @property
    def s(self) -> float:
        """Cross-cluster kernel weight relative to the within-cluster weight."""
        return float(np.exp(-2.0 * self.a ** 2))

    @property
    def q(self) -> float:
        r, s = self.r, self.s
        return (r + s) / (r * s + 1.0)


def center_distance_unas(spec: TwoClusterSpec) -> float:
    r, s, a = spec.r, spec.s, spec.a
    return 2.0 * r * (1.0 - s * s) * a / ((1.0 + r * s) * (r + s))


def center_distance_dnas(spec: TwoClusterSpec) -> float:
    r, s, a, q = spec.r, spec.s, spec.a, spec.q
    return 2.0 * q * r * (1.0 - s * s) * a / ((q + r * s) * (r + s * q))


def sweep_ratio(a: float, r_values) -> list[tuple[float, float, float]]:
    """Rows ``(r, unas_distance, dnas_distance)`` for each mass ratio."""
    rows = []
    for r in r_values:
        spec = TwoClusterSpec(a, float(r))
        rows.append((float(r), center_distance_unas(spec), center_distance_dnas(spec)))
    return rows


def simulate_two_point_mass(a: float, r: float, scheme: str, max_denominator: int = 100) -> float:
    """Center distance after one step, simulated with replicated 1-D points.

    ``r`` is written as a ratio of small integers N0/N1; N0 copies of ``+a``
    and N1 copies of ``-a`` then go through one self-attention update.
    """
    frac = Fraction(r).limit_denominator(max_denominator)
    n0, n1 = frac.numerator, frac.denominator
    x = np.concatenate([np.full(n0, float(a)), np.full(n1, -float(a))])[:, None]
    new = _step(x, scheme)
    return float(new[0, 0] - new[-1, 0])


def _step(x, scheme):
    if scheme == "unas":
        return fixed_point_unas(x, x)
    if scheme == "dnas":
        return fixed_point_dnas(x, x)
    raise ValueError(f"unknown scheme {scheme!r}; expected 'unas' or 'dnas'")


def two_gaussians(n0: int, n1: int, seed: int = 0, centers=UNBALANCED_CENTERS,
                  variance: float = CLUSTER_VARIANCE):
    """``n0`` points around ``centers[0]`` (label 0) and ``n1`` around ``centers[1]`` (label 1)."""
    rng = np.random.default_rng(seed)
    sd = np.sqrt(variance)
    c0, c1 = (np.asarray(c, dtype=np.float64) for c in centers)
    pts = np.vstack([c0 + sd * rng.standard_normal((n0, 2)), c1 + sd * rng.standard_normal((n1, 2))])
    labels = np.concatenate([np.zeros(n0, dtype=int), np.ones(n1, dtype=int)])
    return pts, labels


def _max_pairwise(p):
    if len(p) < 2:
        return 0.0
    d = p[:, None, :] - p[None, :, :]
    return float(np.sqrt(np.max(np.sum(d * d, axis=2))))


def between_distance(points, labels) -> float:
    """Distance between the label-0 and label-1 centroids (0 if a label is missing)."""
    a, b = points[labels == 0], points[labels == 1]
    if len(a) == 0 or len(b) == 0:
        return 0.0
    return float(np.linalg.norm(a.mean(axis=0) - b.mean(axis=0)))


@dataclass(frozen=True)
class CollapseTrajectory:
    snapshots: tuple
    labels: np.ndarray
    scheme: str
    between_dist: tuple = field(default=())
    spread: tuple = field(default=())  # per step: (spread_0, spread_1)

    def diameter(self, step: int = -1) -> float:
        """Max pairwise distance over the whole cloud at ``step``."""
        return _max_pairwise(self.snapshots[step])


def simulate_2d(points, labels, steps: int, scheme: str) -> CollapseTrajectory:
    """Apply ``steps`` self-attention updates (UNAS or DNAS) to a 2-D point cloud.

    Each step replaces every point by its fixed-point update with the whole
    cloud serving as both queries and keys, default priors, unit variance.
    """
    pts = as_matrix(points, "points")
    if pts.shape[1] != 2:
        raise ValueError(f"points must be N x 2, got {pts.shape}")
    labels = np.asarray(labels, dtype=int).reshape(-1)
    if labels.shape[0] != pts.shape[0]:
        raise ValueError(f"{labels.shape[0]} labels for {pts.shape[0]} points")
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    _step(pts[:1], scheme)  # validates scheme before any work
    snaps = [pts]
    for _ in range(steps):
        snaps.append(_step(snaps[-1], scheme))
    between = tuple(between_distance(s, labels) for s in snaps)
    spread = tuple(tuple(_max_pairwise(s[labels == c]) for c in (0, 1)) for s in snaps)
    return CollapseTrajectory(tuple(snaps), labels, scheme, between, spread)
