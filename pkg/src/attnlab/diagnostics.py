"""Explaining-away measurement.

A key position j is explained away at level eps when its total attention
mass ``sum_i p[i, j]`` falls below eps. Doubly-normalized weights keep every
column mass at or above ``1 / n_keys``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_EPSILON = 1e-8
DEFAULT_BINS = 50


def theorem1_bound(S: int) -> float:
    if S < 1:
        raise ValueError(f"sequence length must be positive, got {S}")
    return 1.0 / S


@dataclass(frozen=True)
class ExplainAwayReport:
    column_mass: np.ndarray
    explained_away: np.ndarray
    epsilon: float
    theorem_bound_ok: bool
    log_mass_histogram: tuple  # (bin_edges, counts)

    def to_json(self) -> dict:
        edges, counts = self.log_mass_histogram
        return {
            "column_mass": [float(v) for v in self.column_mass],
            "explained_away": [bool(v) for v in self.explained_away],
            "epsilon": float(self.epsilon),
            "theorem_bound_ok": bool(self.theorem_bound_ok),
            "log_mass_histogram": {
                "bin_edges": [float(v) for v in edges],
                "counts": [int(v) for v in counts],
            },
        }


def log_mass_histogram(column_mass, bins: int = DEFAULT_BINS):
    """Histogram of natural-log column masses.

    Bins span ``[min log mass, max(0, max log mass)]``. Zero masses have no
    logarithm; they are placed at a sentinel one unit below the smallest
    finite log mass and so always land in the first bin.
    """
    if bins < 1:
        raise ValueError(f"bins must be positive, got {bins}")
    mass = np.asarray(column_mass, dtype=np.float64)
    pos = mass > 0
    logs = np.empty_like(mass)
    logs[pos] = np.log(mass[pos])
    if np.any(pos):
        lo = float(logs[pos].min())
        hi = max(0.0, float(logs[pos].max()))
    else:
        lo, hi = -1.0, 0.0
    if not np.all(pos):
        lo -= 1.0
        logs[~pos] = lo
    if hi <= lo:
        lo = hi - 1.0
    counts, edges = np.histogram(logs, bins=bins, range=(lo, hi))
    return edges, counts


def analyze(p, epsilon: float = DEFAULT_EPSILON, bins: int = DEFAULT_BINS) -> ExplainAwayReport:
    """Column masses, eps-classification and the 1/S check for a row-stochastic ``p``."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.size == 0:
        raise ValueError(f"attention matrix must be 2-D and non-empty, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError("attention matrix must be finite and nonnegative")
    dev = np.abs(p.sum(axis=1) - 1.0)
    if np.any(dev > 1e-8):
        i = int(np.argmax(dev > 1e-8))
        raise ValueError(f"row {i} sums to {p[i].sum()!r}, matrix is not row-stochastic")
    mass = p.sum(axis=0)
    S = p.shape[1]
    return ExplainAwayReport(
        column_mass=mass,
        explained_away=mass < epsilon,
        epsilon=float(epsilon),
        theorem_bound_ok=bool(mass.min() >= theorem1_bound(S) - 1e-12),
        log_mass_histogram=log_mass_histogram(mass, bins),
    )
