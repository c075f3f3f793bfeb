"""Efficient strikes and the piecewise-linear superhedging CALL function.

A strike is efficient when its ask equals the cheapest long-only portfolio
of other quotes (and the underlying) dominating its payoff. Geometrically the
efficient quotes are the vertices, and points on edges, of the greatest
convex non-increasing minorant of the (strike, ask) scatter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientStrikesError
from .quotes import QuoteCurve

# relative tolerance for a quote sitting on a hull chord
_CHORD_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class EfficientCurve:
    """Efficient strikes ``j_0 = 0 < j_1 < ... < j_I`` and their asks."""

    strikes: np.ndarray
    prices: np.ndarray
    source: QuoteCurve | None = None
    mask: np.ndarray | None = None  # efficient flags over source.strikes

    def __post_init__(self):
        strikes = np.array(self.strikes, dtype=float)
        prices = np.array(self.prices, dtype=float)
        if strikes.ndim != 1 or strikes.shape != prices.shape or strikes.size < 1:
            raise ValueError("strikes and prices must be non-empty 1-d arrays of equal length")
        if strikes[0] != 0.0:
            raise ValueError("efficient set must start at strike 0")
        if np.any(np.diff(strikes) <= 0):
            raise ValueError("strikes must be strictly increasing")
        if np.any(prices <= 0):
            raise ValueError("efficient prices must be positive")
        for arr in (strikes, prices):
            arr.setflags(write=False)
        object.__setattr__(self, "strikes", strikes)
        object.__setattr__(self, "prices", prices)

    @property
    def size(self) -> int:
        """Number of positive efficient strikes (``I``)."""
        return self.strikes.size - 1

    def slopes(self) -> np.ndarray:
        """Difference quotients ``D_i(q)``, i = 0..I-1."""
        return np.diff(self.prices) / np.diff(self.strikes)

    def as_quote_curve(self) -> QuoteCurve:
        src = self.source
        return QuoteCurve(
            self.strikes,
            self.prices,
            maturity=src.maturity if src else None,
            spot_hint=src.spot_hint if src else None,
            observed_at=src.observed_at if src else None,
        )


def _cross(ox, oy, ax, ay, bx, by) -> float:
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def _lower_hull(x: np.ndarray, y: np.ndarray) -> list[int]:
    """Monotone-chain lower hull over points sorted by x; collinear points are kept."""
    scale = max(float(np.max(np.abs(y))), 1.0) * max(float(x[-1] - x[0]), 1.0)
    hull: list[int] = []
    for i in range(x.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            if _cross(x[a], y[a], x[b], y[b], x[i], y[i]) < -_CHORD_RTOL * scale:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def efficient_indices(strikes: np.ndarray, asks: np.ndarray) -> np.ndarray:
    """Indices of efficient quotes in a (0-first, increasing) strike array."""
    strikes = np.asarray(strikes, dtype=float)
    asks = np.asarray(asks, dtype=float)
    idx = np.arange(strikes.size)
    while True:
        hull = idx[_lower_hull(strikes[idx], asks[idx])]
        slopes = np.diff(asks[hull]) / np.diff(strikes[hull])
        rising = np.flatnonzero(slopes > 0)
        if rising.size:
            hull = hull[: rising[0] + 1]
        if hull.size == idx.size:
            return hull
        idx = hull


def efficient_set(curve: QuoteCurve) -> EfficientCurve:
    """Greatest convex, non-increasing minorant of the quotes, as its efficient points."""
    if len(curve) < 2:
        raise InsufficientStrikesError("need the underlying and at least one option")
    idx = efficient_indices(curve.strikes, curve.asks)
    mask = np.zeros(len(curve), dtype=bool)
    mask[idx] = True
    mask.setflags(write=False)
    return EfficientCurve(curve.strikes[idx], curve.asks[idx], source=curve, mask=mask)


def q0_at(eff: EfficientCurve, k):
    """Superhedging price of the CALL with strike ``k`` (scalar or array)."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValueError("strike must be >= 0")
    # np.interp holds the last value beyond j_I, as required
    out = np.interp(k, eff.strikes, eff.prices)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class StepSurvival:
    """Right-closed step function: ``levels[i]`` on ``(edges[i], edges[i+1]]``, 0 beyond."""

    edges: np.ndarray
    levels: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        pos = np.searchsorted(self.edges, t, side="left") - 1
        inside = (pos >= 0) & (pos < self.levels.size)
        out = np.where(inside, self.levels[np.clip(pos, 0, self.levels.size - 1)], 0.0)
        # at or below 0 the first level applies
        out = np.where(t <= self.edges[0], self.levels[0] if self.levels.size else 0.0, out)
        return float(out) if out.ndim == 0 else out

    def intervals(self) -> list[tuple[tuple[float, float], float]]:
        return [
            ((float(a), float(b)), float(v))
            for a, b, v in zip(self.edges[:-1], self.edges[1:], self.levels)
        ] + [((float(self.edges[-1]), float("inf")), 0.0)]


def nu0(eff: EfficientCurve) -> StepSurvival:
    """Implied survival function of the piecewise-linear superhedging CALL function."""
    if eff.size == 0:
        return StepSurvival(eff.strikes.copy(), np.zeros(0))
    levels = -eff.slopes()
    return StepSurvival(eff.strikes.copy(), levels)
