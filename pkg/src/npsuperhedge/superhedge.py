"""Superhedging prices of convex payoffs from an efficient CALL curve.

For a convex payoff ``f`` with ``f(0) = 0`` and finite asymptotic slope, the
cheapest long-only portfolio of efficient options dominating ``f`` has a
closed form. Its weights ``w`` are the jumps of the slopes of ``f`` on the
efficient strikes, and the same price is a positive combination ``b`` of the
values ``f(j_i)`` whose coefficients depend only on the CALL curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linprog

from .efficient_set import EfficientCurve
from .exceptions import InconsistentCurveError, InfeasibleError, NotInGammaError

NEG_TOL = 1e-12


def _zeros_like(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ConvexPayoff:
    """A convex payoff ``x -> f(x)`` on ``x >= 0`` with ``f(0) = 0``.

    ``second_deriv`` may be ``None`` for payoffs with kinks.
    """

    eval: Callable
    deriv: Callable
    second_deriv: Callable | None
    asymptotic_slope: float
    label: str = ""

    def __call__(self, x):
        return self.eval(x)

    def __add__(self, other: ConvexPayoff) -> ConvexPayoff:
        if not isinstance(other, ConvexPayoff):
            return NotImplemented
        second = None
        if self.second_deriv is not None and other.second_deriv is not None:
            second = lambda x, a=self, b=other: a.second_deriv(x) + b.second_deriv(x)  # noqa: E731
        return ConvexPayoff(
            eval=lambda x, a=self, b=other: a.eval(x) + b.eval(x),
            deriv=lambda x, a=self, b=other: a.deriv(x) + b.deriv(x),
            second_deriv=second,
            asymptotic_slope=self.asymptotic_slope + other.asymptotic_slope,
            label=f"{self.label}+{other.label}",
        )

    def scale(self, c: float) -> ConvexPayoff:
        if c < 0:
            raise ValueError("only non-negative multiples stay convex")
        second = None
        if self.second_deriv is not None:
            second = lambda x, a=self: c * a.second_deriv(x)  # noqa: E731
        return ConvexPayoff(
            eval=lambda x, a=self: c * a.eval(x),
            deriv=lambda x, a=self: c * a.deriv(x),
            second_deriv=second,
            asymptotic_slope=c * self.asymptotic_slope,
            label=f"{c}*{self.label}",
        )


def option_payoff(k: float) -> ConvexPayoff:
    """Raw CALL payoff ``(x - k)+``."""
    if k < 0:
        raise ValueError("strike must be >= 0")
    k = float(k)
    return ConvexPayoff(
        eval=lambda x: np.maximum(np.asarray(x, dtype=float) - k, 0.0),
        deriv=lambda x: (np.asarray(x, dtype=float) > k).astype(float),
        second_deriv=None,
        asymptotic_slope=1.0,
        label=f"option:{k:g}",
    )


def zero_payoff() -> ConvexPayoff:
    return ConvexPayoff(_zeros_like, _zeros_like, _zeros_like, 0.0, "zero")


def sum_payoffs(payoffs, weights=None) -> ConvexPayoff:
    payoffs = list(payoffs)
    if weights is None:
        weights = [1.0] * len(payoffs)
    total = zero_payoff()
    for f, c in zip(payoffs, weights):
        total = total + f.scale(float(c))
    return total


@dataclass(frozen=True)
class SuperhedgeResult:
    price: float
    w: np.ndarray
    b: np.ndarray
    price_dual: float = field(default=np.nan)


def dual_coefficients(eff: EfficientCurve) -> np.ndarray:
    """Coefficients ``b_1..b_{I+1}``; the last one is ``q(j_I)``.

    ``b_i`` is the slope increment of the CALL curve at ``j_i`` and equals the
    mass the piecewise-linear curve puts on that strike.
    """
    slopes = np.r_[eff.slopes(), 0.0]
    b = np.r_[np.diff(slopes), eff.prices[-1]]
    scale = max(1.0, float(np.max(np.abs(slopes))))
    if np.any(b < -NEG_TOL * scale):
        raise InconsistentCurveError(
            f"negative dual coefficient {b.min():.3g}; curve is not convex and non-increasing"
        )
    return np.maximum(b, 0.0)


def primal_weights(f: ConvexPayoff, eff: EfficientCurve) -> np.ndarray:
    """Portfolio weights ``w_0..w_I`` on the efficient strikes (strike 0 is the underlying)."""
    j = eff.strikes
    fj = np.asarray(f(j), dtype=float)
    scale = max(1.0, float(np.max(np.abs(fj))))
    if abs(fj[0]) > NEG_TOL * scale:
        raise NotInGammaError(f"payoff must vanish at 0, got f(0)={fj[0]:.3g}")
    slope = float(f.asymptotic_slope)
    if not np.isfinite(slope) or slope < 0:
        raise NotInGammaError("asymptotic slope must be finite and >= 0")
    df = np.diff(fj) / np.diff(j)
    w = np.diff(np.r_[0.0, df, slope])
    tol = NEG_TOL * max(1.0, slope, float(np.max(np.abs(df))) if df.size else 0.0)
    if w[-1] < -tol:
        raise NotInGammaError(
            f"asymptotic slope {slope:g} is below the last chord slope {df[-1]:g}"
        )
    if np.any(w < -tol):
        raise NotInGammaError("payoff is not convex on the efficient strikes")
    return np.maximum(w, 0.0)


def superhedge_price(f: ConvexPayoff, eff: EfficientCurve) -> SuperhedgeResult:
    """Superhedging price of ``f``, with primal weights and dual coefficients."""
    w = primal_weights(f, eff)
    b = dual_coefficients(eff)
    fj = np.asarray(f(eff.strikes[1:]), dtype=float)
    primal = float(w @ eff.prices)
    dual = float(b[:-1] @ fj + b[-1] * f.asymptotic_slope)
    return SuperhedgeResult(price=primal, w=w, b=b, price_dual=dual)


def lp_oracle(f: ConvexPayoff, eff: EfficientCurve) -> float:
    """Superhedging price by linear programming over long positions.

    Independent of the closed form; meant for testing.
    """
    j = eff.strikes
    q = eff.prices
    fm = np.asarray(f(j[1:]), dtype=float)
    # payoff of option i at terminal value j_m
    pay = np.maximum(j[1:, None] - j[None, :], 0.0)
    A_ub = -np.vstack([pay, np.ones((1, j.size))])
    b_ub = -np.r_[fm, f.asymptotic_slope]
    res = linprog(q, A_ub=A_ub, b_ub=b_ub, bounds=(0, None), method="highs-ds")
    if res.status == 2:
        raise InfeasibleError("no dominating long portfolio exists")
    if res.status != 0:
        raise InfeasibleError(f"LP failed: {res.message}")
    return float(res.fun)
