"""Smooth CALL curve, implied survival function and density, VaR/CVaR.

The smooth CALL price at strike ``k`` is the superhedging price of the
smoothed payoff ``g_k^h``. With the dual coefficients ``b`` of the efficient
curve it reads ``q(k) = sum_i b_i h G((j_i - k)/h) + b_{I+1}``, so the
survival function ``-q'(k)`` and the density ``q''(k)`` follow in closed form.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

from .efficient_set import EfficientCurve, StepSurvival, nu0
from .exceptions import ConfigurationError, DegenerateMeasureError
from .quotes import MeshStats, mesh as compute_mesh
from .smoothers import (
    DEFAULT_N,
    KernelShape,
    SplinePayoff,
    density_payoff,
    fit_reference_spline,
    get_kernel,
    spline_payoff,
)
from .superhedge import dual_coefficients, primal_weights

# survival is treated as zero this many bandwidths past the last efficient strike
TAIL_BANDWIDTHS = 10.0


@lru_cache(maxsize=16)
def reference_spline(N: int = DEFAULT_N) -> SplinePayoff:
    return fit_reference_spline(N)


def resolve_bandwidth(delta: float | None, h: float | None, mesh: MeshStats | None) -> float:
    if h is not None:
        if not h > 0:
            raise ConfigurationError(f"h must be > 0, got {h}", field="h")
        return float(h)
    if delta is None:
        raise ConfigurationError("either delta or h is required", field="delta")
    if not delta > 0:
        raise ConfigurationError(f"delta must be > 0, got {delta}", field="delta")
    if mesh is None:
        raise ConfigurationError("mesh is required to turn delta into h", field="mesh")
    return float(delta) * mesh.mesh_all


@dataclass(frozen=True, eq=False)
class SmoothCallCurve:
    eff: EfficientCurve
    kind: str  # "spline" or a kernel name
    h: float
    shape: object
    b: np.ndarray
    N: int | None = None
    delta: float | None = None

    @property
    def beta(self) -> float:
        return float(self.b[-1])

    def _u(self, k):
        k = np.asarray(k, dtype=float)
        return (self.eff.strikes[1:, None] - k.reshape(1, -1)) / self.h, k.shape

    def __call__(self, k):
        u, shape = self._u(k)
        out = self.b[:-1] @ (self.h * self.shape.value(u)) + self.b[-1]
        return _shaped(out, shape)

    def survival(self, k):
        """``-dq/dk``: implied probability of finishing above ``k``."""
        u, shape = self._u(k)
        return _shaped(self.b[:-1] @ self.shape.d1(u), shape)

    def density(self, k):
        u, shape = self._u(k)
        return _shaped(self.b[:-1] @ self.shape.d2(u) / self.h, shape)

    def payoff(self, k: float):
        if self.kind == "spline":
            return spline_payoff(reference_spline(self.N), k, self.h)
        return density_payoff(k, self.h, self.kind)

    def local_weights(self, k: float) -> np.ndarray:
        """Portfolio weights on the efficient strikes that superhedge ``g_k^h``."""
        return primal_weights(self.payoff(k), self.eff)


def _shaped(values, shape):
    values = np.asarray(values, dtype=float).reshape(shape)
    return float(values) if values.ndim == 0 else values


def smooth_call_curve(
    eff: EfficientCurve,
    smoother: str = "spline",
    delta: float | None = None,
    h: float | None = None,
    mesh: MeshStats | None = None,
    N: int = DEFAULT_N,
) -> SmoothCallCurve:
    """Smoothed CALL price function built on the efficient curve.

    ``smoother`` is ``"spline"`` or a registered kernel name such as
    ``"normal"``. The half-width is ``h``, or ``delta * mesh`` when only
    ``delta`` is given (the mesh defaults to that of the source quotes).
    """
    if h is None and mesh is None and eff.source is not None:
        mesh = compute_mesh(eff.source)
    h = resolve_bandwidth(delta, h, mesh)
    if smoother == "spline":
        shape = reference_spline(int(N)).shape
    else:
        shape = KernelShape(get_kernel(smoother))
    positive = eff.strikes[1:]
    if positive.size and h >= positive[0]:
        warnings.warn(
            f"h={h:g} is not below the smallest efficient strike {positive[0]:g}; "
            "prices near 0 are not covered by the approximation bound",
            stacklevel=2,
        )
    return SmoothCallCurve(
        eff=eff,
        kind=smoother,
        h=h,
        shape=shape,
        b=dual_coefficients(eff),
        N=int(N) if smoother == "spline" else None,
        delta=delta,
    )


@dataclass(frozen=True, eq=False)
class ImpliedMeasure:
    beta: float
    survival: Callable
    density: Callable | None
    support_hint: tuple[float, float]
    upper: float  # survival vanishes beyond (to tail accuracy)
    breakpoints: np.ndarray = field(default_factory=lambda: np.zeros(0))
    scale: float = 1.0  # price of the underlying, for tolerances
    steps: StepSurvival | None = None


def implied_survival(curve: SmoothCallCurve) -> ImpliedMeasure:
    eff = curve.eff
    j = eff.strikes
    bp = (j[1:, None] + curve.h * curve.shape.breakpoints()[None, :]).ravel()
    bp = np.unique(np.r_[j[1:], bp])
    if eff.size:
        support = (float(j[1]), float(j[-1]))
    else:
        support = (0.0, 0.0)
    return ImpliedMeasure(
        beta=curve.beta,
        survival=curve.survival,
        density=curve.density,
        support_hint=support,
        upper=float(j[-1] + TAIL_BANDWIDTHS * curve.h),
        breakpoints=bp,
        scale=float(eff.prices[0]),
    )


def step_measure(eff: EfficientCurve) -> ImpliedMeasure:
    """Implied measure of the piecewise-linear superhedging CALL curve."""
    steps = nu0(eff)
    j = eff.strikes
    support = (float(j[1]), float(j[-1])) if eff.size else (0.0, 0.0)
    return ImpliedMeasure(
        beta=float(eff.prices[-1]),
        survival=steps,
        density=None,
        support_hint=support,
        upper=float(j[-1]),
        breakpoints=j.copy(),
        scale=float(eff.prices[0]),
        steps=steps,
    )


def _integrate_survival(measure: ImpliedMeasure, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    if measure.steps is not None:
        edges, levels = measure.steps.edges, measure.steps.levels
        left = np.clip(edges[:-1], lo, hi)
        right = np.clip(edges[1:], lo, hi)
        return float(np.sum(levels * (right - left)))
    pts = measure.breakpoints
    cuts = np.unique(np.r_[lo, pts[(pts > lo) & (pts < hi)], hi])
    tol = 1e-9 * measure.scale
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, _ = integrate.quad(measure.survival, a, b, epsabs=tol / cuts.size, epsrel=1e-12, limit=200)
        total += val
    return total


def reconstruct_price(measure: ImpliedMeasure, t: float) -> float:
    """``beta + integral_t^inf survival``: the CALL price implied by the measure."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return measure.beta + _integrate_survival(measure, float(t), measure.upper)


@dataclass(frozen=True)
class RiskReport:
    levels: list
    var: list
    cvar: list
    quantiles: list
    position_price: float
    window: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "levels": list(self.levels),
            "var": list(self.var),
            "cvar": list(self.cvar),
            "quantiles": list(self.quantiles),
            "position_price": self.position_price,
            "window": list(self.window),
        }


def _quantile(cdf: Callable, lo: float, hi: float, alpha: float) -> float:
    """Left-continuous generalized inverse ``inf{x : F(x) >= alpha}`` on ``[lo, hi]``."""
    if cdf(lo) >= alpha:
        return lo
    a, b = lo, hi
    for _ in range(200):
        mid = 0.5 * (a + b)
        if mid in (a, b):
            break
        if cdf(mid) >= alpha:
            b = mid
        else:
            a = mid
    return b


def var_cvar(
    measure: ImpliedMeasure,
    position_price: float,
    levels=(0.025, 0.05),
    window: tuple[float, float] | None = None,
) -> RiskReport:
    """VaR and CVaR of a long position under the implied measure restricted to ``window``.

    The measure is conditioned on ``(lo, hi]`` (default: first to last
    efficient strike) and renormalized.
    """
    if not position_price > 0:
        raise ConfigurationError("position_price must be > 0", field="position_price")
    levels = [float(a) for a in levels]
    if any(not 0 < a <= 1 for a in levels):
        raise ConfigurationError("levels must lie in (0, 1]", field="levels")
    lo, hi = window if window is not None else measure.support_hint
    lo, hi = float(lo), float(hi)
    s_lo = float(measure.survival(lo))
    s_hi = float(measure.survival(hi))
    mass = s_lo - s_hi
    if not hi > lo or not mass > 0:
        raise DegenerateMeasureError(f"no implied mass on ({lo:g}, {hi:g}]")

    def cdf(x):
        return (s_lo - float(measure.survival(x))) / mass

    var, cvar, quantiles = [], [], []
    for alpha in levels:
        q = _quantile(cdf, lo, hi, alpha)
        p = cdf(q)
        # E[X 1{X <= q}] = q F(q) - integral_lo^q F, with F = (s_lo - S) / mass
        int_cdf = ((q - lo) * s_lo - _integrate_survival(measure, lo, q)) / mass
        tail_mean = (q * p - int_cdf) / p if p > 0 else q
        quantiles.append(q)
        var.append(position_price - q)
        cvar.append(position_price - tail_mean)
    return RiskReport(levels, var, cvar, quantiles, float(position_price), (lo, hi))


__all__ = [
    "ImpliedMeasure",
    "RiskReport",
    "SmoothCallCurve",
    "implied_survival",
    "reconstruct_price",
    "smooth_call_curve",
    "step_measure",
    "var_cvar",
]
