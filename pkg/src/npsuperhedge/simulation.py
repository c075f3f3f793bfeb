"""Monte Carlo experiments: Black-Scholes prices with a volatility smile plus
microstructure noise, and a log-normal mixture density-recovery experiment.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .efficient_set import efficient_indices
from .exceptions import ConfigurationError, NoSolutionError
from .implied_measure import reference_spline
from .quotes import DEFAULT_MONEYNESS_EDGES, MONEYNESS_CLASSES, QuoteCurve, moneyness_buckets
from .smoothers import KernelShape, get_kernel

SQRT_2PI = math.sqrt(2.0 * math.pi)
QUANTILE_LEVELS = (0.025, 0.05, 0.95, 0.975)
DEFAULT_STRIKES = 1000.0 + 28.0 * np.arange(25)
# the mixture experiment is run on the same 28-step grid shifted up by one step
MIXTURE_STRIKES = 1028.0 + 28.0 * np.arange(25)
DEFAULT_DENSITY_WINDOW = (1100.0, 1600.0)


def _npdf(z):
    return np.exp(-0.5 * z * z) / SQRT_2PI


def _d1d2(spot, strike, rate, tau, vol):
    sd = vol * np.sqrt(tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(spot / strike) + (rate + 0.5 * vol * vol) * tau) / sd
    return d1, d1 - sd


def bs_call(spot, strike, rate, tau, vol):
    """Black-Scholes CALL price; handles ``strike = 0`` and ``vol = 0``."""
    spot, strike, vol = (np.asarray(v, dtype=float) for v in (spot, strike, vol))
    disc = math.exp(-rate * tau)
    intrinsic = np.maximum(spot - strike * disc, 0.0)
    d1, d2 = _d1d2(spot, np.where(strike > 0, strike, 1.0), rate, tau, np.where(vol > 0, vol, 1.0))
    price = spot * ndtr(d1) - strike * disc * ndtr(d2)
    out = np.where(strike <= 0, spot, np.where(vol <= 0, intrinsic, price))
    return float(out) if out.ndim == 0 else out


def bs_survival(spot, strike, rate, tau, vol):
    """Risk-neutral ``P(X > strike)`` discounted: ``exp(-r tau) N(d2)``."""
    _, d2 = _d1d2(np.asarray(spot, dtype=float), np.asarray(strike, dtype=float), rate, tau, np.asarray(vol, dtype=float))
    out = math.exp(-rate * tau) * ndtr(d2)
    return float(out) if np.ndim(out) == 0 else out


def bs_vega(spot, strike, rate, tau, vol):
    d1, _ = _d1d2(spot, strike, rate, tau, vol)
    return spot * _npdf(d1) * np.sqrt(tau)


def implied_vol(price, spot, strike, rate, tau, tol: float = 1e-10, errors: str = "raise"):
    """Black-Scholes implied volatility by safeguarded Newton iteration.

    With ``errors="nan"`` prices outside ``((spot - k e^{-r tau})+, spot)``
    give NaN instead of raising.
    """
    price, spot, strike = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (price, spot, strike))
    )
    disc = math.exp(-rate * tau)
    lower = np.maximum(spot - strike * disc, 0.0)
    valid = (price > lower) & (price < spot) & (strike > 0)
    if errors == "raise" and not np.all(valid):
        raise NoSolutionError("price outside the Black-Scholes no-arbitrage bounds")
    p, s, k = price[valid], spot[valid], strike[valid]
    lo = np.zeros_like(p)
    hi = np.full_like(p, 5.0)
    while True:
        short = bs_call(s, k, rate, tau, hi) < p
        if not np.any(short) or hi.max() > 1e4:
            break
        hi = np.where(short, 2.0 * hi, hi)
    vol = np.full_like(p, 0.3)
    vol = np.clip(vol, lo, hi)
    for _ in range(200):
        diff = bs_call(s, k, rate, tau, vol) - p
        lo = np.where(diff < 0, vol, lo)
        hi = np.where(diff > 0, vol, hi)
        vega = bs_vega(s, k, rate, tau, vol)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = vol - diff / vega
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        new = np.where(bad, 0.5 * (lo + hi), step)
        done = (np.abs(new - vol) < tol * 1e-2) | (hi - lo < tol * 1e-2)
        vol = new
        if np.all(done):
            break
    out = np.full(price.shape, np.nan)
    out[valid] = vol
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SmileModel:
    """Black-Scholes prices with volatility linear in strike."""

    spot: float = 1365.0
    rate: float = 0.04
    tau: float = 0.25
    strikes: np.ndarray = field(default_factory=lambda: DEFAULT_STRIKES.copy())
    vol_at_1000: float = 0.40
    vol_slope: float = -0.20 / 700.0

    def vol(self, k):
        return self.vol_at_1000 + self.vol_slope * (np.asarray(k, dtype=float) - 1000.0)

    def price(self, k=None):
        k = self.strikes if k is None else np.asarray(k, dtype=float)
        return bs_call(self.spot, k, self.rate, self.tau, self.vol(k))

    def survival(self, k=None):
        """``-dC/dk`` including the smile term ``-vega * sigma'(k)``."""
        k = self.strikes if k is None else np.asarray(k, dtype=float)
        v = self.vol(k)
        return bs_survival(self.spot, k, self.rate, self.tau, v) - bs_vega(self.spot, k, self.rate, self.tau, v) * self.vol_slope

    def density(self, k=None):
        """``d^2C/dk^2`` along the smile."""
        k = self.strikes if k is None else np.asarray(k, dtype=float)
        v = self.vol(k)
        s, r, t = self.spot, self.rate, self.tau
        d1, d2 = _d1d2(s, k, r, t, v)
        disc = math.exp(-r * t)
        sq = math.sqrt(t)
        vega = s * _npdf(d1) * sq
        c_kk = disc * _npdf(d2) / (k * v * sq)
        c_kv = disc * _npdf(d2) * d1 / v
        c_vv = vega * d1 * d2 / v
        a = self.vol_slope
        return c_kk + 2.0 * c_kv * a + c_vv * a * a


@dataclass(frozen=True)
class NoiseModel:
    """Uniform ask noise of radius ``illiquidity(k) * spread(price) / 2``."""

    spread_rate: float = 0.05
    spread_floor: float = 0.50
    spread_cap: float = 3.00
    illiquidity_slope: float = 5.0
    ask_floor: float = 0.01

    @classmethod
    def uniform(cls, radius: float) -> NoiseModel:
        """Constant radius at every strike."""
        return cls(spread_rate=0.0, spread_floor=2.0 * radius, spread_cap=2.0 * radius, illiquidity_slope=0.0)

    def spread(self, price):
        return np.clip(self.spread_rate * np.asarray(price, dtype=float), self.spread_floor, self.spread_cap)

    def illiquidity(self, model: SmileModel, k=None):
        k = model.strikes if k is None else np.asarray(k, dtype=float)
        return 1.0 + self.illiquidity_slope * np.abs(math.exp(model.rate * model.tau) * k / model.spot - 1.0)

    def radius(self, model: SmileModel) -> np.ndarray:
        return self.illiquidity(model) * self.spread(model.price()) / 2.0


def _draw_asks(model: SmileModel, noise: NoiseModel, rng, fair, radius):
    eps = rng.uniform(-1.0, 1.0, fair.size) * radius
    return np.maximum(fair + eps, noise.ask_floor)


def simulate_curve(model: SmileModel, noise: NoiseModel, seed) -> QuoteCurve:
    """One noisy ask curve; the strike-0 quote is the spot."""
    rng = np.random.default_rng(seed)
    asks = _draw_asks(model, noise, rng, model.price(), noise.radius(model))
    return QuoteCurve(np.r_[0.0, model.strikes], np.r_[model.spot, asks], spot_hint=model.spot)


def sim_seed(master_seed: int, index: int) -> list[int]:
    """Seed of simulation ``index``; independent of execution order."""
    return [int(master_seed), int(index)]


def _simulate_block(model, noise, master_seed, start, stop):
    """Dual coefficients per grid strike (0 where inefficient) and ``q(j_I)``."""
    fair = model.price()
    radius = noise.radius(model)
    strikes = np.r_[0.0, model.strikes]
    n = model.strikes.size
    B = np.zeros((stop - start, n))
    qlast = np.zeros(stop - start)
    efficient = np.zeros((stop - start, n), dtype=bool)
    for row, s in enumerate(range(start, stop)):
        rng = np.random.default_rng(sim_seed(master_seed, s))
        asks = np.r_[model.spot, _draw_asks(model, noise, rng, fair, radius)]
        idx = efficient_indices(strikes, asks)
        j, q = strikes[idx], asks[idx]
        slopes = np.r_[np.diff(q) / np.diff(j), 0.0]
        B[row, idx[1:] - 1] = np.maximum(np.diff(slopes), 0.0)
        qlast[row] = q[-1]
        efficient[row, idx[1:] - 1] = True
    return B, qlast, efficient


def simulate_coefficients(model, noise, sims, master_seed, n_jobs: int = 1, chunk: int = 500):
    blocks = [(a, min(a + chunk, sims)) for a in range(0, sims, chunk)]
    if n_jobs == 1 or len(blocks) == 1:
        parts = [_simulate_block(model, noise, master_seed, a, b) for a, b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [pool.submit(_simulate_block, model, noise, master_seed, a, b) for a, b in blocks]
            parts = [f.result() for f in futures]
    B = np.vstack([p[0] for p in parts])
    qlast = np.concatenate([p[1] for p in parts])
    efficient = np.vstack([p[2] for p in parts])
    return B, qlast, efficient


def _shape(kind: str, N: int):
    return reference_spline(N).shape if kind == "spline" else KernelShape(get_kernel(kind))


@dataclass(frozen=True)
class StrikeSummary:
    mean: np.ndarray
    sd: np.ndarray
    min: np.ndarray
    max: np.ndarray
    quantiles: dict  # level -> array

    @classmethod
    def of(cls, X: np.ndarray) -> StrikeSummary:
        # columns may be all NaN (implied vols switched off or out of bounds)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return cls(
                mean=np.nanmean(X, axis=0),
                sd=np.nanstd(X, axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1]),
                min=np.nanmin(X, axis=0),
                max=np.nanmax(X, axis=0),
                quantiles={a: np.nanquantile(X, a, axis=0) for a in QUANTILE_LEVELS},
            )

    def to_dict(self) -> dict:
        out = {"mean": _json_list(self.mean), "sd": _json_list(self.sd), "min": _json_list(self.min), "max": _json_list(self.max)}
        for a, v in self.quantiles.items():
            out[f"q{a * 100:g}"] = _json_list(v)
        return out


def _json_list(values) -> list:
    """Floats with NaN mapped to None, so reports stay valid JSON."""
    return [None if math.isnan(v) else v for v in np.asarray(values, dtype=float).tolist()]


@dataclass(frozen=True)
class CellReport:
    """Results for one (N, delta) pair."""

    N: int
    delta: float
    h: float
    mse: float
    mse_compat: float  # 24 strikes (lowest excluded), as in the classic normalizer
    price: StrikeSummary
    vol: StrikeSummary
    survival: StrikeSummary
    breach_90: float  # share of strikes with true price below the 5% quantile
    breach_95: float  # below the 2.5% quantile
    covered_90: bool  # true price inside [q5, q95] at every strike
    bucket_mean_error: list
    density_grid: np.ndarray
    mean_density: np.ndarray
    mise: float

    def to_dict(self, full: bool = True) -> dict:
        out = {
            "N": self.N,
            "delta": self.delta,
            "h": self.h,
            "mse": self.mse,
            "mse_compat": self.mse_compat,
            "breach_90": self.breach_90,
            "breach_95": self.breach_95,
            "covered_90": self.covered_90,
            "bucket_mean_error": _json_list(self.bucket_mean_error),
            "mise": self.mise,
        }
        if full:
            out["price"] = self.price.to_dict()
            out["vol"] = self.vol.to_dict()
            out["survival"] = self.survival.to_dict()
        return out


@dataclass(frozen=True)
class MCReport:
    sims: int
    master_seed: int
    strikes: np.ndarray
    true_price: np.ndarray
    true_vol: np.ndarray
    true_survival: np.ndarray
    inefficiency: np.ndarray  # percent of inefficient quotes, per simulation
    bucket_inefficiency: dict  # class -> percent
    bucket_counts: dict
    cells: dict  # (N, delta) -> CellReport

    @property
    def mean_inefficiency(self) -> float:
        return float(self.inefficiency.mean())

    @property
    def max_inefficiency(self) -> float:
        return float(self.inefficiency.max())

    def share_inefficiency_at_least(self, pct: float) -> float:
        return float(np.mean(self.inefficiency >= pct))

    def share_inefficiency_above(self, pct: float) -> float:
        return float(np.mean(self.inefficiency > pct))

    def mse_table(self) -> dict:
        return {key: cell.mse for key, cell in self.cells.items()}

    def to_dict(self, full: bool = True) -> dict:
        return {
            "sims": self.sims,
            "seed": self.master_seed,
            "strikes": self.strikes.tolist(),
            "true_price": self.true_price.tolist(),
            "inefficiency": {
                "mean": self.mean_inefficiency,
                "max": self.max_inefficiency,
                "min": float(self.inefficiency.min()),
                "share_at_least_40": self.share_inefficiency_at_least(40.0),
                "share_above_40": self.share_inefficiency_above(40.0),
                "by_moneyness": self.bucket_inefficiency,
                "bucket_counts": self.bucket_counts,
            },
            "cells": [cell.to_dict(full) for cell in self.cells.values()],
        }


def run_mc(
    model: SmileModel | None = None,
    noise: NoiseModel | None = None,
    N_values=(10,),
    deltas=(5.0,),
    sims: int = 5000,
    master_seed: int = 0,
    smoother: str = "spline",
    moneyness_edges=DEFAULT_MONEYNESS_EDGES,
    density_window=DEFAULT_DENSITY_WINDOW,
    n_jobs: int = 1,
    implied_vols: bool = True,
) -> MCReport:
    """Monte Carlo study of the smoothed CALL estimator on noisy smile prices.

    ``h = delta * M`` with ``M`` the strike step of the model grid.
    """
    model = model or SmileModel()
    noise = noise or NoiseModel()
    if sims < 1:
        raise ConfigurationError("sims must be >= 1", field="sims")
    for d in deltas:
        if not d > 0:
            raise ConfigurationError(f"delta must be > 0, got {d}", field="delta")
    K = np.asarray(model.strikes, dtype=float)
    M = float(np.max(np.diff(K)))
    F = model.price()
    B, qlast, efficient = simulate_coefficients(model, noise, sims, master_seed, n_jobs=n_jobs)

    inefficiency = 100.0 * (~efficient).mean(axis=1)
    buckets = moneyness_buckets(model.spot, K, model.rate, model.tau, moneyness_edges)
    bucket_ineff, bucket_counts = {}, {}
    for b, name in enumerate(MONEYNESS_CLASSES):
        sel = buckets == b
        bucket_counts[name] = int(sel.sum())
        bucket_ineff[name] = float(100.0 * (~efficient[:, sel]).mean()) if sel.any() else float("nan")

    lo, hi = density_window
    x = np.arange(lo, hi + 0.5, 1.0)
    true_density = model.density(x)
    true_vol = model.vol(K)
    true_surv = model.survival(K)

    cells = {}
    for N in N_values:
        shape = _shape(smoother, int(N))
        for delta in deltas:
            h = float(delta) * M
            U = (K[:, None] - K[None, :]) / h  # rows: efficient strike, cols: evaluation strike
            Q = B @ (h * shape.value(U)) + qlast[:, None]
            S = B @ shape.d1(U)
            E = Q - F
            mse = float(np.mean(E**2))
            mse_compat = float(np.sum(E[:, 1:] ** 2) / (sims * (K.size - 1)))
            vols = (
                implied_vol(Q, model.spot, K[None, :], model.rate, model.tau, errors="nan")
                if implied_vols
                else np.full_like(Q, np.nan)
            )
            price_sum = StrikeSummary.of(Q)
            q05, q95 = price_sum.quantiles[0.05], price_sum.quantiles[0.95]
            q025 = price_sum.quantiles[0.025]
            mean_density = (B.mean(axis=0) @ shape.d2((K[:, None] - x[None, :]) / h)) / h
            mise = _trapz((mean_density - true_density) ** 2, x)
            cells[(int(N), float(delta))] = CellReport(
                N=int(N),
                delta=float(delta),
                h=h,
                mse=mse,
                mse_compat=mse_compat,
                price=price_sum,
                vol=StrikeSummary.of(vols),
                survival=StrikeSummary.of(S),
                breach_90=float(np.mean(F < q05)),
                breach_95=float(np.mean(F < q025)),
                covered_90=bool(np.all((F >= q05) & (F <= q95))),
                bucket_mean_error=[
                    float(E[:, buckets == b].mean()) if np.any(buckets == b) else float("nan")
                    for b in range(len(MONEYNESS_CLASSES))
                ],
                density_grid=x,
                mean_density=mean_density,
                mise=mise,
            )
    return MCReport(
        sims=sims,
        master_seed=master_seed,
        strikes=K,
        true_price=F,
        true_vol=true_vol,
        true_survival=true_surv,
        inefficiency=inefficiency,
        bucket_inefficiency=bucket_ineff,
        bucket_counts=bucket_counts,
        cells=cells,
    )


def deterministic_gaps(model: SmileModel | None = None, deltas=(2.0, 5.0, 10.0), N: int = 10, smoother: str = "spline"):
    """Noise-free errors of price, implied vol and survival for each delta."""
    model = model or SmileModel()
    K = np.asarray(model.strikes, dtype=float)
    M = float(np.max(np.diff(K)))
    strikes = np.r_[0.0, K]
    asks = np.r_[model.spot, model.price()]
    idx = efficient_indices(strikes, asks)
    j, q = strikes[idx], asks[idx]
    b = np.diff(np.r_[np.diff(q) / np.diff(j), 0.0])
    shape = _shape(smoother, N)
    out = {}
    for delta in deltas:
        h = delta * M
        U = (j[1:, None] - K[None, :]) / h
        price = b @ (h * shape.value(U)) + q[-1]
        surv = b @ shape.d1(U)
        vol = implied_vol(price, model.spot, K, model.rate, model.tau, errors="nan")
        out[float(delta)] = {
            "price": price - model.price(),
            "vol": vol - model.vol(K),
            "survival": surv - model.survival(),
        }
    return out


def convergence_experiment(
    model: SmileModel | None = None,
    steps=(28.0, 14.0, 7.0, 3.5),
    delta: float = 2.0,
    sims: int = 500,
    radius_at_28: float = 0.5,
    eval_strikes=None,
    N: int = 10,
    master_seed: int = 0,
) -> list[float]:
    """Interior sup of the empirical MSE as the strike step is refined.

    Noise is uniform with a radius shrinking like the squared step, so that
    the noise on slopes between neighbouring strikes vanishes with the mesh.
    """
    base = model or SmileModel()
    t = np.arange(1200.0, 1500.0 + 1e-9, 25.0) if eval_strikes is None else np.asarray(eval_strikes, dtype=float)
    shape = _shape("spline", N)
    out = []
    for step in steps:
        K = np.arange(1000.0, 1672.0 + 1e-9, step)
        m = SmileModel(base.spot, base.rate, base.tau, K, base.vol_at_1000, base.vol_slope)
        noise = NoiseModel.uniform(radius_at_28 * (step / 28.0) ** 2)
        B, qlast, _ = simulate_coefficients(m, noise, sims, master_seed)
        h = delta * step
        est = B @ (h * shape.value((K[:, None] - t[None, :]) / h)) + qlast[:, None]
        err = est - m.price(t)
        out.append(float(np.max(np.mean(err**2, axis=0))))
    return out


@dataclass(frozen=True)
class MixtureModel:
    """Discounted mixture of log-normal terminal prices."""

    drifts: tuple = (0.027, 0.033, 0.049)
    vols: tuple = (0.3, 0.1, 0.4)
    weights: tuple = (0.2, 0.3, 0.5)
    spot: float = 1365.0
    rate: float = 0.04
    tau: float = 0.25
    h: float = 20.0
    interval: tuple = (1050.0, 1650.0)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-12):
            raise ConfigurationError("mixture weights must be non-negative and sum to 1", field="weights")
        if not (len(self.drifts) == len(self.vols) == len(self.weights)):
            raise ConfigurationError("mixture parameters must have equal lengths", field="weights")

    def _params(self):
        mu = np.asarray(self.drifts, dtype=float)
        sig = np.asarray(self.vols, dtype=float)
        m = math.log(self.spot) + (mu - 0.5 * sig**2) * self.tau
        s = sig * math.sqrt(self.tau)
        return m, s, np.asarray(self.weights, dtype=float)

    def price(self, k):
        k = np.atleast_1d(np.asarray(k, dtype=float))[:, None]
        m, s, w = self._params()
        d1 = (m + s**2 - np.log(k)) / s
        d2 = d1 - s
        calls = np.exp(m + 0.5 * s**2) * ndtr(d1) - k * ndtr(d2)
        return math.exp(-self.rate * self.tau) * (calls @ w)

    def density(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))[:, None]
        m, s, w = self._params()
        pdf = _npdf((np.log(x) - m) / s) / (x * s)
        return math.exp(-self.rate * self.tau) * (pdf @ w)


@dataclass(frozen=True)
class MixtureResult:
    strikes: np.ndarray
    prices: np.ndarray
    x: np.ndarray
    density: np.ndarray
    true_density: np.ndarray
    mise: float

    def to_dict(self) -> dict:
        return {
            "strikes": self.strikes.tolist(),
            "prices": self.prices.tolist(),
            "x": self.x.tolist(),
            "density": self.density.tolist(),
            "true_density": self.true_density.tolist(),
            "mise": self.mise,
        }


def _trapz(y, x):
    fn = getattr(np, "trapezoid", None) or np.trapz
    return float(fn(y, x))


def mixture_experiment(
    model: MixtureModel | None = None,
    grid_step: float = 1.0,
    strikes=None,
    kernel: str = "normal",
) -> MixtureResult:
    """Recover the mixture density from exact CALL prices with a kernel smoother.

    Both densities are renormalized to integrate to one on ``model.interval``
    before the integrated squared error is taken.
    """
    model = model or MixtureModel()
    K = MIXTURE_STRIKES if strikes is None else np.asarray(strikes, dtype=float)
    prices = model.price(K)
    grid = np.r_[0.0, K]
    asks = np.r_[model.spot, prices]
    idx = efficient_indices(grid, asks)
    j, q = grid[idx], asks[idx]
    b = np.diff(np.r_[np.diff(q) / np.diff(j), 0.0])
    lo, hi = model.interval
    x = np.arange(lo, hi + 0.5 * grid_step, grid_step)
    shape = KernelShape(get_kernel(kernel))
    est = b @ shape.d2((j[1:, None] - x[None, :]) / model.h) / model.h
    true = model.density(x)
    est_c = est / _trapz(est, x)
    true_c = true / _trapz(true, x)
    mise = _trapz((est_c - true_c) ** 2, x)
    return MixtureResult(K, prices, x, est, true, mise)
