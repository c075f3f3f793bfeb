"""Command-line interface.

Every subcommand accepts ``--config FILE``: a plain ``key = value`` file whose
keys are the long flag names (dashes or underscores). Flags given on the
command line override the file. Failures exit with status 2 and print a JSON
object ``{"error", "message", "field"}`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from datetime import date, datetime

import numpy as np

from .efficient_set import efficient_set, q0_at
from .exceptions import ConfigurationError, SuperhedgeError
from .implied_measure import implied_survival, reference_spline, smooth_call_curve, step_measure, var_cvar
from .quotes import mesh, load_quotes
from .simulation import (
    MIXTURE_STRIKES,
    MixtureModel,
    NoiseModel,
    SmileModel,
    mixture_experiment,
    run_mc,
)
from .smoothers import density_payoff, spline_payoff
from .superhedge import option_payoff, superhedge_price

SEED_ENV = "NPSUPERHEDGE_SEED"


# ------------------------------------------------------------------ helpers


def _float_list(text: str, name: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"{name}: expected comma-separated numbers, got {text!r}", field=name) from None


def _positive(value, name: str):
    if value is not None and not value > 0:
        raise ConfigurationError(f"{name} must be > 0, got {value}", field=name)


def read_config(path: str) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key = value", field="config")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _open_out(path: str | None):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def _write_json(obj, path: str | None = None):
    fh, close = _open_out(path)
    json.dump(obj, fh, indent=2, sort_keys=False)
    fh.write("\n")
    if close:
        fh.close()


def _write_csv(header, rows, path: str | None = None):
    fh, close = _open_out(path)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    if close:
        fh.close()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _load(args):
    maturity = date.fromisoformat(args.maturity) if args.maturity else None
    at = datetime.fromisoformat(args.at.replace("Z", "+00:00")) if args.at else None
    with open(args.input, "rb") as fh:
        return load_quotes(fh, min_ask_size=args.min_ask_size, maturity=maturity, at=at, spot=args.spot)


def _curve(args, eff, quotes):
    _positive(args.delta, "delta")
    _positive(args.h, "h")
    if args.N < 2:
        raise ConfigurationError("N must be >= 2", field="N")
    return smooth_call_curve(eff, args.smoother, delta=args.delta, h=args.h, mesh=mesh(quotes), N=args.N)


def _parse_payoff(spec: str, N: int):
    kind, _, params = spec.partition(":")
    try:
        if kind == "option":
            return option_payoff(float(params))
        if kind == "spline":
            k, h = (float(v) for v in params.split(","))
            _positive(h, "payoff")
            return spline_payoff(reference_spline(N), k, h)
        if kind == "density":
            kernel, k, h = params.split(",")
            _positive(float(h), "payoff")
            return density_payoff(float(k), float(h), kernel.strip())
    except ValueError as exc:
        if isinstance(exc, SuperhedgeError):
            raise
        raise ConfigurationError(f"bad payoff spec {spec!r}: {exc}", field="payoff") from None
    raise ConfigurationError(
        f"unknown payoff kind {kind!r}; use option:k, spline:k,h or density:normal,k,h", field="payoff"
    )


# ------------------------------------------------------------------ commands


def cmd_efficient_set(args):
    quotes = _load(args)
    eff = efficient_set(quotes)
    q0 = q0_at(eff, quotes.strikes)
    rows = zip(quotes.strikes, quotes.asks, eff.mask, q0)
    _write_csv(["strike", "ask", "efficient", "q0"], rows, args.output)


def cmd_price(args):
    quotes = _load(args)
    eff = efficient_set(quotes)
    payoff = _parse_payoff(args.payoff, args.N)
    res = superhedge_price(payoff, eff)
    _write_json(
        {
            "price": res.price,
            "price_dual": res.price_dual,
            "strikes": eff.strikes.tolist(),
            "w": res.w.tolist(),
            "b": res.b.tolist(),
        },
        args.output,
    )


def cmd_smoother(args):
    _positive(args.h, "h")
    if args.kind == "spline":
        g = spline_payoff(reference_spline(args.N), args.k, args.h)
    else:
        g = density_payoff(args.k, args.h, args.kind)
    x = np.linspace(args.k - 2 * args.h, args.k + 2 * args.h, args.points)
    _write_csv(["x", "g", "dg", "d2g"], zip(x, g.eval(x), g.deriv(x), g.second_deriv(x)), args.output)


def cmd_estimate(args):
    quotes = _load(args)
    eff = efficient_set(quotes)
    curve = _curve(args, eff, quotes)
    pos = quotes.strikes[1:]
    start = args.start if args.start is not None else float(pos[0])
    stop = args.stop if args.stop is not None else float(pos[-1])
    k = np.linspace(start, stop, args.points)
    _write_csv(
        ["k", "q_delta", "survival", "density"],
        zip(k, curve(k), curve.survival(k), curve.density(k)),
        args.output,
    )


def _tau(args, quotes) -> float:
    if args.tau is not None:
        _positive(args.tau, "tau")
        return args.tau
    if quotes.maturity and quotes.observed_at:
        days = (quotes.maturity - quotes.observed_at.date()).days
        if days > 0:
            return days / 365.0
    raise ConfigurationError("time to maturity unknown; pass --tau", field="tau")


def cmd_risk(args):
    quotes = _load(args)
    eff = efficient_set(quotes)
    levels = _float_list(args.levels, "levels")
    if not levels or any(not 0 < a <= 1 for a in levels):
        raise ConfigurationError("levels must lie in (0, 1]", field="levels")
    if args.smoother == "none":
        measure = step_measure(eff)
    else:
        measure = implied_survival(_curve(args, eff, quotes))
    if args.position_price is not None:
        _positive(args.position_price, "position_price")
        position = args.position_price
    else:
        position = quotes.spot * math.exp(args.rate * _tau(args, quotes))
    window = None
    if args.window:
        lo_hi = _float_list(args.window, "window")
        if len(lo_hi) != 2:
            raise ConfigurationError("window needs two numbers lo,hi", field="window")
        window = tuple(lo_hi)
    report = var_cvar(measure, position, levels, window)
    _write_json(report.to_dict(), args.output)


def cmd_simulate(args):
    if args.sims < 1:
        raise ConfigurationError("sims must be >= 1", field="sims")
    deltas = _float_list(args.delta, "delta")
    for d in deltas:
        _positive(d, "delta")
    Ns = [int(v) for v in _float_list(args.N, "N")]
    if any(n < 2 for n in Ns):
        raise ConfigurationError("N must be >= 2", field="N")
    report = run_mc(
        SmileModel(),
        NoiseModel(),
        N_values=Ns,
        deltas=deltas,
        sims=args.sims,
        master_seed=args.seed,
        smoother=args.smoother,
        n_jobs=args.n_jobs,
    )
    _write_json(report.to_dict(full=args.report is not None), args.report)
    if args.bands:
        rows = []
        for cell in report.cells.values():
            for i, k in enumerate(report.strikes):
                row = [cell.N, cell.delta, k, report.true_price[i], report.true_vol[i], report.true_survival[i]]
                for summ in (cell.price, cell.vol, cell.survival):
                    row += [summ.mean[i]] + [summ.quantiles[a][i] for a in sorted(summ.quantiles)]
                rows.append(row)
        cols = []
        for name in ("price", "vol", "survival"):
            cols += [f"{name}_mean", f"{name}_q2.5", f"{name}_q5", f"{name}_q95", f"{name}_q97.5"]
        _write_csv(["N", "delta", "strike", "true_price", "true_vol", "true_survival"] + cols, rows, args.bands)


def cmd_mixture(args):
    _positive(args.h, "h")
    _positive(args.grid_step, "grid_step")
    strikes = args.strike_start + args.strike_step * np.arange(args.strike_count)
    res = mixture_experiment(MixtureModel(h=args.h), grid_step=args.grid_step, strikes=strikes)
    _write_json({"mise": res.mise, "h": args.h, "strikes": res.strikes.tolist(), "prices": res.prices.tolist()}, args.report)
    if args.output:
        _write_csv(["x", "density", "true_density"], zip(res.x, res.density, res.true_density), args.output)


# ------------------------------------------------------------------ parser


def _add_input(p):
    p.add_argument("--input", required=True, help="quotes CSV (strike,ask,ask_size,maturity,observed_at)")
    p.add_argument("--min-ask-size", type=int, default=100)
    p.add_argument("--maturity", default=None, help="ISO date filter")
    p.add_argument("--at", default=None, help="ISO timestamp filter")
    p.add_argument("--spot", type=float, default=None, help="underlying ask if no strike-0 row")


def _add_smoothing(p, allow_none=False):
    choices = ["spline", "normal"] + (["none"] if allow_none else [])
    p.add_argument("--smoother", choices=choices, default="spline")
    p.add_argument("--delta", type=float, default=5.0, help="h = delta * mesh")
    p.add_argument("--h", type=float, default=None, help="explicit half-width (overrides delta)")
    p.add_argument("--N", type=int, default=10, help="spline intervals")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="npsuperhedge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", default=None, help="key = value defaults file")
        p.add_argument("--output", default=None, help="output path (default stdout)")
        p.set_defaults(func=func)
        return p

    p = add("efficient-set", cmd_efficient_set, "flag efficient quotes and print q0")
    _add_input(p)

    p = add("price", cmd_price, "superhedging price of a payoff")
    _add_input(p)
    p.add_argument("--payoff", required=True, help="option:k | spline:k,h | density:normal,k,h")
    p.add_argument("--N", type=int, default=10)

    p = add("smoother", cmd_smoother, "tabulate a smoothed payoff")
    p.add_argument("--kind", choices=["spline", "normal"], default="spline")
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--N", type=int, default=10)
    p.add_argument("--points", type=int, default=201)

    p = add("estimate", cmd_estimate, "smoothed CALL curve, survival and density on a grid")
    _add_input(p)
    _add_smoothing(p)
    p.add_argument("--start", type=float, default=None)
    p.add_argument("--stop", type=float, default=None)
    p.add_argument("--points", type=int, default=201)

    p = add("risk", cmd_risk, "VaR and CVaR under the implied measure")
    _add_input(p)
    _add_smoothing(p, allow_none=True)
    p.add_argument("--levels", default="0.025,0.05")
    p.add_argument("--rate", type=float, default=0.0, help="annual rate for the futures price")
    p.add_argument("--tau", type=float, default=None, help="years to maturity")
    p.add_argument("--position-price", type=float, default=None, help="defaults to spot*exp(rate*tau)")
    p.add_argument("--window", default=None, help="conditioning interval lo,hi")

    p = add("simulate", cmd_simulate, "Monte Carlo study on the smile model")
    p.add_argument("--sims", type=int, default=5000)
    p.add_argument("--seed", type=int, default=int(os.environ.get(SEED_ENV, "0")))
    p.add_argument("--delta", default="5", help="comma-separated list")
    p.add_argument("--N", default="10", help="comma-separated list")
    p.add_argument("--smoother", choices=["spline", "normal"], default="spline")
    p.add_argument("--n-jobs", type=int, default=1)
    p.add_argument("--report", default=None, help="full JSON report path")
    p.add_argument("--bands", default=None, help="per-strike band CSV path")

    p = add("mixture", cmd_mixture, "density recovery on a log-normal mixture")
    p.add_argument("--h", type=float, default=20.0)
    p.add_argument("--grid-step", type=float, default=1.0)
    p.add_argument("--strike-start", type=float, default=float(MIXTURE_STRIKES[0]))
    p.add_argument("--strike-step", type=float, default=28.0)
    p.add_argument("--strike-count", type=int, default=MIXTURE_STRIKES.size)
    p.add_argument("--report", default=None, help="JSON path (default stdout)")
    return parser


def _config_path(argv) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(parser, argv):
    """Parse ``argv`` with values from ``--config`` as defaults.

    The file is read before parsing so it can supply required options.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    path = _config_path(argv)
    subparsers = parser._subparsers._group_actions[0].choices
    command = next((tok for tok in argv if tok in subparsers), None)
    if path and command:
        subparser = subparsers[command]
        known = {a.dest: a for a in subparser._actions}
        defaults = {}
        for key, value in read_config(path).items():
            if key not in known or key in ("config", "func", "help"):
                raise ConfigurationError(f"unknown config key {key!r} for {command}", field=key)
            action = known[key]
            try:
                defaults[key] = action.type(value) if action.type else value
            except ValueError:
                raise ConfigurationError(f"bad value {value!r} for {key}", field=key) from None
            action.required = False
        subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        args.func(args)
    except (SuperhedgeError, ValueError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "field": getattr(exc, "field", None)}
        print(json.dumps(err), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
