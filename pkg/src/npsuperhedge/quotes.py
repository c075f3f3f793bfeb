"""Ingestion and classification of CALL ask-quote cross-sections.

A cross-section is stored as a :class:`QuoteCurve`: strictly increasing
strikes starting at 0, where the strike-0 "option" is the underlying itself.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date, datetime
from typing import IO, TYPE_CHECKING

import numpy as np

from .exceptions import (
    EmptyCurveError,
    InsufficientStrikesError,
    MissingNumeraireError,
    QuoteParseError,
)

if TYPE_CHECKING:
    from .efficient_set import EfficientCurve

CSV_COLUMNS = ("strike", "ask", "ask_size", "maturity", "observed_at")
DEFAULT_MIN_ASK_SIZE = 100
# forward moneyness exp(r*tau)*K/S; reproduces the (6,5,5,4,5) split of the 25-strike grid
DEFAULT_MONEYNESS_EDGES = (0.85, 0.95, 1.06, 1.14)
MONEYNESS_CLASSES = ("dITM", "ITM", "ATM", "OTM", "dOTM")


@dataclass(frozen=True)
class OptionQuote:
    strike: float
    ask: float
    ask_size: int
    maturity: date
    observed_at: datetime

    def __post_init__(self):
        if not self.strike >= 0:
            raise ValueError(f"strike must be >= 0, got {self.strike}")
        if not self.ask > 0:
            raise ValueError(f"ask must be > 0, got {self.ask}")
        if self.ask_size < 0:
            raise ValueError(f"ask_size must be >= 0, got {self.ask_size}")


@dataclass(frozen=True, eq=False)
class QuoteCurve:
    """CALL asks for one maturity, strike 0 being the underlying."""

    strikes: np.ndarray
    asks: np.ndarray
    maturity: date | None = None
    spot_hint: float | None = None
    observed_at: datetime | None = None
    ask_sizes: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        strikes = np.array(self.strikes, dtype=float)
        asks = np.array(self.asks, dtype=float)
        if strikes.ndim != 1 or strikes.shape != asks.shape:
            raise ValueError("strikes and asks must be 1-d arrays of equal length")
        if strikes.size == 0:
            raise EmptyCurveError("quote curve is empty")
        if strikes[0] != 0.0:
            raise MissingNumeraireError("first strike must be 0 (the underlying ask)")
        if np.any(np.diff(strikes) <= 0):
            raise ValueError("strikes must be strictly increasing")
        if not np.all(np.isfinite(asks)) or np.any(asks <= 0):
            raise ValueError("every ask must be finite and > 0")
        strikes.setflags(write=False)
        asks.setflags(write=False)
        object.__setattr__(self, "strikes", strikes)
        object.__setattr__(self, "asks", asks)
        if self.ask_sizes is not None:
            sizes = np.array(self.ask_sizes, dtype=np.int64)
            if sizes.shape != strikes.shape:
                raise ValueError("ask_sizes must match strikes")
            sizes.setflags(write=False)
            object.__setattr__(self, "ask_sizes", sizes)

    def __eq__(self, other):
        if not isinstance(other, QuoteCurve):
            return NotImplemented
        return (
            np.array_equal(self.strikes, other.strikes)
            and np.array_equal(self.asks, other.asks)
            and self.maturity == other.maturity
            and self.spot_hint == other.spot_hint
            and self.observed_at == other.observed_at
        )

    __hash__ = None

    def __len__(self):
        return self.strikes.size

    @property
    def spot(self) -> float:
        """Ask of the underlying (the strike-0 quote)."""
        return float(self.asks[0])

    @classmethod
    def from_arrays(cls, strikes, asks, spot: float | None = None, **kwargs) -> QuoteCurve:
        """Build a curve from unsorted arrays.

        ``spot``, when given, is stored as the strike-0 quote and overrides any
        strike-0 row. Duplicate strikes keep their minimum ask.
        """
        strikes = np.asarray(strikes, dtype=float).ravel()
        asks = np.asarray(asks, dtype=float).ravel()
        if strikes.shape != asks.shape:
            raise ValueError("strikes and asks must have the same length")
        best: dict[float, float] = {}
        for k, a in zip(strikes.tolist(), asks.tolist()):
            if k not in best or a < best[k]:
                best[k] = a
        if spot is not None:
            best[0.0] = float(spot)
        if not best:
            raise EmptyCurveError("quote curve is empty")
        if 0.0 not in best:
            raise MissingNumeraireError("no strike-0 price available; supply spot")
        ks = sorted(best)
        return cls(np.array(ks), np.array([best[k] for k in ks]), spot_hint=spot, **kwargs)


@dataclass(frozen=True)
class MeshStats:
    mesh_all: float
    mesh_efficient: float | None = None


def _parse_date(text: str) -> date:
    return date.fromisoformat(text.strip())


def _parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


def _parse_decimal(text: str, name: str, line: int) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise QuoteParseError(f"cannot parse {name}={text!r}", line) from None
    if not math.isfinite(value):
        raise QuoteParseError(f"{name} must be finite, got {text!r}", line)
    return value


def load_quotes(
    source: IO[bytes] | IO[str] | bytes | str,
    min_ask_size: int = DEFAULT_MIN_ASK_SIZE,
    maturity: date | None = None,
    at: datetime | None = None,
    spot: float | None = None,
) -> QuoteCurve:
    """Read a quotes CSV and return the cross-section for one maturity and timestamp.

    Rows with ``ask_size < min_ask_size`` are dropped, except the strike-0 row
    (the underlying), which is never size-filtered. ``maturity`` and ``at``
    select rows; ``None`` disables the corresponding filter. Duplicate strikes
    keep the minimum ask.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    if text.startswith("\ufeff"):
        text = text[1:]

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyCurveError("quotes file is empty") from None
    header = [h.strip() for h in header]
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise QuoteParseError(f"missing columns {missing}", 1)
    col = {name: header.index(name) for name in CSV_COLUMNS}

    best: dict[float, tuple[float, int]] = {}
    seen_maturity: date | None = None
    seen_at: datetime | None = None
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            raise QuoteParseError(f"expected {len(header)} fields, got {len(row)}", line)
        strike = _parse_decimal(row[col["strike"]], "strike", line)
        ask = _parse_decimal(row[col["ask"]], "ask", line)
        try:
            size = int(float(row[col["ask_size"]]))
            mat = _parse_date(row[col["maturity"]])
            obs = _parse_timestamp(row[col["observed_at"]])
        except ValueError as exc:
            raise QuoteParseError(str(exc), line) from None
        if strike < 0:
            raise QuoteParseError(f"negative strike {strike}", line)
        if ask <= 0:
            raise QuoteParseError(f"ask must be positive, got {ask}", line)
        if maturity is not None and mat != maturity:
            continue
        if at is not None and obs != at:
            continue
        if strike > 0 and size < min_ask_size:
            continue
        seen_maturity = seen_maturity or mat
        seen_at = seen_at or obs
        if strike not in best or ask < best[strike][0]:
            best[strike] = (ask, size)

    if spot is not None:
        best[0.0] = (float(spot), best.get(0.0, (0.0, 0))[1])
    if not best:
        raise EmptyCurveError("no quotes survive the filters")
    if 0.0 not in best:
        raise MissingNumeraireError("no strike-0 row and no spot supplied")
    if len(best) == 1:
        raise EmptyCurveError("only the underlying survives the filters")
    ks = sorted(best)
    return QuoteCurve(
        strikes=np.array(ks),
        asks=np.array([best[k][0] for k in ks]),
        maturity=maturity if maturity is not None else seen_maturity,
        spot_hint=spot,
        observed_at=at if at is not None else seen_at,
        ask_sizes=np.array([best[k][1] for k in ks]),
    )


def dump_quotes(curve: QuoteCurve, sink: IO[str] | None = None) -> str:
    """Serialize a curve to the ingestion CSV schema; returns the text.

    Floats are written with ``repr`` so that :func:`load_quotes` recovers them
    bit for bit.
    """
    maturity = curve.maturity.isoformat() if curve.maturity else date.min.isoformat()
    observed = curve.observed_at.isoformat() if curve.observed_at else datetime.min.isoformat()
    sizes = curve.ask_sizes if curve.ask_sizes is not None else [DEFAULT_MIN_ASK_SIZE] * len(curve)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for k, a, s in zip(curve.strikes.tolist(), curve.asks.tolist(), list(sizes)):
        writer.writerow([repr(k), repr(a), int(s), maturity, observed])
    text = buf.getvalue()
    if sink is not None:
        sink.write(text)
    return text


def _max_gap(strikes: np.ndarray) -> float:
    positive = np.asarray(strikes, dtype=float)
    positive = positive[positive > 0]
    if positive.size < 2:
        raise InsufficientStrikesError("need at least two positive strikes to compute a mesh")
    return float(np.max(np.diff(positive)))


def mesh(curve: QuoteCurve, efficient: EfficientCurve | None = None) -> MeshStats:
    """Largest gap between consecutive nonzero strikes, for all and for efficient strikes."""
    mesh_all = _max_gap(curve.strikes)
    mesh_eff = _max_gap(efficient.strikes) if efficient is not None else None
    return MeshStats(mesh_all=mesh_all, mesh_efficient=mesh_eff)


def forward_moneyness(spot, strike, rate: float, tau: float):
    return np.exp(rate * tau) * np.asarray(strike, dtype=float) / np.asarray(spot, dtype=float)


def moneyness_class(
    spot: float,
    strike: float,
    rate: float,
    tau: float,
    edges=DEFAULT_MONEYNESS_EDGES,
) -> str:
    """Bucket a CALL by forward moneyness ``exp(rate*tau)*strike/spot``.

    Below ``edges[0]`` is dITM, at or above ``edges[3]`` is dOTM.
    """
    edges = tuple(float(e) for e in edges)
    if len(edges) != 4 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("edges must be 4 strictly increasing thresholds")
    if spot <= 0 or strike <= 0:
        raise ValueError("spot and strike must be positive")
    m = float(forward_moneyness(spot, strike, rate, tau))
    return MONEYNESS_CLASSES[int(np.searchsorted(edges, m, side="right"))]


def moneyness_buckets(spot: float, strikes, rate: float, tau: float, edges=DEFAULT_MONEYNESS_EDGES) -> np.ndarray:
    """Vectorized bucket index (0=dITM ... 4=dOTM) for an array of strikes."""
    m = forward_moneyness(spot, strikes, rate, tau)
    return np.searchsorted(np.asarray(edges, dtype=float), m, side="right")
