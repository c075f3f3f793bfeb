from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from npsuperhedge.efficient_set import EfficientCurve, efficient_set  # noqa: E402
from npsuperhedge.quotes import QuoteCurve  # noqa: E402

# lines collected by the acceptance suite, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def four_strikes() -> EfficientCurve:
    return efficient_set(QuoteCurve([0, 100, 110, 120], [100, 12, 9, 8]))


QUOTES_CSV = """strike,ask,ask_size,maturity,observed_at
0,1365,1000,2026-12-18,2026-09-18T12:39:00
1000,378,200,2026-12-18,2026-09-18T12:39:00
1100,280,90,2026-12-18,2026-09-18T12:39:00
1100,290,200,2026-12-18,2026-09-18T12:39:00
1200,205,200,2026-12-18,2026-09-18T12:39:00
1300,133,200,2026-12-18,2026-09-18T12:39:00
1400,72,200,2026-12-18,2026-09-18T12:39:00
1500,30,200,2026-12-18,2026-09-18T12:39:00
1600,12,200,2026-12-18,2026-09-18T12:39:00
1700,0.9,200,2026-12-18,2026-09-18T12:39:00
"""


@pytest.fixture
def quotes_csv(tmp_path) -> Path:
    path = tmp_path / "quotes.csv"
    path.write_text(QUOTES_CSV)
    return path


@st.composite
def efficient_curves(draw, max_strikes: int = 15):
    """Random efficient curves: strike 0 plus up to ``max_strikes`` convex decreasing points."""
    n = draw(st.integers(1, max_strikes))
    gaps = draw(st.lists(st.floats(1.0, 50.0), min_size=n, max_size=n))
    strikes = np.cumsum([0.0] + gaps)
    strikes[1:] += draw(st.floats(0.0, 200.0))
    # slopes: increasing, in (-1, 0)
    raw = draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n))
    slopes = -np.sort(np.asarray(raw))[::-1] * 0.99
    last = draw(st.floats(0.05, 20.0))
    prices = np.empty(n + 1)
    prices[-1] = last
    for i in range(n - 1, -1, -1):
        prices[i] = prices[i + 1] - slopes[i] * (strikes[i + 1] - strikes[i])
    return efficient_set(QuoteCurve(strikes, prices))


def random_quotes(rng, n: int, spot: float = 150.0) -> QuoteCurve:
    strikes = np.r_[0.0, np.sort(rng.choice(np.arange(1, 200), n, replace=False)).astype(float)]
    asks = np.r_[spot, np.maximum(spot - strikes[1:], 0.0) + rng.uniform(0.5, 8.0, n)]
    return QuoteCurve(strikes, asks)
