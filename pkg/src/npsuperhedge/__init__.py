"""Non-parametric CALL price estimation by superhedging smoothed option payoffs."""

from .efficient_set import EfficientCurve, efficient_set, nu0, q0_at
from .estimator import SuperhedgeCallEstimator
from .exceptions import (
    ConfigurationError,
    DegenerateMeasureError,
    EmptyCurveError,
    InconsistentCurveError,
    InfeasibleError,
    InsufficientStrikesError,
    MissingNumeraireError,
    NoSolutionError,
    NotInGammaError,
    QuoteParseError,
    SolverError,
    SuperhedgeError,
)
from .implied_measure import (
    ImpliedMeasure,
    RiskReport,
    SmoothCallCurve,
    implied_survival,
    reconstruct_price,
    smooth_call_curve,
    step_measure,
    var_cvar,
)
from .quotes import MeshStats, OptionQuote, QuoteCurve, dump_quotes, load_quotes, mesh, moneyness_class
from .simulation import (
    MCReport,
    MixtureModel,
    NoiseModel,
    SmileModel,
    bs_call,
    bs_survival,
    implied_vol,
    mixture_experiment,
    run_mc,
    simulate_curve,
)
from .smoothers import DensityPayoff, SplinePayoff, density_payoff, fit_reference_spline, spline_payoff
from .superhedge import ConvexPayoff, SuperhedgeResult, lp_oracle, option_payoff, superhedge_price

__version__ = "0.1.0"
