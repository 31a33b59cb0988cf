"""
E-value based standard and comparative backtests for risk measures.

Standard backtests test whether forecasts of a risk measure (VaR, (ES, VaR),
mean, variance, expectile, ...) are adequate by betting on an identification
function; comparative backtests pit an internal model against a standard one
by betting on their score differences.  Evidence accumulates in e-processes
whose anytime validity follows from Ville's inequality.
"""

__version__ = "0.1.0"

from ebacktest._corelib import IMPLEMENTATION
from ebacktest.backtests import (
    BacktestInput,
    ComparativeResult,
    Dominance,
    HeatmapResult,
    StandardResult,
    Zone,
    ZoneVerdict,
    classify_zone,
    heatmap,
    run_comparative,
    run_standard,
)
from ebacktest.betting import BettingConfig
from ebacktest.eprocess import EProcessRun, RestartPolicy, hit_statistics
from ebacktest.exceptions import (
    AlignmentError,
    ConfigError,
    DomainError,
    EBacktestError,
    FitError,
    InvalidStep,
    SchemaError,
)
from ebacktest.kernels import (
    Homogeneity,
    IdentificationKernel,
    Kind,
    RiskFunctional,
    ScoringKernel,
    Variant,
)

__all__ = [
    "__version__", "IMPLEMENTATION",
    "BacktestInput", "ComparativeResult", "Dominance", "HeatmapResult", "StandardResult",
    "Zone", "ZoneVerdict", "classify_zone", "heatmap", "run_comparative", "run_standard",
    "BettingConfig", "EProcessRun", "RestartPolicy", "hit_statistics",
    "AlignmentError", "ConfigError", "DomainError", "EBacktestError", "FitError",
    "InvalidStep", "SchemaError",
    "Homogeneity", "IdentificationKernel", "Kind", "RiskFunctional", "ScoringKernel", "Variant",
]
