"""AR(1)-GARCH(1,1) risk forecasting with FP, FHS and EVT tail estimators."""

from ebacktest.forecast.distributions import (
    Empirical,
    Normal,
    SkewedT,
    SplicedGPD,
    StudentT,
    risk_values,
)
from ebacktest.forecast.garch import GarchSpec, InnovationKind, constant_vol_spec, fit_garch
from ebacktest.forecast.rolling import (
    ForecastMethod,
    ForecastSeries,
    oracle_forecast,
    rolling_forecast,
    rolling_roster,
)
from ebacktest.forecast.tail import TailEstimator, evt_distribution, fit_gpd, innovation_risk

__all__ = [
    "Empirical", "Normal", "SkewedT", "SplicedGPD", "StudentT", "risk_values",
    "GarchSpec", "InnovationKind", "constant_vol_spec", "fit_garch",
    "ForecastMethod", "ForecastSeries", "oracle_forecast", "rolling_forecast", "rolling_roster",
    "TailEstimator", "evt_distribution", "fit_gpd", "innovation_risk",
]
