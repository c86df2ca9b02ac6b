"""News-coverage intervention-intensity indices and structural VAR dynamics.

Submodules:
    timeseries: calendar-aware series, conversions, aggregation, CSV I/O
    intensity:  article-count indices, netting, grid-searched weights
    regression: OLS engine, serial-correlation test, long-run effects
    svar:       recursive structural VAR estimation
    dynamics:   impulse responses and variance decompositions
    bootstrap:  residual-resampling confidence bands
    factors:    weighted cross-section factor proxies
    cli:        config-driven command line front end
"""

from . import bootstrap, dynamics, errors, factors, intensity, regression, svar, timeseries

__all__ = [
    "bootstrap",
    "dynamics",
    "errors",
    "factors",
    "intensity",
    "regression",
    "svar",
    "timeseries",
]

__version__ = "0.1.0"
