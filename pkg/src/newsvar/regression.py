"""Least-squares engine with the diagnostics the rest of the toolkit leans on.

Classical (homoskedastic) standard errors are the default to match hand
calculations; heteroskedasticity-robust errors sit behind a flag.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg as sla
from scipy import stats

from .errors import (
    AlignmentError,
    CollinearityError,
    DegenerateDataError,
    NonstationaryError,
    SampleError,
)
from .timeseries import align, CalendarSeries, log_diff

__all__ = [
    "RegressionFit",
    "ols",
    "BreuschGodfreyResult",
    "breusch_godfrey",
    "ArFit",
    "ar_fit",
    "LongRunEffect",
    "long_run_effect",
    "relative_series",
    "significance_stars",
    "summary_rows",
    "write_fit_csv",
    "fit_to_json",
]


@dataclass(frozen=True)
class RegressionFit:
    """OLS output: coefficients, classical inference, and the design it used."""

    names: tuple[str, ...]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    covariance: np.ndarray
    residuals: np.ndarray
    sigma_hat: float
    r2: float
    adjusted_r2: float
    nobs: int
    nregressors: int
    design: np.ndarray
    has_intercept: bool

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no regressor named {name!r}") from None

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.index_of(name)])

    def se(self, name: str) -> float:
        return float(self.standard_errors[self.index_of(name)])

    def pvalues(self) -> np.ndarray:
        dof = self.nobs - self.nregressors
        t = self.coefficients / self.standard_errors
        return 2.0 * stats.t.sf(np.abs(t), dof)


def _dependent_columns(design: np.ndarray, names: Sequence[str], rank: int) -> list[str]:
    # QR with column pivoting: columns pivoted past the numerical rank are the
    # ones expressible from the others.
    _, _, pivots = sla.qr(design, mode="economic", pivoting=True)
    return [names[i] for i in sorted(pivots[rank:])]


def ols(
    y: np.ndarray | Sequence[float],
    X: np.ndarray | Sequence[Sequence[float]] | None,
    names: Sequence[str] | None = None,
    intercept: bool = True,
    robust: bool = False,
) -> RegressionFit:
    """Ordinary least squares with classical standard errors.

    Args:
        y: dependent variable, length n.
        X: regressor matrix (n, k) without the intercept column; may be None
            for an intercept-only fit.
        names: regressor names matching X's columns; generated when omitted.
        intercept: prepend a constant column named ``const``.
        robust: use HC1 heteroskedasticity-robust standard errors instead of
            the classical ``sigma^2 (X'X)^{-1}``.

    Raises:
        CollinearityError: rank-deficient design, message names the dependent
            columns.
        SampleError: fewer observations than regressors.
    """
    y = np.asarray(y, dtype=float).ravel()
    if X is None:
        X = np.empty((y.size, 0))
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.size:
        raise AlignmentError(f"y has {y.size} rows but X has {X.shape[0]}")
    if names is None:
        names = tuple(f"x{i}" for i in range(1, X.shape[1] + 1))
    else:
        names = tuple(names)
    if len(names) != X.shape[1]:
        raise ValueError("names must match the number of regressor columns")
    if intercept:
        design = np.column_stack([np.ones(y.size), X])
        names = ("const",) + names
    else:
        design = X
    n, k = design.shape
    if k == 0:
        raise ValueError("regression needs at least one regressor or an intercept")
    if n <= k:
        raise SampleError(f"need more than {k} observations, got {n}")
    rank = np.linalg.matrix_rank(design)
    if rank < k:
        dependent = _dependent_columns(design, names, rank)
        raise CollinearityError(
            "design matrix is rank deficient; dependent columns: "
            + ", ".join(dependent)
        )
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ coef
    ssr = float(residuals @ residuals)
    sigma2 = ssr / (n - k)
    xtx_inv = np.linalg.inv(design.T @ design)
    if robust:
        meat = design.T @ (design * residuals[:, None] ** 2)
        covariance = xtx_inv @ meat @ xtx_inv * (n / (n - k))
    else:
        covariance = sigma2 * xtx_inv
    if intercept:
        tss = float(np.sum((y - y.mean()) ** 2))
    else:
        tss = float(y @ y)
    r2 = 1.0 - ssr / tss if tss > 0 else 0.0
    adjusted = 1.0 - (1.0 - r2) * (n - 1) / (n - k)
    return RegressionFit(
        names=names,
        coefficients=coef,
        standard_errors=np.sqrt(np.diag(covariance)),
        covariance=covariance,
        residuals=residuals,
        sigma_hat=math.sqrt(sigma2),
        r2=r2,
        adjusted_r2=adjusted,
        nobs=n,
        nregressors=k,
        design=design,
        has_intercept=intercept,
    )


class BreuschGodfreyResult(NamedTuple):
    lm_stat: float
    p_value: float
    lags: int
    nobs: int


def breusch_godfrey(fit: RegressionFit, lags: int = 4) -> BreuschGodfreyResult:
    """LM test of serially uncorrelated errors.

    Residuals are regressed on the original design plus ``lags`` of
    themselves (initial lags zero-filled); the statistic is n times the
    auxiliary R-squared, referred to chi-square with ``lags`` degrees of
    freedom.
    """
    if lags < 1:
        raise ValueError("lag order must be positive")
    e = fit.residuals
    n = fit.nobs
    if n < lags + fit.nregressors + 1:
        raise SampleError(
            f"need at least {lags + fit.nregressors + 1} observations, got {n}"
        )
    fitted = fit.design @ fit.coefficients
    scale = max(float(np.sqrt(fitted @ fitted / n)), 1.0)
    if float(np.sqrt(e @ e / n)) <= 1e-12 * scale:
        # exact fit: no residual variation to test
        return BreuschGodfreyResult(0.0, 1.0, lags, n)
    lagged = np.zeros((n, lags))
    for j in range(1, lags + 1):
        lagged[j:, j - 1] = e[:-j]
    aux = np.column_stack([fit.design, lagged])
    coef, _, _, _ = np.linalg.lstsq(aux, e, rcond=None)
    aux_resid = e - aux @ coef
    if fit.has_intercept:
        tss = float(np.sum((e - e.mean()) ** 2))
    else:
        tss = float(e @ e)
    if tss == 0.0:
        return BreuschGodfreyResult(0.0, 1.0, lags, n)
    r2 = 1.0 - float(aux_resid @ aux_resid) / tss
    lm = n * max(r2, 0.0)
    return BreuschGodfreyResult(lm, float(stats.chi2.sf(lm, lags)), lags, n)


@dataclass(frozen=True)
class ArFit:
    """Autoregression of order p fit by least squares on an intercept and lags."""

    order: int
    intercept: float
    coefficients: np.ndarray
    omega: float
    fit: RegressionFit | None = None

    def companion_stable(self) -> bool:
        companion = np.zeros((self.order, self.order))
        companion[0, :] = self.coefficients
        if self.order > 1:
            companion[1:, :-1] = np.eye(self.order - 1)
        return bool(np.max(np.abs(np.linalg.eigvals(companion))) < 1.0)


def ar_fit(series: CalendarSeries | np.ndarray, p: int = 1) -> ArFit:
    """Fit an AR(p) by OLS; ``omega`` is the residual standard error."""
    if p < 1:
        raise ValueError("autoregressive order must be positive")
    x = np.asarray(series.values if isinstance(series, CalendarSeries) else series, dtype=float)
    if x.ndim != 1:
        raise ValueError("ar_fit expects a single series")
    if x.size <= p + 1:
        raise SampleError(f"need more than {p + 1} observations, got {x.size}")
    if np.ptp(x) == 0.0:
        raise DegenerateDataError("cannot fit an autoregression to a constant series")
    rows = x.size - p
    design = np.column_stack([x[p - j - 1 : p - j - 1 + rows] for j in range(p)])
    names = tuple(f"lag{j + 1}" for j in range(p))
    fit = ols(x[p:], design, names=names)
    return ArFit(
        order=p,
        intercept=fit.coefficient("const"),
        coefficients=fit.coefficients[1:].copy(),
        omega=fit.sigma_hat,
        fit=fit,
    )


class LongRunEffect(NamedTuple):
    theta: float
    se: float


def long_run_effect(
    fit: RegressionFit,
    effect: str | Sequence[str],
    persistence: str | None,
) -> LongRunEffect:
    """Cumulative effect of a permanent unit change in the named regressor(s).

    theta = (sum of effect coefficients) / (1 - persistence coefficient), with
    a delta-method standard error from the fit's coefficient covariance.  Pass
    ``persistence=None`` for a static regression (theta is then just the
    summed coefficient and its own standard error).
    """
    effect_names = [effect] if isinstance(effect, str) else list(effect)
    idx = [fit.index_of(name) for name in effect_names]
    beta_sum = float(fit.coefficients[idx].sum())
    if persistence is None:
        if len(idx) == 1:
            return LongRunEffect(beta_sum, float(fit.standard_errors[idx[0]]))
        var = float(np.ones(len(idx)) @ fit.covariance[np.ix_(idx, idx)] @ np.ones(len(idx)))
        return LongRunEffect(beta_sum, math.sqrt(var))
    lam_idx = fit.index_of(persistence)
    lam = float(fit.coefficients[lam_idx])
    if abs(lam) >= 1.0:
        raise NonstationaryError(
            f"persistence coefficient {persistence!r} is {lam:.4f}; "
            "long-run effect undefined"
        )
    theta = beta_sum / (1.0 - lam)
    grad = np.zeros(fit.nregressors)
    grad[idx] = 1.0 / (1.0 - lam)
    grad[lam_idx] = beta_sum / (1.0 - lam) ** 2
    var = float(grad @ fit.covariance @ grad)
    return LongRunEffect(theta, math.sqrt(max(var, 0.0)))


def relative_series(domestic: CalendarSeries, region: CalendarSeries) -> CalendarSeries:
    """Growth of a domestic level series relative to a regional comparator.

    Both inputs are levels; the result is the pointwise difference of their
    log differences over the overlapping span.
    """
    (dom, reg), start = align(domestic.trimmed(), region.trimmed())
    overlap = domestic.replace_values(dom, start=start)
    regional = region.replace_values(reg, start=start)
    d = log_diff(overlap)
    r = log_diff(regional)
    return d.replace_values(d.values - r.values)


# ---------------------------------------------------------------------------
# Summary export
# ---------------------------------------------------------------------------


def significance_stars(p_value: float) -> str:
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.1:
        return "*"
    return ""


def summary_rows(fit: RegressionFit) -> list[dict[str, object]]:
    pvals = fit.pvalues()
    return [
        {
            "name": name,
            "coefficient": float(fit.coefficients[i]),
            "se": float(fit.standard_errors[i]),
            "p_value": float(pvals[i]),
            "stars": significance_stars(float(pvals[i])),
        }
        for i, name in enumerate(fit.names)
    ]


def write_fit_csv(fit: RegressionFit, path: str | Path, extra_rows: Sequence[tuple[str, str]] = ()) -> None:
    """Coefficient table as CSV with significance stars and summary lines."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["name", "coefficient", "se", "stars"])
        for row in summary_rows(fit):
            writer.writerow(
                [row["name"], f"{row['coefficient']:.6f}", f"{row['se']:.6f}", row["stars"]]
            )
        writer.writerow(["adjusted_r2", f"{fit.adjusted_r2:.6f}", "", ""])
        writer.writerow(["nobs", str(fit.nobs), "", ""])
        for name, value in extra_rows:
            writer.writerow([name, value, "", ""])


def fit_to_json(fit: RegressionFit) -> dict[str, object]:
    return {
        "coefficients": {n: float(c) for n, c in zip(fit.names, fit.coefficients)},
        "standard_errors": {n: float(s) for n, s in zip(fit.names, fit.standard_errors)},
        "sigma_hat": fit.sigma_hat,
        "r2": fit.r2,
        "adjusted_r2": fit.adjusted_r2,
        "nobs": fit.nobs,
    }
