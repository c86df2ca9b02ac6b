"""Recursive structural VAR with exogenous intervention and global blocks.

The endogenous block is identified by a causal ordering: each equation is
regressed by least squares on the contemporaneous variables earlier in the
ordering, its own and the others' lags, the intervention series (current
and/or lagged), and contemporaneous global controls.  The intervention and
control processes are fit separately as autoregressions; they never appear
as dependent variables in the endogenous block.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, NamedTuple

import numpy as np

from .errors import ModelSpecError, SampleError
from .regression import ArFit, ar_fit, ols, RegressionFit
from .timeseries import align, CalendarSeries, PeriodLabel

__all__ = [
    "SvarSpec",
    "SvarEstimate",
    "ControlsVar1",
    "estimate_svar",
    "estimate_svar_arrays",
    "aligned_matrix",
    "ReducedForm",
    "reduced_form",
    "estimate_to_json",
]


def _lag_name(name: str, lag: int) -> str:
    return name if lag == 0 else f"{name}.L{lag}"


@dataclass(frozen=True)
class SvarSpec:
    """Specification of the recursive system.

    Args:
        ordering: endogenous variable names, causal order first to last.
        lags: base lag order applied to every endogenous variable, either a
            single int (all equations) or a per-equation mapping.  Lags 1 and
            2 are supported.
        extra_lags: per-equation additional (variable, lag) terms beyond the
            base lags, e.g. a second own lag in one equation only.
        intervention: (current, lagged) inclusion flags for the intervention
            series, either shared or per equation.
        intervention_name: name of the intervention series in the data panel.
        controls: names of contemporaneous global controls (every equation
            includes all of them).
    """

    ordering: tuple[str, ...]
    lags: int | Mapping[str, int] = 2
    extra_lags: Mapping[str, tuple[tuple[str, int], ...]] = field(default_factory=dict)
    intervention: tuple[bool, bool] | Mapping[str, tuple[bool, bool]] = (True, True)
    intervention_name: str = "s"
    controls: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "ordering", tuple(self.ordering))
        object.__setattr__(self, "controls", tuple(self.controls))
        if not self.ordering:
            raise ModelSpecError("ordering must name at least one variable")
        if len(set(self.ordering)) != len(self.ordering):
            raise ModelSpecError("ordering has duplicate variable names")
        reserved = set(self.ordering) | {self.intervention_name}
        if len(set(self.controls)) != len(self.controls):
            raise ModelSpecError("duplicate control names")
        if reserved & set(self.controls):
            raise ModelSpecError("controls overlap endogenous or intervention names")
        if self.intervention_name in self.ordering:
            raise ModelSpecError("intervention name clashes with an endogenous variable")
        for eq in self.ordering:
            if not 1 <= self.base_lags(eq) <= 2:
                raise ModelSpecError(f"base lag order for {eq!r} must be 1 or 2")
        extras = {str(k): tuple(tuple(t) for t in v) for k, v in dict(self.extra_lags).items()}
        for eq, terms in extras.items():
            if eq not in self.ordering:
                raise ModelSpecError(f"extra lags reference unknown equation {eq!r}")
            base = self.base_lags(eq)
            for name, lag_ in terms:
                if name not in self.ordering:
                    raise ModelSpecError(f"extra lag references unknown variable {name!r}")
                if not 1 <= int(lag_) <= 2:
                    raise ModelSpecError("extra lags support orders 1 and 2 only")
                if int(lag_) <= base:
                    raise ModelSpecError(
                        f"extra term {name}.L{lag_} already covered by base lags of {eq!r}"
                    )
        object.__setattr__(
            self,
            "extra_lags",
            {eq: tuple((str(n), int(l)) for n, l in terms) for eq, terms in extras.items()},
        )

    @property
    def m(self) -> int:
        return len(self.ordering)

    def base_lags(self, equation: str) -> int:
        if isinstance(self.lags, int):
            return self.lags
        try:
            return int(self.lags[equation])
        except KeyError:
            raise ModelSpecError(f"no lag order given for equation {equation!r}") from None

    def intervention_flags(self, equation: str) -> tuple[bool, bool]:
        if isinstance(self.intervention, Mapping):
            flags = self.intervention.get(equation, (False, False))
        else:
            flags = self.intervention
        return bool(flags[0]), bool(flags[1])

    @property
    def max_lag(self) -> int:
        top = 1
        for eq in self.ordering:
            top = max(top, self.base_lags(eq))
            for _, lag_ in self.extra_lags.get(eq, ()):
                top = max(top, lag_)
        return top

    def equation_regressors(self, equation: str) -> list[tuple[str, int]]:
        """Ordered (name, lag) pairs entering this equation, intercept excluded."""
        i = self.ordering.index(equation)
        terms: list[tuple[str, int]] = [(v, 0) for v in self.ordering[:i]]
        for lag_ in range(1, self.base_lags(equation) + 1):
            terms.extend((v, lag_) for v in self.ordering)
        terms.extend(self.extra_lags.get(equation, ()))
        current, lagged = self.intervention_flags(equation)
        if current:
            terms.append((self.intervention_name, 0))
        if lagged:
            terms.append((self.intervention_name, 1))
        terms.extend((c, 0) for c in self.controls)
        return terms

    def to_json(self) -> dict[str, object]:
        return {
            "ordering": list(self.ordering),
            "lags": self.lags if isinstance(self.lags, int) else dict(self.lags),
            "per_equation_extras": {
                eq: [list(t) for t in v] for eq, v in self.extra_lags.items()
            },
            "intervention": (
                list(self.intervention)
                if not isinstance(self.intervention, Mapping)
                else {k: list(v) for k, v in self.intervention.items()}
            ),
            "intervention_name": self.intervention_name,
            "controls": list(self.controls),
        }

    @staticmethod
    def from_json(payload: Mapping[str, object]) -> "SvarSpec":
        known = {
            "ordering",
            "lags",
            "per_equation_extras",
            "intervention",
            "intervention_name",
            "controls",
        }
        unknown = set(payload) - known
        if unknown:
            raise ModelSpecError(f"unknown spec fields: {sorted(unknown)}")
        if "ordering" not in payload:
            raise ModelSpecError("spec file must name the variable ordering")
        lags = payload.get("lags", 2)
        if isinstance(lags, dict):
            lags = {str(k): int(v) for k, v in lags.items()}
        intervention = payload.get("intervention", (True, True))
        if isinstance(intervention, dict):
            intervention = {str(k): (bool(v[0]), bool(v[1])) for k, v in intervention.items()}
        elif isinstance(intervention, (list, tuple)):
            intervention = (bool(intervention[0]), bool(intervention[1]))
        extra = payload.get("per_equation_extras", {})
        extra = {str(k): tuple((str(n), int(l)) for n, l in v) for k, v in dict(extra).items()}
        return SvarSpec(
            ordering=tuple(str(v) for v in payload["ordering"]),
            lags=lags,
            extra_lags=extra,
            intervention=intervention,
            intervention_name=str(payload.get("intervention_name", "s")),
            controls=tuple(str(c) for c in payload.get("controls", ())),
        )


@dataclass(frozen=True)
class ControlsVar1:
    """First-order VAR for the control block: z_t = a + A z_{t-1} + v_t."""

    names: tuple[str, ...]
    intercept: np.ndarray
    transition: np.ndarray
    omega: np.ndarray  # innovation covariance
    fits: tuple[RegressionFit, ...] | None = None


@dataclass(frozen=True)
class SvarEstimate:
    """Structural matrices, residual variances, and exogenous-process fits.

    ``A0`` is unit lower triangular with the negated contemporaneous
    coefficients below the diagonal; ``sigma`` holds the diagonal of the
    structural innovation covariance.
    """

    spec: SvarSpec
    variables: tuple[str, ...]
    controls: tuple[str, ...]
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    gamma0s: np.ndarray
    gamma1s: np.ndarray
    Dw: np.ndarray
    a_q: np.ndarray
    sigma: np.ndarray
    s_process: ArFit
    controls_process: tuple[ArFit, ...] | ControlsVar1 | None = None
    fits: tuple[RegressionFit, ...] | None = None
    nobs: int = 0
    sample_start: PeriodLabel | None = None

    def __post_init__(self) -> None:
        m = len(self.variables)
        for name in ("A0", "A1", "A2", "gamma0s", "gamma1s", "a_q", "sigma", "Dw"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.A0.shape != (m, m):
            raise ModelSpecError("A0 must be m x m")
        if not np.allclose(np.diag(self.A0), 1.0):
            raise ModelSpecError("A0 diagonal must be exactly 1")
        if np.any(np.triu(self.A0, 1) != 0.0):
            raise ModelSpecError("A0 must be lower triangular")

    @property
    def m(self) -> int:
        return len(self.variables)

    @property
    def k(self) -> int:
        return len(self.controls)

    def Sigma(self) -> np.ndarray:
        return np.diag(self.sigma)

    def controls_transition(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(transition, intercepts, innovation sds) for the control block."""
        k = self.k
        if k == 0:
            return np.zeros((0, 0)), np.zeros(0), np.zeros(0)
        proc = self.controls_process
        if isinstance(proc, ControlsVar1):
            return (
                proc.transition.copy(),
                proc.intercept.copy(),
                np.sqrt(np.diag(proc.omega)),
            )
        if proc is None or len(proc) != k:
            raise ModelSpecError("estimate lacks a process for every control")
        for fit in proc:
            if fit.order != 1:
                raise ModelSpecError("control processes must be first order")
        rho = np.array([fit.coefficients[0] for fit in proc])
        return (
            np.diag(rho),
            np.array([fit.intercept for fit in proc]),
            np.array([fit.omega for fit in proc]),
        )


def aligned_matrix(
    spec: SvarSpec, data: Mapping[str, CalendarSeries]
) -> tuple[np.ndarray, tuple[str, ...], PeriodLabel]:
    """Stack the spec's series into an (N, m+1+k) matrix over their overlap.

    Column order: endogenous variables, intervention, controls.
    """
    names = spec.ordering + (spec.intervention_name,) + spec.controls
    missing = [name for name in names if name not in data]
    if missing:
        raise ModelSpecError(f"data panel lacks series for: {', '.join(missing)}")
    arrays, start = align(*(data[name] for name in names))
    return np.column_stack(arrays), names, start


def estimate_svar(
    spec: SvarSpec,
    data: Mapping[str, CalendarSeries],
    controls_var1: bool = False,
) -> SvarEstimate:
    """Estimate the recursive system equation by equation over aligned data.

    Exogenous processes (the intervention AR(1) and per-control AR(1)s, or a
    control VAR(1) when ``controls_var1`` is set) are fit separately; they
    feed the impulse-response and variance-decomposition machinery only and
    do not alter the structural equations.
    """
    Z, _, start = aligned_matrix(spec, data)
    est = estimate_svar_arrays(spec, Z, controls_var1=controls_var1)
    frequency = data[spec.ordering[0]].frequency
    return replace(est, sample_start=start.shift(spec.max_lag, frequency))


def _design_pool(spec: SvarSpec, Z: np.ndarray) -> tuple[dict[tuple[str, int], np.ndarray], int]:
    """Columns for every (name, lag) the spec can reference, over t = M..N-1."""
    names = spec.ordering + (spec.intervention_name,) + spec.controls
    col = {name: i for i, name in enumerate(names)}
    M = spec.max_lag
    N = Z.shape[0]
    if N <= M:
        raise SampleError("aligned sample shorter than the lag order")
    pool: dict[tuple[str, int], np.ndarray] = {}
    wanted: set[tuple[str, int]] = set()
    for eq in spec.ordering:
        wanted.update(spec.equation_regressors(eq))
        wanted.add((eq, 0))
    for name, lag_ in wanted:
        pool[(name, lag_)] = Z[M - lag_ : N - lag_, col[name]]
    return pool, M


def estimate_svar_arrays(
    spec: SvarSpec, Z: np.ndarray, controls_var1: bool = False
) -> SvarEstimate:
    """Array fast path used by the bootstrap; see :func:`estimate_svar`."""
    m = spec.m
    k = len(spec.controls)
    names = spec.ordering + (spec.intervention_name,) + spec.controls
    if Z.ndim != 2 or Z.shape[1] != len(names):
        raise ModelSpecError(f"data matrix must have {len(names)} columns")
    pool, M = _design_pool(spec, Z)
    nobs = Z.shape[0] - M

    A0 = np.eye(m)
    A1 = np.zeros((m, m))
    A2 = np.zeros((m, m))
    gamma0s = np.zeros(m)
    gamma1s = np.zeros(m)
    Dw = np.zeros((m, k))
    a_q = np.zeros(m)
    sigma = np.zeros(m)
    fits = []
    for i, eq in enumerate(spec.ordering):
        terms = spec.equation_regressors(eq)
        if nobs <= len(terms) + 1:
            raise SampleError(
                f"equation {eq!r} has {len(terms) + 1} regressors but only {nobs} observations"
            )
        X = np.column_stack([pool[t] for t in terms]) if terms else None
        fit = ols(pool[(eq, 0)], X, names=tuple(_lag_name(*t) for t in terms))
        fits.append(fit)
        sigma[i] = fit.sigma_hat**2
        a_q[i] = fit.coefficient("const")
        for (name, lag_), coef in zip(terms, fit.coefficients[1:]):
            if name == spec.intervention_name:
                if lag_ == 0:
                    gamma0s[i] = coef
                else:
                    gamma1s[i] = coef
            elif name in spec.controls:
                Dw[i, spec.controls.index(name)] = coef
            elif lag_ == 0:
                A0[i, spec.ordering.index(name)] = -coef
            elif lag_ == 1:
                A1[i, spec.ordering.index(name)] = coef
            else:
                A2[i, spec.ordering.index(name)] = coef

    s_col = Z[:, m]
    s_process = ar_fit(s_col, p=1)

    controls_process: tuple[ArFit, ...] | ControlsVar1 | None
    if k == 0:
        controls_process = ()
    elif controls_var1:
        zc = Z[:, m + 1 :]
        design = zc[:-1, :]
        cfits = tuple(
            ols(zc[1:, j], design, names=tuple(f"{c}.L1" for c in spec.controls))
            for j in range(k)
        )
        resid = np.column_stack([f.residuals for f in cfits])
        dof = resid.shape[0] - (k + 1)
        controls_process = ControlsVar1(
            names=spec.controls,
            intercept=np.array([f.coefficient("const") for f in cfits]),
            transition=np.vstack([f.coefficients[1:] for f in cfits]),
            omega=resid.T @ resid / dof,
            fits=cfits,
        )
    else:
        controls_process = tuple(ar_fit(Z[:, m + 1 + j], p=1) for j in range(k))

    return SvarEstimate(
        spec=spec,
        variables=spec.ordering,
        controls=spec.controls,
        A0=A0,
        A1=A1,
        A2=A2,
        gamma0s=gamma0s,
        gamma1s=gamma1s,
        Dw=Dw,
        a_q=a_q,
        sigma=sigma,
        s_process=s_process,
        controls_process=controls_process,
        fits=tuple(fits),
        nobs=nobs,
    )


class ReducedForm(NamedTuple):
    Phi1: np.ndarray
    Phi2: np.ndarray
    eigenvalues: np.ndarray
    stationary: bool


def reduced_form(est: SvarEstimate) -> ReducedForm:
    """Reduced-form lag matrices and companion eigenvalues of the domestic block."""
    Phi1 = np.linalg.solve(est.A0, est.A1)
    Phi2 = np.linalg.solve(est.A0, est.A2)
    m = est.m
    companion = np.zeros((2 * m, 2 * m))
    companion[:m, :m] = Phi1
    companion[:m, m:] = Phi2
    companion[m:, :m] = np.eye(m)
    eigenvalues = np.linalg.eigvals(companion)
    return ReducedForm(
        Phi1=Phi1,
        Phi2=Phi2,
        eigenvalues=eigenvalues,
        stationary=bool(np.max(np.abs(eigenvalues)) < 1.0),
    )


def estimate_to_json(est: SvarEstimate) -> dict[str, object]:
    """Serializable snapshot of every structural matrix and process fit."""
    rf = reduced_form(est)
    payload: dict[str, object] = {
        "variables": list(est.variables),
        "controls": list(est.controls),
        "A0": est.A0.tolist(),
        "A1": est.A1.tolist(),
        "A2": est.A2.tolist(),
        "gamma0s": est.gamma0s.tolist(),
        "gamma1s": est.gamma1s.tolist(),
        "Dw": est.Dw.tolist(),
        "intercepts": est.a_q.tolist(),
        "sigma": est.sigma.tolist(),
        "nobs": est.nobs,
        "stationary": rf.stationary,
        "companion_eigenvalue_moduli": sorted(np.abs(rf.eigenvalues).tolist(), reverse=True),
        "intervention_process": {
            "order": est.s_process.order,
            "intercept": est.s_process.intercept,
            "coefficients": est.s_process.coefficients.tolist(),
            "omega": est.s_process.omega,
        },
    }
    proc = est.controls_process
    if isinstance(proc, ControlsVar1):
        payload["controls_process"] = {
            "kind": "var1",
            "intercept": proc.intercept.tolist(),
            "transition": proc.transition.tolist(),
            "omega": proc.omega.tolist(),
        }
    elif proc:
        payload["controls_process"] = {
            "kind": "ar1",
            "per_control": {
                name: {
                    "intercept": f.intercept,
                    "rho": float(f.coefficients[0]),
                    "omega": f.omega,
                }
                for name, f in zip(est.controls, proc)
            },
        }
    else:
        payload["controls_process"] = {"kind": "none"}
    return payload
