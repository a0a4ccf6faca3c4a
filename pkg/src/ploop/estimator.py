"""Point and variance estimation for paired experiments.

The adjusted estimator averages ``(w - d_hat) * t + (w + d_hat) * (1 - t)``
over pairs. Because each ``d_hat[i]`` is built without pair i, the estimate
is unbiased over the randomization, and its variance is estimated by the
plug-in bound

    var_hat = (1/N) * (Ma/4 + Mb/4 + sqrt(Ma * Mb) / 2)

where Ma averages the squared a-side residuals over the treated pairs and
Mb the b-side residuals over the control pairs.

Also provided: the unadjusted simple difference (reported with the same
plug-in machinery under leave-one-out arm means), and the two
difference-regression comparison estimators (observed differences regressed
on treated-minus-control covariates, optionally plus centered pair means,
with the intercept as the effect estimate and an HC2 sandwich for its
variance).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dataset import DEFAULT_ENCODING, PairedDataset
from .errors import DegenerateAssignmentError, RequestError
from .imputation import (
    ImputationResult,
    impute_differences_directly,
    impute_outcomes_separately,
    interpolate,
)
from .predictors import DEFAULT_BACKEND

METHODS = ("simple", "ploop-outcomes", "ploop-differences", "ploop-interp", "reg1", "reg2")
PLOOP_METHODS = ("ploop-outcomes", "ploop-differences", "ploop-interp")
DEFAULT_METHOD = "ploop-interp"
DEFAULT_CONFIDENCE = 0.95


@dataclass(frozen=True)
class EstimateResult:
    """A point estimate with its uncertainty and configuration echo."""

    method: str
    backend: str | None
    encoding: str | None
    tau_hat: float
    variance: float
    std_error: float
    ci_lower: float
    ci_upper: float
    n_pairs: int
    n_treated: int
    m_a_hat: float | None = None
    m_b_hat: float | None = None
    warnings: tuple[str, ...] = ()


def _interval(tau: float, variance: float, confidence: float):
    if not 0.0 < confidence < 1.0:
        raise RequestError("confidence level must be in (0, 1)")
    if np.isnan(variance):
        return float("nan"), float("nan"), float("nan")
    se = float(np.sqrt(variance))
    z = float(stats.norm.ppf(0.5 + confidence / 2.0))
    return se, tau - z * se, tau + z * se


def variance_estimate(ds: PairedDataset, imp: ImputationResult):
    """Plug-in variance from observed-arm imputation residuals.

    Returns ``(variance, m_a_hat, m_b_hat)``. Requires at least one pair in
    each arm; otherwise one of the residual averages is empty.
    """
    w = ds.w
    treated = ds.t == 1
    n_treated = int(treated.sum())
    if n_treated in (0, ds.n_pairs):
        raise DegenerateAssignmentError("degenerate assignment: variance undefined")
    m_a = float(np.mean((w[treated] - imp.a_hat[treated]) ** 2))
    m_b = float(np.mean((w[~treated] - imp.b_hat[~treated]) ** 2))
    variance = (0.25 * m_a + 0.25 * m_b + 0.5 * np.sqrt(m_a * m_b)) / ds.n_pairs
    return float(variance), m_a, m_b


def ploop_estimate(
    ds: PairedDataset,
    imp: ImputationResult,
    confidence: float = DEFAULT_CONFIDENCE,
    allow_degenerate: bool = False,
    method_label: str | None = None,
) -> EstimateResult:
    """Combine a dataset with an imputation into the adjusted estimate."""
    if imp.n_pairs != ds.n_pairs:
        raise RequestError("imputation was computed on a different dataset")
    w = ds.w
    t = ds.t
    tau_hat = float(np.mean(np.where(t == 1, w - imp.d_hat, w + imp.d_hat)))
    warnings: tuple[str, ...] = ()
    try:
        variance, m_a, m_b = variance_estimate(ds, imp)
    except DegenerateAssignmentError:
        if not allow_degenerate:
            raise
        variance, m_a, m_b = float("nan"), None, None
        warnings = ("degenerate assignment: variance undefined",)
    if method_label is None:
        method_label = "ploop-interp" if imp.method == "interpolated" else f"ploop-{imp.method}"
    se, lo, hi = _interval(tau_hat, variance, confidence)
    return EstimateResult(
        method=method_label,
        backend=imp.backend,
        encoding=imp.encoding,
        tau_hat=tau_hat,
        variance=variance,
        std_error=se,
        ci_lower=lo,
        ci_upper=hi,
        n_pairs=ds.n_pairs,
        n_treated=int((t == 1).sum()),
        m_a_hat=m_a,
        m_b_hat=m_b,
        warnings=warnings,
    )


def _loo_arm_means(w: np.ndarray, arm: np.ndarray) -> np.ndarray:
    """Leave-one-out mean of ``w`` over ``arm`` for each member of ``arm``.

    A pair alone in its arm falls back to the leave-one-out mean over all
    other pairs.
    """
    n = w.shape[0]
    out = np.zeros(n)
    idx = np.flatnonzero(arm)
    for i in idx:
        others = idx[idx != i]
        if others.size:
            out[i] = w[others].mean()
        else:
            rest = np.arange(n) != i
            out[i] = w[rest].mean()
    return out


def simple_difference(
    ds: PairedDataset,
    confidence: float = DEFAULT_CONFIDENCE,
    allow_degenerate: bool = False,
) -> EstimateResult:
    """Unadjusted mean of the observed differences.

    Uncertainty comes from the same plug-in formula as the adjusted
    estimator, with each arm's residuals taken about leave-one-out arm
    means, so every method reports variance through one framework.
    """
    w = ds.w
    treated = ds.t == 1
    baseline = ImputationResult.from_potential_differences(
        "simple",
        a_hat=_loo_arm_means(w, treated),
        b_hat=_loo_arm_means(w, ~treated),
        backend="mean",
    )
    tau_hat = float(w.mean())
    warnings: tuple[str, ...] = ()
    try:
        variance, m_a, m_b = variance_estimate(ds, baseline)
    except DegenerateAssignmentError:
        if not allow_degenerate:
            raise
        variance, m_a, m_b = float("nan"), None, None
        warnings = ("degenerate assignment: variance undefined",)
    se, lo, hi = _interval(tau_hat, variance, confidence)
    return EstimateResult(
        method="simple",
        backend="mean",
        encoding=None,
        tau_hat=tau_hat,
        variance=variance,
        std_error=se,
        ci_lower=lo,
        ci_upper=hi,
        n_pairs=ds.n_pairs,
        n_treated=int(treated.sum()),
        m_a_hat=m_a,
        m_b_hat=m_b,
        warnings=warnings,
    )


def _hc2_intercept_variance(design: np.ndarray, resid: np.ndarray, inverse: np.ndarray) -> float:
    hat = np.einsum("ij,jk,ik->i", design, inverse, design)
    leverage = np.clip(1.0 - hat, 0.0, None)
    # a leverage of one forces a zero residual; drop those terms outright
    weights = np.where(leverage > 1e-12, resid**2 / np.maximum(leverage, 1e-12), 0.0)
    meat = design.T @ (design * weights[:, None])
    sandwich = inverse @ meat @ inverse
    return float(sandwich[0, 0])


def fogarty_regression(
    ds: PairedDataset,
    variant: str = "reg1",
    confidence: float = DEFAULT_CONFIDENCE,
) -> EstimateResult:
    """Difference-regression comparison estimators.

    ``reg1`` regresses the observed differences on the treated-minus-control
    covariate differences; ``reg2`` adds the centered per-pair covariate
    means. The fitted intercept estimates the effect. Centered regressors
    that vanish are dropped; any remaining rank deficiency triggers a ridge
    fallback recorded in the result's warnings.
    """
    if variant not in ("reg1", "reg2"):
        raise RequestError(f"unknown regression variant {variant!r}")
    q = ds.n_covariates
    if q == 0:
        raise RequestError(f"{variant} requires covariates")
    n = ds.n_pairs
    p = q if variant == "reg1" else 2 * q
    if n < p + 2:
        raise RequestError(f"{variant} needs at least {p + 2} pairs, got {n}")
    w = ds.w
    treated_first = (ds.t == 1)[:, None]
    z1 = ds.covariates[:, 0, :]
    z2 = ds.covariates[:, 1, :]
    diff = np.where(treated_first, z1 - z2, z2 - z1)
    columns = [diff]
    if variant == "reg2":
        means = 0.5 * (z1 + z2)
        columns.append(means - means.mean(axis=0))
    X = np.hstack(columns)
    # columns that vanish (e.g. constant pair means after centering) carry
    # no information and would only make the design singular
    live = np.abs(X).max(axis=0) > 1e-12 * max(1.0, float(np.abs(X).max(initial=0.0)))
    X = X[:, live]
    design = np.hstack([np.ones((n, 1)), X])
    gram = design.T @ design
    eigs = np.linalg.eigvalsh(gram)
    singular = eigs[0] <= 0 or eigs[-1] / eigs[0] > 1e12
    warnings: tuple[str, ...] = ()
    if singular:
        ridge = 1e-8 * np.trace(gram) / gram.shape[0]
        gram = gram + ridge * np.eye(gram.shape[0])
        warnings = ("rank-deficient design: ridge fallback applied",)
    inverse = np.linalg.inv(gram)
    coef = inverse @ (design.T @ w)
    resid = w - design @ coef
    tau_hat = float(coef[0])
    variance = _hc2_intercept_variance(design, resid, inverse)
    se, lo, hi = _interval(tau_hat, variance, confidence)
    return EstimateResult(
        method=variant,
        backend=None,
        encoding=None,
        tau_hat=tau_hat,
        variance=variance,
        std_error=se,
        ci_lower=lo,
        ci_upper=hi,
        n_pairs=n,
        n_treated=int((ds.t == 1).sum()),
        warnings=warnings,
    )


def estimate_all(
    ds: PairedDataset,
    methods,
    backend: str = DEFAULT_BACKEND,
    encoding: str = DEFAULT_ENCODING,
    seed: int = 0,
    confidence: float = DEFAULT_CONFIDENCE,
    allow_degenerate: bool = False,
):
    """Estimate several methods on one dataset, sharing imputations.

    Returns ``{method: (EstimateResult, ImputationResult | None)}``. The
    leave-one-out fits for the two base strategies are computed at most
    once even when the interpolated method is also requested.
    """
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise RequestError(f"unknown method {m!r}; choose from {METHODS}")
    r_outcomes = None
    r_differences = None
    if {"ploop-outcomes", "ploop-interp"} & set(methods):
        r_outcomes = impute_outcomes_separately(ds, backend=backend, seed=seed)
    if {"ploop-differences", "ploop-interp"} & set(methods):
        r_differences = impute_differences_directly(ds, backend=backend, encoding=encoding, seed=seed)
    out = {}
    for m in methods:
        if m == "simple":
            out[m] = (simple_difference(ds, confidence, allow_degenerate), None)
        elif m in ("reg1", "reg2"):
            out[m] = (fogarty_regression(ds, m, confidence), None)
        else:
            if m == "ploop-outcomes":
                imp = r_outcomes
            elif m == "ploop-differences":
                imp = r_differences
            else:
                imp = interpolate(ds, r_outcomes, r_differences)
            res = ploop_estimate(ds, imp, confidence, allow_degenerate, method_label=m)
            out[m] = (res, imp)
    return out


def estimate(
    ds: PairedDataset,
    method: str = DEFAULT_METHOD,
    backend: str = DEFAULT_BACKEND,
    encoding: str = DEFAULT_ENCODING,
    seed: int = 0,
    confidence: float = DEFAULT_CONFIDENCE,
    allow_degenerate: bool = False,
):
    """Estimate one method; returns ``(EstimateResult, ImputationResult | None)``."""
    return estimate_all(ds, [method], backend, encoding, seed, confidence, allow_degenerate)[method]
