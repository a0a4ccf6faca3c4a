"""Leave-one-pair-out imputation of potential differences.

Every strategy produces, for each pair i, estimates ``a_hat[i]`` and
``b_hat[i]`` of the two potential differences and sets
``d_hat = (a_hat - b_hat) / 2``. All quantities for pair i are computed
from the other N - 1 pairs only, which keeps ``d_hat[i]`` independent of
pair i's treatment assignment and makes the downstream point estimator
unbiased.

Three strategies:

* :func:`impute_outcomes_separately` ignores the pairing: one model is fit
  on the individual units of the retained pairs, with the treatment
  indicator as a feature, and the four potential outcomes of the held-out
  pair are read off by toggling that indicator.
* :func:`impute_differences_directly` keeps the pairing: the observed
  differences of the retained pairs are regressed on pair-level features
  ordered treated-first (for ``a``) and control-first (for ``b``).
* :func:`interpolate` blends the two, choosing per-pair weights by
  leave-one-out least squares, clipped to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DEFAULT_ENCODING, PairedDataset, pair_feature_matrices
from .errors import PloopError, RequestError
from .predictors import DEFAULT_BACKEND, TrainingSet, fit

# denominators below this fraction of the imputation scale count as ties
DEGENERATE_WEIGHT_TOL = 1e-12
TIED_WEIGHT = 0.5

METHOD_OUTCOMES = "outcomes"
METHOD_DIFFERENCES = "differences"
METHOD_INTERPOLATED = "interpolated"


@dataclass(frozen=True)
class ImputationResult:
    """Per-pair imputed potential differences.

    ``alpha_a``/``alpha_b`` hold the interpolation weights for the a-side
    and b-side blends and are present only for the interpolated method.
    """

    method: str
    backend: str | None
    encoding: str | None
    a_hat: np.ndarray
    b_hat: np.ndarray
    d_hat: np.ndarray
    alpha_a: np.ndarray | None = None
    alpha_b: np.ndarray | None = None

    @property
    def n_pairs(self) -> int:
        return self.a_hat.shape[0]

    @classmethod
    def from_potential_differences(
        cls, method: str, a_hat: np.ndarray, b_hat: np.ndarray,
        backend: str | None = None, encoding: str | None = None,
        alpha_a: np.ndarray | None = None, alpha_b: np.ndarray | None = None,
    ) -> "ImputationResult":
        a_hat = np.asarray(a_hat, dtype=np.float64)
        b_hat = np.asarray(b_hat, dtype=np.float64)
        return cls(
            method=method,
            backend=backend,
            encoding=encoding,
            a_hat=a_hat,
            b_hat=b_hat,
            d_hat=0.5 * (a_hat - b_hat),
            alpha_a=alpha_a,
            alpha_b=alpha_b,
        )

    @classmethod
    def zeros(cls, n_pairs: int, method: str = "zero") -> "ImputationResult":
        """The do-nothing imputation that reduces the estimator to the
        simple difference."""
        z = np.zeros(n_pairs)
        return cls.from_potential_differences(method, z, z)


def _pair_model_seed(seed: int, pair: int, model: int) -> int:
    # fixed function of (seed, pair, model); keeps parallel and serial
    # leave-one-out loops bit-identical
    return int(np.random.SeedSequence([seed, pair, model]).generate_state(1)[0])


def _require_pairs(ds: PairedDataset) -> None:
    if ds.n_pairs < 2:
        raise RequestError("imputation needs at least 2 pairs")


def impute_outcomes_separately(
    ds: PairedDataset, backend: str = DEFAULT_BACKEND, seed: int = 0
) -> ImputationResult:
    """Impute each pair's four potential outcomes from a unit-level model.

    For pair i the model is fit on the 2(N-1) units of the other pairs with
    features (treatment, covariates) and response outcome. Toggling the
    treatment feature yields imputed treated/control outcomes for both
    units, combined as ``a_hat = t1_hat - c2_hat`` and
    ``b_hat = t2_hat - c1_hat``.
    """
    _require_pairs(ds)
    n, q = ds.n_pairs, ds.n_covariates
    feats = np.empty((2 * n, 1 + q))
    feats[:, 0] = ds.treatments.reshape(-1)
    feats[:, 1:] = ds.covariates.reshape(2 * n, q)
    resp = ds.outcomes.reshape(-1).astype(np.float64)

    a_hat = np.empty(n)
    b_hat = np.empty(n)
    rows = np.arange(2 * n)
    for i in range(n):
        keep = rows[(rows != 2 * i) & (rows != 2 * i + 1)]
        model_seed = _pair_model_seed(seed, i, 0) if backend == "forest" else 0
        try:
            model = fit(backend, TrainingSet(feats[keep], resp[keep]), seed=model_seed)
        except PloopError as exc:
            raise type(exc)(f"pair {ds.pair_ids[i]!r}: {exc}") from exc
        queries = np.empty((4, 1 + q))
        queries[:, 0] = (1.0, 0.0, 1.0, 0.0)
        queries[0, 1:] = queries[1, 1:] = ds.covariates[i, 0]
        queries[2, 1:] = queries[3, 1:] = ds.covariates[i, 1]
        t1, c1, t2, c2 = model.predict(queries)
        a_hat[i] = t1 - c2
        b_hat[i] = t2 - c1
    return ImputationResult.from_potential_differences(
        METHOD_OUTCOMES, a_hat, b_hat, backend=backend
    )


def impute_differences_directly(
    ds: PairedDataset,
    backend: str = DEFAULT_BACKEND,
    encoding: str = DEFAULT_ENCODING,
    seed: int = 0,
) -> ImputationResult:
    """Impute potential differences from pair-level models.

    For pair i, a model of the observed differences on treated-first
    features (fit on the other pairs) is evaluated at pair i's
    original-order features to give ``a_hat``; the control-first model
    gives ``b_hat``.
    """
    _require_pairs(ds)
    n = ds.n_pairs
    z, z_a, z_b = pair_feature_matrices(ds, encoding)
    w = ds.w

    a_hat = np.empty(n)
    b_hat = np.empty(n)
    pairs = np.arange(n)
    for i in range(n):
        keep = pairs[pairs != i]
        seed_a = _pair_model_seed(seed, i, 1) if backend == "forest" else 0
        seed_b = _pair_model_seed(seed, i, 2) if backend == "forest" else 0
        try:
            model_a = fit(backend, TrainingSet(z_a[keep], w[keep]), seed=seed_a)
            model_b = fit(backend, TrainingSet(z_b[keep], w[keep]), seed=seed_b)
        except PloopError as exc:
            raise type(exc)(f"pair {ds.pair_ids[i]!r}: {exc}") from exc
        a_hat[i] = model_a.predict(z[i])
        b_hat[i] = model_b.predict(z[i])
    return ImputationResult.from_potential_differences(
        METHOD_DIFFERENCES, a_hat, b_hat, backend=backend, encoding=encoding
    )


def _loo_weight(observed, first, second, include) -> float:
    """Least-squares weight on ``first`` for one held-out pair.

    Minimizes sum((observed - (x * first + (1 - x) * second))**2) over the
    included pairs, clipped to [0, 1]. Ties and empty sums fall back to an
    even split.
    """
    if not include.any():
        return TIED_WEIGHT
    gap = first[include] - second[include]
    resid = observed[include] - second[include]
    denom = float(gap @ gap)
    scale = float(np.mean(0.5 * (first[include] ** 2 + second[include] ** 2)))
    if denom <= DEGENERATE_WEIGHT_TOL * scale:
        return TIED_WEIGHT
    return float(min(1.0, max(0.0, (resid @ gap) / denom)))


def interpolate(
    ds: PairedDataset, r1: ImputationResult, r2: ImputationResult
) -> ImputationResult:
    """Blend two imputations with per-pair leave-one-out weights.

    For pair i the a-side weight is chosen to minimize the squared error of
    the blend against the observed differences of the *other* treated
    pairs; the b-side weight does the same over the other control pairs.
    Raw weights are clipped to [0, 1].
    """
    n = ds.n_pairs
    if r1.n_pairs != n or r2.n_pairs != n:
        raise RequestError("imputations were computed on a different dataset")
    _require_pairs(ds)
    w = ds.w
    treated = ds.t == 1
    control = ~treated

    alpha_a = np.empty(n)
    alpha_b = np.empty(n)
    a_hat = np.empty(n)
    b_hat = np.empty(n)
    for i in range(n):
        include_a = treated.copy()
        include_a[i] = False
        include_b = control.copy()
        include_b[i] = False
        alpha_a[i] = _loo_weight(w, r1.a_hat, r2.a_hat, include_a)
        alpha_b[i] = _loo_weight(w, r1.b_hat, r2.b_hat, include_b)
        a_hat[i] = alpha_a[i] * r1.a_hat[i] + (1.0 - alpha_a[i]) * r2.a_hat[i]
        b_hat[i] = alpha_b[i] * r1.b_hat[i] + (1.0 - alpha_b[i]) * r2.b_hat[i]

    backend = r1.backend if r1.backend == r2.backend else f"{r1.backend}+{r2.backend}"
    encoding = r2.encoding if r2.encoding is not None else r1.encoding
    return ImputationResult.from_potential_differences(
        METHOD_INTERPOLATED, a_hat, b_hat,
        backend=backend, encoding=encoding,
        alpha_a=alpha_a, alpha_b=alpha_b,
    )
