"""Synthetic experiments, the Monte Carlo harness, and an exact oracle.

The harness fixes one synthetic experiment (potential outcomes are
constants) and draws treatment assignment vectors; all randomness in the
reported standard errors comes from the assignment draws. The "true"
standard error of a method is the standard deviation of its point estimate
across replicates, and the "nominal" standard error is the average of the
standard errors it reports.

:func:`enumerate_assignments` replaces sampling with the full set of 2^N
equiprobable assignments, giving exact means, variances, and per-pair error
decompositions for small N.
"""

from __future__ import annotations

import multiprocessing
import json
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import PairedDataset, SyntheticExperiment, realize
from .errors import RequestError
from .estimator import METHODS, estimate_all
from .imputation import (
    ImputationResult,
    impute_differences_directly,
    impute_outcomes_separately,
    interpolate,
)

DGP_KINDS = ("simpsons", "uninformative", "custom")

# outcome model: intercept + treat * T + mutation * Z + group * E + noise
_DGP_COEFFICIENTS = {
    "simpsons": {"intercept": 80.0, "treat": -10.0, "mutation": -5.0, "group": 10.0},
    "uninformative": {"intercept": 80.0, "treat": -10.0, "mutation": 5.0, "group": 0.0},
}


@dataclass(frozen=True)
class DgpConfig:
    """Configuration of the twin data-generating processes."""

    kind: str
    n_pairs: int = 50
    p1: float = 0.9  # mutation probability in the high-baseline group
    p0: float = 0.5  # mutation probability in the low-baseline group
    noise_sd: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in DGP_KINDS:
            raise RequestError(f"unknown DGP {self.kind!r}; choose from {DGP_KINDS}")
        if self.n_pairs < 2:
            raise RequestError("n_pairs must be at least 2")
        if not (0.0 <= self.p0 <= 1.0 and 0.0 <= self.p1 <= 1.0):
            raise RequestError("mutation probabilities must be in [0, 1]")
        if self.noise_sd < 0:
            raise RequestError("noise_sd must be non-negative")
        if self.kind != "custom" and self.n_pairs % 2:
            raise RequestError("even pair count required")


def generate_experiment(cfg: DgpConfig, builder=None) -> SyntheticExperiment:
    """Materialize the potential-outcome table for a configuration.

    Half the pairs belong to group 0 and half to group 1; each unit's
    binary covariate is drawn with the group's probability. Both potential
    outcomes of a unit share one noise draw, so the treatment effect is
    exactly the treatment coefficient for every unit. Only the binary
    covariate is exposed to estimators.

    ``kind="custom"`` delegates to ``builder(cfg, rng)``.
    """
    rng = np.random.default_rng(cfg.seed)
    if cfg.kind == "custom":
        if builder is None:
            raise RequestError("custom DGP requires a builder callable")
        return builder(cfg, rng)
    coefs = _DGP_COEFFICIENTS[cfg.kind]
    n = cfg.n_pairs
    group = np.repeat([0.0, 1.0], n // 2)[:, None]  # (N, 1) shared by both units
    probs = np.where(group == 1.0, cfg.p1, cfg.p0)
    mutation = (rng.random((n, 2)) < probs).astype(np.float64)
    noise = rng.normal(0.0, cfg.noise_sd, size=(n, 2))
    base = coefs["intercept"] + coefs["mutation"] * mutation + coefs["group"] * group + noise
    return SyntheticExperiment(
        pair_ids=tuple(f"p{i + 1}" for i in range(n)),
        treated_outcomes=base + coefs["treat"],
        control_outcomes=base,
        covariates=mutation[:, :, None],
    )


@dataclass(frozen=True)
class MethodSummary:
    method: str
    mean_estimate: float
    true_se: float
    nominal_se: float
    mc_se_true: float
    mc_se_nominal: float


@dataclass(frozen=True)
class SimulationSummary:
    dgp: str
    n_pairs: int
    replicates: int
    backend: str
    encoding: str
    seed: int
    resampled: int  # degenerate assignment vectors that were redrawn
    methods: tuple[MethodSummary, ...]

    def to_json(self, indent: int | None = None) -> str:
        payload = asdict(self)
        payload["methods"] = [asdict(m) for m in self.methods]
        return json.dumps(payload, indent=indent)

    def format_table(self) -> str:
        header = f"{'Method':<20}{'True SE':>12}{'Nominal SE':>12}"
        lines = [header, "-" * len(header)]
        for m in self.methods:
            lines.append(f"{m.method:<20}{m.true_se:>12.6g}{m.nominal_se:>12.6g}")
        return "\n".join(lines)


def _draw_assignments(rng: np.random.Generator, n: int):
    """One non-degenerate assignment vector plus the number of redraws."""
    resampled = 0
    while True:
        t = rng.integers(0, 2, size=n)
        ones = int(t.sum())
        if 0 < ones < n:
            return t, resampled
        resampled += 1


def _replicate_block(args):
    se, methods, backend, encoding, seed, confidence, start, stop = args
    taus = np.empty((stop - start, len(methods)))
    ses = np.empty((stop - start, len(methods)))
    resampled = 0
    for r in range(start, stop):
        root = np.random.SeedSequence([seed, r])
        assign_stream, backend_stream = root.spawn(2)
        rng = np.random.default_rng(assign_stream)
        t, redraws = _draw_assignments(rng, se.n_pairs)
        resampled += redraws
        ds = realize(se, t)
        backend_seed = int(backend_stream.generate_state(1)[0])
        results = estimate_all(ds, methods, backend, encoding, backend_seed, confidence)
        for col, m in enumerate(methods):
            taus[r - start, col] = results[m][0].tau_hat
            ses[r - start, col] = results[m][0].std_error
    return taus, ses, resampled


def monte_carlo(
    cfg: DgpConfig,
    methods,
    replicates: int,
    backend: str = "ols",
    encoding: str = "mean_diff",
    seed: int = 0,
    confidence: float = 0.95,
    n_jobs: int = 1,
    builder=None,
) -> SimulationSummary:
    """Estimate true and nominal standard errors over assignment draws.

    One experiment is generated from ``cfg``; ``replicates`` independent
    assignment vectors are then drawn (each pair's assignment a fair coin,
    degenerate vectors redrawn and counted) and every method is estimated
    on every realization. Replicate streams are derived from
    ``(seed, replicate)`` so results do not depend on ``n_jobs``.
    """
    if replicates < 2:
        raise RequestError("replicates must be at least 2")
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise RequestError(f"unknown method {m!r}; choose from {METHODS}")
    se = generate_experiment(cfg, builder=builder)

    n_jobs = max(1, int(n_jobs))
    if n_jobs == 1:
        blocks = [_replicate_block((se, methods, backend, encoding, seed, confidence, 0, replicates))]
    else:
        bounds = np.linspace(0, replicates, n_jobs + 1).astype(int)
        jobs = [
            (se, methods, backend, encoding, seed, confidence, int(lo), int(hi))
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        with multiprocessing.get_context("fork").Pool(len(jobs)) as pool:
            blocks = pool.map(_replicate_block, jobs)

    taus = np.vstack([b[0] for b in blocks])
    ses = np.vstack([b[1] for b in blocks])
    resampled = sum(b[2] for b in blocks)

    summaries = []
    for col, m in enumerate(methods):
        true_se = float(np.std(taus[:, col], ddof=1))
        nominal = float(np.mean(ses[:, col]))
        summaries.append(
            MethodSummary(
                method=m,
                mean_estimate=float(np.mean(taus[:, col])),
                true_se=true_se,
                nominal_se=nominal,
                mc_se_true=true_se / np.sqrt(2.0 * (replicates - 1)),
                mc_se_nominal=float(np.std(ses[:, col], ddof=1)) / np.sqrt(replicates),
            )
        )
    return SimulationSummary(
        dgp=cfg.kind,
        n_pairs=cfg.n_pairs,
        replicates=replicates,
        backend=backend,
        encoding=encoding,
        seed=seed,
        resampled=resampled,
        methods=tuple(summaries),
    )


ENUMERABLE_METHODS = ("simple", "ploop-outcomes", "ploop-differences", "ploop-interp")


@dataclass(frozen=True)
class EnumerationSummary:
    """Exact randomization-distribution summary over all 2^N assignments."""

    method: str
    backend: str
    encoding: str
    n_pairs: int
    tau_bar: float
    mean_tau_hat: float
    var_tau_hat: float
    var_tau_i: np.ndarray  # (N,) exact per-pair variances of the summands
    mse_d: np.ndarray  # (N,) exact mean squared error of d_hat per pair
    m_a: float  # mean over pairs of the exact MSE of a_hat
    m_b: float
    cross_covariance: float  # sum over ordered pairs i != j of Cov terms

    @property
    def mse_bound_lhs(self) -> float:
        return float(np.sum(self.mse_d)) / self.n_pairs**2

    @property
    def mse_bound_rhs(self) -> float:
        return (0.25 * self.m_a + 0.25 * self.m_b + 0.5 * np.sqrt(self.m_a * self.m_b)) / self.n_pairs

    @property
    def covariance_ratio(self) -> float:
        """|cross covariance| relative to the summed per-pair variances."""
        return abs(self.cross_covariance) / float(np.sum(self.var_tau_i))


def _imputation_builder(method, backend, encoding, seed):
    if callable(method):
        return method, "custom"
    if method == "simple":
        return (lambda ds: ImputationResult.zeros(ds.n_pairs, method="simple")), "simple"
    if method == "ploop-outcomes":
        return (lambda ds: impute_outcomes_separately(ds, backend=backend, seed=seed)), method
    if method == "ploop-differences":
        return (
            lambda ds: impute_differences_directly(ds, backend=backend, encoding=encoding, seed=seed)
        ), method
    if method == "ploop-interp":
        def build(ds: PairedDataset) -> ImputationResult:
            r1 = impute_outcomes_separately(ds, backend=backend, seed=seed)
            r2 = impute_differences_directly(ds, backend=backend, encoding=encoding, seed=seed)
            return interpolate(ds, r1, r2)

        return build, method
    raise RequestError(f"enumeration supports {ENUMERABLE_METHODS} or a callable, got {method!r}")


def enumerate_assignments(
    se: SyntheticExperiment,
    method,
    backend: str = "ols",
    encoding: str = "mean_diff",
    seed: int = 0,
) -> EnumerationSummary:
    """Walk all 2^N assignments and accumulate exact moments.

    ``method`` is one of the d-hat-based method names or a callable mapping
    a realized dataset to an :class:`~ploop.imputation.ImputationResult`.
    Accumulation is centered on the known estimands so that a perfect
    imputation yields an exactly zero variance.
    """
    n = se.n_pairs
    if n > 20:
        raise RequestError("enumeration is limited to 20 pairs")
    build, label = _imputation_builder(method, backend, encoding, seed)
    tau_bar = se.tau_bar
    tau_i_true = se.tau_i
    a, b, d = se.a, se.b, se.d

    total = 1 << n
    bit = np.arange(n)
    s1 = 0.0
    s2 = 0.0
    si1 = np.zeros(n)
    si2 = np.zeros(n)
    mse_d = np.zeros(n)
    mse_a = np.zeros(n)
    mse_b = np.zeros(n)
    for g in range(total):
        t = (g >> bit) & 1
        ds = realize(se, t)
        imp = build(ds)
        tau_i = np.where(t == 1, ds.w - imp.d_hat, ds.w + imp.d_hat)
        dev = float(np.mean(tau_i)) - tau_bar
        s1 += dev
        s2 += dev * dev
        dev_i = tau_i - tau_i_true
        si1 += dev_i
        si2 += dev_i * dev_i
        mse_d += (d - imp.d_hat) ** 2
        mse_a += (a - imp.a_hat) ** 2
        mse_b += (b - imp.b_hat) ** 2

    mean_tau = tau_bar + s1 / total
    var_tau = s2 / total - (s1 / total) ** 2
    var_tau_i = si2 / total - (si1 / total) ** 2
    return EnumerationSummary(
        method=label,
        backend=backend,
        encoding=encoding,
        n_pairs=n,
        tau_bar=tau_bar,
        mean_tau_hat=float(mean_tau),
        var_tau_hat=float(var_tau),
        var_tau_i=var_tau_i,
        mse_d=mse_d / total,
        m_a=float(np.mean(mse_a)) / total,
        m_b=float(np.mean(mse_b)) / total,
        cross_covariance=float(n**2 * var_tau - np.sum(var_tau_i)),
    )
