"""Data model for paired randomized experiments.

A paired experiment consists of N pairs of units. Within each pair exactly
one unit is treated. Per pair we work with the observed difference
``w = y_treated - y_control`` and with pair-level feature encodings that
combine the two units' covariate vectors.

Two encodings are supported:

* ``concat``: the two q-vectors concatenated. ``z_a`` puts the treated
  unit's covariates first, ``z_b`` the control unit's.
* ``mean_diff``: per-covariate pair means followed by within-pair
  differences. ``z_a`` carries treated-minus-control differences, ``z_b``
  control-minus-treated.

Both encodings produce 2q features, and ``z`` (the original-order encoding)
always equals ``z_a`` when unit 1 is treated and ``z_b`` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from .errors import DataError, RequestError

ENCODINGS = ("concat", "mean_diff")
DEFAULT_ENCODING = "mean_diff"


@dataclass(frozen=True)
class UnitRecord:
    """One experimental unit: half of a pair."""

    pair_id: str
    unit_index: int  # 1 or 2, the within-pair label
    treatment: int
    outcome: float
    covariates: np.ndarray  # shape (q,)


@dataclass(frozen=True)
class CsvSchema:
    """Maps CSV column names onto the dataset fields.

    ``covariates=None`` means every column other than the three named ones
    is used as a covariate, in file order.
    """

    pair: str
    treatment: str
    outcome: str
    covariates: tuple[str, ...] | None = None


@dataclass(frozen=True)
class PairedDataset:
    """Validated observed data, stored pair-major.

    Arrays are indexed ``[pair, unit]`` where unit 0/1 corresponds to the
    within-pair labels 1/2. Instances are immutable; treat the arrays as
    read-only.
    """

    pair_ids: tuple[str, ...]
    treatments: np.ndarray  # (N, 2) ints in {0, 1}, exactly one 1 per pair
    outcomes: np.ndarray  # (N, 2) floats
    covariates: np.ndarray  # (N, 2, q) floats

    def __post_init__(self) -> None:
        n = len(self.pair_ids)
        if n == 0:
            raise DataError("no pairs")
        if self.treatments.shape != (n, 2) or self.outcomes.shape != (n, 2):
            raise DataError("treatment/outcome arrays must have shape (N, 2)")
        if self.covariates.ndim != 3 or self.covariates.shape[:2] != (n, 2):
            raise DataError("covariate array must have shape (N, 2, q)")
        if not np.isin(self.treatments, (0, 1)).all():
            raise DataError("treatments must be 0 or 1")
        if (self.treatments.sum(axis=1) != 1).any():
            raise DataError("invalid treatment pattern: each pair needs exactly one treated unit")
        if not np.isfinite(self.outcomes).all():
            raise DataError("outcomes must be finite")
        if not np.isfinite(self.covariates).all():
            raise DataError("covariates must be finite")

    @property
    def n_pairs(self) -> int:
        return len(self.pair_ids)

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[2]

    @property
    def t(self) -> np.ndarray:
        """Pair-level assignment: 1 if unit 1 is the treated unit."""
        return self.treatments[:, 0]

    @property
    def w(self) -> np.ndarray:
        """Observed differences, treated outcome minus control outcome."""
        signs = 2.0 * self.treatments[:, 0] - 1.0
        return signs * (self.outcomes[:, 0] - self.outcomes[:, 1])

    @property
    def units(self) -> list[UnitRecord]:
        """The 2N unit records, pair-major."""
        out = []
        for i, pid in enumerate(self.pair_ids):
            for j in (0, 1):
                out.append(
                    UnitRecord(
                        pair_id=pid,
                        unit_index=j + 1,
                        treatment=int(self.treatments[i, j]),
                        outcome=float(self.outcomes[i, j]),
                        covariates=self.covariates[i, j].copy(),
                    )
                )
        return out

    @classmethod
    def from_units(cls, units: Sequence[UnitRecord]) -> "PairedDataset":
        """Assemble a dataset from unit records.

        Pairs are ordered by first occurrence; within a pair, units are
        placed by their ``unit_index``.
        """
        if not units:
            raise DataError("no pairs")
        order: list[str] = []
        grouped: dict[str, list[UnitRecord]] = {}
        for u in units:
            if u.pair_id not in grouped:
                grouped[u.pair_id] = []
                order.append(u.pair_id)
            grouped[u.pair_id].append(u)
        q = len(np.atleast_1d(units[0].covariates))
        n = len(order)
        treatments = np.zeros((n, 2), dtype=np.int64)
        outcomes = np.zeros((n, 2), dtype=np.float64)
        covariates = np.zeros((n, 2, q), dtype=np.float64)
        for i, pid in enumerate(order):
            members = grouped[pid]
            if len(members) != 2:
                raise DataError(f"pair {pid!r} has {len(members)} members, expected 2")
            if sorted(u.unit_index for u in members) != [1, 2]:
                raise DataError(f"pair {pid!r} unit labels must be {{1, 2}}")
            for u in members:
                j = u.unit_index - 1
                cov = np.atleast_1d(np.asarray(u.covariates, dtype=np.float64))
                if cov.shape != (q,):
                    raise DataError(f"pair {pid!r}: covariate length differs across units")
                treatments[i, j] = u.treatment
                outcomes[i, j] = u.outcome
                covariates[i, j] = cov
        return cls(tuple(order), treatments, outcomes, covariates)


@dataclass(frozen=True)
class PairView:
    """Per-pair derived quantities used by the imputation strategies."""

    pair_id: str
    t: int  # 1 if unit 1 is treated
    w: float  # treated minus control outcome
    z: np.ndarray  # (2q,) encoded features in original unit order
    z_a: np.ndarray  # (2q,) encoded with the treated unit first
    z_b: np.ndarray  # (2q,) encoded with the control unit first
    encoding: str


@dataclass(frozen=True)
class SyntheticExperiment:
    """A full potential-outcome table for simulation and exact oracles.

    ``treated_outcomes[i, j]`` and ``control_outcomes[i, j]`` are the fixed
    outcomes unit j of pair i would show under treatment and control.
    """

    pair_ids: tuple[str, ...]
    treated_outcomes: np.ndarray  # (N, 2)
    control_outcomes: np.ndarray  # (N, 2)
    covariates: np.ndarray  # (N, 2, q)

    def __post_init__(self) -> None:
        n = len(self.pair_ids)
        if n == 0:
            raise DataError("no pairs")
        for arr, nd in ((self.treated_outcomes, 2), (self.control_outcomes, 2), (self.covariates, 3)):
            if arr.ndim != nd or arr.shape[:2] != (n, 2):
                raise DataError("potential-outcome arrays must be (N, 2) with covariates (N, 2, q)")
            if not np.isfinite(arr).all():
                raise DataError("potential outcomes and covariates must be finite")

    @property
    def n_pairs(self) -> int:
        return len(self.pair_ids)

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[2]

    @property
    def a(self) -> np.ndarray:
        """Potential difference observed when unit 1 is treated."""
        return self.treated_outcomes[:, 0] - self.control_outcomes[:, 1]

    @property
    def b(self) -> np.ndarray:
        """Potential difference observed when unit 2 is treated."""
        return self.treated_outcomes[:, 1] - self.control_outcomes[:, 0]

    @property
    def d(self) -> np.ndarray:
        """Half the gap between the two potential differences."""
        return 0.5 * (self.a - self.b)

    @property
    def unit_means(self) -> np.ndarray:
        """Per-unit averages of the two potential outcomes, (N, 2)."""
        return 0.5 * (self.treated_outcomes + self.control_outcomes)

    @property
    def tau_i(self) -> np.ndarray:
        """Pair-level treatment effects."""
        return 0.5 * (self.a + self.b)

    @property
    def tau_bar(self) -> float:
        """The average treatment effect, the estimand."""
        return float(np.mean(self.tau_i))


def load_csv(path, schema: CsvSchema, allow_no_covariates: bool = False) -> PairedDataset:
    """Read a paired-experiment CSV into a validated dataset.

    The file must have a header row. Row order within a pair determines the
    within-pair label (first occurrence becomes unit 1). Missing cells and
    non-numeric values in mapped columns are hard errors. A dataset with no
    covariate columns is only accepted with ``allow_no_covariates``.
    """
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise DataError(f"input file not found: {path}") from None
    except pd.errors.EmptyDataError:
        raise DataError("no pairs") from None
    if frame.empty:
        raise DataError("no pairs")

    for col in (schema.pair, schema.treatment, schema.outcome):
        if col not in frame.columns:
            raise DataError(f"missing column {col!r}")
    if schema.covariates is None:
        cov_cols = tuple(c for c in frame.columns if c not in (schema.pair, schema.treatment, schema.outcome))
    else:
        cov_cols = tuple(schema.covariates)
        for col in cov_cols:
            if col not in frame.columns:
                raise DataError(f"missing covariate column {col!r}")
    if not cov_cols and not allow_no_covariates:
        raise DataError("no covariate columns; pass the covariate-free flag to analyze without covariates")

    def numeric(col: str) -> np.ndarray:
        series = frame[col]
        if series.isna().any():
            raise DataError(f"column {col!r} has missing values")
        try:
            values = pd.to_numeric(series, errors="raise")
        except (ValueError, TypeError):
            raise DataError(f"column {col!r} has non-numeric values") from None
        return np.asarray(values, dtype=np.float64)

    treatment = numeric(schema.treatment)
    if not np.isin(treatment, (0.0, 1.0)).all():
        raise DataError(f"column {schema.treatment!r} must contain only 0 and 1")
    outcome = numeric(schema.outcome)
    covs = (
        np.column_stack([numeric(c) for c in cov_cols])
        if cov_cols
        else np.zeros((len(frame), 0))
    )
    if frame[schema.pair].isna().any():
        raise DataError(f"column {schema.pair!r} has missing values")
    pair_col = frame[schema.pair].astype(str).tolist()

    seen: dict[str, int] = {}
    units = []
    for row, pid in enumerate(pair_col):
        idx = seen.get(pid, 0) + 1
        if idx > 2:
            raise DataError(f"pair {pid!r} has more than 2 members")
        seen[pid] = idx
        units.append(
            UnitRecord(
                pair_id=pid,
                unit_index=idx,
                treatment=int(treatment[row]),
                outcome=float(outcome[row]),
                covariates=covs[row],
            )
        )
    return PairedDataset.from_units(units)


def pair_feature_matrices(ds: PairedDataset, encoding: str = DEFAULT_ENCODING):
    """Return the stacked (N, 2q) feature matrices ``(z, z_a, z_b)``."""
    if encoding not in ENCODINGS:
        raise RequestError(f"unknown encoding {encoding!r}; choose from {ENCODINGS}")
    z1 = ds.covariates[:, 0, :]
    z2 = ds.covariates[:, 1, :]
    treated_first = ds.t == 1
    zt = np.where(treated_first[:, None], z1, z2)  # treated unit's covariates
    zc = np.where(treated_first[:, None], z2, z1)  # control unit's covariates
    if encoding == "concat":
        z = np.hstack([z1, z2])
        z_a = np.hstack([zt, zc])
        z_b = np.hstack([zc, zt])
    else:
        mean = 0.5 * (z1 + z2)
        z = np.hstack([mean, z1 - z2])
        z_a = np.hstack([mean, zt - zc])
        z_b = np.hstack([mean, zc - zt])
    return z, z_a, z_b


def pair_views(ds: PairedDataset, encoding: str = DEFAULT_ENCODING) -> list[PairView]:
    """Build one :class:`PairView` per pair under the given encoding."""
    z, z_a, z_b = pair_feature_matrices(ds, encoding)
    w = ds.w
    t = ds.t
    return [
        PairView(
            pair_id=ds.pair_ids[i],
            t=int(t[i]),
            w=float(w[i]),
            z=z[i],
            z_a=z_a[i],
            z_b=z_b[i],
            encoding=encoding,
        )
        for i in range(ds.n_pairs)
    ]


def realize(se: SyntheticExperiment, assignments: np.ndarray) -> PairedDataset:
    """Materialize the observed dataset under a pair-level assignment vector.

    ``assignments[i] == 1`` treats unit 1 of pair i, otherwise unit 2.
    """
    assignments = np.asarray(assignments)
    if assignments.shape != (se.n_pairs,):
        raise DataError(f"assignment vector must have length {se.n_pairs}")
    if not np.isin(assignments, (0, 1)).all():
        raise DataError("assignments must be 0 or 1")
    t_units = np.empty((se.n_pairs, 2), dtype=np.int64)
    t_units[:, 0] = assignments
    t_units[:, 1] = 1 - assignments
    outcomes = np.where(t_units == 1, se.treated_outcomes, se.control_outcomes)
    return PairedDataset(se.pair_ids, t_units, outcomes, se.covariates)
