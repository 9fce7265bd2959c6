"""Data model shared by the estimators, the resampler and the command line.

A :class:`Dataset` holds one row per unit: an outcome, a treatment code and a
covariate vector.  Two treatment codings are admitted and never mixed:
``"binary"`` ({0, 1}, used by the ATE estimators) and ``"sign"`` ({-1, +1},
used by policy learning).  Conversions between them are explicit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

BINARY = "binary"
SIGN = "sign"
CODINGS = {BINARY: (0, 1), SIGN: (-1, 1)}


class DataError(ValueError):
    """Base class for malformed input data."""


class LengthMismatch(DataError):
    def __init__(self, column: str, expected: int, got: int):
        self.column = column
        self.expected = expected
        self.got = got
        super().__init__(f"column {column!r} has {got} rows, expected {expected}")


class NonFiniteValue(DataError):
    def __init__(self, column: str, row: int):
        self.column = column
        self.row = row
        super().__init__(f"non-finite value in column {column!r} at row {row}")


class BadTreatmentCode(DataError):
    def __init__(self, row: int, value, coding: str):
        self.row = row
        self.value = value
        self.coding = coding
        super().__init__(
            f"treatment code {value!r} at row {row} is not valid under "
            f"{coding!r} coding {CODINGS.get(coding)}"
        )


class ConfigInfeasible(ValueError):
    """Resampling configuration cannot be realised for the given data."""


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed units ``(Y_i, A_i, X_i)``.

    Arrays are copied and made read-only on construction.  Construction does
    not validate codes or finiteness; call :func:`validate_dataset`.
    """

    outcomes: np.ndarray
    treatments: np.ndarray
    covariates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "outcomes", _frozen(self.outcomes, float).reshape(-1))
        t = np.asarray(self.treatments)
        if t.dtype.kind == "f" and np.all(np.isfinite(t)) and np.all(t == np.round(t)):
            t = t.astype(np.int64)
        object.__setattr__(self, "treatments", _frozen(t, t.dtype).reshape(-1))
        X = _frozen(self.covariates, float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        object.__setattr__(self, "covariates", X)

    @property
    def n(self) -> int:
        return int(self.outcomes.shape[0])

    @property
    def p(self) -> int:
        return int(self.covariates.shape[1])

    def subset(self, index) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(self.outcomes[index], self.treatments[index], self.covariates[index])

    def coding(self) -> str:
        """Infer the coding in use; raises if the codes fit neither."""
        values = set(np.unique(self.treatments).tolist())
        if values <= {0, 1}:
            return BINARY
        if values <= {-1, 1}:
            return SIGN
        raise BadTreatmentCode(_first_bad_row(self.treatments, {0, 1}), sorted(values), "mixed")


def _first_bad_row(t: np.ndarray, allowed) -> int:
    for i, v in enumerate(t.tolist()):
        if v not in allowed:
            return i
    return -1


def validate_dataset(d: Dataset, coding: str) -> None:
    """Check every :class:`Dataset` invariant under the requested coding.

    Raises
    ------
    LengthMismatch, NonFiniteValue, BadTreatmentCode
        Each names the offending column and, where meaningful, the row.
    """
    if coding not in CODINGS:
        raise ValueError(f"unknown treatment coding {coding!r}")
    n = d.n
    if d.treatments.shape[0] != n:
        raise LengthMismatch("treatments", n, d.treatments.shape[0])
    if d.covariates.shape[0] != n:
        raise LengthMismatch("covariates", n, d.covariates.shape[0])
    if n < 1 or d.covariates.ndim != 2 or d.covariates.shape[1] < 1:
        raise LengthMismatch("covariates", max(n, 1), d.covariates.shape[0])
    bad = ~np.isfinite(d.outcomes)
    if bad.any():
        raise NonFiniteValue("outcomes", int(np.argmax(bad)))
    bad_rows = ~np.all(np.isfinite(d.covariates), axis=1)
    if bad_rows.any():
        raise NonFiniteValue("covariates", int(np.argmax(bad_rows)))
    t = d.treatments
    if t.dtype.kind == "f":
        bad = ~np.isfinite(t)
        if bad.any():
            raise NonFiniteValue("treatments", int(np.argmax(bad)))
    allowed = set(CODINGS[coding])
    row = _first_bad_row(t, allowed)
    if row >= 0:
        raise BadTreatmentCode(row, t[row].item(), coding)


def to_sign_coding(d: Dataset) -> Dataset:
    """Map {0, 1} treatments to {-1, +1}."""
    validate_dataset(d, BINARY)
    return Dataset(d.outcomes, 2 * d.treatments.astype(np.int64) - 1, d.covariates)


def to_binary_coding(d: Dataset) -> Dataset:
    """Map {-1, +1} treatments to {0, 1}."""
    validate_dataset(d, SIGN)
    return Dataset(d.outcomes, (d.treatments.astype(np.int64) + 1) // 2, d.covariates)


@dataclass(frozen=True, eq=False)
class Contribution:
    """Per-unit contributions whose mean is the bag estimate."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values, float).reshape(-1)
        if v.size == 0:
            raise ValueError("empty contribution array")
        bad = ~np.isfinite(v)
        if bad.any():
            raise NonFiniteValue("contributions", int(np.argmax(bad)))
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    def mean(self) -> float:
        return float(np.mean(self.values))


@dataclass(frozen=True)
class CBLBConfig:
    """Bag size ``b``, number of bags ``s`` and replicates ``r`` for one run."""

    n_total: int
    bag_size: int
    n_bags: int
    n_replicates: int
    alpha: float = 0.05
    seed: int = 0
    gamma_exponent: float | None = None

    def __post_init__(self):
        for name in ("n_total", "bag_size", "n_bags", "n_replicates"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigInfeasible(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.bag_size > self.n_total:
            raise ConfigInfeasible(f"bag size {self.bag_size} exceeds n={self.n_total}")
        if self.n_bags * self.bag_size > self.n_total:
            raise ConfigInfeasible(
                f"s*b = {self.n_bags * self.bag_size} exceeds n={self.n_total}"
            )
        if self.n_replicates < 2:
            raise ConfigInfeasible("need at least 2 bootstrap replicates")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigInfeasible(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigInfeasible("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "seed", int(self.seed))
        if self.gamma_exponent is not None and not 0.0 < self.gamma_exponent < 1.0:
            raise ConfigInfeasible("gamma_exponent must lie in (0, 1)")
        if self.n_replicates * self.alpha / 2.0 < 1.0:
            warnings.warn(
                f"r={self.n_replicates} is too small to resolve the {self.alpha / 2:g} "
                "quantile; the interval endpoints are sample extremes",
                stacklevel=3,
            )

    @classmethod
    def from_gamma(
        cls,
        n: int,
        gamma: float,
        n_replicates: int,
        alpha: float = 0.05,
        seed: int = 0,
        n_bags: int | None = None,
    ) -> "CBLBConfig":
        """Set ``b = round(n**gamma)`` and, unless given, ``s = floor(n / b)``."""
        if not 0.0 < gamma < 1.0:
            raise ConfigInfeasible("gamma_exponent must lie in (0, 1)")
        b = max(1, int(math.floor(n**gamma + 0.5)))
        s = n // b if n_bags is None else n_bags
        return cls(n, b, s, n_replicates, alpha, seed, gamma)

    @property
    def n_unused(self) -> int:
        return self.n_total - self.n_bags * self.bag_size


@dataclass(frozen=True, eq=False)
class IntervalResult:
    """Aggregated percentile interval.

    ``lower``/``upper`` are the averages of the per-bag quantiles; ``se`` is
    the average per-bag replicate standard deviation.
    """

    point_estimate: float
    lower: float
    upper: float
    se: float
    per_bag_quantiles: np.ndarray
    wall_time_seconds: float
    fit_seconds: float = 0.0
    resample_seconds: float = 0.0
    bag_fit_seconds: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def covers(self, value: float) -> bool:
        return bool(self.lower <= value <= self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower
