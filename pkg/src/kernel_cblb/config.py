"""Run configuration: strict JSON parsing and validation.

Every key is checked against a fixed schema; unknown keys, wrong types and
out-of-range values raise :class:`ConfigError` carrying the line of the
offending key in the source document.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .kernels import KernelSpec

COMMANDS = ("simulate", "timing", "analyze")
ESTIMATORS = ("minimax", "dml", "aol_value", "aol_criterion", "synthetic_quadratic")
DGPS = ("ate", "policy")
MAX_BAG_SIZE = 20_000

_ESTIMATOR_BLOCKS = {
    "minimax": {"kernel", "lambda", "sigma2", "intercept"},
    "dml": {"folds", "svm_cost", "svr_epsilon", "kernel", "clip"},
    "aol": {"kernel", "lambda", "huber_delta", "propensity", "cross_fit", "outcome_ridge"},
    "synthetic_quadratic": {"passes"},
}
_KERNEL_KEYS = {"family", "scale", "degree", "bandwidth", "sigma2"}
_COMMON = {"command", "estimator", "b", "gamma_exponent", "s", "r", "alpha", "seed",
           "output_dir", "record_seconds"} | set(_ESTIMATOR_BLOCKS)
_ALLOWED = {
    "simulate": _COMMON | {"dgp", "n", "replications"},
    "timing": _COMMON | {"n", "n_grid", "repetitions"},
    "analyze": _COMMON | {"input_csv", "columns", "filters", "missing_values", "standardize"},
}
_COLUMN_KEYS = {"outcome", "treatment", "covariates", "categorical"}
_FILTER_KEYS = {"column", "min", "max"}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class FilterSpec:
    column: str
    low: float = -math.inf
    high: float = math.inf


@dataclass(frozen=True)
class ColumnMapping:
    outcome: str
    treatment: str
    covariates: tuple = ()
    categorical: tuple = ()  # (column, reference level) pairs


@dataclass(frozen=True)
class RunConfig:
    command: str
    estimator: str
    r: int
    alpha: float = 0.05
    seed: int = 0
    b: int | None = None
    gamma_exponent: float | None = None
    s: int | None = None
    dgp: str | None = None
    n: int | None = None
    n_grid: tuple = ()
    replications: int = 1
    repetitions: int = 3
    output_dir: str = "."
    record_seconds: bool = True
    estimator_options: dict = field(default_factory=dict)
    input_csv: str | None = None
    columns: ColumnMapping | None = None
    filters: tuple = ()
    missing_values: tuple = ("", "NA")
    standardize: bool = False

    def bag_plan(self, n: int) -> tuple[int, int]:
        """``(b, s)`` for a sample of ``n`` units."""
        if self.b is not None:
            b = self.b
        else:
            b = max(1, int(math.floor(n**self.gamma_exponent + 0.5)))
        if b > n:
            raise ConfigError(f"bag size b={b} exceeds n={n}")
        if b > MAX_BAG_SIZE:
            raise ConfigError(f"bag size b={b} exceeds the cap of {MAX_BAG_SIZE}")
        s = n // b if self.s is None else self.s
        if s < 1 or s * b > n:
            raise ConfigError(f"s={s} bags of size {b} do not fit in n={n}")
        return b, s


class _Locator:
    """Best-effort line lookup for keys in the raw JSON text."""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def line_of(self, key: str) -> int | None:
        pattern = re.compile(r'"' + re.escape(key) + r'"\s*:')
        for i, line in enumerate(self.lines, 1):
            if pattern.search(line):
                return i
        return None


def _reject_duplicates(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise ValueError(f"duplicate key {key!r}")
        seen[key] = value
    return seen


class _Checker:
    def __init__(self, loc: _Locator):
        self.loc = loc

    def fail(self, key: str, message: str):
        raise ConfigError(message, self.loc.line_of(key))

    def keys(self, obj: dict, allowed: set, where: str, anchor: str | None = None):
        if not isinstance(obj, dict):
            raise ConfigError(f"{where} must be a JSON object",
                              self.loc.line_of(anchor) if anchor else None)
        for key in obj:
            if key not in allowed:
                self.fail(key, f"unknown key {key!r} in {where}")

    def integer(self, obj, key, low=None, high=None, required=False, default=None):
        if key not in obj:
            if required:
                raise ConfigError(f"missing required key {key!r}")
            return default
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(key, f"{key!r} must be an integer, got {v!r}")
        if (low is not None and v < low) or (high is not None and v > high):
            self.fail(key, f"{key!r}={v} out of range [{low}, {high}]")
        return v

    def number(self, obj, key, low=None, high=None, open_low=False, open_high=False,
               required=False, default=None, allow_null=False):
        if key not in obj:
            if required:
                raise ConfigError(f"missing required key {key!r}")
            return default
        v = obj[key]
        if v is None and allow_null:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(key, f"{key!r} must be a finite number, got {v!r}")
        v = float(v)
        if low is not None and (v < low or (open_low and v == low)):
            self.fail(key, f"{key!r}={v} out of range")
        if high is not None and (v > high or (open_high and v == high)):
            self.fail(key, f"{key!r}={v} out of range")
        return v

    def choice(self, obj, key, options, required=False, default=None):
        if key not in obj:
            if required:
                raise ConfigError(f"missing required key {key!r}; expected one of {options}")
            return default
        v = obj[key]
        if v not in options:
            self.fail(key, f"{key!r} must be one of {options}, got {v!r}")
        return v

    def string(self, obj, key, required=False, default=None):
        if key not in obj:
            if required:
                raise ConfigError(f"missing required key {key!r}")
            return default
        v = obj[key]
        if not isinstance(v, str) or not v:
            self.fail(key, f"{key!r} must be a non-empty string")
        return v

    def boolean(self, obj, key, default):
        if key not in obj:
            return default
        v = obj[key]
        if not isinstance(v, bool):
            self.fail(key, f"{key!r} must be true or false")
        return v

    def kernel(self, obj, key, default: KernelSpec) -> KernelSpec:
        if key not in obj:
            return default
        block = obj[key]
        self.keys(block, _KERNEL_KEYS, f"{key!r} block", key)
        args = default.to_dict()
        for k in block:
            if k == "family":
                args[k] = self.choice(block, k, ("linear", "polynomial", "gaussian"))
            elif k == "degree":
                args[k] = self.integer(block, k, low=1)
            else:
                args[k] = self.number(block, k, low=0.0)
        try:
            return KernelSpec(**args)
        except ValueError as exc:
            self.fail(key, str(exc))


def _estimator_options(chk: _Checker, raw: dict, estimator: str, command: str) -> dict:
    linear = KernelSpec()
    opts: dict = {}
    if estimator == "minimax":
        blk = raw.get("minimax", {})
        chk.keys(blk, _ESTIMATOR_BLOCKS["minimax"], "'minimax' block", "minimax")
        opts["kernel"] = chk.kernel(blk, "kernel",
                                    KernelSpec("polynomial", scale=1.0, degree=1, sigma2=1.0))
        opts["lam"] = chk.number(blk, "lambda", low=0.0, open_low=True, default=1.0)
        opts["sigma2"] = chk.number(blk, "sigma2", low=0.0, open_low=True, default=None,
                                    allow_null=True)
        opts["add_intercept"] = chk.boolean(blk, "intercept", True)
    elif estimator == "dml":
        blk = raw.get("dml", {})
        chk.keys(blk, _ESTIMATOR_BLOCKS["dml"], "'dml' block", "dml")
        opts["n_folds"] = chk.integer(blk, "folds", low=2, default=5)
        opts["svm_cost"] = chk.number(blk, "svm_cost", low=0.0, open_low=True, default=1.0)
        opts["svr_epsilon"] = chk.number(blk, "svr_epsilon", low=0.0, default=0.1)
        opts["kernel"] = chk.kernel(blk, "kernel", linear)
        opts["propensity_clip"] = chk.number(blk, "clip", low=0.0, high=0.5, open_low=True,
                                             open_high=True, default=0.01)
    elif estimator in ("aol_value", "aol_criterion"):
        blk = raw.get("aol", {})
        chk.keys(blk, _ESTIMATOR_BLOCKS["aol"], "'aol' block", "aol")
        opts["kernel"] = chk.kernel(blk, "kernel", linear)
        opts["lam"] = chk.number(blk, "lambda", low=0.0, open_low=True, default=None,
                                 allow_null=True)
        opts["huber_delta"] = chk.number(blk, "huber_delta", low=0.0, open_low=True,
                                         default=1.0)
        default_pi = "estimate" if command == "analyze" else 0.5
        pi = blk.get("propensity", default_pi)
        if pi != "estimate":
            pi = chk.number({"propensity": pi}, "propensity", low=0.0, high=1.0,
                            open_low=True, open_high=True)
        opts["propensity"] = None if pi == "estimate" else pi
        opts["cross_fit"] = chk.integer(blk, "cross_fit", low=1, default=5)
        opts["outcome_ridge"] = chk.number(blk, "outcome_ridge", low=0.0, open_low=True,
                                           default=None, allow_null=True)
    else:
        blk = raw.get("synthetic_quadratic", {})
        chk.keys(blk, _ESTIMATOR_BLOCKS["synthetic_quadratic"],
                 "'synthetic_quadratic' block", "synthetic_quadratic")
        opts["passes"] = chk.integer(blk, "passes", low=1, default=1)
    for name in _ESTIMATOR_BLOCKS:
        family = "aol" if estimator.startswith("aol") else estimator
        if name in raw and name != family:
            chk.fail(name, f"block {name!r} does not apply to estimator {estimator!r}")
    return opts


def _columns(chk: _Checker, raw) -> ColumnMapping:
    chk.keys(raw, _COLUMN_KEYS, "'columns' block", "columns")
    outcome = chk.string(raw, "outcome", required=True)
    treatment = chk.string(raw, "treatment", required=True)
    covs = raw.get("covariates", [])
    if not isinstance(covs, list) or not all(isinstance(c, str) and c for c in covs):
        chk.fail("covariates", "'covariates' must be a list of column names")
    cats = raw.get("categorical", {})
    if not isinstance(cats, dict):
        chk.fail("categorical", "'categorical' must map column names to reference levels")
    pairs = []
    for col, ref in cats.items():
        if not isinstance(ref, str):
            chk.fail(col, f"reference level for {col!r} must be a string")
        pairs.append((col, ref))
    if not covs and not pairs:
        chk.fail("columns", "at least one covariate is required")
    names = [outcome, treatment, *covs, *(c for c, _ in pairs)]
    if len(set(names)) != len(names):
        chk.fail("columns", "a column is mapped more than once")
    return ColumnMapping(outcome, treatment, tuple(covs), tuple(pairs))


def _filters(chk: _Checker, raw) -> tuple:
    if not isinstance(raw, list):
        chk.fail("filters", "'filters' must be a list")
    out = []
    for item in raw:
        chk.keys(item, _FILTER_KEYS, "a filter", "filters")
        col = chk.string(item, "column", required=True)
        low = chk.number(item, "min", default=-math.inf)
        high = chk.number(item, "max", default=math.inf)
        if low > high:
            chk.fail("filters", f"filter on {col!r} has min > max")
        out.append(FilterSpec(col, low, high))
    return tuple(out)


def parse_config(text: str, command: str | None = None, base_dir: Path | None = None) -> RunConfig:
    """Validate a JSON run configuration.

    ``command`` is the subcommand given on the command line; a ``command``
    key in the document must agree with it.
    """
    loc = _Locator(text)
    try:
        raw = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno) from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    chk = _Checker(loc)
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object", 1)
    doc_cmd = raw.get("command")
    if doc_cmd is not None and doc_cmd not in COMMANDS:
        chk.fail("command", f"'command' must be one of {COMMANDS}")
    if command is None:
        command = doc_cmd
    if command is None:
        raise ConfigError("no command given")
    if doc_cmd is not None and doc_cmd != command:
        chk.fail("command", f"config is for {doc_cmd!r} but {command!r} was requested")
    chk.keys(raw, _ALLOWED[command], "the configuration")

    estimator = chk.choice(raw, "estimator", ESTIMATORS, required=True)
    if estimator == "synthetic_quadratic" and command != "timing":
        chk.fail("estimator", "'synthetic_quadratic' is only available for timing")
    if estimator == "aol_criterion" and command == "simulate":
        chk.fail("estimator", "'aol_criterion' has no known truth; use timing or analyze")

    if ("b" in raw) == ("gamma_exponent" in raw):
        raise ConfigError("exactly one of 'b' and 'gamma_exponent' is required",
                          loc.line_of("b") or loc.line_of("gamma_exponent"))
    b = chk.integer(raw, "b", low=1, high=MAX_BAG_SIZE)
    gamma = chk.number(raw, "gamma_exponent", low=0.0, high=1.0, open_low=True,
                       open_high=True)
    s = chk.integer(raw, "s", low=1)
    r = chk.integer(raw, "r", low=2, required=True)
    alpha = chk.number(raw, "alpha", low=0.0, high=1.0, open_low=True, open_high=True,
                       default=0.05)
    seed = chk.integer(raw, "seed", low=0, high=2**64 - 1, default=0)
    out_dir = chk.string(raw, "output_dir", default=".")
    record_seconds = chk.boolean(raw, "record_seconds", True)
    opts = _estimator_options(chk, raw, estimator, command)
    kwargs = dict(command=command, estimator=estimator, r=r, alpha=alpha, seed=seed, b=b,
                  gamma_exponent=gamma, s=s, output_dir=out_dir,
                  record_seconds=record_seconds, estimator_options=opts)

    if command == "simulate":
        dgp = chk.choice(raw, "dgp", DGPS, required=True)
        if dgp == "ate" and estimator.startswith("aol"):
            chk.fail("dgp", "the ate design needs estimator 'minimax' or 'dml'")
        if dgp == "policy" and not estimator.startswith("aol"):
            chk.fail("dgp", "the policy design needs estimator 'aol_value'")
        kwargs.update(dgp=dgp, n=chk.integer(raw, "n", low=2, required=True),
                      replications=chk.integer(raw, "replications", low=1, required=True))
    elif command == "timing":
        if ("n" in raw) == ("n_grid" in raw):
            raise ConfigError("exactly one of 'n' and 'n_grid' is required",
                              loc.line_of("n") or loc.line_of("n_grid"))
        if "n" in raw:
            grid = (chk.integer(raw, "n", low=2),)
        else:
            grid = raw["n_grid"]
            if (not isinstance(grid, list) or not grid
                    or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 2
                               for v in grid)):
                chk.fail("n_grid", "'n_grid' must be a non-empty list of integers >= 2")
            grid = tuple(grid)
        kwargs.update(n_grid=grid,
                      repetitions=chk.integer(raw, "repetitions", low=1, default=3))
    else:
        path = chk.string(raw, "input_csv", required=True)
        if base_dir is not None and not Path(path).is_absolute():
            path = str(base_dir / path)
        if "columns" not in raw:
            raise ConfigError("missing required key 'columns'")
        missing = raw.get("missing_values", ["", "NA"])
        if not isinstance(missing, list) or not all(isinstance(m, str) for m in missing):
            chk.fail("missing_values", "'missing_values' must be a list of strings")
        kwargs.update(input_csv=path, columns=_columns(chk, raw["columns"]),
                      filters=_filters(chk, raw.get("filters", [])),
                      missing_values=tuple(missing),
                      standardize=chk.boolean(raw, "standardize", False))
    cfg = RunConfig(**kwargs)
    for n in ([cfg.n] if cfg.n else list(cfg.n_grid)):
        try:
            cfg.bag_plan(n)
        except ConfigError as exc:
            raise ConfigError(str(exc), loc.line_of("b") or loc.line_of("gamma_exponent")) from None
    return cfg


def load_config(path: str | Path, command: str | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, command, base_dir=path.parent)
