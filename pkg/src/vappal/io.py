"""Datasets, run configuration and result files."""

import csv
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .applications import DsvmInstance, FusedSvmInstance, LogisticInstance
from .benchmarks import block_qp_data, classification_data
from .diagnostics import TRACE_FIELDS, Trace, TraceRecord
from .errors import DataValidationError, InvalidArgument, ParseError

__all__ = ["read_libsvm", "write_libsvm", "generate_synthetic", "SyntheticQp",
           "RunConfig", "parse_config", "load_config", "write_trace_csv",
           "read_trace_csv", "write_summary_json", "CSV_HEADER"]

CSV_HEADER = ("k", "objective", "primal_res", "du_norm", "dp_norm", "du_Hbar_sq",
              "lambda_merit", "wall_ms")
PROBLEMS = ("fused-svm", "logistic", "dsvm", "qp")
VARIANTS = ("PJVAPP", "LJVAPP", "LPVAPP", "identity-core", "newton-core")


def _fmt(x):
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else "%.17g" % x


# -- LIBSVM ------------------------------------------------------------------------

def read_libsvm(path, classification=True):
    """Read ``<label> <index>:<value> ...`` lines.

    Returns
    -------
    X : scipy.sparse.csr_matrix
        One row per sample; width is the largest index seen.
    y : ndarray
        Labels; checked to lie in {-1, +1} when `classification` is set.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataValidationError(f"{path}: {exc.strerror or exc}") from exc
    labels, rows, cols, vals = [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            label = float(parts[0])
        except ValueError:
            raise ParseError(f"bad label {parts[0]!r}", lineno) from None
        last = 0
        for tok in parts[1:]:
            idx, sep, val = tok.partition(":")
            try:
                j, v = int(idx), float(val)
            except ValueError:
                raise ParseError(f"bad feature {tok!r}", lineno) from None
            if not sep:
                raise ParseError(f"bad feature {tok!r}", lineno)
            if j <= last:
                raise ParseError("indices must be 1-based and strictly increasing", lineno)
            last = j
            rows.append(len(labels))
            cols.append(j - 1)
            vals.append(v)
        if classification and label not in (-1.0, 1.0):
            raise DataValidationError(f"{path}: line {lineno}: label {parts[0]} is not -1 or +1")
        labels.append(label)
    if not labels:
        raise DataValidationError(f"{path}: no samples")
    width = max(cols) + 1 if cols else 0
    X = sp.csr_matrix((vals, (rows, cols)), shape=(len(labels), width))
    return X, np.asarray(labels)


def write_libsvm(path, X, y):
    """Write rows of `X` (dense or sparse) with labels `y`; zeros are omitted."""
    X = sp.csr_matrix(X)
    with open(path, "w") as fh:
        for i in range(X.shape[0]):
            lo, hi = X.indptr[i], X.indptr[i + 1]
            order = np.argsort(X.indices[lo:hi])
            feats = " ".join(f"{X.indices[lo + k] + 1}:{float(X.data[lo + k])!r}"
                             for k in order if X.data[lo + k] != 0)
            fh.write(f"{float(y[i])!r} {feats}".rstrip() + "\n")


# -- synthetic data ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SyntheticQp:
    data: dict
    u_feas: np.ndarray

    def problem(self):
        from .benchmarks import qp_from_data
        return qp_from_data(self.data)


def generate_synthetic(kind, seed, n=None, m=None):
    """Seeded instance of one of ``fused-svm``, ``logistic``, ``dsvm``, ``qp``.

    Classification kinds use Gaussian features and labels
    ``sign(B'w + noise)`` for a planted ``w``; ``dsvm`` uses
    ``Q = M'M + 0.1 I``; ``qp`` builds blocks of two variables with
    ``b = A u_feas``.
    """
    defaults = {"fused-svm": (20, 50), "logistic": (10, 40), "dsvm": (3, 3), "qp": (6, 2)}
    if kind not in defaults:
        raise InvalidArgument(f"unknown kind {kind!r}; choose from {sorted(defaults)}")
    n = defaults[kind][0] if n is None else int(n)
    m = defaults[kind][1] if m is None else int(m)
    if n < 1 or m < 1 or (kind == "fused-svm" and n < 2):
        raise InvalidArgument(f"invalid sizes n={n}, m={m} for {kind}")
    if kind == "fused-svm":
        B, y = classification_data(seed, n, m)
        return FusedSvmInstance(B, y, 0.05, 0.05)
    if kind == "logistic":
        B, y = classification_data(seed, n, m, noise=1.0)
        return LogisticInstance(B, y, 0.05, gamma=0.01)
    rng = np.random.default_rng(seed)
    if kind == "dsvm":
        M = rng.standard_normal((m, n))
        y = rng.choice([-1.0, 1.0], size=n)
        return DsvmInstance(M.T @ M + 0.1 * np.eye(n), np.ones(n), y, c=1.0)
    sizes = [2] * (n // 2) + ([1] if n % 2 else [])
    data = block_qp_data(seed, tuple(sizes), m)
    return SyntheticQp(data, np.asarray(data["u_feas"]))


# -- configuration -----------------------------------------------------------------

@dataclass
class RunConfig:
    """Flat run description; see :func:`parse_config` for the text format.

    Exactly one data source: ``data`` (a file) or the synthetic generator
    (``seed``, ``n``, ``m``), which is used when ``data`` is empty.  Unset
    ``gamma`` means 1, or 0.01 for the logistic problem.
    """

    problem: str = "dsvm"
    data: str = None
    seed: int = 0
    n: int = None
    m: int = None
    variant: str = None
    eps: float = None
    gamma: float = None
    rho: float = None
    delta: float = 1.0
    theta: float = None
    alpha: float = None
    lam1: float = 0.05
    lam2: float = 0.05
    lam: float = 0.05
    c: float = 1.0
    schedule: str = "jacobian"
    tol_primal: float = 1e-6
    tol_change: float = 1e-6
    max_iter: int = 100_000
    workers: int = 1
    override: bool = False
    timing: bool = False
    trace_csv: str = "trace.csv"
    summary_json: str = "summary.json"

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise InvalidArgument(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.gamma is None:
            # the logistic loss has curvature ~1/(4m); a unit augmentation weight
            # makes the split badly conditioned
            self.gamma = 0.01 if self.problem == "logistic" else 1.0
        if self.variant is None:
            self.variant = "PJVAPP" if self.problem == "fused-svm" else "identity-core"
        if self.variant not in VARIANTS:
            raise InvalidArgument(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        allowed = {"fused-svm": {"PJVAPP", "LJVAPP", "LPVAPP", "identity-core"},
                   "logistic": {"newton-core", "identity-core"},
                   "dsvm": {"identity-core", "PJVAPP", "LJVAPP", "LPVAPP"},
                   "qp": {"identity-core", "PJVAPP", "LJVAPP", "LPVAPP"}}
        if self.variant not in allowed[self.problem]:
            raise InvalidArgument(f"variant {self.variant} is not available for {self.problem}")
        if self.workers < 1 or self.max_iter < 1:
            raise InvalidArgument("workers and max_iter must be at least 1")


def _coerce(name, raw, typ):
    if raw.lower() in ("none", ""):
        return None
    try:
        if typ is bool:
            if raw.lower() in ("true", "yes", "1", "on"):
                return True
            if raw.lower() in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
    except ValueError:
        raise InvalidArgument(f"{name}: cannot read {raw!r} as {typ.__name__}") from None
    return raw


_TYPES = {"seed": int, "n": int, "m": int, "max_iter": int, "workers": int,
          "override": bool, "timing": bool}


def parse_config(text):
    """Parse ``key = value`` lines (``#`` starts a comment); unknown keys are errors."""
    known = {f.name for f in fields(RunConfig)}
    floats = {"eps", "gamma", "rho", "delta", "theta", "alpha", "lam1", "lam2", "lam", "c",
              "tol_primal", "tol_change"}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if key not in known:
            raise ParseError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", lineno)
        typ = _TYPES.get(key, float if key in floats else str)
        values[key] = _coerce(key, val, typ)
    return RunConfig(**values)


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataValidationError(f"{path}: {exc.strerror or exc}") from exc
    return parse_config(text)


# -- results -----------------------------------------------------------------------

def write_trace_csv(trace, path):
    """One row per record; unavailable diagnostics are empty cells."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in trace:
            w.writerow([str(r.k)] + [_fmt(getattr(r, f)) for f in TRACE_FIELDS[1:]])


def read_trace_csv(path):
    recs = []
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = tuple(next(rd, ()))
        if header != CSV_HEADER:
            raise ParseError(f"{path}: unexpected header {header}", 1)
        for lineno, row in enumerate(rd, start=2):
            if len(row) != len(CSV_HEADER):
                raise ParseError(f"{path}: expected {len(CSV_HEADER)} cells", lineno)
            vals = [None if c == "" else float(c) for c in row[1:]]
            recs.append(TraceRecord(int(row[0]), *vals))
    return Trace(records=recs)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def write_summary_json(result, path):
    """Serialize a summary mapping; floats keep full precision (shortest round-trip form)."""
    with open(path, "w") as fh:
        json.dump(_jsonable(result), fh, indent=2, sort_keys=True)
        fh.write("\n")
