"""CSV series with unit-suffixed column names and a ``# key=value`` header block."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SchemaError

UNIT_SUFFIXES = ("_V", "_A", "_mW", "_eV", "_s", "_um", "_cps", "_Hz", "_frac", "_photons", "_1")

SCHEMAS = {
    "iv": ("bias_V", "current_A"),
    "pl_vs_bias": ("bias_V", "pl_cps"),
    "trace": ("time_s", "pl_cps"),
    "decay": ("time_s", "pl_cps"),
    "power": ("power_mW", "fast_rate_Hz"),
    "spectrum": ("energy_eV", "pl_cps"),
    "delay": ("delay_s", "overshoot_norm_s"),
}


@dataclass
class Series:
    """Named, equal-length numeric columns plus free-form metadata."""

    columns: dict[str, np.ndarray]
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        lengths = {np.asarray(v).shape for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"columns differ in length: {sorted(lengths)}")
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __len__(self) -> int:
        return 0 if not self.columns else len(next(iter(self.columns.values())))

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def xy(self, x: str, y: str) -> np.ndarray:
        """Two columns stacked as fit input rows; non-finite rows are dropped."""
        arr = np.column_stack([self.columns[x], self.columns[y]])
        return arr[np.all(np.isfinite(arr), axis=1)]


def _check_unit(name: str):
    if not name.endswith(UNIT_SUFFIXES):
        raise SchemaError(f"column {name!r} lacks a unit suffix ({', '.join(UNIT_SUFFIXES)})")


def _fmt(v: float) -> str:
    if math.isnan(v):
        return "nan"
    return repr(float(v))


def write_csv(path, series: Series, meta: dict | None = None) -> Path:
    """Write ``series`` with a leading comment block of ``# key=value`` lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = dict(series.meta)
    header.update(meta or {})
    for name in series.names:
        _check_unit(name)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for k, v in header.items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(series.names)
        cols = [series[n] for n in series.names]
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])
    return path


def read_meta(path) -> dict[str, str]:
    meta = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, sep, value = line[1:].strip().partition("=")
            if sep:
                meta[key.strip()] = value.strip()
    return meta


def load_series(path, schema=None) -> Series:
    """Read a CSV written by :func:`write_csv` (or by hand).

    ``schema`` is a schema name from :data:`SCHEMAS` or a sequence of required
    column names.  A required column present with a different unit suffix is
    reported as a unit mismatch.  Extra columns are dropped with a warning.
    Required columns must be finite; without a schema every column is kept
    and ``nan`` cells (written for flagged rows) are allowed.
    """
    path = Path(path)
    required = SCHEMAS[schema] if isinstance(schema, str) else tuple(schema or ())
    meta = read_meta(path)
    with path.open(encoding="utf-8", newline="") as fh:
        lines = [(i + 1, ln) for i, ln in enumerate(fh) if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise SchemaError(f"{path}: no header row")
    reader = csv.reader([ln for _, ln in lines])
    rows = list(reader)
    header = [h.strip() for h in rows[0]]
    index = {h: k for k, h in enumerate(header)}
    for name in required:
        if name not in index:
            stem = name.rsplit("_", 1)[0]
            other = [h for h in header if h.rsplit("_", 1)[0] == stem]
            if other:
                raise SchemaError(f"{path}: column {other[0]!r} has the wrong unit, expected {name!r}")
            raise SchemaError(f"{path}: missing column {name!r}")
    keep = list(required) if required else header
    extra = [h for h in header if h not in keep]
    if extra:
        warnings.warn(f"{path}: ignoring extra columns {extra}", stacklevel=2)
    data = {name: [] for name in keep}
    for (lineno, _), row in zip(lines[1:], rows[1:]):
        if len(row) != len(header):
            raise SchemaError(f"{path}: line {lineno} has {len(row)} cells, expected {len(header)}")
        for name in keep:
            cell = row[index[name]].strip()
            try:
                value = float(cell)
            except ValueError:
                raise SchemaError(f"{path}: line {lineno}, column {name!r}: non-numeric value {cell!r}") from None
            if not math.isfinite(value) and name in required:
                raise SchemaError(f"{path}: line {lineno}, column {name!r}: non-finite value {cell!r}")
            data[name].append(value)
    return Series({k: np.array(v) for k, v in data.items()}, meta)
