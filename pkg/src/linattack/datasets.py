"""CSV ingestion and seeded synthetic datasets."""
import csv
import os

import numpy as np

from .errors import CsvParseError
from .regress import Dataset

ISTANBUL_FEATURES = ("SP", "DAX", "FTSE", "NIKKEI", "BOVESPA", "EU", "EM")
ISTANBUL_ENV = "ISTANBUL_CSV"


def make_rng(seed):
    """Counter-based generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & (2 ** 64 - 1)))


def _is_date_name(name):
    return name.strip().lower() in ("date", "day", "time", "timestamp")


def _read_rows(path):
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError("file is empty", line=1) from None
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            rows.append((reader.line_num, row))
    return [h.strip() for h in header], rows


def _numeric(rows, keep, width):
    out = np.empty((len(rows), len(keep)))
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise CsvParseError(f"expected {width} fields, found {len(row)}", line=lineno)
        for k, j in enumerate(keep):
            cell = row[j].strip()
            try:
                out[r, k] = float(cell)
            except ValueError:
                raise CsvParseError(f"non-numeric cell {cell!r} in column {j + 1}", line=lineno) from None
    return out


def load_csv(path, response=None, features=None, standardize=False, intercept=False) -> Dataset:
    """Read a header-first CSV into a Dataset.

    By default the first column is the response and the rest are features; a
    leading column named like ``date`` is skipped. ``response`` and
    ``features`` select columns by name or zero-based position instead.
    """
    header, rows = _read_rows(path)
    width = len(header)
    cols = list(range(width))
    if cols and _is_date_name(header[0]):
        cols = cols[1:]

    def pick(key):
        if isinstance(key, int):
            return key
        if key in header:
            return header.index(key)
        raise KeyError(f"column {key!r} not in header {header}")

    r = pick(response) if response is not None else cols[0]
    if features is None:
        f = [j for j in cols if j != r]
    else:
        f = [pick(k) for k in features]
    data = _numeric(rows, [r] + f, width)
    y, X = data[:, 0], data[:, 1:]
    names = [header[j] for j in f]
    if standardize:
        X = (X - X.mean(axis=0)) / X.std(axis=0)
        y = y - y.mean()
    if intercept:
        X = np.hstack([X, np.ones((X.shape[0], 1))])
        names = names + ["intercept"]
    return Dataset(X, y, names)


def load_istanbul(path, response="ISE", **kw) -> Dataset:
    """Load the Istanbul returns file: one ISE column as response, the seven
    international indexes as features (any other ISE column is dropped)."""
    header, _ = _read_rows(path)
    upper = [h.upper() for h in header]
    feats = []
    for name in ISTANBUL_FEATURES:
        hits = [j for j, h in enumerate(upper) if h == name or h.startswith(name)]
        if not hits:
            raise KeyError(f"feature column {name} not found in {header}")
        feats.append(hits[0])
    resp = [j for j, h in enumerate(upper) if h.startswith(response.upper())]
    if not resp:
        raise KeyError(f"response column {response} not found in {header}")
    return load_csv(path, response=resp[0], features=feats, **kw)


def synthetic_regression(n=40, m=2, seed=0, noise=0.1, scale=1.0) -> Dataset:
    rng = make_rng(seed)
    X = scale * rng.standard_normal((n, m))
    beta = rng.standard_normal(m)
    y = X @ beta + noise * scale * rng.standard_normal(n)
    return Dataset(X, y)


def synthetic_istanbul(seed=20090105, n=536) -> Dataset:
    """Return-like stand-in with the Istanbul shape (536 x 7).

    Daily returns of seven correlated indexes from a two-factor model with
    Student-t shocks, and a response loading on the same factors.
    """
    rng = make_rng(seed)
    k = len(ISTANBUL_FEATURES)
    factors = rng.standard_t(5, size=(n, 2)) * np.array([0.009, 0.006])
    load = np.column_stack([rng.uniform(0.5, 1.2, k), rng.uniform(-0.6, 0.8, k)])
    X = factors @ load.T + 0.006 * rng.standard_t(5, size=(n, k))
    beta = np.array([0.15, 0.25, 0.1, 0.05, 0.2, 0.4, 0.3])
    y = X @ beta + 0.012 * rng.standard_t(5, size=n)
    return Dataset(X, y, list(ISTANBUL_FEATURES))


def istanbul_or_synthetic(path=None):
    """Real file if given (or named by $ISTANBUL_CSV), else the stand-in.

    Returns (dataset, source label).
    """
    path = path or os.environ.get(ISTANBUL_ENV)
    if path and os.path.exists(path):
        return load_istanbul(path), f"csv:{path}"
    return synthetic_istanbul(), "synthetic"


def write_csv(path, data: Dataset, response_name="y"):
    names = list(data.feature_names) if data.feature_names else [f"x{j + 1}" for j in range(data.m)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([response_name] + names)
        for yi, row in zip(data.y, data.X):
            w.writerow([repr(float(yi))] + [repr(float(v)) for v in row])
