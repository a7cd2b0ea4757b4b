"""Data containers, file loaders, preprocessing and the confounded-data generator.

Matrices are stored features-by-samples (``d x n``) in memory. Files on disk
hold one sample per row.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


class DatasetError(ValueError):
    """Raised when a dataset cannot be parsed or violates its invariants."""


@dataclass(frozen=True)
class DataMatrix:
    """Feature-by-sample data matrix with optional class labels.

    Parameters
    ----------
    values : ndarray of shape (d, n)
        Column ``i`` is sample ``i``.
    feature_ids : tuple of str, optional
        One identifier per feature row. Defaults to ``f0 .. f{d-1}``.
    labels : ndarray of shape (n,), optional
        Integer labels in ``[0, n_classes)``.
    n_classes : int, optional
        Inferred from ``labels`` when omitted.
    """

    values: np.ndarray
    feature_ids: tuple = ()
    labels: np.ndarray | None = None
    n_classes: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DatasetError(f"data must be 2-D, got shape {values.shape}")
        d, n = values.shape
        if n < 2:
            raise DatasetError(f"need at least 2 samples, got {n}")
        if d < 2:
            raise DatasetError(f"need at least 2 features, got {d}")
        if not np.all(np.isfinite(values)):
            raise DatasetError("data contains non-finite entries")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

        ids = tuple(str(f) for f in self.feature_ids) or tuple(f"f{i}" for i in range(d))
        if len(ids) != d:
            raise DatasetError(f"{len(ids)} feature ids for {d} features")
        object.__setattr__(self, "feature_ids", ids)

        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (n,):
                raise DatasetError(f"labels must have shape ({n},), got {labels.shape}")
            if not np.all(labels == np.round(labels)):
                raise DatasetError("labels must be integers")
            labels = labels.astype(int)
            n_classes = self.n_classes if self.n_classes is not None else int(labels.max()) + 1
            if labels.min() < 0 or labels.max() >= n_classes:
                raise DatasetError(f"labels must lie in [0, {n_classes})")
            labels.flags.writeable = False
            object.__setattr__(self, "labels", labels)
            object.__setattr__(self, "n_classes", int(n_classes))

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_samples(cls, samples, labels=None, feature_ids=(), n_classes=None) -> "DataMatrix":
        """Build from a sample-by-feature array (the scikit-learn orientation)."""
        return cls(np.asarray(samples, dtype=float).T, tuple(feature_ids), labels, n_classes)

    def with_values(self, values) -> "DataMatrix":
        return DataMatrix(values, self.feature_ids, self.labels, self.n_classes)


@dataclass(frozen=True)
class TreatmentDesign:
    """Per-feature binary split of the samples into treated and control groups."""

    E: np.ndarray
    C: np.ndarray
    treated_count: np.ndarray
    control_count: np.ndarray
    degenerate: frozenset = field(default_factory=frozenset)

    def contrast(self) -> np.ndarray:
        """Signed group-mean coefficients ``E/|treated| - C/|control|``.

        Rows of degenerate features are zero, which drops them from any
        balancing sum built on these coefficients.
        """
        t = np.where(self.treated_count > 0, self.treated_count, 1)[:, None]
        c = np.where(self.control_count > 0, self.control_count, 1)[:, None]
        coef = self.E / t - self.C / c
        if self.degenerate:
            coef[sorted(self.degenerate)] = 0.0
        return coef


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the confounded clustering benchmark."""

    n: int = 300
    n_clusters: int = 3
    n_causal: int = 10
    n_spurious: int = 10
    n_noise: int = 80
    confound_strength: float = 2.0
    noise_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.n_causal, self.n_spurious, self.n_noise) < 0:
            raise ValueError("feature counts must be non-negative")
        if self.n_causal + self.n_spurious + self.n_noise < 2:
            raise ValueError("need at least 2 features in total")
        if self.n_clusters < 1 or self.n < 2:
            raise ValueError("need n >= 2 and n_clusters >= 1")
        if self.confound_strength < 0:
            raise ValueError("confound_strength must be >= 0")
        if self.noise_sigma <= 0:
            raise ValueError("noise_sigma must be > 0")

    @property
    def d(self) -> int:
        return self.n_causal + self.n_spurious + self.n_noise


# -- loading -----------------------------------------------------------------

def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _encode_labels(raw):
    raw = np.asarray(raw)
    if not np.all(raw == np.round(raw)):
        raise DatasetError("label column must hold integers")
    classes, labels = np.unique(raw.astype(int), return_inverse=True)
    return labels, len(classes)


def load_dataset(path, format: str = "csv", label_column: bool | None = None) -> DataMatrix:
    """Read a dataset file into a :class:`DataMatrix`.

    Parameters
    ----------
    path : str or Path
    format : {"csv", "libsvm"}
    label_column : bool, optional
        CSV only. ``None`` detects a trailing column named ``label`` in the
        header; ``True``/``False`` force the last column to be read as
        labels or as a feature.

    Labels are re-encoded to ``0 .. n_classes-1`` in sorted order.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    if format == "csv":
        return _load_csv(path, label_column)
    if format == "libsvm":
        return _load_libsvm(path)
    raise DatasetError(f"unknown format {format!r}; expected 'csv' or 'libsvm'")


def _load_csv(path: Path, label_column: bool | None) -> DataMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(tok.strip() for tok in r)]
    if not rows:
        raise DatasetError(f"{path}: no samples")

    header = None
    if not all(_is_number(tok) for tok in rows[0]):
        header = [tok.strip() for tok in rows[0]]
        rows = rows[1:]
    if not rows:
        raise DatasetError(f"{path}: no samples")

    width = len(rows[0])
    for lineno, r in enumerate(rows, start=2 if header else 1):
        if len(r) != width:
            raise DatasetError(f"{path}:{lineno}: expected {width} fields, got {len(r)}")
    try:
        table = np.array([[float(tok) for tok in r] for r in rows])
    except ValueError as exc:
        raise DatasetError(f"{path}: {exc}") from None

    if label_column is None:
        label_column = header is not None and header[-1].lower() == "label"
    labels = n_classes = None
    if label_column:
        labels, n_classes = _encode_labels(table[:, -1])
        table = table[:, :-1]
        if header is not None:
            header = header[:-1]
    if not np.all(np.isfinite(table)):
        raise DatasetError(f"{path}: non-finite entries")
    return DataMatrix(table.T, tuple(header or ()), labels, n_classes)


def _load_libsvm(path: Path) -> DataMatrix:
    from sklearn.datasets import load_svmlight_file

    if path.stat().st_size == 0:
        raise DatasetError(f"{path}: no samples")
    try:
        X, y = load_svmlight_file(str(path), zero_based=False)
    except ValueError as exc:
        raise DatasetError(f"{path}: {exc}") from None
    labels, n_classes = _encode_labels(y)
    return DataMatrix(X.toarray().T, (), labels, n_classes)


def save_csv(data: DataMatrix, path) -> None:
    """Write samples as rows with a header; labels go to a trailing ``label`` column."""
    header = list(data.feature_ids)
    table = data.values.T
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if data.labels is not None:
            w.writerow(header + ["label"])
            for row, lab in zip(table, data.labels):
                w.writerow([repr(float(v)) for v in row] + [int(lab)])
        else:
            w.writerow(header)
            for row in table:
                w.writerow([repr(float(v)) for v in row])


# -- preprocessing -------------------------------------------------------------

def standardize(data: DataMatrix) -> tuple[DataMatrix, np.ndarray]:
    """Scale each feature to zero mean and unit sample standard deviation.

    Returns
    -------
    data : DataMatrix
    constant : ndarray of int
        Indices of zero-variance features; their rows are set to zero.
    """
    X = data.values
    mean = X.mean(axis=1, keepdims=True)
    centered = X - mean
    std = centered.std(axis=1, ddof=1, keepdims=True)
    scale = np.abs(mean) + 1.0
    constant = np.flatnonzero(std[:, 0] <= 1e-12 * scale[:, 0])
    std[constant] = 1.0
    out = centered / std
    out[constant] = 0.0
    if constant.size:
        logger.info("standardize: %d constant feature(s) zeroed: %s",
                    constant.size, constant.tolist()[:10])
    return data.with_values(out), constant


def derive_treatment(data: DataMatrix) -> TreatmentDesign:
    """Binarize every feature into treated (above median) and control samples.

    Ties with the median go to control. A feature with exactly two distinct
    values is split on those values directly, so 0/1 features keep their
    coding regardless of which value is the majority.
    """
    X = data.values
    d, n = X.shape
    med = np.median(X, axis=1, keepdims=True)
    E = X > med
    lo = X.min(axis=1)
    hi = X.max(axis=1)
    for r in range(d):
        if lo[r] < hi[r] and np.unique(X[r]).size == 2:
            E[r] = X[r] == hi[r]
    E = E.astype(float)
    C = 1.0 - E
    treated = E.sum(axis=1).astype(int)
    control = n - treated
    degenerate = frozenset(int(r) for r in np.flatnonzero((treated == 0) | (control == 0)))
    return TreatmentDesign(E, C, treated, control, degenerate)


# -- synthetic benchmark -------------------------------------------------------

def synthesize(spec: SyntheticSpec) -> tuple[DataMatrix, dict[str, list[int]]]:
    """Draw a clustering problem whose spurious features share a confounder with the label.

    Samples get a uniform cluster ``c``. A confounder ``u = c + N(0, sigma)``
    drives the spurious features, ``x = strength * a_f * u + noise``, so they
    correlate with ``c`` without carrying cluster structure of their own.
    Causal features shift their mean per cluster; noise features are standard
    normal. Feature order is shuffled, and the returned index sets give the
    positions of each kind.
    """
    rng = np.random.default_rng(spec.seed)
    n, K, sigma = spec.n, spec.n_clusters, spec.noise_sigma
    c = rng.integers(K, size=n)
    u = c + rng.normal(0.0, sigma, size=n)

    levels = np.linspace(-1.0, 1.0, K) if K > 1 else np.zeros(1)
    causal = np.empty((spec.n_causal, n))
    for f in range(spec.n_causal):
        shifts = rng.uniform(1.0, 2.0) * rng.permutation(levels)
        causal[f] = shifts[c] + rng.normal(0.0, sigma, size=n)

    loadings = rng.uniform(0.5, 1.0, size=spec.n_spurious) * rng.choice([-1.0, 1.0], size=spec.n_spurious)
    spurious = (spec.confound_strength * loadings[:, None] * u[None, :]
                + rng.normal(0.0, sigma, size=(spec.n_spurious, n)))
    noise = rng.normal(0.0, 1.0, size=(spec.n_noise, n))

    stacked = np.vstack([causal, spurious, noise])
    perm = rng.permutation(spec.d)
    X = stacked[perm]
    kind = np.repeat([0, 1, 2], [spec.n_causal, spec.n_spurious, spec.n_noise])[perm]
    truth = {name: np.flatnonzero(kind == k).tolist()
             for k, name in enumerate(("causal", "spurious", "noise"))}
    return DataMatrix(X, (), c, K), truth
