"""Datasets for the three task kinds, with loading, standardization and splits.

All numerics are 64-bit floats; gradient checks elsewhere rely on double
precision. A Dataset is immutable after construction (backing arrays are
marked read-only) and may be shared freely across threads.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSplit,
    EmptyDataset,
    InvalidLabel,
    ParseError,
)

# Row sums this close to 1 are left untouched on load so that
# save -> load round-trips are bitwise exact.
_LDL_SKIP_TOL = 1e-9
# Row sums within [1 - _LDL_ACCEPT, 1 + _LDL_ACCEPT] are renormalized;
# anything further off is treated as corrupt data.
_LDL_ACCEPT = 0.1


class TaskKind(enum.Enum):
    SINGLE_LABEL = "single_label"
    MULTI_LABEL = "multi_label"
    LABEL_DISTRIBUTION = "label_distribution"


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (n x d) plus label matrix (n x L) under one task kind."""

    features: np.ndarray
    labels: np.ndarray
    kind: TaskKind
    feature_names: list[str] = field(default_factory=list)
    label_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        feats = _freeze(self.features)
        labels = _freeze(self.labels)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        if feats.ndim != 2 or labels.ndim != 2:
            raise InvalidLabel("features and labels must be 2-D matrices")
        n, d = feats.shape
        nl, L = labels.shape
        if n != nl:
            raise InvalidLabel(f"feature rows ({n}) != label rows ({nl})")
        if n < 2 or d < 1 or L < 1:
            raise EmptyDataset(f"need n >= 2, d >= 1, L >= 1; got n={n}, d={d}, L={L}")
        if not np.isfinite(feats).all() or not np.isfinite(labels).all():
            raise InvalidLabel("NaN/Inf in features or labels")
        _validate_labels(labels, self.kind)
        if not self.feature_names:
            object.__setattr__(self, "feature_names", [f"x{i}" for i in range(d)])
        if not self.label_names:
            object.__setattr__(self, "label_names", [f"y{j}" for j in range(L)])
        if len(self.feature_names) != d or len(self.label_names) != L:
            raise InvalidLabel("name lists do not match matrix widths")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def num_labels(self) -> int:
        return self.labels.shape[1]

    def class_ids(self) -> np.ndarray:
        """Class index per sample (single-label datasets only)."""
        if self.kind is not TaskKind.SINGLE_LABEL:
            raise InvalidLabel("class_ids() requires a single-label dataset")
        return np.argmax(self.labels, axis=1)


def _validate_labels(labels: np.ndarray, kind: TaskKind) -> None:
    if kind is TaskKind.SINGLE_LABEL:
        is01 = (labels == 0.0) | (labels == 1.0)
        if not is01.all():
            raise InvalidLabel("single-label rows must contain only 0/1 entries")
        ones = (labels == 1.0).sum(axis=1)
        if not (ones == 1).all():
            bad = int(np.nonzero(ones != 1)[0][0])
            raise InvalidLabel(f"row {bad}: single-label rows must be one-hot")
    elif kind is TaskKind.MULTI_LABEL:
        is01 = (labels == 0.0) | (labels == 1.0)
        if not is01.all():
            raise InvalidLabel("multi-label entries must be 0 or 1")
    else:
        if (labels < 0.0).any():
            raise InvalidLabel("distribution entries must be non-negative")
        sums = labels.sum(axis=1)
        if not np.all(np.abs(sums - 1.0) <= 1e-6):
            bad = int(np.nonzero(np.abs(sums - 1.0) > 1e-6)[0][0])
            raise InvalidLabel(f"row {bad}: distribution must sum to 1 (got {sums[bad]!r})")


def _renormalize_distributions(labels: np.ndarray) -> np.ndarray:
    """Fix small rounding drift in distribution rows; reject corrupt rows.

    Rows whose sum is already within 1e-9 of 1 are kept bit-for-bit so that
    serialization round-trips exactly.
    """
    sums = labels.sum(axis=1)
    off = np.abs(sums - 1.0)
    if (off > _LDL_ACCEPT).any():
        bad = int(np.nonzero(off > _LDL_ACCEPT)[0][0])
        raise InvalidLabel(
            f"row {bad}: distribution sum {sums[bad]!r} outside [0.9, 1.1]"
        )
    fix = off > _LDL_SKIP_TOL
    if fix.any():
        labels = labels.copy()
        labels[fix] = labels[fix] / sums[fix, None]
    return labels


def _format_float(x: float) -> str:
    # repr of a Python float is the shortest string that round-trips.
    return repr(float(x))


def _resolve_label_columns(header: list[str], label_columns) -> list[int]:
    """Column spec: list of names, list of indices, or int k meaning last k."""
    if isinstance(label_columns, int):
        if not 1 <= label_columns < len(header):
            raise ParseError(f"label column count {label_columns} out of range")
        return list(range(len(header) - label_columns, len(header)))
    cols = list(label_columns)
    if not cols:
        raise ParseError("label_columns is empty")
    if all(isinstance(c, str) for c in cols):
        idx = []
        for c in cols:
            if c not in header:
                raise ParseError(f"label column {c!r} not in header")
            idx.append(header.index(c))
    elif all(isinstance(c, int) and not isinstance(c, bool) for c in cols):
        idx = cols
        for c in idx:
            if not 0 <= c < len(header):
                raise ParseError(f"label column index {c} out of range")
    else:
        raise ParseError("label_columns must be all names or all indices")
    if len(set(idx)) != len(idx):
        raise ParseError("duplicate label columns")
    return idx


def load_csv(path, kind: TaskKind, label_columns) -> Dataset:
    """Load a comma-separated file with a header row.

    ``label_columns`` selects the label matrix: a list of header names, a
    list of 0-based column indices, or an int k meaning the last k columns.
    Distribution rows with sums in [0.9, 1.1] are renormalized; rows further
    off raise InvalidLabel.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise EmptyDataset(f"{path}: no data rows")
    data = np.array(rows, dtype=np.float64)
    label_idx = _resolve_label_columns(header, label_columns)
    feature_idx = [c for c in range(len(header)) if c not in label_idx]
    if not feature_idx:
        raise ParseError("no feature columns left after removing labels")
    labels = data[:, label_idx]
    if kind is TaskKind.LABEL_DISTRIBUTION:
        labels = _renormalize_distributions(labels)
    return Dataset(
        features=data[:, feature_idx],
        labels=labels,
        kind=kind,
        feature_names=[header[c] for c in feature_idx],
        label_names=[header[c] for c in label_idx],
    )


def save_csv(ds: Dataset, path) -> None:
    """Write a dataset back to CSV; floats use shortest round-trip form."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + list(ds.label_names))
        for i in range(ds.n):
            writer.writerow(
                [_format_float(v) for v in ds.features[i]]
                + [_format_float(v) for v in ds.labels[i]]
            )


def load_sparse(path, kind: TaskKind, n_features=None, n_labels=None) -> Dataset:
    """Load the sparse text format (one sample per line).

    Line layout: ``<labels> <idx>:<val> <idx>:<val> ...`` with 0-based
    feature indices. The labels field depends on the task kind:
    single-label: one class index; multi-label: comma-separated positive
    class indices or ``-`` for none; label-distribution: comma-separated
    ``idx:prob`` entries. Widths are inferred from the data unless given.
    """
    label_specs = []
    feat_entries = []
    max_feat = -1
    max_label = -1
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            label_field, feats = parts[0], parts[1:]
            entries = []
            for tok in feats:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: bad feature token {tok!r}") from None
                if idx < 0:
                    raise ParseError(f"{path}:{lineno}: negative feature index")
                entries.append((idx, val))
                max_feat = max(max_feat, idx)
            spec = _parse_sparse_labels(label_field, kind, path, lineno)
            for idx, _ in spec:
                max_label = max(max_label, idx)
            label_specs.append(spec)
            feat_entries.append(entries)
    if not label_specs:
        raise EmptyDataset(f"{path}: no samples")
    d = n_features if n_features is not None else max_feat + 1
    L = n_labels if n_labels is not None else max_label + 1
    if d < 1 or L < 1:
        raise ParseError("cannot infer matrix widths from file; pass n_features/n_labels")
    features = np.zeros((len(label_specs), d))
    labels = np.zeros((len(label_specs), L))
    for i, (entries, spec) in enumerate(zip(feat_entries, label_specs)):
        for idx, val in entries:
            if idx >= d:
                raise ParseError(f"feature index {idx} >= n_features {d}")
            features[i, idx] = val
        for idx, val in spec:
            if idx >= L:
                raise ParseError(f"label index {idx} >= n_labels {L}")
            labels[i, idx] = val
    if kind is TaskKind.LABEL_DISTRIBUTION:
        labels = _renormalize_distributions(labels)
    return Dataset(features=features, labels=labels, kind=kind)


def _parse_sparse_labels(field_s: str, kind: TaskKind, path, lineno):
    try:
        if kind is TaskKind.SINGLE_LABEL:
            return [(int(field_s), 1.0)]
        if kind is TaskKind.MULTI_LABEL:
            if field_s == "-":
                return []
            return [(int(tok), 1.0) for tok in field_s.split(",")]
        out = []
        for tok in field_s.split(","):
            idx_s, val_s = tok.split(":", 1)
            out.append((int(idx_s), float(val_s)))
        return out
    except ValueError:
        raise ParseError(f"{path}:{lineno}: bad label field {field_s!r}") from None


def save_sparse(ds: Dataset, path) -> None:
    """Write the sparse text format; zero entries are dropped."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(ds.n):
            if ds.kind is TaskKind.SINGLE_LABEL:
                label_field = str(int(np.argmax(ds.labels[i])))
            elif ds.kind is TaskKind.MULTI_LABEL:
                pos = np.nonzero(ds.labels[i] == 1.0)[0]
                label_field = ",".join(str(int(p)) for p in pos) if len(pos) else "-"
            else:
                nz = np.nonzero(ds.labels[i] != 0.0)[0]
                label_field = ",".join(f"{int(j)}:{_format_float(ds.labels[i, j])}" for j in nz)
            feats = " ".join(
                f"{j}:{_format_float(ds.features[i, j])}"
                for j in np.nonzero(ds.features[i] != 0.0)[0]
            )
            fh.write(f"{label_field} {feats}".rstrip() + "\n")


@dataclass(frozen=True)
class FeatureScaler:
    """Per-feature centering/scaling transform captured from training data.

    Uses the population std convention (ddof=0). Constant columns are
    centered and left unscaled, so they map to all-zero columns.
    """

    mean: np.ndarray
    std: np.ndarray

    def transform(self, features: np.ndarray) -> np.ndarray:
        scale = np.where(self.std == 0.0, 1.0, self.std)
        return (np.asarray(features, dtype=np.float64) - self.mean) / scale


def standardize_features(ds: Dataset) -> tuple[Dataset, FeatureScaler]:
    """Standardize each feature column to mean 0, population std 1.

    Returns the standardized dataset plus the fitted scaler for applying
    the identical transform to held-out data.
    """
    mean = ds.features.mean(axis=0)
    std = ds.features.std(axis=0)  # population convention (ddof=0)
    scaler = FeatureScaler(mean=mean, std=std)
    out = Dataset(
        features=scaler.transform(ds.features),
        labels=ds.labels,
        kind=ds.kind,
        feature_names=list(ds.feature_names),
        label_names=list(ds.label_names),
    )
    return out, scaler


@dataclass(frozen=True)
class Split:
    """Disjoint train/test index lists over a dataset."""

    train_indices: np.ndarray
    test_indices: np.ndarray

    def __post_init__(self):
        tr = np.asarray(self.train_indices, dtype=np.int64)
        te = np.asarray(self.test_indices, dtype=np.int64)
        object.__setattr__(self, "train_indices", tr)
        object.__setattr__(self, "test_indices", te)
        if tr.size == 0 or te.size == 0:
            raise DegenerateSplit("train and test must both be non-empty")
        if np.intersect1d(tr, te).size:
            raise DegenerateSplit("train and test overlap")
        if tr.min() < 0 or te.min() < 0:
            raise DegenerateSplit("negative index")


def split(ds: Dataset, test_fraction: float, seed: int) -> Split:
    """Deterministic train/test split.

    Stratified by class for single-label data when every class has at
    least two samples; plain uniform otherwise. ``test_fraction`` is
    rounded half-up to a sample count.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DegenerateSplit(f"test_fraction must be in (0,1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    n = ds.n
    stratify = False
    if ds.kind is TaskKind.SINGLE_LABEL:
        classes = ds.class_ids()
        counts = np.bincount(classes, minlength=ds.num_labels)
        present = counts[counts > 0]
        stratify = bool(present.size and present.min() >= 2)
    if stratify:
        train_parts, test_parts = [], []
        for c in np.unique(classes):
            members = np.nonzero(classes == c)[0]
            perm = rng.permutation(members)
            n_test = int(test_fraction * len(members) + 0.5)
            test_parts.append(perm[:n_test])
            train_parts.append(perm[n_test:])
        test_idx = np.concatenate(test_parts)
        train_idx = np.concatenate(train_parts)
    else:
        perm = rng.permutation(n)
        n_test = int(test_fraction * n + 0.5)
        test_idx = perm[:n_test]
        train_idx = perm[n_test:]
    if train_idx.size == 0 or test_idx.size == 0:
        raise DegenerateSplit(
            f"fraction {test_fraction} leaves train={train_idx.size}, test={test_idx.size}"
        )
    return Split(train_indices=np.sort(train_idx), test_indices=np.sort(test_idx))
