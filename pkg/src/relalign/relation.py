"""Pairwise relation functions for both spaces.

The decision-space relation compares two label rows; the feature-space
relation compares two embeddings. Both are pure functions. A fitted
target transform optionally rescales decision-space targets into the
range reachable by squared distances between normalized embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateTargets, LengthMismatch


def label_l1(y_i, y_j) -> float:
    """L1 distance between two label rows: sum_l |y_il - y_jl|.

    Symmetric, non-negative, zero on identical rows. For one-hot rows it
    is 0 for equal classes and exactly 2 otherwise.
    """
    y_i = np.asarray(y_i, dtype=np.float64)
    y_j = np.asarray(y_j, dtype=np.float64)
    if y_i.shape != y_j.shape:
        raise LengthMismatch(f"label rows differ in length: {y_i.shape} vs {y_j.shape}")
    return float(np.abs(y_i - y_j).sum())


def label_l1_rows(Y_i: np.ndarray, Y_j: np.ndarray) -> np.ndarray:
    """Row-wise label_l1 over two stacks of label rows."""
    Y_i = np.asarray(Y_i, dtype=np.float64)
    Y_j = np.asarray(Y_j, dtype=np.float64)
    if Y_i.shape != Y_j.shape:
        raise LengthMismatch(f"label stacks differ in shape: {Y_i.shape} vs {Y_j.shape}")
    return np.abs(Y_i - Y_j).sum(axis=1)


# Extension point: new decision-space relations register here by name and
# must be symmetric, non-negative and zero on the diagonal. A KL-style
# relation for distribution labels would slot in as {"kl": fn} plus a
# row-wise sibling in _ROW_RELATIONS.
RELATIONS = {"l1": label_l1}
_ROW_RELATIONS = {"l1": label_l1_rows}


def get_relation(name: str):
    try:
        return RELATIONS[name]
    except KeyError:
        raise ConfigError(f"unknown relation {name!r}; known: {sorted(RELATIONS)}") from None


def get_row_relation(name: str):
    try:
        return _ROW_RELATIONS[name]
    except KeyError:
        raise ConfigError(f"unknown relation {name!r}; known: {sorted(_ROW_RELATIONS)}") from None


def feature_distance(u, v) -> float:
    """Euclidean distance between two embeddings."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise LengthMismatch(f"embeddings differ in length: {u.shape} vs {v.shape}")
    return float(np.linalg.norm(u - v))


@dataclass(frozen=True)
class FittedTransform:
    """Linear map applied to decision-space targets before training.

    kind "identity" leaves targets alone. kind "scale" maps the largest
    training target onto ``max_value`` so targets stay reachable by
    squared distances of normalized embeddings (which live in [0, 4]).
    """

    kind: str = "identity"
    scale: float = 1.0
    max_value: float = 4.0

    def apply(self, targets):
        t = np.asarray(targets, dtype=np.float64)
        return t if self.kind == "identity" else t * self.scale


def fit_target_transform(targets, mode: dict | None = None) -> FittedTransform:
    """Fit a target transform on training targets.

    ``mode`` is the config mapping: {"kind": "identity"} or
    {"kind": "scale", "max": 4.0}. Scaling requires a positive maximum
    target; all-zero targets raise DegenerateTargets.
    """
    mode = mode or {"kind": "identity"}
    kind = mode.get("kind", "identity")
    t = np.asarray(targets, dtype=np.float64)
    if t.size == 0:
        raise DegenerateTargets("no targets to fit")
    if kind == "identity":
        return FittedTransform()
    if kind == "scale":
        max_value = float(mode.get("max", 4.0))
        g_max = float(t.max())
        if g_max <= 0.0:
            raise DegenerateTargets("all targets are zero; cannot fit scale transform")
        return FittedTransform(kind="scale", scale=max_value / g_max, max_value=max_value)
    raise ConfigError(f"unknown target_transform kind {kind!r}")
