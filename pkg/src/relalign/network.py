"""MLP encoder: forward traces, exact pairwise backprop, serialization.

The encoder stacks tanh layers and (by default) normalizes the final
activation onto the unit sphere. The pair loss couples two forward
traces:

    loss = 1/4 * (||f_i - f_j||^2 - target)^2
           + lam * sum_m (||W_m||_F^2 + ||b_m||^2)

``pair_backward`` returns the exact gradient of this loss via the
layerwise delta recursion, including the normalization Jacobian when
output normalization is on. With normalization off, the recursion
reduces to the closed-form pairwise update (the 1/4 in the loss cancels
the chain factor of the squared distance, so the top-layer delta is
simply (D^2 - target) * s'(z) * (f_i - f_j)).
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadArchitecture,
    DimensionMismatch,
    SchemaError,
    TraceMismatch,
)

# Guard on the normalization denominator; the gradient is treated as zero
# through the guard branch (an all-zero pre-activation output occurs at W=0).
NORM_EPS = 1e-12


@dataclass
class MlpModel:
    """Stack of (W, b) layers; W has shape (out, in).

    All layers use tanh; ``linear_last=True`` is a documented variant that
    skips the activation on the final layer. ``normalize_output`` divides
    the final activation by max(norm, NORM_EPS).
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    normalize_output: bool = True
    linear_last: bool = False

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    def copy(self) -> "MlpModel":
        return MlpModel(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            normalize_output=self.normalize_output,
            linear_last=self.linear_last,
        )

    def regularizer(self) -> float:
        """sum_m ||W_m||_F^2 + ||b_m||^2"""
        return float(
            sum(float((w * w).sum()) for w in self.weights)
            + sum(float((b * b).sum()) for b in self.biases)
        )


def init_model(layer_sizes, seed: int, normalize_output: bool = True,
               linear_last: bool = False) -> MlpModel:
    """Fresh model: weights i.i.d. uniform on [-0.2, 0.2], biases zero."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise BadArchitecture(f"need >= 2 layer sizes, all >= 1; got {layer_sizes}")
    rng = np.random.default_rng(seed)
    weights = [rng.uniform(-0.2, 0.2, size=(out, inp)) for inp, out in zip(sizes, sizes[1:])]
    biases = [np.zeros(out) for out in sizes[1:]]
    return MlpModel(weights=weights, biases=biases,
                    normalize_output=normalize_output, linear_last=linear_last)


@dataclass
class ForwardTrace:
    """Intermediate state of one forward pass, kept for the backward pass.

    activations[0] is the input; activations[m] is h^(m). preactivations[m-1]
    holds the affine output feeding layer m's nonlinearity.
    """

    activations: list[np.ndarray]
    preactivations: list[np.ndarray]
    prenorm: np.ndarray
    prenorm_norm: float
    embedding: np.ndarray


def forward(model: MlpModel, x) -> ForwardTrace:
    """Run one sample through the encoder, keeping per-layer state."""
    h = np.asarray(x, dtype=np.float64)
    if h.shape != (model.input_dim,):
        raise DimensionMismatch(
            f"input has shape {h.shape}, model expects ({model.input_dim},)"
        )
    activations = [h]
    preactivations = []
    M = model.num_layers
    for m, (W, b) in enumerate(zip(model.weights, model.biases), start=1):
        z = W @ h + b
        preactivations.append(z)
        h = z if (model.linear_last and m == M) else np.tanh(z)
        activations.append(h)
    nrm = float(np.linalg.norm(h))
    if model.normalize_output:
        embedding = h / max(nrm, NORM_EPS)
    else:
        embedding = h
    return ForwardTrace(
        activations=activations,
        preactivations=preactivations,
        prenorm=h,
        prenorm_norm=nrm,
        embedding=embedding,
    )


@dataclass
class PairGradient:
    """Per-layer loss gradients, congruent with MlpModel shapes."""

    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]

    def scaled(self, factor: float) -> "PairGradient":
        return PairGradient(
            d_weights=[g * factor for g in self.d_weights],
            d_biases=[g * factor for g in self.d_biases],
        )

    def add_(self, other: "PairGradient") -> None:
        for a, b in zip(self.d_weights, other.d_weights):
            a += b
        for a, b in zip(self.d_biases, other.d_biases):
            a += b

    def max_abs(self) -> float:
        parts = [float(np.abs(g).max()) for g in self.d_weights + self.d_biases]
        return max(parts)


def _check_trace(model: MlpModel, trace: ForwardTrace) -> None:
    sizes = model.layer_sizes
    if len(trace.activations) != len(sizes):
        raise TraceMismatch("trace depth does not match model")
    for h, s in zip(trace.activations, sizes):
        if h.shape != (s,):
            raise TraceMismatch(f"trace activation shape {h.shape} != ({s},)")


def _accumulate_sample(model, trace, grad_embedding, d_weights, d_biases):
    """Backpropagate d(loss)/d(embedding) for one sample into the gradient lists."""
    g = grad_embedding
    if model.normalize_output:
        if trace.prenorm_norm < NORM_EPS:
            return  # guard branch: embedding is constant wrt parameters here
        f = trace.embedding
        g = (g - (f @ g) * f) / trace.prenorm_norm
    M = model.num_layers
    h_top = trace.activations[M]
    delta = g if model.linear_last else (1.0 - h_top * h_top) * g
    for m in range(M, 0, -1):
        h_prev = trace.activations[m - 1]
        d_weights[m - 1] += np.outer(delta, h_prev)
        d_biases[m - 1] += delta
        if m > 1:
            back = model.weights[m - 1].T @ delta
            delta = (1.0 - h_prev * h_prev) * back


def pair_loss(model: MlpModel, trace_i: ForwardTrace, trace_j: ForwardTrace,
              target: float, lam: float) -> float:
    """Loss of one pair without computing gradients."""
    diff = trace_i.embedding - trace_j.embedding
    err = float(diff @ diff) - target
    return 0.25 * err * err + lam * model.regularizer()


def pair_backward(model: MlpModel, trace_i: ForwardTrace, trace_j: ForwardTrace,
                  target: float, lam: float) -> tuple[float, PairGradient]:
    """Loss and exact gradient of the pair objective for one (i, j)."""
    _check_trace(model, trace_i)
    _check_trace(model, trace_j)
    diff = trace_i.embedding - trace_j.embedding
    err = float(diff @ diff) - float(target)
    loss = 0.25 * err * err + lam * model.regularizer()

    d_weights = [np.zeros_like(w) for w in model.weights]
    d_biases = [np.zeros_like(b) for b in model.biases]
    # d(loss)/d f_i = err * (f_i - f_j); the 1/4 cancels against the
    # derivative of the squared distance.
    _accumulate_sample(model, trace_i, err * diff, d_weights, d_biases)
    _accumulate_sample(model, trace_j, -err * diff, d_weights, d_biases)
    if lam != 0.0:
        for m in range(model.num_layers):
            d_weights[m] += (2.0 * lam) * model.weights[m]
            d_biases[m] += (2.0 * lam) * model.biases[m]
    return loss, PairGradient(d_weights=d_weights, d_biases=d_biases)


def embed_all(model: MlpModel, features: np.ndarray, indices=None) -> np.ndarray:
    """Embed rows of a feature matrix; row k equals forward(model, x_k).embedding."""
    features = np.asarray(features, dtype=np.float64)
    if indices is not None:
        features = features[np.asarray(indices, dtype=np.int64)]
    out = np.empty((features.shape[0], model.output_dim))
    for k in range(features.shape[0]):
        out[k] = forward(model, features[k]).embedding
    return out


def finite_difference_pair_gradient(model: MlpModel, x_i, x_j, target: float,
                                    lam: float, h: float = 1e-6) -> PairGradient:
    """Central-difference gradient of the pair loss, one coordinate at a time.

    Used by the gradcheck command as the reference against pair_backward.
    """
    def loss_now() -> float:
        ti = forward(model, x_i)
        tj = forward(model, x_j)
        return pair_loss(model, ti, tj, target, lam)

    d_weights = [np.zeros_like(w) for w in model.weights]
    d_biases = [np.zeros_like(b) for b in model.biases]
    for arr, out in list(zip(model.weights, d_weights)) + list(zip(model.biases, d_biases)):
        flat = arr.reshape(-1)
        grad = out.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = loss_now()
            flat[idx] = orig - h
            down = loss_now()
            flat[idx] = orig
            grad[idx] = (up - down) / (2.0 * h)
    return PairGradient(d_weights=d_weights, d_biases=d_biases)


MODEL_SCHEMA_KEYS = {"layer_sizes", "normalize_output", "activation", "layers"}


def save_model(model: MlpModel, path) -> None:
    """Serialize to JSON with shortest round-trip float printing (atomic write)."""
    doc = {
        "layer_sizes": model.layer_sizes,
        "normalize_output": model.normalize_output,
        "activation": "tanh",
        "layers": [
            {"w": w.tolist(), "b": b.tolist()}
            for w, b in zip(model.weights, model.biases)
        ],
    }
    if model.linear_last:
        doc["linear_last"] = True
    _atomic_write_json(doc, path)


def _atomic_write_json(doc, path) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> MlpModel:
    """Load a model JSON written by save_model; round-trips bitwise."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or not MODEL_SCHEMA_KEYS.issubset(doc):
        raise SchemaError(f"{path}: missing keys {MODEL_SCHEMA_KEYS - set(doc or {})}")
    if doc["activation"] != "tanh":
        raise SchemaError(f"unsupported activation {doc['activation']!r}")
    sizes = doc["layer_sizes"]
    layers = doc["layers"]
    if not isinstance(layers, list) or len(layers) != len(sizes) - 1:
        raise SchemaError("layer count does not match layer_sizes")
    weights, biases = [], []
    for m, layer in enumerate(layers):
        try:
            w = np.array(layer["w"], dtype=np.float64)
            b = np.array(layer["b"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"layer {m}: {exc}") from None
        if w.ndim != 2 or w.shape != (sizes[m + 1], sizes[m]) or b.shape != (sizes[m + 1],):
            raise SchemaError(f"layer {m}: shape mismatch against layer_sizes")
        weights.append(w)
        biases.append(b)
    model = MlpModel(
        weights=weights,
        biases=biases,
        normalize_output=bool(doc["normalize_output"]),
        linear_last=bool(doc.get("linear_last", False)),
    )
    if not all(np.isfinite(w).all() for w in weights) or not all(
        np.isfinite(b).all() for b in biases
    ):
        raise SchemaError("non-finite parameter in model file")
    return model
