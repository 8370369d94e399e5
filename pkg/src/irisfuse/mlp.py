"""Fusion network: a fixed 8-32-16-8-2 tanh MLP with softmax output.

Implemented directly in numpy with analytic gradients so training is
fully deterministic given a seed: initialisation, class balancing and
mini-batch order all derive from one generator, and no parallel
reduction happens inside a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .templates import CueVector

LAYER_SIZES = (8, 32, 16, 8, 2)

OPTIMIZERS = ("sgd-momentum", "adam")


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss; carries the epoch index."""

    def __init__(self, epoch: int):
        super().__init__(f"non-finite training loss at epoch {epoch}")
        self.epoch = epoch


def _layer_shapes() -> list[tuple[int, int]]:
    return list(zip(LAYER_SIZES[:-1], LAYER_SIZES[1:]))


@dataclass(frozen=True)
class MlpParams:
    """Weights and biases of the fusion network, immutable.

    ``weights[i]`` has shape ``(fan_in, fan_out)``; activations flow as
    row vectors.  The same container is used for gradients.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        shapes = _layer_shapes()
        if len(self.weights) != len(shapes) or len(self.biases) != len(shapes):
            raise ValueError(f"expected {len(shapes)} layers")
        ws, bs = [], []
        for k, (fan_in, fan_out) in enumerate(shapes):
            w = np.ascontiguousarray(self.weights[k], dtype=np.float64)
            b = np.ascontiguousarray(self.biases[k], dtype=np.float64)
            if w.shape != (fan_in, fan_out):
                raise ValueError(
                    f"layer {k}: weight shape {w.shape} != {(fan_in, fan_out)}"
                )
            if b.shape != (fan_out,):
                raise ValueError(f"layer {k}: bias shape {b.shape} != {(fan_out,)}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {k}: non-finite parameter")
            w.flags.writeable = False
            b.flags.writeable = False
            ws.append(w)
            bs.append(b)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))

    @classmethod
    def init_random(cls, seed) -> "MlpParams":
        """Uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.

        ``seed`` may be an integer or a ``numpy.random.Generator``.
        """
        rng = np.random.default_rng(seed)
        ws, bs = [], []
        for fan_in, fan_out in _layer_shapes():
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            ws.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            bs.append(np.zeros(fan_out))
        return cls(tuple(ws), tuple(bs))

    @classmethod
    def zeros(cls) -> "MlpParams":
        shapes = _layer_shapes()
        return cls(
            tuple(np.zeros(s) for s in shapes),
            tuple(np.zeros(s[1]) for s in shapes),
        )

    def to_vector(self) -> np.ndarray:
        """All parameters flattened into one vector (weights then bias per layer)."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.reshape(-1))
            parts.append(b)
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, vec) -> "MlpParams":
        vec = np.asarray(vec, dtype=np.float64)
        ws, bs = [], []
        pos = 0
        for fan_in, fan_out in _layer_shapes():
            ws.append(vec[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out))
            pos += fan_in * fan_out
            bs.append(vec[pos : pos + fan_out].copy())
            pos += fan_out
        if pos != vec.size:
            raise ValueError(f"expected {pos} parameters, got {vec.size}")
        return cls(tuple(ws), tuple(bs))

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def _as_input_matrix(inputs) -> np.ndarray:
    if isinstance(inputs, CueVector):
        inputs = inputs.as_array()
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != LAYER_SIZES[0]:
        raise ValueError(f"inputs must have {LAYER_SIZES[0]} features, got {x.shape}")
    return x


def _forward_trace(params: MlpParams, x: np.ndarray):
    """Logits plus per-layer activations (inputs included) for backprop."""
    activations = [x]
    a = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        a = z if k == last else np.tanh(z)
        activations.append(a)
    return a, activations


def mlp_logits(params: MlpParams, inputs) -> np.ndarray:
    """Raw pre-softmax outputs, shape (n, 2)."""
    logits, _ = _forward_trace(params, _as_input_matrix(inputs))
    if not np.isfinite(logits).all():
        raise FloatingPointError("non-finite network output (exploded parameters?)")
    return logits


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def mlp_forward(params: MlpParams, cues) -> tuple[float, float]:
    """Class probabilities ``(p_genuine, p_impostor)`` for one cue vector."""
    probs = softmax(mlp_logits(params, cues))[0]
    return float(probs[0]), float(probs[1])


def softmax_xent(logits, label) -> float:
    """Cross-entropy ``-log softmax(logits)[label]`` for one sample."""
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    if z.size != LAYER_SIZES[-1]:
        raise ValueError(f"expected {LAYER_SIZES[-1]} logits, got {z.size}")
    if not np.isfinite(z).all():
        raise ValueError("non-finite logits")
    m = z.max()
    lse = m + math.log(np.exp(z - m).sum())
    return float(lse - z[int(label)])


def _batch_loss_and_gradient(params: MlpParams, x: np.ndarray, y: np.ndarray):
    """Mean cross-entropy over the batch and its gradient as an MlpParams."""
    logits, activations = _forward_trace(params, x)
    n = x.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = float(-log_probs[np.arange(n), y].mean())

    probs = np.exp(log_probs)
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n

    grad_w = [None] * len(params.weights)
    grad_b = [None] * len(params.biases)
    for k in range(len(params.weights) - 1, -1, -1):
        a_prev = activations[k]
        grad_w[k] = a_prev.T @ delta
        grad_b[k] = delta.sum(axis=0)
        if k > 0:
            a_k = activations[k]  # tanh output of layer k-1's successor
            delta = (delta @ params.weights[k].T) * (1.0 - a_k * a_k)
    return loss, MlpParams(tuple(grad_w), tuple(grad_b))


def mlp_gradient(params: MlpParams, cues, label) -> MlpParams:
    """Analytic gradient of ``softmax_xent(mlp_forward(...))`` for one sample.

    Returned in an :class:`MlpParams` container with matching shapes.
    """
    x = _as_input_matrix(cues)
    y = np.array([int(label)])
    _, grads = _batch_loss_and_gradient(params, x, y)
    return grads


def mean_loss(params: MlpParams, x: np.ndarray, y: np.ndarray) -> float:
    """Mean softmax cross-entropy of the network over a labelled set."""
    logits = mlp_logits(params, x)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-log_probs[np.arange(x.shape[0]), np.asarray(y)].mean())


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of a fusion-network training run."""

    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 500
    seed: int = 0
    genuine_impostor_ratio: tuple[int, int] | None = (1, 2)
    optimizer: str = "sgd-momentum"
    momentum: float = 0.9
    plateau_patience: int = 20
    plateau_rel_tol: float = 1e-6

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.genuine_impostor_ratio is not None:
            g, i = self.genuine_impostor_ratio
            if g < 1 or i < 1:
                raise ValueError("genuine_impostor_ratio parts must be >= 1")


def _coerce_dataset(features, labels) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(features, (list, tuple)) and features and isinstance(
        features[0], CueVector
    ):
        features = np.stack([c.as_array() for c in features])
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != LAYER_SIZES[0]:
        raise ValueError(f"features must be (n, {LAYER_SIZES[0]}), got {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("features contain a non-finite entry")
    y = np.asarray([int(v) for v in labels], dtype=np.int64)
    if y.shape != (x.shape[0],):
        raise ValueError("labels must align with features")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 (genuine) or 1 (impostor)")
    return x, y


def _balanced_indices(
    y: np.ndarray, ratio: tuple[int, int] | None, rng: np.random.Generator
) -> np.ndarray:
    if ratio is None:
        return np.arange(y.size)
    genuine = np.flatnonzero(y == 0)
    impostor = np.flatnonzero(y == 1)
    g_part, i_part = ratio
    target = math.ceil(genuine.size * i_part / g_part)
    if impostor.size > target:
        impostor = np.sort(rng.choice(impostor, size=target, replace=False))
    return np.concatenate([genuine, impostor])


def train_mlp(features, labels, config: TrainConfig = TrainConfig()) -> MlpParams:
    """Train the fusion network; deterministic for a given config.

    ``features`` is an ``(n, 8)`` cue matrix (or a list of CueVectors)
    and ``labels`` the matching genuine/impostor labels.  Impostor rows
    are subsampled to ``genuine_impostor_ratio`` before training.  The
    parameters with the best full-set loss seen at any epoch boundary
    are returned, so the result never scores worse than the initial
    network.  Raises :class:`TrainingDivergedError` on non-finite loss.
    """
    x, y = _coerce_dataset(features, labels)
    if len(np.unique(y)) < 2:
        raise ValueError("training set must contain both genuine and impostor samples")

    rng = np.random.default_rng(config.seed)
    keep = _balanced_indices(y, config.genuine_impostor_ratio, rng)
    x, y = x[keep], y[keep]

    params = MlpParams.init_random(rng)
    vec = params.to_vector()
    velocity = np.zeros_like(vec)
    adam_m = np.zeros_like(vec)
    adam_v = np.zeros_like(vec)
    adam_t = 0

    best_loss = mean_loss(params, x, y)
    best_vec = vec.copy()
    epochs_since_improvement = 0

    n = x.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = _batch_loss_and_gradient(params, x[idx], y[idx])
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch)
            g = grads.to_vector()
            if config.optimizer == "sgd-momentum":
                velocity = config.momentum * velocity - config.learning_rate * g
                vec = vec + velocity
            else:  # adam
                adam_t += 1
                adam_m = 0.9 * adam_m + 0.1 * g
                adam_v = 0.999 * adam_v + 0.001 * g * g
                m_hat = adam_m / (1.0 - 0.9**adam_t)
                v_hat = adam_v / (1.0 - 0.999**adam_t)
                vec = vec - config.learning_rate * m_hat / (np.sqrt(v_hat) + 1e-8)
            if not np.isfinite(vec).all():
                raise TrainingDivergedError(epoch)
            params = MlpParams.from_vector(vec)

        epoch_loss = mean_loss(params, x, y)
        if not math.isfinite(epoch_loss):
            raise TrainingDivergedError(epoch)
        if epoch_loss < best_loss * (1.0 - config.plateau_rel_tol):
            best_loss = epoch_loss
            best_vec = vec.copy()
            epochs_since_improvement = 0
        else:
            if epoch_loss < best_loss:
                best_loss = epoch_loss
                best_vec = vec.copy()
            epochs_since_improvement += 1
            if epochs_since_improvement >= config.plateau_patience:
                break

    return MlpParams.from_vector(best_vec)
