"""Small fully connected denoiser with hand-written reverse-mode gradients.

The network predicts the clean soft-bit vector from the corrupted state,
a conditioning estimate of the same shape, and the time. Inputs are the
concatenation [x_t, x_cond, time_features(t)]; hidden layers use tanh.

Two output heads:

- ``linear``: a plain affine layer emitting one value per soft bit.
- ``softmax``: an affine layer emitting one logit per vocabulary entry
  (per position), turned into a distribution and averaged against the
  codebook of all codewords, so the prediction is always a convex
  combination of valid codewords.

Gradients are exact reverse-mode derivatives of the forward computation;
they are verified against central finite differences in the test suite.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError

HEAD_LINEAR = "linear"
HEAD_SOFTMAX = "softmax"
HEADS = (HEAD_LINEAR, HEAD_SOFTMAX)

MAP_IDENTITY = "identity"
MAP_SIGMOID = "scaled_sigmoid"
MAP_SOFTMAX = "scaled_softmax"
OUTPUT_MAPS = (MAP_IDENTITY, MAP_SIGMOID, MAP_SOFTMAX)


def time_features(t, n_features: int, batch: int) -> np.ndarray:
    """Fixed sinusoidal features of t at geometrically spaced frequencies."""
    half = n_features // 2
    ta = np.broadcast_to(np.asarray(t, dtype=np.float64), (batch,))
    angles = ta[:, None] * (np.pi * 2.0 ** np.arange(half))[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax over the last axis, shift-stabilized."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class MlpConfig:
    """Shape and head of the denoiser network.

    ``n_features`` is the soft-bit dimension (positions * bits per
    position). The softmax head needs the ``codebook`` of all codewords,
    shape [vocab, bits per position].
    """

    n_features: int
    hidden: tuple[int, ...] = (128, 128)
    n_time_features: int = 16
    head: str = HEAD_LINEAR
    positions: int = 1
    codebook: tuple[tuple[float, ...], ...] | None = None
    output_map: str = MAP_IDENTITY
    scale: float = 1.0

    def __post_init__(self):
        if self.head not in HEADS:
            raise ConfigError(f"unknown head {self.head!r}; known: {HEADS}")
        if self.output_map not in OUTPUT_MAPS:
            raise ConfigError(f"unknown output map {self.output_map!r}")
        if self.n_time_features % 2 != 0 or self.n_time_features <= 0:
            raise ConfigError("n_time_features must be a positive even number")
        if self.n_features % self.positions != 0:
            raise ConfigError("n_features must be divisible by positions")
        if self.head == HEAD_SOFTMAX:
            if self.output_map != MAP_IDENTITY:
                raise ConfigError("the softmax head already emits soft bits; "
                                  "output maps only apply to the linear head")
            if self.codebook is None:
                raise ConfigError("softmax head requires a codebook")
            cb = self.codebook_array()
            if cb.ndim != 2 or cb.shape[1] != self.n_features // self.positions:
                raise ConfigError(
                    "codebook must be [vocab, bits-per-position] matching n_features"
                )
        elif self.codebook is not None:
            raise ConfigError("codebook only applies to the softmax head")

    def codebook_array(self) -> np.ndarray:
        return np.asarray(self.codebook, dtype=np.float64)

    @property
    def input_dim(self) -> int:
        return 2 * self.n_features + self.n_time_features

    @property
    def final_dim(self) -> int:
        if self.head == HEAD_SOFTMAX:
            return self.positions * len(self.codebook)
        return self.n_features

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.final_dim)


def init_params(cfg: MlpConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Fan-in scaled Gaussian weights; the final layer starts at zero so the
    initial prediction is the zero vector."""
    params: dict[str, np.ndarray] = {}
    dims = cfg.layer_dims
    last = len(dims) - 2
    for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
        if i == last:
            params[f"w{i}"] = np.zeros((d_in, d_out))
        else:
            params[f"w{i}"] = rng.standard_normal((d_in, d_out)) / np.sqrt(d_in)
        params[f"b{i}"] = np.zeros(d_out)
    return params


class MlpDenoiser:
    """Trainable denoiser: forward, exact backward, and the prediction map.

    ``forward`` returns the raw head output (what the losses consume);
    ``predict`` additionally applies the configured output map, which is
    what the sampler and the self-conditioning channel see.
    """

    def __init__(self, cfg: MlpConfig, params: dict[str, np.ndarray]):
        dims = cfg.layer_dims
        for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            if params[f"w{i}"].shape != (d_in, d_out) or params[f"b{i}"].shape != (d_out,):
                raise ConfigError(f"parameter shapes do not match layer {i} of {dims}")
        self.cfg = cfg
        self.params = params

    @classmethod
    def initialize(cls, cfg: MlpConfig, rng: np.random.Generator) -> "MlpDenoiser":
        return cls(cfg, init_params(cfg, rng))

    def with_params(self, params: dict[str, np.ndarray]) -> "MlpDenoiser":
        return MlpDenoiser(self.cfg, params)

    @property
    def n_layers(self) -> int:
        return len(self.cfg.layer_dims) - 1

    def forward(self, x_t, x_cond, t, want_cache: bool = False):
        """Raw head output for a batch; optionally keep the activation cache."""
        cfg = self.cfg
        x_t = np.asarray(x_t, dtype=np.float64)
        x_cond = np.asarray(x_cond, dtype=np.float64)
        if x_cond.shape != x_t.shape:
            raise ValueError(
                f"conditioning shape {x_cond.shape} does not match state shape {x_t.shape}"
            )
        tf = time_features(t, cfg.n_time_features, x_t.shape[0])
        act = np.concatenate([x_t, x_cond, tf], axis=1)
        activations = [act]
        for i in range(self.n_layers - 1):
            act = np.tanh(act @ self.params[f"w{i}"] + self.params[f"b{i}"])
            activations.append(act)
        i = self.n_layers - 1
        logits = act @ self.params[f"w{i}"] + self.params[f"b{i}"]
        if cfg.head == HEAD_SOFTMAX:
            probs = softmax(logits.reshape(len(logits), cfg.positions, -1))
            out = (probs @ cfg.codebook_array()).reshape(len(logits), cfg.n_features)
        else:
            probs = None
            out = logits
        if want_cache:
            return out, {"activations": activations, "probs": probs}
        return out

    def backward(self, cache, d_out) -> dict[str, np.ndarray]:
        """Gradients of sum(d_out * forward(...)) w.r.t. every parameter."""
        cfg = self.cfg
        d_out = np.asarray(d_out, dtype=np.float64)
        if cfg.head == HEAD_SOFTMAX:
            probs = cache["probs"]
            d_probs = d_out.reshape(probs.shape[0], cfg.positions, -1) @ cfg.codebook_array().T
            inner = (probs * d_probs).sum(axis=-1, keepdims=True)
            d_logits = (probs * (d_probs - inner)).reshape(len(d_out), -1)
        else:
            d_logits = d_out
        grads: dict[str, np.ndarray] = {}
        activations = cache["activations"]
        delta = d_logits
        for i in range(self.n_layers - 1, -1, -1):
            grads[f"w{i}"] = activations[i].T @ delta
            grads[f"b{i}"] = delta.sum(axis=0)
            if i > 0:
                # tanh'(s) = 1 - tanh(s)^2, and activations[i] is tanh(s).
                delta = (delta @ self.params[f"w{i}"].T) * (1.0 - activations[i] ** 2)
        return grads

    def apply_output_map(self, raw: np.ndarray) -> np.ndarray:
        """Map raw head output to the soft-bit prediction fed to the sampler."""
        cfg = self.cfg
        if cfg.output_map == MAP_IDENTITY:
            return raw
        if cfg.output_map == MAP_SIGMOID:
            return cfg.scale * (2.0 * sigmoid(raw) - 1.0)
        probs = softmax(raw.reshape(len(raw), cfg.positions, -1))
        return cfg.scale * (2.0 * probs - 1.0).reshape(len(raw), -1)

    def predict(self, x_t, x_cond, t) -> np.ndarray:
        """Denoiser interface used by the sampler."""
        return self.apply_output_map(self.forward(x_t, x_cond, t))
