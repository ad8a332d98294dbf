"""Four-stage classifier over a 5-channel gas window: embed with sinusoidal
positions, attend across time, attend across channels, then project to the
seven condition classes. Residual sums connect consecutive stages so a dead
stage passes its input through unchanged.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import attention
from .conditions import ConditionLabel, N_CONDITIONS, by_code
from .tensor import (
    DimensionError,
    Tensor,
    add,
    concat_cols,
    concat_rows,
    matmul,
    parameter,
    reshape,
    sigmoid,
    softmax_axis,
    tensor,
    transpose,
)

__all__ = ["ModelHyper", "McdcModel", "positional_encoding"]

N_CHANNELS = 5


@dataclass(frozen=True)
class ModelHyper:
    temporal_len: int = 12
    heads: int = 4
    kernel_temporal: int = 5
    kernel_channel: int = 6
    ffn_hidden: int = 64
    n_classes: int = N_CONDITIONS
    attention: str = "conv"  # "conv" or "matrix"

    def to_dict(self) -> dict:
        return asdict(self)


def positional_encoding(d_channel: int, length: int) -> np.ndarray:
    """Sinusoidal position map: row 2i is sin(t / 10000^(2i/d)), row 2i+1 the
    matching cos; with an odd channel count the last sin row stands alone."""
    pe = np.zeros((d_channel, length))
    t = np.arange(length, dtype=np.float64)
    for i in range((d_channel + 1) // 2):
        arg = t / (10000.0 ** (2.0 * i / d_channel))
        pe[2 * i, :] = np.sin(arg)
        if 2 * i + 1 < d_channel:
            pe[2 * i + 1, :] = np.cos(arg)
    return pe


def _uniform(rng: np.random.Generator, shape: tuple[int, int], fan_in: int, fan_out: int) -> Tensor:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return parameter(rng.uniform(-bound, bound, size=shape))


class McdcModel:
    """Holds all learnable parameters and runs the staged forward pass.

    Construction draws every parameter from one seeded generator in a fixed
    order, so a (hyper, seed) pair pins the model bit for bit.
    """

    def __init__(self, hyper: ModelHyper, seed: int):
        if hyper.attention not in ("conv", "matrix"):
            raise ValueError(f"unknown attention variant {hyper.attention!r}")
        self.hyper = hyper
        self.seed = seed
        rng = np.random.default_rng(seed)
        h = hyper.heads
        t_len = hyper.temporal_len
        # temporal route: tokens are time steps, features are the 5 channels
        self.temporal_heads = [self._new_head(rng, hyper.kernel_temporal, N_CHANNELS) for _ in range(h)]
        self.mix_temporal = _uniform(rng, (N_CHANNELS, h * N_CHANNELS), h * N_CHANNELS, N_CHANNELS)
        # channel route: tokens are the 5 channels, features are time steps
        self.channel_heads = [self._new_head(rng, hyper.kernel_channel, t_len) for _ in range(h)]
        self.mix_channel = _uniform(rng, (h * t_len, t_len), h * t_len, t_len)
        flat = N_CHANNELS * t_len
        self.ffn_w1 = _uniform(rng, (hyper.ffn_hidden, flat), flat, hyper.ffn_hidden)
        self.ffn_b1 = parameter(np.zeros((hyper.ffn_hidden, 1)))
        self.ffn_w2 = _uniform(rng, (hyper.n_classes, hyper.ffn_hidden), hyper.ffn_hidden, hyper.n_classes)
        self.ffn_b2 = parameter(np.zeros((hyper.n_classes, 1)))
        self._pe = tensor(positional_encoding(N_CHANNELS, t_len))

    def _new_head(self, rng, kernel_size, feature_dim):
        if self.hyper.attention == "conv":
            return attention.new_cnn_head(kernel_size, rng)
        return attention.new_matrix_head(feature_dim, rng)

    @property
    def kind(self) -> str:
        return "mcdc" if self.hyper.attention == "conv" else "mcdc-matrix"

    def parameters(self) -> list[tuple[str, Tensor]]:
        suffixes = ("kq", "kk", "kv") if self.hyper.attention == "conv" else ("wq", "wk", "wv")
        out = []
        for i, head in enumerate(self.temporal_heads):
            out.extend(zip((f"temporal_head_{i}_{s}" for s in suffixes), head.parameters()))
        out.append(("temporal_mix", self.mix_temporal))
        for i, head in enumerate(self.channel_heads):
            out.extend(zip((f"channel_head_{i}_{s}" for s in suffixes), head.parameters()))
        out.append(("channel_mix", self.mix_channel))
        out.extend(
            [("ffn_w1", self.ffn_w1), ("ffn_b1", self.ffn_b1), ("ffn_w2", self.ffn_w2), ("ffn_b2", self.ffn_b2)]
        )
        return out

    def parameter_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.parameters()}

    def load_parameter_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, p in self.parameters():
            src = np.asarray(arrays[name], dtype=np.float64)
            if src.shape != p.data.shape:
                raise DimensionError(f"parameter {name}: stored {src.shape} != expected {p.data.shape}")
            p.data[...] = src

    # stage operations

    def embed(self, x: Tensor) -> Tensor:
        if x.shape != (N_CHANNELS, self.hyper.temporal_len):
            raise DimensionError(
                f"input shape {x.shape} != ({N_CHANNELS}, {self.hyper.temporal_len})"
            )
        return add(x, self._pe)

    def temporal_interaction(self, embedded: Tensor) -> Tensor:
        outs = [attention.run_head(embedded, head) for head in self.temporal_heads]
        return matmul(self.mix_temporal, concat_rows(outs))

    def channel_interaction(self, mixed: Tensor) -> Tensor:
        tokens_channels = transpose(mixed)
        outs = [transpose(attention.run_head(tokens_channels, head)) for head in self.channel_heads]
        return matmul(concat_cols(outs), self.mix_channel)

    def project_logits(self, z: Tensor) -> Tensor:
        flat = reshape(z, (N_CHANNELS * self.hyper.temporal_len, 1))
        hidden = sigmoid(add(matmul(self.ffn_w1, flat), self.ffn_b1))
        return add(matmul(self.ffn_w2, hidden), self.ffn_b2)

    def project(self, z: Tensor) -> Tensor:
        return transpose(softmax_axis(self.project_logits(z), "col"))

    def forward(self, x) -> Tensor:
        """Probability row vector (1 x n_classes) for one 5 x T window."""
        embedded = self.embed(x if isinstance(x, Tensor) else tensor(x))
        temporal = self.temporal_interaction(embedded)
        mixed = add(temporal, embedded)
        channel = self.channel_interaction(mixed)
        return self.project(add(channel, temporal))

    def predict_proba(self, x) -> np.ndarray:
        return self.forward(x).data.ravel().copy()

    def predict(self, x) -> ConditionLabel:
        # np.argmax takes the first maximum, i.e. the lowest class code on ties
        return by_code(int(np.argmax(self.predict_proba(x))))

    def export_activations(self, x) -> dict[str, np.ndarray]:
        """Copies of every stage output, for external feature analysis."""
        embedded = self.embed(tensor(x))
        temporal = self.temporal_interaction(embedded)
        mixed = add(temporal, embedded)
        channel = self.channel_interaction(mixed)
        final = add(channel, temporal)
        logits = transpose(self.project_logits(final))
        return {
            "embedded": embedded.data.copy(),
            "temporal": temporal.data.copy(),
            "temporal_plus_embedded": mixed.data.copy(),
            "channel": channel.data.copy(),
            "channel_plus_temporal": final.data.copy(),
            "logits": logits.data.copy(),
        }
