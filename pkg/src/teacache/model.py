"""A miniature diffusion-transformer denoiser with AdaLN timestep modulation.

Layout of one forward pass on a latent ``x`` of shape ``[tokens, channels]``::

    h   = x @ W_in + b_in + cond @ W_cond              # stem
    emb = MLP(sinusoidal(t))                           # timestep embedding
    per block:
        shift1, scale1, gate1, shift2, scale2, gate2 = emb @ W_mod + b_mod
        h = h + gate1 * Attn(LN(h) * (1 + scale1) + shift1)
        h = h + gate2 * FFN(LN(h) * (1 + scale2) + shift2)
    out = (LN(h) * (1 + scale_f) + shift_f) @ W_out + b_out

LN is parameter-free layer norm over the hidden axis. The quantity
``LN(h) * (1 + scale1) + shift1`` in block 0 is the modulated input used as a
caching indicator.

Weights are drawn uniformly from [-0.08, 0.08] out of a single Philox stream
keyed by ``weight_seed``, in the order given by :func:`param_layout`.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .errors import FormatError, OddDimension, ShapeMismatch
from .tensor import Tensor, as_tensor, frozen

INIT_BOUND = 0.08
LN_EPS = 1e-6
FFN_MULT = 4

WEIGHTS_MAGIC = b"TDITWGT\x00"
WEIGHTS_VERSION = 1
_HEADER = struct.Struct("<8sI6IQ")


@dataclass(frozen=True)
class ModelConfig:
    token_count: int = 16
    channel_dim: int = 8
    hidden_dim: int = 32
    num_blocks: int = 4
    num_heads: int = 4
    cond_dim: int = 8
    weight_seed: int = 42

    def __post_init__(self):
        for name in ("token_count", "channel_dim", "hidden_dim", "num_blocks", "num_heads", "cond_dim"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.hidden_dim % self.num_heads:
            raise ValueError("hidden_dim must be divisible by num_heads")
        if self.hidden_dim % 2:
            raise OddDimension("hidden_dim must be even for the sinusoidal embedding")
        if not 0 <= self.weight_seed <= rng.MASK64:
            raise ValueError("weight_seed must be a 64-bit unsigned integer")

    @property
    def latent_shape(self) -> tuple[int, int]:
        return (self.token_count, self.channel_dim)


REFERENCE_CONFIG = ModelConfig()


def param_layout(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Parameter names and shapes in draw (and serialization) order."""
    h, c, k = config.hidden_dim, config.channel_dim, config.cond_dim
    layout = [
        ("t_mlp1.w", (h, h)),
        ("t_mlp1.b", (h,)),
        ("t_mlp2.w", (h, h)),
        ("t_mlp2.b", (h,)),
        ("in.w", (c, h)),
        ("in.b", (h,)),
        ("cond.w", (k, h)),
    ]
    for i in range(config.num_blocks):
        p = f"blocks.{i}."
        layout += [
            (p + "mod.w", (h, 6 * h)),
            (p + "mod.b", (6 * h,)),
            (p + "qkv.w", (h, 3 * h)),
            (p + "qkv.b", (3 * h,)),
            (p + "proj.w", (h, h)),
            (p + "proj.b", (h,)),
            (p + "ffn1.w", (h, FFN_MULT * h)),
            (p + "ffn1.b", (FFN_MULT * h,)),
            (p + "ffn2.w", (FFN_MULT * h, h)),
            (p + "ffn2.b", (h,)),
        ]
    layout += [
        ("final_mod.w", (h, 2 * h)),
        ("final_mod.b", (2 * h,)),
        ("out.w", (h, c)),
        ("out.b", (c,)),
    ]
    return layout


@dataclass(frozen=True)
class ModulationParams:
    """Affine maps from the timestep embedding to per-channel shift and scale."""

    shift_w: Tensor
    shift_b: Tensor
    scale_w: Tensor
    scale_b: Tensor

    @classmethod
    def zeros(cls, hidden_dim: int) -> "ModulationParams":
        w = np.zeros((hidden_dim, hidden_dim))
        b = np.zeros(hidden_dim)
        return cls(w, b, w, b)


@dataclass(frozen=True)
class ModelWeights:
    config: ModelConfig
    params: dict[str, Tensor] = field(repr=False)

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def _mod_chunk(self, prefix: str, index: int) -> tuple[Tensor, Tensor]:
        h = self.config.hidden_dim
        w, b = self.params[prefix + "mod.w"], self.params[prefix + "mod.b"]
        sl = slice(index * h, (index + 1) * h)
        return w[:, sl], b[sl]

    def attn_modulation(self, block: int) -> ModulationParams:
        p = f"blocks.{block}."
        return ModulationParams(*self._mod_chunk(p, 0), *self._mod_chunk(p, 1))

    def ffn_modulation(self, block: int) -> ModulationParams:
        p = f"blocks.{block}."
        return ModulationParams(*self._mod_chunk(p, 3), *self._mod_chunk(p, 4))

    def gates(self, block: int, emb: Tensor) -> tuple[Tensor, Tensor]:
        p = f"blocks.{block}."
        w1, b1 = self._mod_chunk(p, 2)
        w2, b2 = self._mod_chunk(p, 5)
        return emb @ w1 + b1, emb @ w2 + b2

    def final_modulation(self) -> ModulationParams:
        h = self.config.hidden_dim
        w, b = self.params["final_mod.w"], self.params["final_mod.b"]
        return ModulationParams(w[:, :h], b[:h], w[:, h:], b[h:])

    def flat(self) -> np.ndarray:
        return np.concatenate([self.params[name].ravel() for name, _ in param_layout(self.config)])

    def equals(self, other: "ModelWeights") -> bool:
        return self.config == other.config and all(
            np.array_equal(self.params[k], other.params[k]) for k in self.params
        )


def init_weights(config: ModelConfig) -> ModelWeights:
    gen = rng.philox(config.weight_seed)
    params = {}
    for name, shape in param_layout(config):
        params[name] = frozen(rng.uniform(gen, -INIT_BOUND, INIT_BOUND, shape))
    return ModelWeights(config, params)


def _weights_from_flat(config: ModelConfig, flat: np.ndarray) -> ModelWeights:
    layout = param_layout(config)
    expected = sum(math.prod(shape) for _, shape in layout)
    if flat.size != expected:
        raise FormatError(f"payload holds {flat.size} floats, layout needs {expected}")
    params, offset = {}, 0
    for name, shape in layout:
        n = math.prod(shape)
        params[name] = frozen(np.array(flat[offset : offset + n], dtype=np.float64).reshape(shape))
        offset += n
    return ModelWeights(config, params)


def save_weights(weights: ModelWeights, path) -> None:
    """Write the flat binary weight file (little-endian header + float64 payload)."""
    c = weights.config
    header = _HEADER.pack(
        WEIGHTS_MAGIC,
        WEIGHTS_VERSION,
        c.token_count,
        c.channel_dim,
        c.hidden_dim,
        c.num_blocks,
        c.num_heads,
        c.cond_dim,
        c.weight_seed,
    )
    Path(path).write_bytes(header + weights.flat().astype("<f8").tobytes())


def load_weights(path) -> ModelWeights:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise FormatError("weight file shorter than its header")
    magic, version, *dims, seed = _HEADER.unpack_from(blob)
    if magic != WEIGHTS_MAGIC:
        raise FormatError("bad magic in weight file")
    if version != WEIGHTS_VERSION:
        raise FormatError(f"unsupported weight file version {version}")
    config = ModelConfig(*dims, weight_seed=seed)
    payload = blob[_HEADER.size :]
    if len(payload) % 8:
        raise FormatError("payload is not a whole number of float64 values")
    return _weights_from_flat(config, np.frombuffer(payload, dtype="<f8"))


# --- layers -----------------------------------------------------------------


def silu(x: Tensor) -> Tensor:
    return x / (1.0 + np.exp(-x))


def gelu(x: Tensor) -> Tensor:
    return 0.5 * x * (1.0 + np.tanh(math.sqrt(2.0 / math.pi) * (x + 0.044715 * x**3)))


def layer_norm(x: Tensor) -> Tensor:
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + LN_EPS)


def sinusoidal_embed(t: float, dim: int) -> Tensor:
    """``[sin(t * w_i), cos(t * w_i)]`` with ``w_i = 10000 ** (-2i / dim)``."""
    if dim <= 0 or dim % 2:
        raise OddDimension(f"embedding dim must be a positive even integer, got {dim}")
    if t < 0:
        raise ValueError(f"timestep must be nonnegative, got {t}")
    half = dim // 2
    freqs = 10000.0 ** (-2.0 * np.arange(half) / dim)
    args = float(t) * freqs
    return frozen(np.concatenate([np.sin(args), np.cos(args)]))


def timestep_embedding(weights: ModelWeights, t: float) -> Tensor:
    s = sinusoidal_embed(t, weights.config.hidden_dim)
    h = silu(s @ weights["t_mlp1.w"] + weights["t_mlp1.b"])
    return frozen(h @ weights["t_mlp2.w"] + weights["t_mlp2.b"])


def modulate(x, emb, params: ModulationParams) -> Tensor:
    """``x * (1 + scale(emb)) + shift(emb)``, broadcast over tokens."""
    x = as_tensor(x)
    emb = as_tensor(emb)
    hidden = params.shift_w.shape[1]
    if x.ndim != 2 or x.shape[1] != hidden:
        raise ShapeMismatch(f"modulate expects [tokens, {hidden}], got {x.shape}")
    if emb.shape != (params.shift_w.shape[0],):
        raise ShapeMismatch(f"embedding shape {emb.shape} does not match modulation params")
    shift = emb @ params.shift_w + params.shift_b
    scale = emb @ params.scale_w + params.scale_b
    return x * (1.0 + scale) + shift


def attention(weights: ModelWeights, block: int, x: Tensor) -> Tensor:
    cfg = weights.config
    p = f"blocks.{block}."
    n, h = x.shape
    dh = h // cfg.num_heads
    qkv = x @ weights[p + "qkv.w"] + weights[p + "qkv.b"]
    q, k, v = (qkv[:, i * h : (i + 1) * h].reshape(n, cfg.num_heads, dh).transpose(1, 0, 2) for i in range(3))
    scores = q @ k.transpose(0, 2, 1) / math.sqrt(dh)
    scores = scores - scores.max(axis=-1, keepdims=True)
    probs = np.exp(scores)
    probs /= probs.sum(axis=-1, keepdims=True)
    out = (probs @ v).transpose(1, 0, 2).reshape(n, h)
    return out @ weights[p + "proj.w"] + weights[p + "proj.b"]


def feed_forward(weights: ModelWeights, block: int, x: Tensor) -> Tensor:
    p = f"blocks.{block}."
    hid = gelu(x @ weights[p + "ffn1.w"] + weights[p + "ffn1.b"])
    return hid @ weights[p + "ffn2.w"] + weights[p + "ffn2.b"]


# --- forward ----------------------------------------------------------------


def _check_inputs(weights: ModelWeights, x_t, emb, cond) -> tuple[Tensor, Tensor, Tensor]:
    cfg = weights.config
    x_t, emb, cond = as_tensor(x_t), as_tensor(emb), as_tensor(cond)
    if x_t.shape != cfg.latent_shape:
        raise ShapeMismatch(f"latent shape {x_t.shape} != {cfg.latent_shape}")
    if emb.shape != (cfg.hidden_dim,):
        raise ShapeMismatch(f"embedding shape {emb.shape} != ({cfg.hidden_dim},)")
    if cond.shape != (cfg.cond_dim,):
        raise ShapeMismatch(f"cond shape {cond.shape} != ({cfg.cond_dim},)")
    return x_t, emb, cond


def _stem(weights: ModelWeights, x_t: Tensor, cond: Tensor) -> Tensor:
    return x_t @ weights["in.w"] + weights["in.b"] + cond @ weights["cond.w"]


def _block_input_modulation(weights: ModelWeights, block: int, h: Tensor, emb: Tensor) -> Tensor:
    return modulate(layer_norm(h), emb, weights.attn_modulation(block))


def forward(weights: ModelWeights, x_t, emb, cond, capture: dict | None = None) -> Tensor:
    """Predict the noise for ``x_t``; output has the latent's shape.

    When ``capture`` is a dict, the block-0 modulated input is stored under
    ``"block0_modulated"``.
    """
    x_t, emb, cond = _check_inputs(weights, x_t, emb, cond)
    h = _stem(weights, x_t, cond)
    for i in range(weights.config.num_blocks):
        gate_attn, gate_ffn = weights.gates(i, emb)
        mod_in = _block_input_modulation(weights, i, h, emb)
        if i == 0 and capture is not None:
            capture["block0_modulated"] = mod_in.copy()
        h = h + gate_attn * attention(weights, i, mod_in)
        h = h + gate_ffn * feed_forward(weights, i, modulate(layer_norm(h), emb, weights.ffn_modulation(i)))
    out = modulate(layer_norm(h), emb, weights.final_modulation())
    out = out @ weights["out.w"] + weights["out.b"]
    return frozen(as_tensor(out))


def first_block_modulated_input(weights: ModelWeights, x_t, emb, cond) -> Tensor:
    x_t, emb, cond = _check_inputs(weights, x_t, emb, cond)
    return frozen(_block_input_modulation(weights, 0, _stem(weights, x_t, cond), emb))


def forward_flops(config: ModelConfig) -> int:
    """Approximate floating-point operations of one forward call (2 per MAC)."""
    n, c, h, k = config.token_count, config.channel_dim, config.hidden_dim, config.cond_dim
    macs = n * c * h + k * h + 2 * h * h  # stem and timestep MLP
    per_block = (
        h * 6 * h  # modulation projections
        + n * h * 3 * h  # qkv
        + 2 * n * n * h  # scores and weighted values
        + n * h * h  # output projection
        + 2 * n * h * FFN_MULT * h  # feed-forward
    )
    macs += config.num_blocks * per_block + h * 2 * h + n * h * c
    return 2 * macs
