"""TS-ConvNeXt building blocks: GRN, multi-scale convolution, FFN."""

import enum
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .ops import DTYPE, ShapeError, dconv1d, gelu, layer_norm, pconv1d

FFN_EXPANSION = 4
LIGHT_KERNEL = 65

Affine = Tuple[np.ndarray, np.ndarray]  # (weight, bias)


class ConfigError(ValueError):
    """Raised for an inconsistent architecture configuration."""


class Variant(str, enum.Enum):
    TS_CONVNEXT = "ts_convnext"
    TS_CONVNEXT_LIGHT = "ts_convnext_light"


def check_block_geometry(variant, channels, kernel_set):
    """Validate (variant, C, kernel set) and return the branch width C' = C / s."""
    variant = Variant(variant)
    kernel_set = tuple(int(k) for k in kernel_set)
    s = len(kernel_set)
    if channels < 1:
        raise ConfigError(f"C must be positive, got {channels}")
    if s < 1 or any(k < 1 for k in kernel_set):
        raise ConfigError(f"invalid kernel set {kernel_set}")
    if variant is Variant.TS_CONVNEXT_LIGHT and s != 1:
        raise ConfigError(f"light block takes a single kernel, got {kernel_set}")
    if channels % s:
        raise ConfigError(f"C={channels} is not divisible by scale factor s={s}")
    return channels // s


@dataclass(frozen=True)
class BlockParams:
    """Weights of one TS-ConvNeXt (or TS-ConvNeXt-l) block.

    For the light variant ``msc_in_proj`` is empty, ``msc_out_proj`` is None
    and ``msc_dconv`` holds a single depthwise kernel over all C channels.
    """

    variant: Variant
    channels: int
    kernel_set: Tuple[int, ...]
    norm1: Affine
    msc_in_proj: Tuple[Affine, ...]
    msc_dconv: Tuple[Affine, ...]
    msc_out_proj: Optional[Affine]
    norm2: Affine
    ffn_up: Affine
    grn_gamma: np.ndarray
    grn_beta: np.ndarray
    ffn_down: Affine

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "kernel_set", tuple(int(k) for k in self.kernel_set))
        c = self.channels
        c_branch = check_block_geometry(self.variant, c, self.kernel_set)
        s = self.scale
        light = self.variant is Variant.TS_CONVNEXT_LIGHT

        def want(name, arr, shape):
            if np.shape(arr) != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {np.shape(arr)}")

        for tag, (g, b) in (("norm1", self.norm1), ("norm2", self.norm2)):
            want(f"{tag}.gamma", g, (c,))
            want(f"{tag}.beta", b, (c,))
        if len(self.msc_dconv) != s:
            raise ShapeError(f"msc_dconv: expected {s} branches, got {len(self.msc_dconv)}")
        dconv_width = c if light else c_branch
        for i, ((w, b), k) in enumerate(zip(self.msc_dconv, self.kernel_set)):
            want(f"msc_dconv[{i}].weight", w, (dconv_width, k))
            want(f"msc_dconv[{i}].bias", b, (dconv_width,))
        if light:
            if self.msc_in_proj or self.msc_out_proj is not None:
                raise ConfigError("light block has no MSC projections")
        else:
            if len(self.msc_in_proj) != s:
                raise ShapeError(f"msc_in_proj: expected {s} branches, got {len(self.msc_in_proj)}")
            for i, (w, b) in enumerate(self.msc_in_proj):
                want(f"msc_in_proj[{i}].weight", w, (c_branch, c))
                want(f"msc_in_proj[{i}].bias", b, (c_branch,))
            if self.msc_out_proj is None:
                raise ConfigError("full block needs an MSC output projection")
            want("msc_out_proj.weight", self.msc_out_proj[0], (c, s * c_branch))
            want("msc_out_proj.bias", self.msc_out_proj[1], (c,))
        hidden = FFN_EXPANSION * c
        want("ffn_up.weight", self.ffn_up[0], (hidden, c))
        want("ffn_up.bias", self.ffn_up[1], (hidden,))
        want("grn_gamma", self.grn_gamma, (hidden,))
        want("grn_beta", self.grn_beta, (hidden,))
        want("ffn_down.weight", self.ffn_down[0], (c, hidden))
        want("ffn_down.bias", self.ffn_down[1], (c,))

    @property
    def scale(self):
        return len(self.kernel_set)

    @property
    def branch_channels(self):
        return self.channels // self.scale


def grn(G, gamma, beta):
    """Global response normalization over time.

    Per-channel L2 energy across frames, divided by the mean energy over
    channels (i.e. L1-normalized and rescaled by the channel count), gates
    the input through a residual: ``G + gamma * N * G + beta``. An all-zero
    input gives N = 0.
    """
    G = np.asarray(G)
    if G.ndim != 2:
        raise ShapeError(f"G: expected 2-D, got shape {G.shape}")
    ch = G.shape[0]
    gamma = np.asarray(gamma)
    beta = np.asarray(beta)
    if gamma.shape != (ch,) or beta.shape != (ch,):
        raise ShapeError(f"channels: gamma {gamma.shape} / beta {beta.shape} vs Ch={ch}")
    g64 = G.astype(np.float64)
    g_bar = np.sqrt((g64 * g64).sum(axis=1))
    total = g_bar.sum()
    if total > 0:
        n = ch * g_bar / total
    else:
        n = np.zeros_like(g_bar)
    gate = gamma.astype(np.float64) * n
    y = g64 + gate[:, None] * g64 + beta.astype(np.float64)[:, None]
    return y.astype(DTYPE)


def msc(x, params: BlockParams):
    """Multi-scale convolution: s projected depthwise branches, GELU, re-projection."""
    if params.variant is not Variant.TS_CONVNEXT:
        raise ConfigError("msc() needs a full TS-ConvNeXt block")
    _check_channels(x, params.channels)
    branches = [
        dconv1d(pconv1d(x, *proj), *dw)
        for proj, dw in zip(params.msc_in_proj, params.msc_dconv)
    ]
    return pconv1d(gelu(np.concatenate(branches, axis=0)), *params.msc_out_proj)


def ffn(x, params: BlockParams):
    """Frame-wise feed-forward: expand 4x, GELU, GRN, project back."""
    _check_channels(x, params.channels)
    hidden = gelu(pconv1d(x, *params.ffn_up))
    hidden = grn(hidden, params.grn_gamma, params.grn_beta)
    return pconv1d(hidden, *params.ffn_down)


def ts_convnext_block(x, params: BlockParams):
    """Two residual steps: temporal MSC, then the frame-wise FFN (pre-norm)."""
    if params.variant is not Variant.TS_CONVNEXT:
        raise ConfigError("expected a full TS-ConvNeXt block")
    _check_channels(x, params.channels)
    x = np.asarray(x, dtype=DTYPE)
    x_mid = x + msc(layer_norm(x, *params.norm1), params)
    return x_mid + ffn(layer_norm(x_mid, *params.norm2), params)


def ts_convnext_light_block(x, params: BlockParams):
    """Light block: one depthwise conv over all channels replaces the MSC step."""
    if params.variant is not Variant.TS_CONVNEXT_LIGHT:
        raise ConfigError("expected a TS-ConvNeXt-l block")
    _check_channels(x, params.channels)
    x = np.asarray(x, dtype=DTYPE)
    x_mid = x + dconv1d(layer_norm(x, *params.norm1), *params.msc_dconv[0])
    return x_mid + ffn(layer_norm(x_mid, *params.norm2), params)


def apply_block(x, params: BlockParams):
    if params.variant is Variant.TS_CONVNEXT:
        return ts_convnext_block(x, params)
    return ts_convnext_light_block(x, params)


def _check_channels(x, channels):
    shape = np.shape(x)
    if len(shape) != 2 or shape[0] != channels:
        raise ShapeError(f"channels: block expects C={channels}, got input shape {shape}")


def kernel_set_for(variant, kernel_set: Optional[Sequence[int]] = None):
    """Default kernel set per variant: (7, 65) for the full block, (65,) for light."""
    if kernel_set is not None:
        return tuple(int(k) for k in kernel_set)
    if Variant(variant) is Variant.TS_CONVNEXT_LIGHT:
        return (LIGHT_KERNEL,)
    return (7, 65)
