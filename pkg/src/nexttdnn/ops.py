"""Numeric kernels on channel x time matrices.

Activations are plain 2-D numpy arrays of shape ``(channels, frames)``. Every
kernel accepts any real array, accumulates in float64 and returns float32,
so chains of kernels are reproducible and comparable against float64 loops.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

DTYPE = np.float32
LN_EPS = 1e-6


class ShapeError(ValueError):
    """Raised when operand dimensions disagree."""


def as_tensor(x):
    """Return ``x`` as a C-contiguous float32 (channels, frames) array."""
    x = np.ascontiguousarray(x, dtype=DTYPE)
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-D (channels, frames) tensor, got ndim={x.ndim}")
    return x


def _check_2d(x, name="x"):
    x = np.asarray(x)
    if x.ndim != 2:
        raise ShapeError(f"{name}: expected 2-D (channels, frames), got shape {x.shape}")
    return x


def same_padding(kernel_size):
    """Zero padding ``(left, right)`` that keeps the frame count for stride 1."""
    if kernel_size < 1:
        raise ShapeError(f"kernel size must be >= 1, got {kernel_size}")
    return (kernel_size - 1) // 2, kernel_size // 2


def _pad_time(x, kernel_size):
    left, right = same_padding(kernel_size)
    return np.pad(x, ((0, 0), (left, right)))


def pconv1d(x, weight, bias):
    """Pointwise (1x1) convolution: ``y[o, t] = bias[o] + sum_i weight[o, i] x[i, t]``."""
    x = _check_2d(x)
    weight = np.asarray(weight)
    bias = np.asarray(bias)
    if weight.ndim != 2:
        raise ShapeError(f"weight: expected (C_out, C_in), got shape {weight.shape}")
    if weight.shape[1] != x.shape[0]:
        raise ShapeError(
            f"input channels: weight expects C_in={weight.shape[1]}, x has {x.shape[0]}"
        )
    if bias.shape != (weight.shape[0],):
        raise ShapeError(
            f"output channels: bias shape {bias.shape} != ({weight.shape[0]},)"
        )
    y = weight.astype(np.float64) @ x.astype(np.float64)
    y += bias.astype(np.float64)[:, None]
    return y.astype(DTYPE)


def dconv1d(x, kernels, bias):
    """Depthwise 1-D convolution with zero same-padding.

    Channel ``c`` is correlated with its own kernel row only:
    ``y[c, t] = bias[c] + sum_k kernels[c, k] * x_pad[c, t + k]``.
    """
    x = _check_2d(x)
    kernels = np.asarray(kernels)
    bias = np.asarray(bias)
    if kernels.ndim != 2:
        raise ShapeError(f"kernels: expected (C, K), got shape {kernels.shape}")
    if kernels.shape[0] != x.shape[0]:
        raise ShapeError(
            f"channels: kernels have C={kernels.shape[0]}, x has {x.shape[0]}"
        )
    if bias.shape != (x.shape[0],):
        raise ShapeError(f"channels: bias shape {bias.shape} != ({x.shape[0]},)")
    k = kernels.shape[1]
    xp = _pad_time(x.astype(np.float64), k)
    windows = sliding_window_view(xp, k, axis=1)  # (C, T, K)
    y = np.einsum("ctk,ck->ct", windows, kernels.astype(np.float64))
    y += bias.astype(np.float64)[:, None]
    return y.astype(DTYPE)


def conv1d_general(x, weight, bias):
    """Full cross-channel 1-D convolution, stride 1, zero same-padding.

    ``weight`` has shape (C_out, C_in, K).
    """
    x = _check_2d(x)
    weight = np.asarray(weight)
    bias = np.asarray(bias)
    if weight.ndim != 3:
        raise ShapeError(f"weight: expected (C_out, C_in, K), got shape {weight.shape}")
    c_out, c_in, k = weight.shape
    if c_in != x.shape[0]:
        raise ShapeError(f"input channels: weight expects C_in={c_in}, x has {x.shape[0]}")
    if bias.shape != (c_out,):
        raise ShapeError(f"output channels: bias shape {bias.shape} != ({c_out},)")
    xp = _pad_time(x.astype(np.float64), k)
    windows = sliding_window_view(xp, k, axis=1)  # (C_in, T, K)
    y = np.tensordot(weight.astype(np.float64), windows, axes=([1, 2], [0, 2]))
    y += bias.astype(np.float64)[:, None]
    return y.astype(DTYPE)


def layer_norm(x, gamma, beta, eps=LN_EPS):
    """Per-frame normalization over the channel axis with affine output."""
    x = _check_2d(x)
    gamma = np.asarray(gamma)
    beta = np.asarray(beta)
    c = x.shape[0]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(
            f"channels: gamma {gamma.shape} / beta {beta.shape} do not match C={c}"
        )
    if eps <= 0:
        raise ValueError("eps must be positive")
    x64 = x.astype(np.float64)
    mean = x64.mean(axis=0, keepdims=True)
    var = ((x64 - mean) ** 2).mean(axis=0, keepdims=True)
    y = (x64 - mean) / np.sqrt(var + eps)
    y = gamma.astype(np.float64)[:, None] * y + beta.astype(np.float64)[:, None]
    return y.astype(DTYPE)


def gelu(x):
    """Exact GELU, ``x * Phi(x)`` with the erf-based normal CDF."""
    x64 = np.asarray(x, dtype=np.float64)
    return (0.5 * x64 * (1.0 + erf(x64 / np.sqrt(2.0)))).astype(DTYPE)


def softmax_time(x):
    """Softmax along the frame axis, independently per channel."""
    x64 = _check_2d(x).astype(np.float64)
    z = np.exp(x64 - x64.max(axis=1, keepdims=True))
    return (z / z.sum(axis=1, keepdims=True)).astype(DTYPE)
