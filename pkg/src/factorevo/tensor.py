"""Dense float32 linear algebra used by every network in the package.

Matrices are plain 2-D ``float32`` numpy arrays in row-major order. Conv
weights are 4-D arrays laid out ``(out, in, kh, kw)``; their matrix form is
``(in * kh * kw, out)`` with row index ``in_idx * kh * kw + r * kw + s``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

DTYPE = np.float32


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=DTYPE)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a @ b`` accumulated in float64 and rounded once to float32.

    Accepts any leading batch dimensions on ``a``; the contraction is over the
    last axis of ``a`` and the first axis of ``b``.
    """
    if a.shape[-1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return np.matmul(a.astype(np.float64), b.astype(np.float64)).astype(DTYPE)


def reshape_to_conv(w: np.ndarray, dims: tuple[int, int, int, int]) -> np.ndarray:
    """Matrix ``(in*kh*kw, out)`` -> conv weight ``(out, in, kh, kw)``.

    ``dims`` is ``(in_channels, out_channels, kernel_h, kernel_w)``.
    """
    cin, cout, kh, kw = dims
    w = np.asarray(w)
    if w.shape != (cin * kh * kw, cout):
        raise ValueError(f"matrix shape {w.shape} does not match conv dims {dims}")
    return np.ascontiguousarray(w.T.reshape(cout, cin, kh, kw))


def reshape_from_conv(w: np.ndarray) -> np.ndarray:
    """Inverse of :func:`reshape_to_conv`."""
    if w.ndim != 4:
        raise ValueError(f"expected a 4-D conv weight, got shape {w.shape}")
    cout = w.shape[0]
    return np.ascontiguousarray(w.reshape(cout, -1).T)


def conv_output_size(size: int, kernel: int, stride: int) -> int:
    if kernel > size:
        raise ValueError(f"kernel {kernel} larger than input {size}")
    return (size - kernel) // stride + 1


def im2col(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Patches of a ``(C, H, W)`` input as rows of shape ``(oh*ow, C*kh*kw)``."""
    c, h, w = x.shape
    oh = conv_output_size(h, kh, stride)
    ow = conv_output_size(w, kw, stride)
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::stride, ::stride][:, :oh, :ow]
    # (C, oh, ow, kh, kw) -> (oh, ow, C, kh, kw)
    return win.transpose(1, 2, 0, 3, 4).reshape(oh * ow, c * kh * kw)


def conv2d_forward(x: np.ndarray, w: np.ndarray, bias: np.ndarray | None = None, stride: int = 1) -> np.ndarray:
    """Valid (unpadded) cross-correlation of ``x (C,H,W)`` with ``w (out,in,kh,kw)``."""
    x = np.asarray(x, dtype=DTYPE)
    if x.ndim != 3:
        raise ValueError(f"expected (C, H, W) input, got shape {x.shape}")
    cout, cin, kh, kw = w.shape
    if x.shape[0] != cin:
        raise ValueError(f"input has {x.shape[0]} channels, weight expects {cin}")
    oh = conv_output_size(x.shape[1], kh, stride)
    ow = conv_output_size(x.shape[2], kw, stride)
    out = matmul(im2col(x, kh, kw, stride), reshape_from_conv(w))
    if bias is not None:
        out = out + np.asarray(bias, dtype=DTYPE)
    return np.ascontiguousarray(out.T.reshape(cout, oh, ow))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, DTYPE(0))


def softmax_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction; rows may contain ``-inf`` (masked)."""
    m = np.asarray(m)
    if np.isnan(m).any():
        raise ValueError("softmax input contains NaN")
    shifted = m - m.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax_rows(m: np.ndarray) -> np.ndarray:
    if np.isnan(m).any():
        raise ValueError("log-softmax input contains NaN")
    shifted = m - m.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def layer_norm(x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Normalization over the last axis with scale fixed at 1 and shift at 0."""
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps)
