"""Causal attention kernels with a compiled fast path.

The fused forward/backward pair below is the only non-BLAS hot loop in the
model. A Cython build of the same math ships as pinyinlm._attnkernels; this
module picks it when importable and falls back to numpy otherwise. Set
PINYINLM_KERNELS=numpy or =ext to force a backend (ext raises if missing).

Shapes: q, k, v, out are (heads, T, head_dim) float64; probs is (heads, T, T)
row-softmaxed over positions <= t, zero above the diagonal.
"""
from __future__ import annotations

import math
import os

import numpy as np


def _numpy_attn_forward(q, k, v):
    h, t, d = q.shape
    scale = 1.0 / math.sqrt(d)
    scores = np.matmul(q, k.transpose(0, 2, 1)) * scale
    mask = np.triu(np.ones((t, t), dtype=bool), k=1)
    scores[:, mask] = -np.inf
    scores -= scores.max(axis=-1, keepdims=True)
    probs = np.exp(scores)
    probs /= probs.sum(axis=-1, keepdims=True)
    return np.matmul(probs, v), probs


def _numpy_attn_backward(q, k, v, probs, dout):
    d = q.shape[-1]
    scale = 1.0 / math.sqrt(d)
    dv = np.matmul(probs.transpose(0, 2, 1), dout)
    dprobs = np.matmul(dout, v.transpose(0, 2, 1))
    rowdot = np.sum(dprobs * probs, axis=-1, keepdims=True)
    dscores = probs * (dprobs - rowdot) * scale  # zero above diagonal via probs
    dq = np.matmul(dscores, k)
    dk = np.matmul(dscores.transpose(0, 2, 1), q)
    return dq, dk, dv


def _contiguous(*arrays):
    return tuple(np.ascontiguousarray(a, dtype=np.float64) for a in arrays)


class _NumpyBackend:
    name = "numpy"

    @staticmethod
    def attn_forward(q, k, v):
        q, k, v = _contiguous(q, k, v)
        return _numpy_attn_forward(q, k, v)

    @staticmethod
    def attn_backward(q, k, v, probs, dout):
        q, k, v, probs, dout = _contiguous(q, k, v, probs, dout)
        return _numpy_attn_backward(q, k, v, probs, dout)


class _ExtBackend:
    name = "ext"

    def __init__(self, module):
        self._mod = module

    def attn_forward(self, q, k, v):
        q, k, v = _contiguous(q, k, v)
        h, t, d = q.shape
        out = np.zeros((h, t, d), dtype=np.float64)
        probs = np.zeros((h, t, t), dtype=np.float64)
        self._mod.attn_forward(q, k, v, out, probs)
        return out, probs

    def attn_backward(self, q, k, v, probs, dout):
        q, k, v, probs, dout = _contiguous(q, k, v, probs, dout)
        dq = np.zeros_like(q)
        dk = np.zeros_like(k)
        dv = np.zeros_like(v)
        self._mod.attn_backward(q, k, v, probs, dout, dq, dk, dv)
        return dq, dk, dv


def _select_backend():
    choice = os.environ.get("PINYINLM_KERNELS", "auto").strip().lower()
    if choice not in ("auto", "ext", "numpy", ""):
        raise RuntimeError(f"PINYINLM_KERNELS={choice!r}: want auto, ext, or numpy")
    if choice == "numpy":
        return _NumpyBackend()
    try:
        from pinyinlm import _attnkernels  # compiled at install time when possible
    except ImportError:
        if choice == "ext":
            raise RuntimeError("PINYINLM_KERNELS=ext but compiled kernels are unavailable")
        return _NumpyBackend()
    return _ExtBackend(_attnkernels)


_backend = _select_backend()


def backend_name() -> str:
    return _backend.name


def attn_forward(q, k, v):
    """Causal softmax(q k^T / sqrt(d)) v. Returns (out, probs)."""
    return _backend.attn_forward(q, k, v)


def attn_backward(q, k, v, probs, dout):
    """Gradients (dq, dk, dv) for attn_forward given saved probs."""
    return _backend.attn_backward(q, k, v, probs, dout)


def available_backends() -> list[str]:
    names = ["numpy"]
    try:
        from pinyinlm import _attnkernels  # noqa: F401
    except ImportError:
        return names
    return ["ext"] + names
