"""Real-input DFT and its inverse along one axis, as tape-recorded linear maps.

Lengths here are at most a few hundred, so the transforms are dense
cosine/sine matrices rather than a radix FFT.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ContractError, DimensionError
from .tensor import Tensor, as_tensor, make_op


def n_bins(length: int) -> int:
    return length // 2 + 1


@dataclass
class ComplexSpectrum:
    re: Tensor
    im: Tensor
    original_length: int
    axis: int = -1

    def __post_init__(self):
        if self.re.shape != self.im.shape:
            raise DimensionError(f"re {self.re.shape} and im {self.im.shape} differ")
        if self.re.shape[self.axis] != n_bins(self.original_length):
            raise ContractError(
                f"{self.re.shape[self.axis]} bins inconsistent with length {self.original_length}"
            )

    @property
    def n_bins(self) -> int:
        return self.re.shape[self.axis]

    def to_complex(self) -> np.ndarray:
        return self.re.data + 1j * self.im.data


def _cos_sin(m: np.ndarray, T: int):
    """cos and sin of 2*pi*m/T with exact values at quarter turns."""
    ang = 2.0 * np.pi * m / T
    cos, sin = np.cos(ang), np.sin(ang)
    quarter = (4 * m) % T == 0
    q = (4 * m // T) % 4
    cos[quarter] = np.array([1.0, 0.0, -1.0, 0.0])[q[quarter]]
    sin[quarter] = np.array([0.0, 1.0, 0.0, -1.0])[q[quarter]]
    return cos, sin


@lru_cache(maxsize=64)
def _forward_mats(T: int):
    F = n_bins(T)
    k = np.arange(F)[:, None]
    n = np.arange(T)[None, :]
    # reduce k*n mod T first so large products keep full angle precision
    cos, sin = _cos_sin((k * n) % T, T)
    sin = -sin
    cos.flags.writeable = False
    sin.flags.writeable = False
    return cos, sin


@lru_cache(maxsize=64)
def _inverse_mats(T: int):
    F = n_bins(T)
    n = np.arange(T)[:, None]
    k = np.arange(F)[None, :]
    cos, sin = _cos_sin((k * n) % T, T)
    w = np.full(F, 2.0)
    w[0] = 1.0
    if T % 2 == 0:
        w[-1] = 1.0
    ar = w * cos / T
    ai = -w * sin / T
    # imaginary parts at DC and Nyquist are projected out
    ai[:, 0] = 0.0
    if T % 2 == 0:
        ai[:, -1] = 0.0
    ar.flags.writeable = False
    ai.flags.writeable = False
    return ar, ai


def _apply(mat: np.ndarray, x: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(mat, x, axes=([1], [axis])), 0, axis)


def rfft(x, axis: int = -1) -> ComplexSpectrum:
    """Non-redundant DFT bins ``X[k] = sum_n x[n] exp(-2j pi k n / T)``, k < T//2 + 1."""
    x = as_tensor(x)
    axis = axis % x.ndim
    T = x.shape[axis]
    if T < 2:
        raise ContractError(f"rfft needs length >= 2 along axis {axis}, got {T}")
    cos, sin = _forward_mats(T)
    F = n_bins(T)
    flops = 2 * x.size * F
    re = make_op("rfft_re", _apply(cos, x.data, axis), (x,),
                 lambda g: (_apply(cos.T, g, axis),), flops=flops)
    im = make_op("rfft_im", _apply(sin, x.data, axis), (x,),
                 lambda g: (_apply(sin.T, g, axis),), flops=flops)
    return ComplexSpectrum(re, im, T, axis)


def irfft(s: ComplexSpectrum) -> Tensor:
    """Real inverse of a half spectrum via Hermitian completion.

    Imaginary parts at bin 0 and (even length) the Nyquist bin cannot appear
    in a real signal and are dropped.
    """
    T = s.original_length
    axis = s.axis % s.re.ndim
    if s.re.shape[axis] != n_bins(T):
        raise ContractError(f"{s.re.shape[axis]} bins inconsistent with length {T}")
    ar, ai = _inverse_mats(T)
    re, im = s.re, s.im
    out = _apply(ar, re.data, axis) + _apply(ai, im.data, axis)
    return make_op(
        "irfft", out, (re, im),
        lambda g: (_apply(ar.T, g, axis), _apply(ai.T, g, axis)),
        flops=4 * out.size * re.shape[axis],
    )


def hermitian_complete(s: ComplexSpectrum) -> np.ndarray:
    """Full length-T complex spectrum: bins >= F mirror as conjugates of bin T-k."""
    T = s.original_length
    half = np.moveaxis(s.to_complex(), s.axis, -1)
    full = np.empty(half.shape[:-1] + (T,), dtype=np.complex128)
    F = n_bins(T)
    full[..., :F] = half
    for k in range(F, T):
        full[..., k] = np.conj(half[..., T - k])
    return np.moveaxis(full, -1, s.axis)
