"""Reversible instance normalization over the temporal (last) axis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .tensor import Tensor, as_tensor, parameter


@dataclass
class RevinStats:
    mean: np.ndarray  # [B, N]
    std: np.ndarray  # [B, N]
    gain: Tensor  # [N]
    bias: Tensor  # [N]


class RevIN:
    def __init__(self, n_vars: int, eps: float = 1e-5, affine: bool = True):
        self.n_vars = n_vars
        self.eps = eps
        self.affine = affine
        self.gain = parameter(np.ones(n_vars), name="revin.gain")
        self.bias = parameter(np.zeros(n_vars), name="revin.bias")

    def named_parameters(self):
        if not self.affine:
            return {}
        return {"revin.gain": self.gain, "revin.bias": self.bias}

    def normalize(self, x):
        return revin_normalize(x, self.gain, self.bias, self.eps)

    def denormalize(self, y, stats):
        return revin_denormalize(y, stats, self.eps)


def revin_normalize(x, gain=None, bias=None, eps: float = 1e-5):
    """``gain * (x - mean) / std + bias`` with per-instance, per-variable stats.

    ``x`` is [B, N, T]; population variance, ``eps`` added under the root.
    Returns the normalized tensor and the :class:`RevinStats` needed to undo it.
    """
    x = as_tensor(x)
    if x.shape[-1] < 2:
        raise ContractError(f"need at least 2 time steps, got {x.shape[-1]}")
    n = x.shape[-2]
    gain = as_tensor(np.ones(n)) if gain is None else gain
    bias = as_tensor(np.zeros(n)) if bias is None else bias
    mean = x.data.mean(axis=-1)
    std = np.sqrt(x.data.var(axis=-1) + eps)
    # statistics are constants: no gradient flows through them
    z = (x - mean[..., None]) / std[..., None]
    z = z * gain.reshape(n, 1) + bias.reshape(n, 1)
    return z, RevinStats(mean, std, gain, bias)


def revin_denormalize(y, stats: RevinStats, eps: float = 1e-5):
    """Exact inverse of the affine map, applied over any horizon length."""
    y = as_tensor(y)
    n = stats.mean.shape[-1]
    if np.any(np.abs(stats.gain.data) < eps):
        raise ContractError("RevIN gain too close to zero to invert")
    z = (y - stats.bias.reshape(n, 1)) / stats.gain.reshape(n, 1)
    return z * stats.std[..., None] + stats.mean[..., None]
