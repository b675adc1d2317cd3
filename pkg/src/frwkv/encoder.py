"""Linear-attention encoder block run as one left-to-right scan over tokens.

Per token: shift and mix with the previous token, project to receptance,
key, value and gate, derive decay and replacement strength from two small
MLPs, then update a per-head matrix state

    G_t = Diag(d_t) - kn_t i_t^T
    S_t = G_t S_{t-1} + v_t kr_t^T
    y_t = S_t r_t

where ``kn`` is the per-head unit-norm key and ``kr = kn * i`` the
replacement key. A per-head bonus ``beta = sum(r * bonus * kr)`` adds
``beta * v`` to the readout before the gated output projection.

Tensors carry tokens on axis -2 and channels on axis -1; any leading axes
are batch.
"""
from __future__ import annotations

import numpy as np

from .errors import NonFiniteError, DimensionError
from .tensor import (
    Tensor, as_tensor, count_event, grad_enabled, l2_normalize, layer_norm,
    make_op, matmul, parameter, shift_tokens, sigmoid, tanh,
)
from . import tensor as tt


def mlp_width(d_model: int) -> int:
    return max(d_model // 4, 8)


def _uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class EncoderParams:
    """Parameters of one encoder block (plus its pre-normalization gain)."""

    names = (
        "ln_gain", "mu", "w_r", "w_k", "w_v", "w_g",
        "decay_w1", "decay_b1", "decay_w2", "decay_b2",
        "repl_w1", "repl_b1", "repl_w2", "repl_b2",
        "bonus", "w_o",
    )

    def __init__(self, d_model: int, n_heads: int, rng: np.random.Generator):
        if d_model % n_heads:
            raise DimensionError(f"d_model {d_model} not divisible by {n_heads} heads")
        C, h = d_model, mlp_width(d_model)
        self.d_model = C
        self.n_heads = n_heads
        self.ln_gain = parameter(np.ones(C))
        self.mu = parameter(np.full(C, 0.5))
        self.w_r = parameter(_uniform(rng, (C, C), C))
        self.w_k = parameter(_uniform(rng, (C, C), C))
        self.w_v = parameter(_uniform(rng, (C, C), C))
        self.w_g = parameter(_uniform(rng, (C, C), C))
        self.decay_w1 = parameter(_uniform(rng, (C, h), C))
        self.decay_b1 = parameter(np.zeros(h))
        self.decay_w2 = parameter(_uniform(rng, (h, C), h))
        self.decay_b2 = parameter(np.full(C, 2.0))
        self.repl_w1 = parameter(_uniform(rng, (C, h), C))
        self.repl_b1 = parameter(np.zeros(h))
        self.repl_w2 = parameter(_uniform(rng, (h, C), h))
        self.repl_b2 = parameter(np.full(C, -2.0))
        self.bonus = parameter(np.zeros(C))
        self.w_o = parameter(_uniform(rng, (C, C), C))

    @property
    def head_size(self) -> int:
        return self.d_model // self.n_heads

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        return {prefix + n: getattr(self, n) for n in self.names}

    def clamp_(self):
        np.clip(self.mu.data, 0.0, 1.0, out=self.mu.data)


# --------------------------------------------------------------------------
# per-token pieces

def token_shift(z) -> Tensor:
    """Row t becomes row t-1; row 0 becomes zeros."""
    return shift_tokens(z)


def mix_tokens(z, z_shift, mu) -> Tensor:
    mu = as_tensor(mu)
    return (1.0 - mu) * z + mu * z_shift


def project_step(z_mix, p: EncoderParams):
    """Receptance, key, value, gate, decay and replacement strength."""
    r = matmul(z_mix, p.w_r)
    k = matmul(z_mix, p.w_k)
    v = matmul(z_mix, p.w_v)
    g = sigmoid(matmul(z_mix, p.w_g))
    d = sigmoid(matmul(tanh(matmul(z_mix, p.decay_w1) + p.decay_b1), p.decay_w2) + p.decay_b2)
    i = sigmoid(matmul(tanh(matmul(z_mix, p.repl_w1) + p.repl_b1), p.repl_w2) + p.repl_b2)
    return r, k, v, g, d, i


def split_heads(x, n_heads: int) -> Tensor:
    x = as_tensor(x)
    return x.reshape(x.shape[:-1] + (n_heads, x.shape[-1] // n_heads))


def merge_heads(x) -> Tensor:
    return x.reshape(x.shape[:-2] + (x.shape[-2] * x.shape[-1],))


def prepare_keys(k, i, n_heads: int):
    """Per-head unit-norm key and its replacement-weighted copy, both [..., H, D]."""
    k_norm = l2_normalize(split_heads(k, n_heads))
    k_repl = k_norm * split_heads(i, n_heads)
    return k_norm, k_repl


def transition(d, k_norm, i) -> np.ndarray:
    """Materialized ``Diag(d) - k_norm i^T`` for [..., D] inputs."""
    d, k_norm, i = (np.asarray(a, dtype=np.float64) for a in (d, k_norm, i))
    return d[..., :, None] * np.eye(d.shape[-1]) - k_norm[..., :, None] * i[..., None, :]


def _step(S, d, kn, i, v, kr):
    iS = np.matmul(i[..., None, :], S)[..., 0, :]
    return d[..., :, None] * S - kn[..., :, None] * iS[..., None, :] + v[..., :, None] * kr[..., None, :]


def state_update(S_prev, d, k_norm, i, v, k_repl):
    """One recurrence step on [..., D, D] states; returns ``(S_t, G_t)``."""
    arrs = [np.asarray(a.data if isinstance(a, Tensor) else a, dtype=np.float64)
            for a in (S_prev, d, k_norm, i, v, k_repl)]
    return _step(*arrs), transition(arrs[1], arrs[2], arrs[3])


def readout(S, r) -> np.ndarray:
    S = np.asarray(S.data if isinstance(S, Tensor) else S)
    r = np.asarray(r.data if isinstance(r, Tensor) else r)
    return np.matmul(S, r[..., :, None])[..., 0]


def _scan_flops(batch: int, D: int) -> int:
    # i@S: 2D^2, decay: D^2, rank-one forget: 2D^2, write: 2D^2, readout: 2D^2
    return 9 * D * D * batch


def wkv_scan(d, k_norm, i, v, k_repl, r) -> Tensor:
    """Run the state recursion over axis -3 of [..., L, H, D] inputs.

    Returns the readouts ``y`` with the same shape. The state starts at zero
    and is O(H D^2) regardless of L.
    """
    ins = [as_tensor(a) for a in (d, k_norm, i, v, k_repl, r)]
    shape = ins[0].shape
    for t in ins[1:]:
        if t.shape != shape:
            raise DimensionError(f"scan inputs disagree: {shape} vs {t.shape}")
    *lead, L, H, D = shape
    # [L, batch, H, D] views for per-step slicing
    arrs = [np.moveaxis(t.data.reshape(-1, L, H, D), 1, 0) for t in ins]
    dd, kn, ii, vv, kr, rr = arrs
    nb = arrs[0].shape[1]
    keep = grad_enabled() and any(t.requires_grad for t in ins)

    S = np.zeros((nb, H, D, D))
    states = np.empty((L + 1, nb, H, D, D)) if keep else None
    if keep:
        states[0] = S
    y = np.empty((L, nb, H, D))
    for t in range(L):
        with np.errstate(over="ignore", invalid="ignore"):
            S = _step(S, dd[t], kn[t], ii[t], vv[t], kr[t])
        if not np.all(np.isfinite(S)):
            raise NonFiniteError(f"recurrent state became non-finite at step {t}")
        y[t] = np.matmul(S, rr[t][..., :, None])[..., 0]
        if keep:
            states[t + 1] = S
    count_event("state_update", L)
    tt.count_flops("wkv_scan", L * _scan_flops(nb * H, D))
    out = np.moveaxis(y, 0, 1).reshape(shape)

    def bw(g):
        gy = np.moveaxis(g.reshape(-1, L, H, D), 1, 0)
        grads = [np.empty((L, nb, H, D)) for _ in range(6)]
        gd, gkn, gi, gv, gkr, gr = grads
        dS = np.zeros((nb, H, D, D))
        for t in range(L - 1, -1, -1):
            St, Sp = states[t + 1], states[t]
            dS += gy[t][..., :, None] * rr[t][..., None, :]
            gr[t] = np.einsum("nhab,nha->nhb", St, gy[t])
            gv[t] = np.matmul(dS, kr[t][..., :, None])[..., 0]
            gkr[t] = np.einsum("nhab,nha->nhb", dS, vv[t])
            gd[t] = np.einsum("nhab,nhab->nha", dS, Sp)
            iSp = np.matmul(ii[t][..., None, :], Sp)[..., 0, :]
            gkn[t] = -np.matmul(dS, iSp[..., :, None])[..., 0]
            kdS = np.matmul(kn[t][..., None, :], dS)[..., 0, :]
            gi[t] = -np.matmul(Sp, kdS[..., :, None])[..., 0]
            dS = dd[t][..., :, None] * dS - ii[t][..., :, None] * kdS[..., None, :]
        return tuple(np.moveaxis(x, 0, 1).reshape(shape) for x in grads)

    return make_op("wkv_scan", out, ins, bw)


def bonus_gate(r, k_repl, v, y, g, bonus, w_o, n_heads: int) -> Tensor:
    """``g * ((y + beta v) @ W_o)`` with ``beta`` computed per head.

    ``r, v, y, g`` are [..., C]; ``k_repl`` is [..., H, D]; ``bonus`` is the
    diagonal of the bonus matrix, length C.
    """
    rh = split_heads(r, n_heads)
    beta = (rh * split_heads(bonus, n_heads) * k_repl).sum(axis=-1, keepdims=True)
    mixed = merge_heads(split_heads(y, n_heads) + beta * split_heads(v, n_heads))
    return g * matmul(mixed, w_o)


def _check_finite(x: Tensor, stage: str):
    if not np.all(np.isfinite(x.data)):
        bad = np.argwhere(~np.isfinite(x.data))[0]
        step = int(bad[-2]) if x.ndim >= 2 else int(bad[0])
        raise NonFiniteError(f"non-finite activation in {stage} at token {step}")


def encoder_block(z, p: EncoderParams) -> Tensor:
    """Pre-normalized block with residual: ``z + block(norm(z))``."""
    z = as_tensor(z)
    if z.ndim < 2 or z.shape[-1] != p.d_model:
        raise DimensionError(f"encoder expects [..., L, {p.d_model}], got {z.shape}")
    x = layer_norm(z) * p.ln_gain
    x_mix = mix_tokens(x, token_shift(x), p.mu)
    r, k, v, g, d, i = project_step(x_mix, p)
    H = p.n_heads
    k_norm, k_repl = prepare_keys(k, i, H)
    y = wkv_scan(split_heads(d, H), k_norm, split_heads(i, H), split_heads(v, H),
                 k_repl, split_heads(r, H))
    o = bonus_gate(r, k_repl, v, merge_heads(y), g, p.bonus, p.w_o, H)
    _check_finite(o, "encoder block")
    return z + o


def encoder_forward(z, params) -> Tensor:
    """Apply one block or a sequence of blocks."""
    if isinstance(params, EncoderParams):
        params = [params]
    for p in params:
        z = encoder_block(z, p)
    return z


class EncoderStack:
    def __init__(self, d_model: int, n_heads: int, layers: int, rng: np.random.Generator):
        self.layers = [EncoderParams(d_model, n_heads, rng) for _ in range(layers)]

    def __call__(self, z) -> Tensor:
        return encoder_forward(z, self.layers)

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out = {}
        for n, layer in enumerate(self.layers):
            out.update(layer.named_parameters(f"{prefix}{n}."))
        return out

    def clamp_(self):
        for layer in self.layers:
            layer.clamp_()


class LinearBranch:
    """Per-token dense C -> C map used when linear attention is ablated."""

    def __init__(self, d_model: int, rng: np.random.Generator):
        self.weight = parameter(_uniform(rng, (d_model, d_model), d_model))
        self.bias = parameter(np.zeros(d_model))

    def __call__(self, z) -> Tensor:
        return matmul(z, self.weight) + self.bias

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        return {prefix + "weight": self.weight, prefix + "bias": self.bias}

    def clamp_(self):
        pass
