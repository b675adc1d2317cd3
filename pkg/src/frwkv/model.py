"""Full forecaster: RevIN, embedding, spectral dual-branch encoding, horizon head."""
from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .encoder import EncoderStack, LinearBranch, _uniform
from .errors import ConfigError, DimensionError, NonFiniteError
from .revin import RevIN
from .spectral import ComplexSpectrum, irfft, n_bins, rfft
from .tensor import Tensor, as_tensor, count_event, matmul, parameter, transpose

CHECKPOINT_VERSION = 1


class Variant(str, enum.Enum):
    FULL = "full"
    NO_FR = "no_fr"
    NO_LA = "no_la"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(
                f"unknown variant {value!r}; expected one of {[v.value for v in cls]}"
            ) from None


@dataclass
class ModelConfig:
    seq_len: int = 96
    horizon: int = 96
    n_vars: int = 7
    d_model: int = 32
    n_heads: int = 4
    layers: int = 1
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.seq_len < 2:
            raise ConfigError(f"seq_len must be >= 2, got {self.seq_len}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.layers < 1:
            raise ConfigError(f"layers must be >= 1, got {self.layers}")
        if self.n_vars < 1:
            raise ConfigError(f"n_vars must be >= 1, got {self.n_vars}")
        if self.n_heads < 1 or self.d_model % self.n_heads:
            raise ConfigError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")

    @property
    def head_size(self) -> int:
        return self.d_model // self.n_heads

    @property
    def embed_dim(self) -> int:
        return self.d_model

    @property
    def n_bins(self) -> int:
        return n_bins(self.seq_len)


def _check(x: Tensor, stage: str) -> Tensor:
    if not np.all(np.isfinite(x.data)):
        raise NonFiniteError(f"non-finite values after {stage}")
    return x


class FrwkvModel:
    def __init__(self, config: ModelConfig, variant=Variant.FULL):
        config.validate()
        self.config = config
        self.variant = Variant.parse(variant)
        rng = np.random.default_rng(config.seed)
        T, tau, N, C = config.seq_len, config.horizon, config.n_vars, config.d_model

        self.revin = RevIN(N)
        self.w_embed = parameter(_uniform(rng, (N, C), N))
        if self.variant is Variant.NO_FR:
            self.w_fr = parameter(_uniform(rng, (T, T), T))
            self.b_fr = parameter(np.zeros(T))
        if self.variant is Variant.NO_LA:
            self.real_branch = LinearBranch(C, rng)
            self.imag_branch = LinearBranch(C, rng)
        else:
            self.real_branch = EncoderStack(C, config.n_heads, config.layers, rng)
            self.imag_branch = EncoderStack(C, config.n_heads, config.layers, rng)
        self.w_head = parameter(_uniform(rng, (T, tau), T))
        self.b_head = parameter(np.zeros(tau))
        self.w_out = parameter(_uniform(rng, (C, N), C))
        self.b_out = parameter(np.zeros(N))
        self.last_token_count: int | None = None

    # ------------------------------------------------------------------
    def named_parameters(self) -> dict[str, Tensor]:
        out = dict(self.revin.named_parameters())
        out["embed.weight"] = self.w_embed
        if self.variant is Variant.NO_FR:
            out["fr.weight"] = self.w_fr
            out["fr.bias"] = self.b_fr
        out.update(self.real_branch.named_parameters("real."))
        out.update(self.imag_branch.named_parameters("imag."))
        out["head.weight"] = self.w_head
        out["head.bias"] = self.b_head
        out["out.weight"] = self.w_out
        out["out.bias"] = self.b_out
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def clamp_(self):
        self.real_branch.clamp_()
        self.imag_branch.clamp_()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        params = self.named_parameters()
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise ConfigError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, p in params.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != p.shape:
                raise DimensionError(f"{k}: checkpoint shape {arr.shape} vs model {p.shape}")
            p.data[...] = arr

    # ------------------------------------------------------------------
    def embed(self, x_norm) -> Tensor:
        """[B, N, T] -> [B, T, C], a per-step linear map over variables."""
        x_norm = as_tensor(x_norm)
        if x_norm.shape[-2] != self.config.n_vars:
            raise ConfigError(f"expected {self.config.n_vars} variables, got {x_norm.shape[-2]}")
        return matmul(transpose(x_norm, (0, 2, 1)), self.w_embed)

    def encode(self, z: Tensor) -> Tensor:
        """Token mixing between embedding and horizon head; [B, T, C] -> [B, T, C]."""
        if self.variant is Variant.NO_FR:
            u = transpose(matmul(transpose(z, (0, 2, 1)), self.w_fr) + self.b_fr, (0, 2, 1))
            self.last_token_count = u.shape[1]
            count_event("branch_tokens", 2 * u.shape[1])
            return _check(self.real_branch(u) + self.imag_branch(u), "branch encoders")
        spec = rfft(z, axis=1)
        self.last_token_count = spec.n_bins
        count_event("branch_tokens", 2 * spec.n_bins)
        re = _check(self.real_branch(spec.re), "real branch")
        im = _check(self.imag_branch(spec.im), "imaginary branch")
        return _check(irfft(ComplexSpectrum(re, im, z.shape[1], axis=1)), "irfft")

    def forward(self, x) -> Tensor:
        """[B, N, T] -> [B, N, horizon]."""
        x = as_tensor(x)
        cfg = self.config
        if x.ndim != 3 or x.shape[1:] != (cfg.n_vars, cfg.seq_len):
            raise DimensionError(f"expected [B, {cfg.n_vars}, {cfg.seq_len}], got {x.shape}")
        if not np.all(np.isfinite(x.data)):
            raise NonFiniteError("non-finite values in model input")
        x_norm, stats = self.revin.normalize(x)
        z = self.embed(x_norm)
        h = self.encode(z)
        h = matmul(transpose(h, (0, 2, 1)), self.w_head) + self.b_head  # [B, C, tau]
        h = matmul(transpose(h, (0, 2, 1)), self.w_out) + self.b_out  # [B, tau, N]
        _check(h, "horizon projection")
        y = self.revin.denormalize(transpose(h, (0, 2, 1)), stats)
        return _check(y, "RevIN inverse")

    __call__ = forward


def build_variant(config: ModelConfig, variant) -> FrwkvModel:
    return FrwkvModel(config, Variant.parse(variant))


def parameter_count(model: FrwkvModel) -> int:
    return int(sum(p.size for p in model.parameters()))


# --------------------------------------------------------------------------
# checkpoints: one .npz holding a JSON header plus one array per parameter

def save_checkpoint(model: FrwkvModel, path) -> Path:
    path = Path(path)
    header = {
        "format": "frwkv-checkpoint",
        "version": CHECKPOINT_VERSION,
        "variant": model.variant.value,
        "config": asdict(model.config),
        "parameters": {k: list(v.shape) for k, v in model.named_parameters().items()},
    }
    arrays = {"param/" + k: v for k, v in model.state_dict().items()}
    with open(path, "wb") as fh:
        np.savez(fh, __header__=np.array(json.dumps(header, sort_keys=True)), **arrays)
    return path


def load_checkpoint(path) -> FrwkvModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as f:
        header = json.loads(str(f["__header__"]))
        if header.get("format") != "frwkv-checkpoint":
            raise ConfigError(f"{path} is not a frwkv checkpoint")
        known = {f.name for f in fields(ModelConfig)}
        cfg = ModelConfig(**{k: v for k, v in header["config"].items() if k in known})
        model = FrwkvModel(cfg, header["variant"])
        model.load_state_dict({k[len("param/"):]: f[k] for k in f.files if k.startswith("param/")})
    return model
