"""Flat key=value run configuration shared by every CLI command.

File format: one ``key = value`` per line, ``#`` starts a comment, blank
lines are ignored. Lists are comma separated. Unknown keys are errors.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .model import ModelConfig, Variant
from .train import TrainConfig


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(p) for p in s.split(",") if p.strip())


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(p) for p in s.split(",") if p.strip())


@dataclass
class RunConfig:
    # data: "synthetic" or a CSV path
    data: str = "synthetic"
    split: str = "auto"  # auto | single | three comma-separated ratios
    scale: bool = True
    synth_length: int = 2000
    synth_vars: int = 3
    synth_periods: tuple[float, ...] = (24.0, 12.0, 7.0)
    synth_noise: float = 0.1
    synth_seed: int = 0
    # model
    variant: str = "full"
    seq_len: int = 96
    horizon: int = 96
    d_model: int = 32
    n_heads: int = 4
    layers: int = 1
    # training
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    patience: int = 10
    clip_norm: float = 5.0
    seed: int = 0
    # command specific
    seeds: tuple[int, ...] = (0, 1, 2)
    checkpoint: str = ""
    eval_split: str = "test"
    bench_lengths: tuple[int, ...] = (256, 512, 1024, 2048, 4096)
    bench_repeats: int = 5
    bench_warmup: int = 2
    bench_batch: int = 1
    plot_input: str = ""

    def __post_init__(self):
        Variant.parse(self.variant)
        if self.bench_repeats < 5:
            raise ConfigError(f"bench_repeats must be >= 5, got {self.bench_repeats}")
        if self.bench_warmup < 2:
            raise ConfigError(f"bench_warmup must be >= 2, got {self.bench_warmup}")
        lengths = list(self.bench_lengths)
        if lengths != sorted(lengths) or min(lengths, default=2) < 2:
            raise ConfigError(f"bench_lengths must be ascending and >= 2, got {lengths}")
        if self.eval_split not in ("train", "val", "test"):
            raise ConfigError(f"eval_split must be train, val or test, got {self.eval_split!r}")

    # -- conversions ----------------------------------------------------
    def model_config(self, n_vars: int, seed: int | None = None) -> ModelConfig:
        return ModelConfig(self.seq_len, self.horizon, n_vars, self.d_model, self.n_heads,
                           self.layers, self.seed if seed is None else seed)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.lr, self.batch_size, self.epochs, self.patience,
                           self.clip_norm, self.seed)

    def split_spec(self):
        if self.split == "auto":
            return None
        if self.split == "single":
            return "single"
        ratios = _floats(self.split)
        if len(ratios) != 3:
            raise ConfigError(f"split must be auto, single or three ratios, got {self.split!r}")
        return ratios

    # -- text form --------------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_PARSERS = {int: int, float: float, bool: _bool, str: str,
            "tuple[int, ...]": _ints, "tuple[float, ...]": _floats}


def _parser(f):
    t = f.type
    if isinstance(t, str):
        t = {"int": int, "float": float, "bool": bool, "str": str}.get(t, t)
    return _PARSERS[t]


KEYS = {f.name: f for f in fields(RunConfig)}


def parse_assignments(pairs, source: str = "<override>") -> dict:
    """``[(lineno, "key = value"), ...]`` -> typed dict; errors name the source and line."""
    out = {}
    for lineno, text in pairs:
        where = f"{source}:{lineno}" if lineno else source
        if "=" not in text:
            raise ConfigError(f"{where}: expected key=value, got {text!r}")
        key, value = (s.strip() for s in text.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{where}: unknown config key {key!r}")
        try:
            out[key] = _parser(KEYS[key])(value)
        except ValueError as e:
            raise ConfigError(f"{where}: bad value for {key!r}: {e}") from None
    return out


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    pairs = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if line:
            pairs.append((lineno, line))
    return parse_assignments(pairs, str(path))


def resolve(config_path=None, overrides=(), seed: int | None = None) -> RunConfig:
    """File values, then ``--set`` overrides, then ``--seed``."""
    values = read_config_file(config_path) if config_path else {}
    values.update(parse_assignments([(0, s) for s in overrides], "--set"))
    if seed is not None:
        values["seed"] = seed
    return RunConfig(**values)
