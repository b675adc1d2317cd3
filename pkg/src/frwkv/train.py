"""Training loop, metrics and the ablation protocol."""
from __future__ import annotations

import io
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .data import WindowedDataset
from .errors import ConfigError, DataError, DimensionError, NonFiniteError
from .model import FrwkvModel, ModelConfig, Variant, build_variant
from .tensor import Adam, ComputationTape, Tensor, clip_grad_norm, no_grad

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    patience: int = 10
    clip_norm: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigError(f"lr must be non-negative, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")


def _fmt(x: float) -> str:
    return repr(float(x))


def mse(pred, target) -> float:
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction shape {pred.shape} vs target shape {target.shape}")
    return float(np.mean((pred - target) ** 2))


def mae(pred, target) -> float:
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction shape {pred.shape} vs target shape {target.shape}")
    return float(np.mean(np.abs(pred - target)))


def mse_loss(pred: Tensor, target) -> Tensor:
    diff = pred - target
    return (diff * diff).mean()


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    seconds: float


@dataclass
class MetricsReport:
    split: str
    horizon: int
    n_windows: int
    mse: float
    mae: float
    units: str
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None
    best_val: float | None = None

    def metrics_csv(self) -> str:
        """Deterministic metrics table; timing lives only in the loss curve."""
        out = io.StringIO()
        out.write("split,horizon,n_windows,mse,mae,units\n")
        out.write(f"{self.split},{self.horizon},{self.n_windows},{_fmt(self.mse)},{_fmt(self.mae)},{self.units}\n")
        return out.getvalue()

    def loss_curve_csv(self) -> str:
        out = io.StringIO()
        out.write("epoch,train_loss,val_loss,seconds\n")
        for r in self.history:
            out.write(f"{r.epoch},{_fmt(r.train_loss)},{_fmt(r.val_loss)},{r.seconds:.6f}\n")
        return out.getvalue()

    def text(self) -> str:
        lines = [
            f"split      {self.split}",
            f"horizon    {self.horizon}",
            f"windows    {self.n_windows}",
            f"MSE        {self.mse:.6f}",
            f"MAE        {self.mae:.6f}",
            f"units      {self.units}",
        ]
        if self.best_epoch is not None:
            lines.append(f"best epoch {self.best_epoch} (val loss {self.best_val:.6f})")
        return "\n".join(lines) + "\n"


def predict(model: FrwkvModel, dataset: WindowedDataset, split: str, batch_size: int = 256):
    starts = dataset.starts(split)
    if len(starts) == 0:
        raise DataError(f"split {split!r} has no windows")
    preds, targets = [], []
    with no_grad():
        for b in range(0, len(starts), batch_size):
            x, y = dataset.batch(starts[b: b + batch_size])
            preds.append(model(x).data)
            targets.append(y)
    return np.concatenate(preds), np.concatenate(targets)


def evaluate(model: FrwkvModel, dataset: WindowedDataset, split: str = "test",
             batch_size: int = 256) -> MetricsReport:
    cfg = model.config
    if (cfg.seq_len, cfg.horizon, cfg.n_vars) != (dataset.seq_len, dataset.horizon, dataset.n_vars):
        raise ConfigError(
            f"model expects (T={cfg.seq_len}, horizon={cfg.horizon}, N={cfg.n_vars}); dataset has "
            f"(T={dataset.seq_len}, horizon={dataset.horizon}, N={dataset.n_vars})"
        )
    pred, target = predict(model, dataset, split, batch_size)
    return MetricsReport(split, dataset.horizon, len(pred), mse(pred, target), mae(pred, target),
                         "scaled" if dataset.scaled else "raw")


def train(model: FrwkvModel, dataset: WindowedDataset, config: TrainConfig,
          eval_split: str = "test"):
    """Adam on MSE with clipping and early stopping on validation loss.

    The best-validation parameters are restored before the final evaluation.
    Returns ``(model, report)``.
    """
    if dataset.n_windows("train") == 0 or dataset.n_windows("val") == 0:
        raise DataError("training needs non-empty train and val splits")
    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    opt = Adam(params, lr=config.lr)
    train_starts = dataset.starts("train")

    history: list[EpochRecord] = []
    best_val = evaluate(model, dataset, "val").mse
    best_state = model.state_dict()
    best_epoch = 0
    stale = 0
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(train_starts)
        total, count = 0.0, 0
        for step, b in enumerate(range(0, len(order), config.batch_size)):
            x, y = dataset.batch(order[b: b + config.batch_size])
            with ComputationTape() as tape:
                loss = mse_loss(model(x), y)
                if not np.isfinite(loss.item()):
                    raise NonFiniteError(f"non-finite training loss at epoch {epoch}, step {step}")
                opt.zero_grad()
                tape.backward(loss)
            if config.clip_norm > 0:
                clip_grad_norm(params, config.clip_norm)
            if not opt.step():
                log.warning("skipped update with non-finite gradient at epoch %d step %d", epoch, step)
            model.clamp_()
            total += loss.item() * len(x)
            count += len(x)
        val = evaluate(model, dataset, "val").mse
        history.append(EpochRecord(epoch, total / count, val, time.perf_counter() - t0))
        log.info("epoch %d train %.6f val %.6f", epoch, total / count, val)
        if val < best_val:
            best_val, best_state, best_epoch, stale = val, model.state_dict(), epoch, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    model.load_state_dict(best_state)
    opt.zero_grad()
    report = evaluate(model, dataset, eval_split)
    report.history = history
    report.best_epoch = best_epoch
    report.best_val = best_val
    return model, report


ABLATION_VARIANTS = (Variant.FULL, Variant.NO_FR, Variant.NO_LA)


def run_ablation(dataset: WindowedDataset, model_config: ModelConfig, train_config: TrainConfig,
                 seeds=(0, 1, 2), variants=ABLATION_VARIANTS) -> list[dict]:
    """Train each variant under identical seeds and budget; one row per (variant, seed)."""
    rows = []
    for seed in seeds:
        for variant in variants:
            mcfg = ModelConfig(**{**model_config.__dict__, "seed": seed})
            tcfg = TrainConfig(**{**train_config.__dict__, "seed": seed})
            model = build_variant(mcfg, variant)
            _, rep = train(model, dataset, tcfg)
            rows.append({"variant": Variant.parse(variant).value, "seed": seed,
                         "mse": rep.mse, "mae": rep.mae})
            log.info("ablation %s seed %d: mse %.6f mae %.6f", variant, seed, rep.mse, rep.mae)
    return rows


def ablation_summary(rows: list[dict]) -> list[dict]:
    """Per-variant mean rows, in first-seen variant order."""
    order = list(dict.fromkeys(r["variant"] for r in rows))
    out = []
    for v in order:
        sel = [r for r in rows if r["variant"] == v]
        out.append({"variant": v, "seed": "mean",
                    "mse": float(np.mean([r["mse"] for r in sel])),
                    "mae": float(np.mean([r["mae"] for r in sel]))})
    return out


def ablation_csv(rows: list[dict]) -> str:
    out = io.StringIO()
    out.write("variant,seed,mse,mae\n")
    for r in rows + ablation_summary(rows):
        out.write(f"{r['variant']},{r['seed']},{_fmt(r['mse'])},{_fmt(r['mae'])}\n")
    return out.getvalue()


def ablation_text(rows: list[dict]) -> str:
    lines = [f"{'variant':<8} {'seed':>5} {'MSE':>10} {'MAE':>10}"]
    for r in rows + ablation_summary(rows):
        lines.append(f"{r['variant']:<8} {str(r['seed']):>5} {r['mse']:>10.6f} {r['mae']:>10.6f}")
    return "\n".join(lines) + "\n"


def full_wins(rows: list[dict]) -> int:
    """Number of seeds where Full has strictly lower MSE than every ablation."""
    wins = 0
    for seed in dict.fromkeys(r["seed"] for r in rows):
        by_variant = {r["variant"]: r["mse"] for r in rows if r["seed"] == seed}
        full = by_variant.get(Variant.FULL.value)
        others = [m for v, m in by_variant.items() if v != Variant.FULL.value]
        if full is not None and others and all(full < m for m in others):
            wins += 1
    return wins
