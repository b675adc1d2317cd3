"""Command-line entry point: train, eval, ablate, bench-scaling, plot.

Every command writes under ``--out`` and echoes its resolved configuration to
``config.txt`` there; passing that file back via ``--config`` reproduces the run.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench
from .config import RunConfig, resolve
from .data import KNOWN_SHAPES, load_csv, make_windows, synth_multiperiodic
from .errors import ConfigError, ContractError, DataError, DimensionError, NonFiniteError
from .model import build_variant, load_checkpoint, save_checkpoint
from .plot import plot_csv
from .train import ablation_csv, ablation_text, evaluate, full_wins, run_ablation, train

log = logging.getLogger("frwkv")


def load_dataset(cfg: RunConfig, seq_len: int | None = None, horizon: int | None = None):
    T = cfg.seq_len if seq_len is None else seq_len
    tau = cfg.horizon if horizon is None else horizon
    if cfg.data == "synthetic":
        table = synth_multiperiodic(cfg.synth_length, cfg.synth_vars, cfg.synth_periods,
                                    cfg.synth_noise, cfg.synth_seed)
    else:
        path = Path(cfg.data)
        rows, n_vars = KNOWN_SHAPES.get(path.stem, (None, None))
        table = load_csv(path, expected_vars=n_vars, expected_rows=rows)
    log.info("loaded %s: %d rows, %d variables", table.source, len(table), table.n_vars)
    spec = cfg.split_spec()
    if spec is None and table.source == "synthetic":
        spec = (0.7, 0.1, 0.2)
    return make_windows(table, T, tau, spec, scale=cfg.scale)


def _prepare_out(cfg: RunConfig, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    return out


def cmd_train(cfg: RunConfig, out: Path) -> int:
    ds = load_dataset(cfg)
    model = build_variant(cfg.model_config(ds.n_vars), cfg.variant)
    model, report = train(model, ds, cfg.train_config(), eval_split=cfg.eval_split)
    save_checkpoint(model, out / "checkpoint.npz")
    (out / "metrics.csv").write_text(report.metrics_csv())
    (out / "loss_curve.csv").write_text(report.loss_curve_csv())
    (out / "metrics.txt").write_text(report.text())
    print(report.text(), end="")
    return 0


def cmd_eval(cfg: RunConfig, out: Path) -> int:
    if not cfg.checkpoint:
        raise ConfigError("eval needs checkpoint=<path>")
    model = load_checkpoint(cfg.checkpoint)
    ds = load_dataset(cfg, model.config.seq_len, model.config.horizon)
    report = evaluate(model, ds, cfg.eval_split)
    (out / "metrics.csv").write_text(report.metrics_csv())
    (out / "metrics.txt").write_text(report.text())
    print(report.text(), end="")
    return 0


def cmd_ablate(cfg: RunConfig, out: Path) -> int:
    ds = load_dataset(cfg)
    rows = run_ablation(ds, cfg.model_config(ds.n_vars), cfg.train_config(), seeds=cfg.seeds)
    (out / "ablation.csv").write_text(ablation_csv(rows))
    text = ablation_text(rows) + f"full best in {full_wins(rows)} of {len(cfg.seeds)} seeds\n"
    (out / "ablation.txt").write_text(text)
    print(text, end="")
    return 0


def cmd_bench_scaling(cfg: RunConfig, out: Path) -> int:
    rows = bench.run_scaling(cfg.bench_lengths, cfg.d_model, cfg.n_heads, cfg.bench_repeats,
                             cfg.bench_warmup, cfg.bench_batch, cfg.seed)
    (out / "scaling.csv").write_text(bench.scaling_csv(rows))
    text = bench.scaling_text(rows)
    (out / "scaling.txt").write_text(text)
    print(text, end="")
    return 0


def cmd_plot(cfg: RunConfig, out: Path, inputs=()) -> int:
    paths = [Path(p) for p in inputs] or ([Path(cfg.plot_input)] if cfg.plot_input else [])
    if not paths:
        raise ConfigError("plot needs CSV paths (positional or plot_input=<path>)")
    for p in paths:
        target = plot_csv(p, out / (p.stem + ".svg"))
        print(f"wrote {target}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "bench-scaling": cmd_bench_scaling,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="frwkv", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("inputs", nargs="*", help="CSV files (plot only)")
    ap.add_argument("--config", help="key=value config file")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override one config key (repeatable)")
    ap.add_argument("--out", default="runs", help="output directory (default: runs)")
    ap.add_argument("--seed", type=int, help="override the seed key")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args.config, args.overrides, args.seed)
        if args.inputs and args.command != "plot":
            raise ConfigError(f"{args.command} takes no positional arguments")
        out = _prepare_out(cfg, Path(args.out))
        if args.command == "plot":
            return cmd_plot(cfg, out, args.inputs)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, DataError, ContractError, DimensionError, NonFiniteError,
            FileNotFoundError) as e:
        print(f"frwkv {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
