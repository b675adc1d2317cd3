import re

import numpy as np
import pytest

from frwkv import bench
from frwkv.cli import main
from frwkv.config import RunConfig, read_config_file, resolve
from frwkv.errors import ConfigError, DataError
from frwkv.plot import plot_csv

TINY = ["--set", "synth_length=260", "--set", "synth_vars=2", "--set", "seq_len=16",
        "--set", "horizon=8", "--set", "d_model=8", "--set", "n_heads=2", "--set", "epochs=2",
        "--set", "batch_size=16"]


# config ---------------------------------------------------------------------

def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nseq_len = 48\n\nlr = 0.01  # inline\nsynth_periods = 8,3.5\n")
    cfg = resolve(p, ["lr=0.5", "scale=false"], seed=7)
    assert cfg.seq_len == 48 and cfg.lr == 0.5 and cfg.seed == 7 and cfg.scale is False
    assert cfg.synth_periods == (8.0, 3.5)


def test_unknown_key_names_line(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("seq_len = 48\nsequence = 3\n")
    with pytest.raises(ConfigError, match=r"run.cfg:2: unknown config key 'sequence'"):
        read_config_file(p)


def test_bad_value_rejected():
    with pytest.raises(ConfigError, match="seq_len"):
        resolve(None, ["seq_len=abc"])


def test_echo_roundtrips(tmp_path):
    cfg = resolve(None, ["lr=0.0123", "seeds=3,4", "variant=no_la", "scale=false"])
    p = tmp_path / "echo.txt"
    p.write_text(cfg.to_text())
    assert resolve(p) == cfg


def test_bench_needs_enough_repeats():
    with pytest.raises(ConfigError):
        RunConfig(bench_repeats=3)


# commands -------------------------------------------------------------------

def test_train_writes_artifacts_and_reproduces(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["train", *TINY, "--seed", "3", "--out", str(a)]) == 0
    for name in ("checkpoint.npz", "metrics.csv", "loss_curve.csv", "config.txt", "metrics.txt"):
        assert (a / name).stat().st_size > 0
    # rerun from the echoed config alone
    assert main(["train", "--config", str(a / "config.txt"), "--out", str(b)]) == 0
    assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
    assert "seed = 3" in (a / "config.txt").read_text()


def test_eval_from_checkpoint(tmp_path):
    a = tmp_path / "a"
    assert main(["train", *TINY, "--out", str(a)]) == 0
    e = tmp_path / "e"
    assert main(["eval", "--config", str(a / "config.txt"),
                 "--set", f"checkpoint={a / 'checkpoint.npz'}", "--out", str(e)]) == 0
    assert (e / "metrics.csv").read_text() == (a / "metrics.csv").read_text()


def test_missing_dataset_names_path(tmp_path, capsys):
    rc = main(["train", "--set", f"data={tmp_path / 'missing.csv'}", "--out", str(tmp_path)])
    assert rc != 0
    assert "missing.csv" in capsys.readouterr().err


def test_unknown_key_is_nonzero_exit(tmp_path, capsys):
    assert main(["train", "--set", "colour=red", "--out", str(tmp_path)]) != 0
    assert "colour" in capsys.readouterr().err


def test_ablate_table_shape(tmp_path):
    out = tmp_path / "abl"
    assert main(["ablate", *TINY, "--set", "epochs=1", "--set", "seeds=0,1", "--out", str(out)]) == 0
    lines = (out / "ablation.csv").read_text().splitlines()
    assert lines[0] == "variant,seed,mse,mae"
    body = [ln.split(",") for ln in lines[1:]]
    per_seed = [r for r in body if r[1] != "mean"]
    assert len(per_seed) == 3 * 2
    assert {r[0] for r in per_seed} == {"full", "no_fr", "no_la"}
    assert (out / "ablation.txt").exists()


def test_bench_scaling_outputs(tmp_path):
    out = tmp_path / "bench"
    assert main(["bench-scaling", "--set", "bench_lengths=16,32,64", "--set", "d_model=8",
                 "--set", "n_heads=2", "--out", str(out)]) == 0
    lines = (out / "scaling.csv").read_text().splitlines()
    assert lines[0] == "seq_len,median_seconds,min_seconds,state_floats,state_bytes"
    rows = [ln.split(",") for ln in lines[1:]]
    assert [int(r[0]) for r in rows] == [16, 32, 64]
    assert {int(r[3]) for r in rows} == {2 * 4 * 4}
    assert "alpha" in (out / "scaling.txt").read_text()


def test_state_floats_formula():
    assert bench.state_floats(32, 4) == 4 * 8 * 8
    assert bench.fit_exponent([1, 2, 4], [3, 6, 12]) == pytest.approx(1.0)


# plots ----------------------------------------------------------------------

def _polyline_points(svg):
    pts = []
    for m in re.finditer(r'points="([^"]*)"', svg):
        pts += [tuple(map(float, p.split(","))) for p in m.group(1).split()]
    return pts


def test_two_point_csv_plots(tmp_path):
    csv = tmp_path / "c.csv"
    csv.write_text("epoch,train_loss,val_loss,seconds\n1,0.5,0.6,0.1\n2,0.25,0.4,0.1\n")
    out = plot_csv(csv, tmp_path / "c.svg")
    assert out.stat().st_size > 0


def test_axis_ranges_cover_data(tmp_path):
    csv = tmp_path / "c.csv"
    ys = np.array([[3.0, -1.0], [0.5, 2.5], [7.0, 1.0], [-2.0, 0.0]])
    csv.write_text("x,a,b\n" + "".join(f"{i * 1.5},{a},{b}\n" for i, (a, b) in enumerate(ys)))
    svg = plot_csv(csv, tmp_path / "c.svg").read_text()
    attrs = dict(re.findall(r'data-([xy]-m(?:in|ax))="([^"]+)"', svg))
    assert float(attrs["x-min"]) <= 0.0 and float(attrs["x-max"]) >= 4.5
    assert float(attrs["y-min"]) <= ys.min() and float(attrs["y-max"]) >= ys.max()
    box = re.search(r'class="plot-area" x="(\d+)" y="(\d+)" width="(\d+)" height="(\d+)"', svg)
    x, y, w, h = map(float, box.groups())
    for px, py in _polyline_points(svg):
        assert x - 1e-6 <= px <= x + w + 1e-6 and y - 1e-6 <= py <= y + h + 1e-6


def test_empty_csv_writes_nothing(tmp_path):
    csv = tmp_path / "e.csv"
    csv.write_text("")
    with pytest.raises(DataError, match="empty"):
        plot_csv(csv, tmp_path / "e.svg")
    assert not (tmp_path / "e.svg").exists()


def test_malformed_csv_names_line(tmp_path):
    csv = tmp_path / "m.csv"
    csv.write_text("x,y\n1,2\n2,3,4\n")
    with pytest.raises(DataError, match=r"m.csv:3:"):
        plot_csv(csv, tmp_path / "m.svg")
    assert not (tmp_path / "m.svg").exists()


def test_plot_command(tmp_path):
    csv = tmp_path / "curve.csv"
    csv.write_text("epoch,train_loss,val_loss,seconds\n1,0.5,0.6,0.1\n2,0.25,0.4,0.1\n")
    assert main(["plot", str(csv), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "curve.svg").exists()
    assert main(["plot", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "p")]) != 0
