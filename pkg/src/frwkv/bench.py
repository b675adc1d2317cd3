"""Wall-clock scaling of the encoder path against sequence length."""
from __future__ import annotations

import contextlib
import io
import os
import time
from dataclasses import dataclass

import numpy as np

from .encoder import EncoderParams, encoder_block
from .tensor import no_grad


@dataclass
class ScalingRow:
    seq_len: int
    median_seconds: float
    min_seconds: float
    state_floats: int
    state_bytes: int


@contextlib.contextmanager
def single_thread():
    """Pin BLAS/OpenMP pools to one thread for the duration."""
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # env vars only take effect before numpy loads its BLAS
        os.environ.setdefault("OMP_NUM_THREADS", "1")
        os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
        yield
        return
    with threadpool_limits(limits=1):
        yield


def state_floats(d_model: int, n_heads: int) -> int:
    """Recurrent state per sequence: H matrices of D_h x D_h."""
    d = d_model // n_heads
    return n_heads * d * d


def _runner(seq_len: int, d_model: int, n_heads: int, batch: int, seed: int):
    rng = np.random.default_rng(seed)
    params = EncoderParams(d_model, n_heads, rng)
    z = rng.normal(size=(batch, seq_len, d_model))

    def run() -> float:
        t0 = time.perf_counter()
        with no_grad():
            encoder_block(z, params)
        return time.perf_counter() - t0

    return run


def time_encoder(seq_len: int, d_model: int, n_heads: int, repeats: int = 5, warmup: int = 2,
                 batch: int = 1, seed: int = 0) -> list[float]:
    run = _runner(seq_len, d_model, n_heads, batch, seed)
    for _ in range(warmup):
        run()
    return [run() for _ in range(repeats)]


def fit_exponent(lengths, seconds) -> float:
    """Least-squares slope of log(seconds) on log(length)."""
    slope, _ = np.polyfit(np.log(np.asarray(lengths, float)), np.log(np.asarray(seconds, float)), 1)
    return float(slope)


def run_scaling(lengths, d_model: int = 32, n_heads: int = 4, repeats: int = 5, warmup: int = 2,
                batch: int = 1, seed: int = 0) -> list[ScalingRow]:
    """Median wall-clock per length. Repeats are interleaved across lengths so
    slow drifts in machine state hit every length alike."""
    runners = [_runner(int(T), d_model, n_heads, batch, seed) for T in lengths]
    times = [[] for _ in lengths]
    with single_thread():
        for run in runners:
            for _ in range(warmup):
                run()
        for _ in range(repeats):
            for j, run in enumerate(runners):
                times[j].append(run())
    sf = state_floats(d_model, n_heads) * batch
    return [ScalingRow(int(T), float(np.median(ts)), float(min(ts)), sf, 8 * sf)
            for T, ts in zip(lengths, times)]


def scaling_csv(rows: list[ScalingRow]) -> str:
    out = io.StringIO()
    out.write("seq_len,median_seconds,min_seconds,state_floats,state_bytes\n")
    for r in rows:
        out.write(f"{r.seq_len},{r.median_seconds:.6e},{r.min_seconds:.6e},{r.state_floats},{r.state_bytes}\n")
    return out.getvalue()


def scaling_summary(rows: list[ScalingRow]) -> dict:
    lengths = [r.seq_len for r in rows]
    secs = [r.median_seconds for r in rows]
    out = {"alpha": fit_exponent(lengths, secs) if len(rows) >= 2 else float("nan"),
           "state_constant": len({r.state_floats for r in rows}) == 1}
    if len(rows) >= 2:
        out["last_ratio"] = secs[-1] / secs[-2]
        out["last_pair"] = (lengths[-2], lengths[-1])
    return out


def scaling_text(rows: list[ScalingRow]) -> str:
    s = scaling_summary(rows)
    lines = [f"{'T':>6} {'median s':>12} {'state floats':>13}"]
    for r in rows:
        lines.append(f"{r.seq_len:>6} {r.median_seconds:>12.6f} {r.state_floats:>13}")
    lines.append(f"fitted exponent alpha = {s['alpha']:.3f}")
    if "last_ratio" in s:
        a, b = s["last_pair"]
        lines.append(f"runtime({b})/runtime({a}) = {s['last_ratio']:.3f}")
    lines.append(f"state memory constant in T: {s['state_constant']}")
    return "\n".join(lines) + "\n"
