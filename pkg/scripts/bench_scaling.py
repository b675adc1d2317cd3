"""Encoder runtime versus sequence length on one thread; writes CSV, text and SVG."""
import argparse
from pathlib import Path

from frwkv import bench
from frwkv.plot import plot_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lengths", default="256,512,1024,2048,4096")
    ap.add_argument("--d-model", type=int, default=32)
    ap.add_argument("--heads", type=int, default=4)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--out", default="runs/bench")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lengths = [int(s) for s in args.lengths.split(",")]
    rows = bench.run_scaling(lengths, args.d_model, args.heads, repeats=args.repeats)
    (out / "scaling.csv").write_text(bench.scaling_csv(rows))
    print(bench.scaling_text(rows), end="")
    plot_csv(out / "scaling.csv", out / "scaling.svg", "encoder runtime vs T")


if __name__ == "__main__":
    main()
