"""Run every bundled figure preset and write CSVs plus plot scripts.

    python scripts/reproduce_figures.py --out results/ [--samples 200000] [--jobs 4]
"""
import argparse
import time
from dataclasses import replace
from pathlib import Path

from afrelay.cli import PRESETS, emit_plot_script, load_config, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--samples", type=int, help="override Monte Carlo samples per cell")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--only", nargs="*", choices=PRESETS)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.only or PRESETS:
        cfg = load_config(preset=name)
        if args.samples:
            cfg = replace(cfg, mc_samples=args.samples)
        t0 = time.perf_counter()
        path = out / f"{name}.csv"
        path.write_text(run_sweep(cfg, jobs=args.jobs), encoding="utf-8")
        script, n = emit_plot_script(path)
        print(f"{name}: {n} series -> {path}, {script.name} ({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
