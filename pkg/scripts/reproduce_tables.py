"""Run the full 4 x 3 x 2 grid and print the rendered tables.

    python3 scripts/reproduce_tables.py --config configs/default.json --threads 1
"""
import argparse
import time

from asind import harness


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=None)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    cfg = harness.load_config(args.config) if args.config else harness.ExperimentConfig()
    t0 = time.perf_counter()
    harness.reproduce_tables(cfg, args.threads, args.out)
    out = harness.resolve_output_dir(args.out or cfg.output_dir)
    print((out / "table.txt").read_text())
    print(f"grid finished in {time.perf_counter() - t0:.0f} s; files in {out}")


if __name__ == "__main__":
    main()
