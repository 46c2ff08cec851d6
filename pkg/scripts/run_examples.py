"""Analyze every fixture and print a compact verdict table.

Usage: python3 scripts/run_examples.py [--out DIR] [--simulate]
"""

import argparse
import time
from pathlib import Path

from nddeosc.cli import run

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("reports"), help="directory for the JSON reports")
    parser.add_argument("--simulate", action="store_true", help="also integrate each fixture")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for cfg in sorted(FIXTURES.glob("example*.json")):
        start = time.perf_counter()
        argv = ["all" if args.simulate else "analyze", str(cfg), "--report", str(args.out / f"{cfg.stem}.json")]
        if args.simulate:
            argv += ["--trajectory", str(args.out / f"{cfg.stem}.traj.txt")]
        code = run(argv)
        print(f"{cfg.stem}: exit {code} in {time.perf_counter() - start:.2f}s")


if __name__ == "__main__":
    main()
