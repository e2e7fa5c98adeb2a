"""Run every preset and print its checks, one line each.

    python3 scripts/run_all_presets.py [--out results] [--workers 4] [--only fig2a fig3b]

Each preset writes its tables, provenance and config under <out>/<name>/.
"""

import argparse
import time

from wgqed.cli import main as cli
from wgqed.presets import PRESETS


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--tolerance-profile", default="default", choices=("default", "strict"))
    ap.add_argument("--only", nargs="*", default=None)
    args = ap.parse_args()
    status = 0
    for name in args.only or PRESETS:
        t0 = time.perf_counter()
        print(f"== {name}")
        code = cli(["presets", "run", name, "--out", f"{args.out}/{name}", "--workers", str(args.workers),
                    "--tolerance-profile", args.tolerance_profile])
        print(f"   exit {code} in {time.perf_counter() - t0:.1f} s")
        status = status or code
    return status


if __name__ == "__main__":
    raise SystemExit(main())
