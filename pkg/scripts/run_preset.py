#!/usr/bin/env python3
"""Run one bundled experiment preset (or all of them) and print its checks.

Equivalent to the `gkdv <family> --out <dir>` CLI but addressed by preset
name, which is handier for sweeping the whole battery:

    python3 scripts/run_preset.py single-soliton
    python3 scripts/run_preset.py --all --out runs/
"""

import argparse
import sys
import time
from pathlib import Path

from gkdv.harness import execute, preset, preset_names


def run_one(name: str, outdir: Path) -> bool:
    t0 = time.monotonic()
    report = execute(preset(name), outdir)
    secs = time.monotonic() - t0
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        value = "n/a" if c.value is None else f"{c.value:.6e}"
        print(f"  [{status}] {c.name}: {value}")
    for f in report.fits:
        print(f"  [fit] {f.name}: slope={f.slope:.4f}")
    print(f"{name}: {'PASSED' if report.passed else 'FAILED'} "
          f"({secs:.0f}s, artifacts in {outdir})")
    return report.passed


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("name", nargs="?", choices=preset_names(),
                        help="preset to run")
    parser.add_argument("--all", action="store_true", help="run every preset")
    parser.add_argument("--out", type=Path, default=Path("runs"),
                        help="parent directory for run artifacts")
    args = parser.parse_args()
    if not args.all and args.name is None:
        parser.error("give a preset name or --all")

    names = preset_names() if args.all else (args.name,)
    ok = True
    for name in names:
        print(f"== {name} ==")
        ok = run_one(name, args.out / name) and ok
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
