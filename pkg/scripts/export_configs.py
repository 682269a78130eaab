#!/usr/bin/env python3
"""Write every bundled preset to configs/<name>.json.

The exported files are ready for the CLI's --config flag, e.g.

    gkdv simulate --config configs/single-soliton.json --out runs/demo
"""

import argparse
from pathlib import Path

from gkdv.harness import preset, preset_names
from gkdv.harness.config import save_config


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dest", type=Path, default=Path("configs"))
    args = parser.parse_args()
    args.dest.mkdir(parents=True, exist_ok=True)
    for name in preset_names():
        path = args.dest / f"{name}.json"
        save_config(preset(name), path)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
