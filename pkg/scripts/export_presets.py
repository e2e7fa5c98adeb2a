"""Write every preset's experiment config to configs/<name>.yaml.

    python3 scripts/export_presets.py [--out configs]

The files are plain inputs for ``wgqed <command> --config``.
"""

import argparse
from pathlib import Path

from wgqed.config import save_config
from wgqed.presets import PRESETS


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=Path(__file__).resolve().parent.parent / "configs", type=Path)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, preset in PRESETS.items():
        if preset.prepare:
            preset.prepare(args.out)
        print(save_config(preset.config, args.out / f"{name}.yaml"))


if __name__ == "__main__":
    main()
