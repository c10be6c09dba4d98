"""Run every shipped config through the CLI into out/<config name>/."""

import argparse
import json
import sys
from pathlib import Path

from boxmom.cli import main as cli_main

ROOT = Path(__file__).resolve().parents[1]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", type=Path, default=ROOT / "out")
    p.add_argument("--skip", nargs="*", default=["bounce"], help="config stems to skip")
    args = p.parse_args()
    status = 0
    for cfg in sorted((ROOT / "configs").glob("*.json")):
        if cfg.stem in args.skip:
            continue
        experiment = json.loads(cfg.read_text())["experiment"]
        print(f"== {cfg.name} ({experiment})", flush=True)
        code = cli_main([experiment, "--config", str(cfg), "--out", str(args.out / cfg.stem)])
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(main())
