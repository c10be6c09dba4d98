"""Wall-bounce Ehrenfest refinement study; prints every check as JSON."""

import argparse
import json
from pathlib import Path

from boxmom.experiments import ExperimentConfig, ehrenfest_study

ROOT = Path(__file__).resolve().parents[1]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", type=Path, default=ROOT / "configs" / "bounce.json")
    p.add_argument("--levels", type=int, default=None, help="override the number of refinement levels")
    args = p.parse_args()
    data = json.loads(args.config.read_text())
    if args.levels is not None:
        data["numerics"]["levels"] = args.levels
    study = ehrenfest_study(ExperimentConfig.from_dict(data, "ehrenfest", args.config.parent))
    print(json.dumps({"passed": study.passed, "checks": study.checks}, indent=2))
    return 0 if study.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
