"""Command line driver: ``boxmom <experiment> --config FILE [--out DIR]``.

Exit status: 0 on success, 2 on configuration errors (with file:line
diagnostics), 3 on numerical failures (naming the violated invariant).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import re
import sys
from importlib import metadata, resources
from pathlib import Path

import jsonschema

from . import __version__

EXPERIMENTS = ("spectrum", "modes", "evolve", "ehrenfest", "uncertainty", "commute")
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class ConfigError(Exception):
    pass


def load_schema():
    return json.loads(resources.files("boxmom").joinpath("config.schema.json").read_text())


# ----------------------------------------------------------------------------
# Source positions of JSON values, for line diagnostics


def _positions(text):
    """Map JSON paths (tuples of keys/indices) to character offsets."""
    dec = json.JSONDecoder()
    ws = re.compile(r"\s*")
    pos = {}

    def skip(i):
        return ws.match(text, i).end()

    def value(i, path):
        i = skip(i)
        pos[path] = i
        ch = text[i]
        if ch == "{":
            i = skip(i + 1)
            if text[i] == "}":
                return i + 1
            while True:
                key, i = json.decoder.scanstring(text, skip(i) + 1)
                pos[path + (key,)] = i
                i = skip(i) + 1  # colon
                i = value(i, path + (key,))
                i = skip(i)
                if text[i] == "}":
                    return i + 1
                i += 1
        if ch == "[":
            i = skip(i + 1)
            if text[i] == "]":
                return i + 1
            k = 0
            while True:
                i = skip(value(i, path + (k,)))
                k += 1
                if text[i] == "]":
                    return i + 1
                i += 1
        return dec.raw_decode(text, i)[1]

    value(0, ())
    return pos


def _line_of(text, offset):
    return text.count("\n", 0, offset) + 1


def validate_config(text, name="<config>"):
    """Parse and schema-check; raise :class:`ConfigError` with line diagnostics."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{name}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        pos = _positions(text)
        lines = []
        for err in errors:
            path = tuple(err.absolute_path)
            if err.validator == "additionalProperties":
                for key in re.findall(r"'([^']+)' was unexpected", err.message):
                    path = path + (key,)
                    break
            where = "/".join(map(str, path)) or "(root)"
            line = _line_of(text, pos.get(path, pos.get(tuple(err.absolute_path), 0)))
            lines.append(f"{name}:{line}: field {where}: {err.message}")
        raise ConfigError("\n".join(lines))
    return data


# ----------------------------------------------------------------------------
# Output


def _sha256(data: bytes):
    return hashlib.sha256(data).hexdigest()


def _versions():
    out = {"boxmom": __version__, "python": platform.python_version()}
    for pkg in ("numpy", "scipy", "jsonschema"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _dump_json(obj):
    return (json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n").encode()


def write_artifacts(out_dir: Path, experiment, effective, config_bytes, artifacts):
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, text in sorted(artifacts.csv.items()):
        data = text.encode()
        (out_dir / name).write_bytes(data)
        files[name] = _sha256(data)
    for name, obj in sorted(artifacts.json.items()):
        data = _dump_json(obj)
        (out_dir / name).write_bytes(data)
        files[name] = _sha256(data)
    canonical = json.dumps(effective, sort_keys=True, separators=(",", ":")).encode()
    manifest = {"experiment": experiment, "seed": effective.get("seed", 0),
                "versions": _versions(), "config_sha256": _sha256(canonical),
                "config_file_sha256": _sha256(config_bytes), "files": files}
    (out_dir / "manifest.json").write_bytes(_dump_json(manifest))
    return manifest


# ----------------------------------------------------------------------------
# Entry point


def build_parser():
    p = argparse.ArgumentParser(prog="boxmom", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"boxmom {__version__}")
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        s = sub.add_parser(name, help=f"run the {name} experiment")
        s.add_argument("--config", required=True, type=Path, help="JSON config file")
        s.add_argument("--out", type=Path, default=None, help="output directory")
        s.add_argument("--seed", type=int, default=None, help="override the config seed")
        s.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread count")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("boxmom: --threads must be positive", file=sys.stderr)
            return EXIT_CONFIG
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    # numerical modules load after the thread variables are set
    from .errors import BoxmomError, NumericalError
    from .experiments import ExperimentConfig, run

    try:
        raw = args.config.read_bytes()
    except OSError as exc:
        print(f"boxmom: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        data = validate_config(raw.decode(), str(args.config))
        if args.seed is not None:
            data["seed"] = args.seed
        cfg = ExperimentConfig.from_dict(data, args.experiment, args.config.parent)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (BoxmomError, ValueError) as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = args.out or Path(data.get("output", f"out/{args.experiment}"))
    try:
        artifacts = run(cfg)
    except NumericalError as exc:
        print(f"boxmom: numerical failure, invariant {exc.invariant}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (BoxmomError, ValueError) as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    effective = dict(data, experiment=args.experiment)
    write_artifacts(out_dir, args.experiment, effective, raw, artifacts)
    print(json.dumps(artifacts.summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
