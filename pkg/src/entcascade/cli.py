"""Command-line front end: synth, featurize, experiment, report, replay.

Every command writes its data to files under ``--out`` together with a
``manifest.json`` recording the exact invocation, so ``replay`` can
reproduce the outputs byte for byte. Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Sequence

from . import __version__
from .cascade import build_first_level, render_tables, run_baseline, run_cascade
from .features import FeatureFrame
from .ingest import dumps_labels, dumps_ledger, load_labels, parse_ledger
from .ml.ensemble import MODEL_KINDS, RANDOM_FOREST
from .pipeline import FRAME_NAMES, featurize
from .synth import SynthConfig, generate

log = logging.getLogger("entcascade")

EXPERIMENTS = ("baseline", "cascade")
MANIFEST = "manifest.json"
REPORT = "report.json"
TABLES = "tables.txt"
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    """Bad invocation; exits with status 2."""


def _digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_manifest(out: Path, command: str, argv: Sequence[str], params: dict, inputs: Sequence[Path], t0: float) -> None:
    manifest = {
        "command": command,
        "argv": list(argv),
        "params": params,
        "seed": params.get("seed"),
        "inputs": {str(p): _digest(p) for p in inputs},
        "version": __version__,
        "duration_s": round(time.perf_counter() - t0, 3),
    }
    _write(out / MANIFEST, json.dumps(manifest, indent=2) + "\n")


def _existing(path: str | None, what: str) -> Path:
    if path is None:
        raise UsageError(f"{what} is required")
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} {path!r} does not exist")
    return p


# -- commands ---------------------------------------------------------------

def cmd_synth(args: argparse.Namespace) -> list[Path]:
    inputs = []
    base = {}
    if args.config is not None:
        cfg_path = _existing(args.config, "config file")
        base = json.loads(cfg_path.read_text())
        inputs.append(cfg_path)
    if args.seed is not None:
        base["seed"] = args.seed
    config = SynthConfig.from_dict(base)
    result = generate(config)
    out = Path(args.out)
    _write(out / "ledger.jsonl", dumps_ledger(result.ledger))
    _write(out / "labels.csv", dumps_labels(result.labels))
    _write(out / "truth.csv", result.truth_csv())
    log.info("wrote %d transactions, %d labeled addresses", len(result.ledger), len(result.labels))
    args.params = config.to_dict()
    return inputs


def cmd_featurize(args: argparse.Namespace) -> list[Path]:
    ledger_path = _existing(args.ledger, "--ledger")
    labels_path = _existing(args.labels, "--labels")
    with open(ledger_path, encoding="utf-8") as fh:
        txs = parse_ledger(fh)
    with open(labels_path, encoding="utf-8") as fh:
        labels = load_labels(fh)
    if len(labels) == 0:
        log.warning("label book is empty; all frames will be empty")
    frames = featurize(txs, labels, args.max_motifs_per_entity)
    out = Path(args.out)
    for name, frame in frames.as_dict().items():
        _write(out / f"{name}.csv", frame.to_csv())
    args.params = {"max_motifs_per_entity": args.max_motifs_per_entity}
    return [ledger_path, labels_path]


def _load_frames(frames_dir: Path) -> tuple[dict[str, FeatureFrame], list[Path]]:
    frames, paths = {}, []
    for name in FRAME_NAMES:
        path = _existing(str(frames_dir / f"{name}.csv"), "frame file")
        frames[name] = FeatureFrame.from_csv(path.read_text(encoding="utf-8"), name)
        paths.append(path)
    return frames, paths


def cmd_experiment(args: argparse.Namespace) -> list[Path]:
    frames, paths = _load_frames(_existing(args.frames, "--frames"))
    reports = []
    first = None
    for experiment in args.experiment:
        for model in args.model:
            log.info("running %s with %s", experiment, model)
            if experiment == "baseline":
                reports.append(run_baseline(frames["entity"], model, args.seed, args.threads))
                continue
            if first is None:
                # first-level results are shared by every final model
                first = build_first_level(
                    frames["entity"], frames, args.first_level_model, args.seed, args.threads
                )
            reports.append(
                run_cascade(
                    frames["entity"], frames["address"], frames["motif1"], frames["motif2"],
                    args.first_level_model, model, args.seed, args.threads, first=first,
                )
            )
    out = Path(args.out)
    _write(out / REPORT, json.dumps([r.to_dict() for r in reports], indent=2) + "\n")
    _write(out / TABLES, render_tables(reports))
    args.params = {
        "experiment": list(args.experiment),
        "model": list(args.model),
        "first_level_model": args.first_level_model,
        "seed": args.seed,
        "threads": args.threads,
    }
    return paths


def cmd_report(args: argparse.Namespace) -> list[Path]:
    path = _existing(args.report, "--report")
    reports = json.loads(path.read_text(encoding="utf-8"))
    _write(Path(args.out) / TABLES, render_tables(reports))
    args.params = {}
    return [path]


def cmd_replay(args: argparse.Namespace) -> int:
    path = _existing(args.manifest, "manifest")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    argv = list(manifest["argv"])
    for recorded, digest in manifest.get("inputs", {}).items():
        if not Path(recorded).exists() or _digest(Path(recorded)) != digest:
            log.warning("input %s changed since the manifest was written; outputs may differ", recorded)
    if args.out is not None:
        argv = _replace_out(argv, args.out)
    log.info("replaying %s", " ".join(argv))
    return main(argv)


def _replace_out(argv: list[str], out: str) -> list[str]:
    result, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--out":
            skip = True
            continue
        if tok.startswith("--out="):
            continue
        result.append(tok)
    return result + ["--out", out]


COMMANDS = {
    "synth": cmd_synth,
    "featurize": cmd_featurize,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entcascade", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")

    p = sub.add_parser("synth", parents=[common], help="generate a labeled synthetic ledger")
    p.add_argument("--config", help="JSON generator config; flags win over it")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("featurize", parents=[common], help="ledger + labels -> four feature frames")
    p.add_argument("--ledger", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--max-motifs-per-entity", type=int, default=None)

    p = sub.add_parser("experiment", parents=[common], help="run baseline and/or cascade experiments")
    p.add_argument("--frames", required=True, help="directory holding the frame CSVs")
    p.add_argument("--experiment", nargs="+", choices=EXPERIMENTS, default=list(EXPERIMENTS))
    p.add_argument("--model", nargs="+", choices=MODEL_KINDS, default=["gb"])
    p.add_argument("--first-level-model", choices=MODEL_KINDS, default=RANDOM_FOREST)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("report", parents=[common], help="re-render tables from a report JSON")
    p.add_argument("--report", required=True)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="write to this directory instead of the recorded one")
    return parser


def _configure_logging() -> None:
    level = os.environ.get("CASCADE_LOG", "info").lower()
    logging.basicConfig(
        level=LOG_LEVELS.get(level, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    try:
        if args.command == "replay":
            return cmd_replay(args)
        t0 = time.perf_counter()
        inputs = COMMANDS[args.command](args)
        _write_manifest(Path(args.out), args.command, argv, args.params, inputs, t0)
    except UsageError as exc:
        parser.error(str(exc))
    except (ValueError, TypeError, KeyError, OSError) as exc:  # CascadeError is a ValueError
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
