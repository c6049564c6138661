"""Command-line entry point: ``sslt {synth,track,run,eval,overlay}``.

Exit codes: 0 success, 1 runtime error, 2 usage or configuration error.
Seed precedence: ``--seed`` > config file > ``SSLT_SEED`` > 0.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, PipelineConfig, from_dict, merge, to_dict
from .dataset import (DatasetError, SynthConfig, discover_sequences, generate_synthetic,
                      load_sequence, split_challenge_suite)
from .evaluate import EvalConfig, EvalError, evaluate_run
from .geometry import Box
from .imaging import read_mask, write_png
from .overlay import render
from .pipeline import boxes_csv, read_boxes_csv, run_sequence, tracker_only, write_result

log = logging.getLogger("sslt")


class UsageError(Exception):
    pass


def _parse_box(text: str) -> Box:
    try:
        return Box(*(float(v) for v in text.split(",")))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"--init expects x,y,w,h: {exc}") from None


def _parse_sets(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def resolve_config(args) -> PipelineConfig:
    data = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"{args.config} is not valid JSON: {exc}") from None
        except OSError as exc:
            raise UsageError(str(exc)) from None
        if not isinstance(data, dict):
            raise ConfigError("", "config must be a JSON object")
    if "seed" not in data and os.environ.get("SSLT_SEED"):
        try:
            data["seed"] = int(os.environ["SSLT_SEED"])
        except ValueError:
            raise ConfigError("seed", "SSLT_SEED must be an integer") from None
    data = merge(data, _parse_sets(getattr(args, "set", None)))
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    return from_dict(data)


# ---------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    out = Path(args.out)
    if args.suite:
        seed = args.seed if args.seed is not None else int(os.environ.get("SSLT_SEED", 0))
        for cfg in split_challenge_suite(seed, n_frames=args.frames):
            generate_synthetic(cfg, out / cfg.name)
            log.info("wrote %s", out / cfg.name)
        return 0
    data = {}
    if args.config:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.seed is not None:
        data["seed"] = args.seed
    try:
        cfg = SynthConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError("", str(exc)) from None
    generate_synthetic(cfg, out)
    return 0


def _init_box(seq_dir: Path, gt, args) -> Box:
    if getattr(args, "init", None):
        return _parse_box(args.init)
    return gt.boxes[0]


def cmd_track(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out)
    for sd in discover_sequences(args.data):
        seq, gt = load_sequence(sd)
        boxes = tracker_only(seq, _init_box(sd, gt, args), cfg)
        dest = out / seq.name
        dest.mkdir(parents=True, exist_ok=True)
        (dest / "boxes.csv").write_text(boxes_csv(boxes, ["tracker"] * len(boxes)),
                                        encoding="utf-8", newline="\n")
    return 0


def _run_one(job):
    seq_dir, out_dir, cfg_dict, init = job
    seq, gt = load_sequence(seq_dir)
    init_box = Box(*init) if init else gt.boxes[0]
    result = run_sequence(seq, init_box, from_dict(cfg_dict))
    write_result(result, out_dir)
    return seq.name, result.salient, result.source_counts(), result.diagnostics


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    init = _parse_box(args.init).as_tuple() if args.init else None
    out = Path(args.out)
    jobs = [(sd, out / sd.name, to_dict(cfg), init) for sd in discover_sequences(args.data)]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            summaries = list(pool.map(_run_one, jobs))
    else:
        summaries = [_run_one(j) for j in jobs]
    for name, salient, counts, diags in summaries:
        log.info("%s: salient=%s %s", name, salient, counts)
        for d in diags:
            print(f"{name}: {d}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    cfg = EvalConfig(f_tolerance=args.f_tolerance, fps_accounting=args.fps_accounting)
    report, precision, success = evaluate_run(args.results, args.data, cfg, args.out, workers=args.workers)
    log.info("S=%.4f J=%.4f F=%.4f DP@100=%.4f success AUC=%.4f", report.s_measure,
             report.j_mean, report.f_mean, precision.score_at_reference, success.auc)
    return 0


def cmd_overlay(args) -> int:
    res_dir, out = Path(args.results), Path(args.out)
    seq, gt = load_sequence(args.data)
    boxes, _ = read_boxes_csv(res_dir / "boxes.csv")
    info = json.loads((res_dir / "result.json").read_text(encoding="utf-8"))
    f0s = [Box(*t["f0"]) for t in info.get("trajectory", [])] or [None] * len(boxes)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames):
        mask_path = res_dir / "masks" / f"{i + 1:06d}.png"
        mask = read_mask(mask_path) if mask_path.exists() else None
        img = render(frame, gt.boxes[i], f0s[i], boxes[i], mask)
        write_png(out / f"{i + 1:06d}.png", img)
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sslt", description="Tracking + saliency-supervised segmentation")
    p.add_argument("-v", "--verbose", action="count", default=0)
    # -v is also accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate synthetic sequences")
    s.add_argument("--out", required=True)
    s.add_argument("--suite", action="store_true", help="write the seven challenge-suite sequences")
    s.add_argument("--config", help="SynthConfig JSON (single-sequence mode)")
    s.add_argument("--frames", type=int, default=40)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_synth)

    def pipeline_args(sp):
        sp.add_argument("--data", required=True, help="sequence directory or root of sequences")
        sp.add_argument("--out", required=True)
        sp.add_argument("--config", help="PipelineConfig JSON")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config field, e.g. train.iterations=100")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--init", help="initial box x,y,w,h (default: first ground-truth box)")

    t = sub.add_parser("track", parents=[common], help="tracker-only boxes.csv")
    pipeline_args(t)
    t.set_defaults(func=cmd_track)

    r = sub.add_parser("run", parents=[common], help="full pipeline")
    pipeline_args(r)
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("eval", parents=[common], help="evaluate a results directory")
    e.add_argument("--results", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out")
    e.add_argument("--f-tolerance", type=float, default=0.008)
    e.add_argument("--fps-accounting", choices=["with_finetune", "without_finetune"],
                   default="with_finetune")
    e.add_argument("--workers", type=int, default=1)
    e.set_defaults(func=cmd_eval)

    o = sub.add_parser("overlay", parents=[common], help="render per-frame overlays")
    o.add_argument("--results", required=True, help="one sequence's result directory")
    o.add_argument("--data", required=True, help="the matching sequence directory")
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_overlay)
    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else
                        logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"sslt: configuration error: {exc}", file=sys.stderr)
        return 2
    except (DatasetError, EvalError, RuntimeError, OSError, ValueError) as exc:
        print(f"sslt: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
