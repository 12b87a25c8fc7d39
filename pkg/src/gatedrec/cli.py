"""Command-line front end: ``gatedrec run | simulate | eval``.

Settings come from an optional JSON file (``--config``) with flags taking
precedence. Every command writes its resolved configuration to
``<out>/config.json`` next to its reports.

Exit codes: 0 success, 2 configuration error, 3 input error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from .detect import (
    BackendConfig, DetectorConfig, NoiseSpec, ParseError, class_id, load_backend, load_script,
    read_detections_jsonl, scripted_detector,
)
from .evaluation import EvalConfig, confusion_matrix, map_report, timing_report
from .frames import FrameError, open_image_sequence, open_y4m
from .motion import MotionConfig
from .recorder import Mode, PipelineError, RecorderConfig, SegmentDumper, StageTimer, run_modes
from .storage import BitrateModel, compare_modes, estimate_bytes, field_reference_note
from .synth import generate_scenario, load_scenario

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_INVARIANT = 0, 2, 3, 4


class ConfigError(Exception):
    pass


class InputError(Exception):
    pass


class InvariantError(Exception):
    pass


def _num(x):
    """JSON-friendly number: ints stay ints, exact rationals become floats."""
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else float(x)
    return x


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text.rstrip("\n") + "\n")


# --- config resolution ---------------------------------------------------------

DEFAULTS = {
    "input": None,
    "scenario": None,
    "detector_script": None,
    "backend": None,
    "mode": "hybrid",
    "modes": ["continuous", "motion_only", "hybrid"],
    "grace": 20,
    "pixel_threshold": 25,
    "area_threshold": 0.005,
    "blur_radius": 1,
    "conf": 0.25,
    "iou": 0.5,
    "max_detections": 300,
    "classes": ["car", "person"],
    "noise": None,
    "bitrate_kbps": 7703,
    "bitrate_overrides": {},
    "seed": 0,
    "out": "out",
    "paced": False,
    "timing": False,
    "dump_segments": False,
}


def resolve(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            cfg[key] = val
    if isinstance(cfg["modes"], str):
        cfg["modes"] = [m.strip() for m in cfg["modes"].split(",") if m.strip()]
    return cfg


def _build(cfg):
    try:
        motion = MotionConfig(int(cfg["pixel_threshold"]), float(cfg["area_threshold"]), int(cfg["blur_radius"]))
        det = DetectorConfig(float(cfg["conf"]), float(cfg["iou"]), int(cfg["max_detections"]),
                             frozenset(class_id(c) for c in cfg["classes"]))
        bitrate = BitrateModel(cfg["bitrate_kbps"])
        overrides = {Mode(k): BitrateModel(v) for k, v in (cfg["bitrate_overrides"] or {}).items()}
        noise = NoiseSpec(**cfg["noise"]) if cfg["noise"] else None
        modes = [Mode(m) for m in cfg["modes"]]
        mode = Mode(cfg["mode"])
        Fraction(str(cfg["grace"]))
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    return motion, det, bitrate, overrides, noise, modes, mode


def _open_source(cfg):
    """(stream, scenario script or None, timeline or None)."""
    if bool(cfg["input"]) == bool(cfg["scenario"]):
        raise ConfigError("give exactly one of --input or --scenario")
    if cfg["scenario"]:
        try:
            spec = load_scenario(cfg["scenario"])
        except (OSError, json.JSONDecodeError) as exc:
            raise FrameError(f"cannot read scenario: {exc}") from None
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"invalid scenario: {exc}") from None
        stream, timeline, script = generate_scenario(spec)
        return stream, script, timeline
    path = cfg["input"]
    if not os.path.exists(path):
        raise FrameError(f"input not found: {path}")
    if path.lower().endswith(".y4m"):
        return open_y4m(path), None, None
    return open_image_sequence(path), None, None


def _detector(cfg, scenario_script, noise, needed):
    if cfg["detector_script"] and cfg["backend"]:
        raise ConfigError("give at most one of --detector-script or --backend")
    if cfg["backend"]:
        with open(cfg["backend"]) as fh:
            bc = BackendConfig(**json.load(fh))
        return load_backend(bc)
    if cfg["detector_script"]:
        try:
            script = load_script(cfg["detector_script"], noise, int(cfg["seed"]))
        except OSError as exc:
            raise FrameError(f"cannot read detector script: {exc}") from None
        return scripted_detector(script)
    if scenario_script is not None:
        if noise is not None:
            scenario_script.noise = noise
            scenario_script.seed = int(cfg["seed"])
        return scripted_detector(scenario_script)
    if needed:
        raise ConfigError("hybrid mode needs --detector-script, --backend or a --scenario")
    return None


def _segments_doc(log, bitrate):
    return {
        "mode": log.mode.value,
        "fps": _num(log.fps),
        "total_frames_processed": log.total_frames_processed,
        "recorded_frame_count": log.recorded_frame_count,
        "segments": [
            {
                "start_index": s.start_index,
                "end_index": s.end_index,
                "start_time": _num(s.start_time),
                "end_time": _num(s.end_time),
                "frame_count": s.frame_count,
                "estimated_bytes": _num(estimate_bytes(s.duration(log.fps), bitrate)),
            }
            for s in log.segments
        ],
    }


def _log_doc(log):
    return {
        "mode": log.mode.value,
        "total_frames_processed": log.total_frames_processed,
        "recorded_frame_count": log.recorded_frame_count,
        "trace": [
            {"index": d.index, "time": _num(d.timestamp), "motion": d.motion, "hit": d.hit, "action": d.action.value}
            for d in log.trace
        ],
    }


def _check_log(log):
    segs = log.segments
    if log.recorded_frame_count > log.total_frames_processed:
        raise InvariantError(f"{log.mode.value}: recorded more frames than processed")
    for a, b in zip(segs, segs[1:]):
        if a.end_index >= b.start_index:
            raise InvariantError(f"{log.mode.value}: overlapping segments {a} {b}")


def _resolved_doc(cfg, command):
    doc = {"command": command}
    doc.update({k: cfg[k] for k in sorted(cfg)})
    return doc


def _execute(cfg, modes, command):
    motion, det, bitrate, overrides, noise, _, _ = _build(cfg)
    stream, scenario_script, _ = _open_source(cfg)
    detector = _detector(cfg, scenario_script, noise, Mode.HYBRID in modes)
    grace = Fraction(str(cfg["grace"]))
    rcfgs = [RecorderConfig(grace, m, stream.info.fps) for m in modes]
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    sinks = None
    if cfg["dump_segments"]:
        sinks = [SegmentDumper(os.path.join(out, f"{m.value}_segment"), stream.info.fps) for m in modes]
    timer = StageTimer() if cfg["timing"] else None
    try:
        logs = run_modes(stream, motion, detector, rcfgs, det, timer=timer, sinks=sinks, paced=bool(cfg["paced"]))
    except PipelineError as exc:
        if isinstance(exc.__cause__, (FrameError, OSError, ValueError)):
            raise FrameError(str(exc)) from None
        raise
    for lg in logs:
        _check_log(lg)
    by_mode = dict(zip(modes, logs))
    report = compare_modes(by_mode, stream.info.fps, bitrate, overrides)
    if report.subset_ok is False:
        raise InvariantError("recorded sets are not nested across modes")

    _dump(os.path.join(out, "config.json"), _resolved_doc(cfg, command))
    for m, lg in by_mode.items():
        bm = overrides.get(m, bitrate)
        _dump(os.path.join(out, f"{m.value}_segments.json"), _segments_doc(lg, bm))
        _dump(os.path.join(out, f"{m.value}_log.json"), _log_doc(lg))
    _dump(os.path.join(out, "storage.json"), report.to_dict())
    _write_text(os.path.join(out, "storage.txt"), report.table() + "\n\n" + field_reference_note())
    if timer is not None:
        tr = timing_report(timer.samples)
        _dump(os.path.join(out, "timing.json"), tr.to_dict())
        _write_text(os.path.join(out, "timing.txt"), tr.table())
    return by_mode, report


def cmd_run(cfg):
    _, _, _, _, _, _, mode = _build(cfg)
    by_mode, report = _execute(cfg, [mode], "run")
    log = by_mode[mode]
    print(f"{mode.value}: {len(log.segments)} segment(s), {log.recorded_frame_count}/"
          f"{log.total_frames_processed} frames recorded")
    print(report.table())
    return by_mode, report


def cmd_simulate(cfg):
    if not cfg["scenario"]:
        raise ConfigError("simulate needs --scenario")
    if cfg["input"]:
        raise ConfigError("simulate takes --scenario, not --input")
    _, _, _, _, _, modes, _ = _build(cfg)
    if not modes:
        raise ConfigError("no modes selected")
    modes = [m for m in (Mode.CONTINUOUS, Mode.MOTION_ONLY, Mode.HYBRID) if m in modes]
    by_mode, report = _execute(cfg, modes, "simulate")
    print(report.table())
    return by_mode, report


def cmd_eval(cfg, pred_path, gt_path, eval_cfg: EvalConfig):
    try:
        preds = read_detections_jsonl(pred_path)
        gts = read_detections_jsonl(gt_path)
    except OSError as exc:
        raise InputError(str(exc)) from None
    try:
        metrics = map_report(preds, gts, eval_cfg)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    cm = confusion_matrix(preds, gts, eval_cfg)
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    doc = {
        "command": "eval", "pred": pred_path, "gt": gt_path,
        "confidence_threshold": eval_cfg.confidence_threshold, "iou_threshold": eval_cfg.iou_threshold,
        "iou_range": list(eval_cfg.iou_range), "max_detections": eval_cfg.max_detections,
        "interpolation": eval_cfg.interpolation.value, "display_confidence": eval_cfg.display_confidence,
        "classes": cfg["classes"],
    }
    _dump(os.path.join(out, "config.json"), doc)
    _dump(os.path.join(out, "metrics.json"), metrics.to_dict())
    _dump(os.path.join(out, "confusion.json"), cm.to_dict())
    _write_text(os.path.join(out, "metrics.txt"), metrics.table() + "\n\n" + cm.table())
    print(metrics.table())
    print()
    print(cm.table())
    return metrics, cm


# --- argparse --------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="JSON file with settings; flags override it")
    p.add_argument("--out", help="output directory (default: out)")
    p.add_argument("--seed", type=int)


def _pipeline_flags(p):
    p.add_argument("--scenario", help="synthetic scenario spec (JSON)")
    p.add_argument("--detector-script", dest="detector_script", help="line-delimited JSON detections")
    p.add_argument("--backend", help="JSON adapter config for an external detector")
    p.add_argument("--grace", type=float, help="grace period in seconds (default 20)")
    p.add_argument("--pixel-threshold", dest="pixel_threshold", type=int)
    p.add_argument("--area-threshold", dest="area_threshold", type=float)
    p.add_argument("--conf", type=float, help="gating confidence threshold (default 0.25)")
    p.add_argument("--iou", type=float, help="NMS IoU threshold (default 0.5)")
    p.add_argument("--bitrate-kbps", dest="bitrate_kbps", type=float)
    p.add_argument("--paced", action="store_true", help="play back at the stream's frame rate")
    p.add_argument("--timing", action="store_true", help="also write per-stage timing (not reproducible)")
    p.add_argument("--dump-segments", dest="dump_segments", action="store_true",
                   help="write the recorded frames of every segment as Y4M")


def build_parser():
    ap = argparse.ArgumentParser(prog="gatedrec", description="Activity-gated recording engine.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="record one input stream")
    _common(run)
    _pipeline_flags(run)
    run.add_argument("--input", help=".y4m file or image-sequence manifest (.json)")
    run.add_argument("--mode", choices=[m.value for m in Mode])

    sim = sub.add_parser("simulate", help="run several modes over one synthetic scenario")
    _common(sim)
    _pipeline_flags(sim)
    sim.add_argument("--modes", help="comma-separated modes (default: all three)")

    ev = sub.add_parser("eval", help="detection metrics from prediction and ground-truth files")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument("--out")
    ev.add_argument("--conf", type=float, default=0.001, help="sweep confidence floor (default 0.001)")
    ev.add_argument("--iou", type=float, default=0.5)
    ev.add_argument("--max-det", dest="max_det", type=int, default=300)
    ev.add_argument("--display-conf", dest="display_conf", type=float, default=0.25)
    ev.add_argument("--interpolation", choices=["grid101", "all_point"], default="grid101")
    ev.add_argument("--classes", default="car,person")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "eval":
            classes = [c.strip() for c in args.classes.split(",") if c.strip()]
            try:
                ecfg = EvalConfig(args.conf, args.iou, max_detections=args.max_det,
                                  interpolation=args.interpolation, display_confidence=args.display_conf,
                                  classes=tuple(class_id(c) for c in classes))
            except (ValueError, KeyError) as exc:
                raise ConfigError(str(exc)) from None
            cmd_eval({"out": args.out or "out", "classes": classes}, args.pred, args.gt, ecfg)
        else:
            cfg = resolve(args)
            (cmd_run if args.command == "run" else cmd_simulate)(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FrameError, ParseError, InputError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
