"""Constant-bitrate storage model and multi-mode comparison reports.

All arithmetic is exact (``Fraction``); rounding happens only when printing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Mapping, Optional

from .frames import as_fraction
from .recorder import Mode, RecordingLog

BYTES_PER_MEGABYTE = 1_000_000
MODE_ORDER = (Mode.HYBRID, Mode.MOTION_ONLY, Mode.CONTINUOUS)
MODE_LABELS = {Mode.CONTINUOUS: "Continuous", Mode.MOTION_ONLY: "Motion-only", Mode.HYBRID: "Hybrid"}


@dataclass(frozen=True)
class BitrateModel:
    bitrate_kbps: Fraction = Fraction(7703)

    def __post_init__(self):
        object.__setattr__(self, "bitrate_kbps", as_fraction(self.bitrate_kbps))
        if self.bitrate_kbps <= 0:
            raise ValueError("bitrate must be positive")


def estimate_bytes(duration_seconds, model: BitrateModel = BitrateModel()) -> Fraction:
    """``duration * kbps * 1000 / 8`` bytes."""
    d = as_fraction(duration_seconds)
    if d < 0:
        raise ValueError("duration must be nonnegative")
    return d * model.bitrate_kbps * 125


def format_length(seconds) -> str:
    """Whole seconds as ``"13m & 45s"``."""
    s = int(round(as_fraction(seconds)))
    return f"{s // 60}m & {s % 60:02d}s"


@dataclass
class ModeStorage:
    recorded_frames: int
    recorded_seconds: Fraction
    bytes: Fraction
    bitrate_kbps: Fraction

    @property
    def megabytes(self) -> Fraction:
        return self.bytes / BYTES_PER_MEGABYTE


@dataclass
class StorageReport:
    fps: Fraction
    total_frames: int
    modes: Dict[Mode, ModeStorage]
    # (reduced mode, baseline mode) -> 1 - reduced/baseline
    duration_reduction: Dict[tuple, Fraction] = field(default_factory=dict)
    bytes_reduction: Dict[tuple, Fraction] = field(default_factory=dict)
    subset_ok: Optional[bool] = None

    def to_dict(self) -> dict:
        def num(x):
            return float(x)

        out = {
            "fps": num(self.fps),
            "total_frames": self.total_frames,
            "total_seconds": num(self.total_frames / self.fps),
            "modes": {
                m.value: {
                    "recorded_frames": s.recorded_frames,
                    "recorded_duration_seconds": num(s.recorded_seconds),
                    "video_length": format_length(s.recorded_seconds),
                    "bitrate_kbps": num(s.bitrate_kbps),
                    "estimated_bytes": num(s.bytes),
                    "estimated_megabytes": num(s.megabytes),
                }
                for m, s in self.modes.items()
            },
            "reductions": [
                {
                    "mode": a.value,
                    "baseline": b.value,
                    "duration": num(self.duration_reduction[(a, b)]),
                    "bytes": num(self.bytes_reduction[(a, b)]),
                }
                for (a, b) in self.duration_reduction
            ],
        }
        if self.subset_ok is not None:
            out["subset_property_holds"] = self.subset_ok
        return out

    def table(self) -> str:
        lines = [f"{'System':<13}{'Video Length':>14}{'Storage (MB)':>14}"]
        for m, s in self.modes.items():
            lines.append(f"{MODE_LABELS[m]:<13}{format_length(s.recorded_seconds):>14}{float(s.megabytes):>14.1f}")
        for (a, b), r in self.duration_reduction.items():
            lines.append(
                f"{MODE_LABELS[a]} vs {MODE_LABELS[b]}: duration -{float(r) * 100:.1f}%, "
                f"storage -{float(self.bytes_reduction[(a, b)]) * 100:.1f}%"
            )
        if self.subset_ok is not None:
            lines.append(f"recorded sets nested (hybrid <= motion-only <= continuous): {self.subset_ok}")
        return "\n".join(lines)


def _reduction(a: Fraction, b: Fraction) -> Fraction:
    return Fraction(0) if b == 0 else 1 - a / b


def compare_modes(logs: Mapping[Mode, RecordingLog], fps, model: BitrateModel = BitrateModel(),
                  overrides: Optional[Mapping[Mode, BitrateModel]] = None) -> StorageReport:
    """Storage per mode and pairwise reductions of each smaller mode against each larger one.

    ``overrides`` gives a per-mode bitrate (e.g. a baseline recorder that encodes
    at a different effective rate).
    """
    fps = as_fraction(fps)
    logs = {Mode(m): lg for m, lg in logs.items()}
    totals = {lg.total_frames_processed for lg in logs.values()}
    if len(totals) > 1:
        raise ValueError(f"logs cover different stream lengths: {sorted(totals)}")
    overrides = {Mode(k): v for k, v in (overrides or {}).items()}

    modes = {}
    for m in MODE_ORDER:
        if m not in logs:
            continue
        lg = logs[m]
        bm = overrides.get(m, model)
        secs = Fraction(lg.recorded_frame_count) / fps
        modes[m] = ModeStorage(lg.recorded_frame_count, secs, estimate_bytes(secs, bm), bm.bitrate_kbps)

    present = list(modes)
    dur, byt = {}, {}
    for i, a in enumerate(present):
        for b in present[i + 1:]:
            dur[(a, b)] = _reduction(modes[a].recorded_seconds, modes[b].recorded_seconds)
            byt[(a, b)] = _reduction(modes[a].bytes, modes[b].bytes)

    subset_ok = None
    if len(present) > 1:
        sets = [logs[m].recorded_indices() for m in present]
        subset_ok = all(sets[k] <= sets[k + 1] for k in range(len(sets) - 1))
    return StorageReport(fps, totals.pop() if totals else 0, modes, dur, byt, subset_ok)


# One-hour live field test: a motion-triggered NVR against the gated recorder.
FIELD_REFERENCE = {
    "bitrate_kbps": 7703,
    "rows": [
        {"system": "motion-triggered NVR", "seconds": 3600, "megabytes": 1917},
        {"system": "gated recorder", "seconds": 825, "megabytes": 769},
    ],
}


def field_reference_note(model: BitrateModel = BitrateModel(Fraction(7703))) -> str:
    """Compare the constant-bitrate model with the field figures, gap included."""
    lines = [f"Constant-bitrate model at {float(model.bitrate_kbps):g} kbps vs reported field sizes:"]
    for row in FIELD_REFERENCE["rows"]:
        est = estimate_bytes(row["seconds"], model) / BYTES_PER_MEGABYTE
        gap = (est - row["megabytes"]) / row["megabytes"]
        eff = Fraction(row["megabytes"] * BYTES_PER_MEGABYTE * 8, row["seconds"] * 1000)
        lines.append(
            f"  {row['system']:<22}{format_length(row['seconds']):>11}  reported {row['megabytes']:>5} MB  "
            f"model {float(est):8.2f} MB  gap {float(gap) * 100:+.1f}%  effective {float(eff):.0f} kbps"
        )
    return "\n".join(lines)
