"""Synthetic surveillance scenes with ground truth, and the timeline oracle.

Scenes are a constant gray background with solid rectangles moving along
straight lines. Wind is uniform per-pixel jitter over chosen time intervals:
motion with nothing worth recording.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .detect import BBox, Detection, DetectorScript, class_id, class_name, write_detections_jsonl
from .frames import Frame, FrameStream, StreamInfo, as_fraction, frame_time

# gray level of each class's rectangle; both contrast strongly with the default background
CLASS_LEVELS = {"car": 220, "person": 20}


@dataclass
class ObjectEvent:
    class_id: int
    enter_time: Fraction
    exit_time: Fraction
    start_xy: Tuple[float, float]
    end_xy: Tuple[float, float]
    size_wh: Tuple[int, int]
    level: Optional[int] = None

    def __post_init__(self):
        self.class_id = class_id(self.class_id)
        self.enter_time = as_fraction(self.enter_time)
        self.exit_time = as_fraction(self.exit_time)
        if self.level is None:
            self.level = CLASS_LEVELS.get(class_name(self.class_id), 200)


@dataclass
class Wind:
    enabled: bool = False
    intensity: int = 0
    active_intervals: List[Tuple[Fraction, Fraction]] = field(default_factory=list)

    def __post_init__(self):
        self.active_intervals = [(as_fraction(a), as_fraction(b)) for a, b in self.active_intervals]


@dataclass
class ScenarioSpec:
    duration_seconds: Fraction = Fraction(60)
    fps: Fraction = Fraction(10)
    width: int = 64
    height: int = 48
    objects: List[ObjectEvent] = field(default_factory=list)
    wind: Wind = field(default_factory=Wind)
    background: int = 100
    channels: int = 1
    seed: int = 0

    def __post_init__(self):
        self.duration_seconds = as_fraction(self.duration_seconds)
        self.fps = as_fraction(self.fps)

    @property
    def frame_count(self) -> int:
        return math.floor(self.duration_seconds * self.fps)

    def validate(self):
        if self.fps <= 0 or self.duration_seconds < 0:
            raise ValueError("fps must be positive and duration nonnegative")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("frame size must be positive")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if not 0 <= self.background <= 255:
            raise ValueError("background must be an 8-bit level")
        for k, ev in enumerate(self.objects):
            if not ev.enter_time < ev.exit_time <= self.duration_seconds:
                raise ValueError(f"object {k}: need enter_time < exit_time <= duration")
            w, h = ev.size_wh
            if w <= 0 or h <= 0 or w > self.width or h > self.height:
                raise ValueError(f"object {k}: size {w}x{h} does not fit a {self.width}x{self.height} canvas")
        if self.wind.enabled and not 0 <= self.wind.intensity <= 255:
            raise ValueError("wind intensity must be in [0, 255]")

    # --- serialization
    def to_dict(self) -> dict:
        def q(x):
            return str(x) if isinstance(x, Fraction) and x.denominator != 1 else int(x) if isinstance(x, Fraction) else x

        return {
            "duration_seconds": q(self.duration_seconds),
            "fps": q(self.fps),
            "width": self.width,
            "height": self.height,
            "background": self.background,
            "channels": self.channels,
            "seed": self.seed,
            "objects": [
                {
                    "class": class_name(ev.class_id),
                    "enter_time": q(ev.enter_time),
                    "exit_time": q(ev.exit_time),
                    "start_xy": list(ev.start_xy),
                    "end_xy": list(ev.end_xy),
                    "size_wh": list(ev.size_wh),
                    "level": ev.level,
                }
                for ev in self.objects
            ],
            "wind": {
                "enabled": self.wind.enabled,
                "intensity": self.wind.intensity,
                "active_intervals": [[q(a), q(b)] for a, b in self.wind.active_intervals],
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        objs = [
            ObjectEvent(o["class"], o["enter_time"], o["exit_time"], tuple(o["start_xy"]), tuple(o["end_xy"]),
                        tuple(o["size_wh"]), o.get("level"))
            for o in d.get("objects", [])
        ]
        w = d.get("wind", {})
        spec = cls(
            duration_seconds=d["duration_seconds"], fps=d["fps"], width=d["width"], height=d["height"],
            objects=objs,
            wind=Wind(w.get("enabled", False), w.get("intensity", 0), w.get("active_intervals", [])),
            background=d.get("background", 100), channels=d.get("channels", 1), seed=d.get("seed", 0),
        )
        spec.validate()
        return spec


def load_scenario(path) -> ScenarioSpec:
    with open(path) as fh:
        return ScenarioSpec.from_dict(json.load(fh))


def save_scenario(path, spec: ScenarioSpec):
    with open(path, "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)


@dataclass
class GroundTruthTimeline:
    motion_expected: np.ndarray  # bool per frame
    wind_active: np.ndarray  # bool per frame
    objects: List[List[Tuple[int, BBox]]]

    def __len__(self):
        return len(self.motion_expected)

    def objects_present(self) -> np.ndarray:
        return np.array([bool(o) for o in self.objects], dtype=bool)

    def save(self, path):
        """Same line format as a detector script, plus motion/wind flags."""
        frames = {i: [Detection(c, 1.0, b) for c, b in objs] for i, objs in enumerate(self.objects)}
        extra = {i: {"motion_expected": bool(self.motion_expected[i]), "wind_active": bool(self.wind_active[i])}
                 for i in range(len(self))}
        write_detections_jsonl(path, frames, extra)


def _round_half_up(v: Fraction) -> int:
    return math.floor(v + Fraction(1, 2))


def object_box(ev: ObjectEvent, t: Fraction, width, height) -> Optional[BBox]:
    """Integer box of an object at time ``t``, or None when it is not in the scene."""
    if not ev.enter_time <= t < ev.exit_time:
        return None
    frac = (t - ev.enter_time) / (ev.exit_time - ev.enter_time)
    w, h = ev.size_wh
    sx, sy = map(as_fraction, ev.start_xy)
    ex, ey = map(as_fraction, ev.end_xy)
    x = _round_half_up(sx + frac * (ex - sx))
    y = _round_half_up(sy + frac * (ey - sy))
    x = min(max(x, 0), width - w)
    y = min(max(y, 0), height - h)
    return BBox(x, y, w, h)


def _wind_flags(spec: ScenarioSpec, times) -> np.ndarray:
    if not spec.wind.enabled or spec.wind.intensity == 0:
        return np.zeros(len(times), dtype=bool)
    return np.array([any(a <= t < b for a, b in spec.wind.active_intervals) for t in times], dtype=bool)


def render_frame(spec: ScenarioSpec, index: int, boxes, wind: bool) -> np.ndarray:
    img = np.full((spec.height, spec.width), spec.background, dtype=np.int16)
    for (cid, b), level in boxes:
        img[int(b.y):int(b.y + b.h), int(b.x):int(b.x + b.w)] = level
    if wind:
        rng = np.random.default_rng([spec.seed, index])
        img = img + rng.integers(-spec.wind.intensity, spec.wind.intensity + 1, size=img.shape)
    img = np.clip(img, 0, 255).astype(np.uint8)
    if spec.channels == 3:
        img = np.repeat(img[:, :, None], 3, axis=2)
    return img


def generate_scenario(spec: ScenarioSpec):
    """Return ``(stream, timeline, script)`` for a scenario.

    The stream regenerates frames lazily and identically on each iteration.
    The script holds every visible object at confidence 1.0.
    """
    spec.validate()
    n = spec.frame_count
    times = [frame_time(i, spec.fps) for i in range(n)]
    wind = _wind_flags(spec, times)

    per_frame = []  # [((cid, bbox), level), ...]
    for t in times:
        row = []
        for ev in spec.objects:
            b = object_box(ev, t, spec.width, spec.height)
            if b is not None:
                row.append(((ev.class_id, b), ev.level))
        per_frame.append(row)

    motion = np.zeros(n, dtype=bool)
    for i in range(1, n):
        moved = per_frame[i] != per_frame[i - 1]
        motion[i] = bool(wind[i] or wind[i - 1] or moved)

    objects = [[cb for cb, _ in row] for row in per_frame]
    timeline = GroundTruthTimeline(motion, wind, objects)
    script = DetectorScript(
        {i: [Detection(c, 1.0, b) for c, b in objs] for i, objs in enumerate(objects) if objs},
        seed=spec.seed, frame_size=(spec.width, spec.height),
    )

    def gen():
        for i in range(n):
            yield Frame(i, times[i], render_frame(spec, i, per_frame[i], bool(wind[i])))

    info = StreamInfo(spec.width, spec.height, spec.fps, n)
    return FrameStream(info, gen), timeline, script


# --- oracle --------------------------------------------------------------------

def timeline_oracle(motion: Sequence[bool], objects: Sequence[bool], fps, grace_seconds, mode) -> set:
    """Recorded frame indices predicted from boolean timelines.

    Works in whole frames: a frame ``k`` frames after the last hit is inside
    the grace window iff ``k < grace_seconds * fps``, i.e. ``k < ceil(...)``.
    Objects count only on frames with motion (the detector is motion-gated).
    ``mode`` is "continuous", "motion_only" or "hybrid" (or the matching enum).
    """
    if len(motion) != len(objects):
        raise ValueError("motion and objects timelines differ in length")
    mode = getattr(mode, "value", mode)
    n = len(motion)
    if mode == "continuous":
        return set(range(n))
    window = math.ceil(as_fraction(grace_seconds) * as_fraction(fps))
    if mode == "motion_only":
        hits = [bool(m) for m in motion]
    elif mode == "hybrid":
        hits = [bool(m) and bool(o) for m, o in zip(motion, objects)]
    else:
        raise ValueError(f"unknown mode {mode!r}")

    recorded = set()
    last_hit = None  # frame index of the latest hit while recording
    for i, h in enumerate(hits):
        if last_hit is None:
            if h:
                last_hit = i
                recorded.add(i)
            continue
        if h:
            last_hit = i
            recorded.add(i)
        elif i - last_hit < window:
            recorded.add(i)
        else:
            last_hit = None
    return recorded


def random_timeline(rng: np.random.Generator, n: int, motion_density: float, object_density: float,
                    burst: float = 0.9):
    """Bursty boolean timelines: each sequence is a two-state Markov chain with the given
    stationary density and persistence ``burst``."""

    def chain(p):
        out = np.zeros(n, dtype=bool)
        if n == 0:
            return out
        # transition probabilities chosen so the stationary density is p
        stay_on = burst + (1 - burst) * p
        turn_on = (1 - burst) * p
        u = rng.random(n)
        s = u[0] < p
        for i in range(n):
            s = u[i] < (stay_on if s else turn_on) if i else s
            out[i] = s
        return out

    return chain(motion_density), chain(object_density)


def desk_scale_scenario(seed: int = 7) -> ScenarioSpec:
    """Ten minutes at 10 fps: wind on half the timeline, cars or people on a fifth of it.

    Wind runs in six 50 s gusts; four 30 s object passes fall in the calm gaps.
    """
    wind = Wind(True, 40, [(100 * k, 100 * k + 50) for k in range(6)])
    passes = [("car", 55, (0, 18), (52, 18)), ("person", 160, (60, 10), (4, 30)),
              ("car", 355, (52, 30), (0, 20)), ("person", 455, (2, 4), (56, 36))]
    objects = [
        ObjectEvent(cls, t0, t0 + 30, start, end, (12, 8) if cls == "car" else (5, 12))
        for cls, t0, start, end in passes
    ]
    return ScenarioSpec(600, 10, 64, 48, objects, wind, background=100, seed=seed)
