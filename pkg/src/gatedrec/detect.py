"""Detection data model, IoU, filtering, NMS and detectors.

A detector is any callable ``detector(frame, index) -> list[Detection]``.
:class:`ScriptedDetector` plays back per-frame detections (optionally
perturbed); :func:`load_backend` wires an external model behind the same
call signature.
"""

from __future__ import annotations

import importlib
import json
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

CAR = 0
PERSON = 1
CLASS_NAMES: Dict[int, str] = {CAR: "car", PERSON: "person"}


def register_class(name: str) -> int:
    """Add a class name and return its id (existing names return their id)."""
    name = name.lower()
    for cid, n in CLASS_NAMES.items():
        if n == name:
            return cid
    cid = max(CLASS_NAMES) + 1
    CLASS_NAMES[cid] = name
    return cid


def class_id(name) -> int:
    if isinstance(name, (int, np.integer)):
        if int(name) not in CLASS_NAMES:
            raise KeyError(f"unknown class id {name}")
        return int(name)
    key = str(name).lower()
    for cid, n in CLASS_NAMES.items():
        if n == key:
            return cid
    raise KeyError(f"unknown class {name!r}")


def class_name(cid: int) -> str:
    return CLASS_NAMES.get(cid, str(cid))


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative box extent {self.w}x{self.h}")

    @property
    def area(self):
        return self.w * self.h

    def as_list(self):
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True)
class Detection:
    class_id: int
    confidence: float
    bbox: BBox

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class DetectorConfig:
    confidence_threshold: float = 0.25
    iou_threshold: float = 0.5
    max_detections: int = 300
    relevant_classes: frozenset = frozenset({CAR, PERSON})

    def __post_init__(self):
        object.__setattr__(self, "relevant_classes", frozenset(class_id(c) for c in self.relevant_classes))
        for name in ("confidence_threshold", "iou_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.max_detections <= 0:
            raise ValueError("max_detections must be positive")


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return min(1.0, inter / union)


def filter_detections(dets: Iterable[Detection], config: DetectorConfig) -> List[Detection]:
    return [
        d for d in dets
        if d.confidence >= config.confidence_threshold and d.class_id in config.relevant_classes
    ]


def _rank(dets: Sequence[Detection]) -> List[int]:
    # confidence desc, then lower class id, then input order
    return sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, dets[i].class_id, i))


def nms(dets: Sequence[Detection], iou_threshold: float = 0.5, max_detections: int = 300) -> List[Detection]:
    """Greedy per-class non-maximum suppression.

    A box is kept iff its IoU with every already-kept box of the same class is
    at most ``iou_threshold``. The result is in rank order and capped at
    ``max_detections``.
    """
    dets = list(dets)
    kept: List[int] = []
    by_class: Dict[int, List[BBox]] = {}
    for i in _rank(dets):
        d = dets[i]
        boxes = by_class.setdefault(d.class_id, [])
        if all(iou(d.bbox, k) <= iou_threshold for k in boxes):
            boxes.append(d.bbox)
            kept.append(i)
            if len(kept) == max_detections:
                break
    return [dets[i] for i in kept]


# --- scripted playback -----------------------------------------------------

@dataclass
class NoiseSpec:
    drop_probability: float = 0.0
    spurious_rate: float = 0.0  # expected spurious detections per frame (Poisson)
    confidence_jitter: float = 0.0  # uniform +/- amplitude, clipped to [0, 1]

    @property
    def is_zero(self):
        return self.drop_probability == 0 and self.spurious_rate == 0 and self.confidence_jitter == 0


@dataclass
class DetectorScript:
    frames: Dict[int, List[Detection]] = field(default_factory=dict)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    frame_size: Optional[tuple] = None  # (width, height) for spurious boxes when no frame is given

    def __post_init__(self):
        if any(i < 0 for i in self.frames):
            raise ValueError("script frame indices must be nonnegative")

    def indices_with(self, cid=None):
        return sorted(i for i, ds in self.frames.items() if any(cid is None or d.class_id == cid for d in ds))


class ScriptedDetector:
    """Plays back a :class:`DetectorScript`.

    Noise is drawn from an RNG keyed on ``(seed, index)``, so results do not
    depend on query order.
    """

    def __init__(self, script: DetectorScript):
        self.script = script

    def __call__(self, frame, index: int) -> List[Detection]:
        dets = list(self.script.frames.get(index, ()))
        noise = self.script.noise
        if noise.is_zero:
            return dets
        rng = np.random.default_rng([self.script.seed, index])
        out = []
        for d in dets:
            if rng.random() < noise.drop_probability:
                continue
            if noise.confidence_jitter:
                c = d.confidence + rng.uniform(-noise.confidence_jitter, noise.confidence_jitter)
                d = Detection(d.class_id, float(np.clip(c, 0.0, 1.0)), d.bbox)
            out.append(d)
        if noise.spurious_rate > 0:
            if frame is not None:
                W, H = frame.width, frame.height
            elif self.script.frame_size:
                W, H = self.script.frame_size
            else:
                W, H = 640, 640
            classes = sorted(CLASS_NAMES)[:2]
            for _ in range(rng.poisson(noise.spurious_rate)):
                w = float(rng.uniform(1, max(W / 4, 1)))
                h = float(rng.uniform(1, max(H / 4, 1)))
                x = float(rng.uniform(0, W - w))
                y = float(rng.uniform(0, H - h))
                cid = int(classes[rng.integers(len(classes))])
                out.append(Detection(cid, float(rng.uniform(0, 1)), BBox(x, y, w, h)))
        return out


def scripted_detector(script: DetectorScript) -> ScriptedDetector:
    return ScriptedDetector(script)


# --- line-delimited JSON ---------------------------------------------------

def detection_to_dict(d: Detection) -> dict:
    return {"class": class_name(d.class_id), "confidence": d.confidence, "bbox": d.bbox.as_list()}


def detection_from_dict(obj: dict) -> Detection:
    return Detection(class_id(obj["class"]), float(obj.get("confidence", 1.0)), BBox(*map(float, obj["bbox"])))


class ParseError(ValueError):
    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path, self.lineno = path, lineno


def read_detections_jsonl(path, register_unknown=False) -> Dict[int, List[Detection]]:
    """Read ``{"index": i, "detections": [...]}`` records, one per line.

    Extra keys on a record are ignored. Repeated indices are merged.
    """
    out: Dict[int, List[Detection]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                idx = int(rec["index"])
                if idx < 0:
                    raise ValueError("negative index")
                dets = []
                for obj in rec.get("detections", []):
                    if register_unknown:
                        register_class(str(obj["class"]))
                    dets.append(detection_from_dict(obj))
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(path, lineno, f"{type(exc).__name__}: {exc}") from None
            out.setdefault(idx, []).extend(dets)
    return out


def write_detections_jsonl(path, frames: Dict[int, List[Detection]], extra: Optional[Dict[int, dict]] = None):
    with open(path, "w") as fh:
        for idx in sorted(frames):
            rec = {"index": idx, "detections": [detection_to_dict(d) for d in frames[idx]]}
            if extra and idx in extra:
                rec.update(extra[idx])
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_script(path, noise: Optional[NoiseSpec] = None, seed: int = 0) -> DetectorScript:
    return DetectorScript(read_detections_jsonl(path), noise or NoiseSpec(), seed)


def save_script(path, script: DetectorScript):
    write_detections_jsonl(path, script.frames)


# --- external backend plug point -------------------------------------------

@dataclass
class BackendConfig:
    """External detector adapter.

    ``factory`` is ``"module:callable"``; it is called as
    ``factory(model_path=..., input_size=(w, h), **options)`` and must return a
    ``detector(frame, index) -> list[Detection]`` callable.
    """

    factory: str
    model_path: Optional[str] = None
    input_size: tuple = (640, 640)
    options: dict = field(default_factory=dict)


def load_backend(config: BackendConfig) -> Callable:
    mod_name, _, attr = config.factory.partition(":")
    if not attr:
        raise ValueError(f"backend factory must look like 'module:callable', got {config.factory!r}")
    factory = getattr(importlib.import_module(mod_name), attr)
    return factory(model_path=config.model_path, input_size=tuple(config.input_size), **config.options)

