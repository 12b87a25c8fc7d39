"""Detection metrics: greedy matching, precision/recall, AP/mAP, confusion matrix, timing."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .detect import CAR, PERSON, Detection, class_name, iou


class Interpolation(str, enum.Enum):
    ALL_POINT = "all_point"
    GRID101 = "grid101"


def _default_iou_range():
    return [round(0.5 + 0.05 * k, 2) for k in range(10)]


@dataclass(frozen=True)
class EvalConfig:
    confidence_threshold: float = 0.001
    iou_threshold: float = 0.5
    iou_range: tuple = tuple(_default_iou_range())
    max_detections: int = 300
    interpolation: Interpolation = Interpolation.GRID101
    # operating point for the reported precision/recall and the confusion matrix
    display_confidence: float = 0.25
    classes: tuple = (CAR, PERSON)

    def __post_init__(self):
        object.__setattr__(self, "iou_range", tuple(self.iou_range))
        object.__setattr__(self, "interpolation", Interpolation(self.interpolation))
        for v in (self.confidence_threshold, self.iou_threshold, self.display_confidence, *self.iou_range):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"threshold {v} outside [0, 1]")
        if list(self.iou_range) != sorted(self.iou_range):
            raise ValueError("iou_range must be ascending")
        if self.max_detections <= 0:
            raise ValueError("max_detections must be positive")


def _by_confidence(preds: Sequence[Detection]) -> List[int]:
    return sorted(range(len(preds)), key=lambda i: -preds[i].confidence)


@dataclass
class MatchResult:
    tp: np.ndarray  # bool per prediction, input order
    gt_index: np.ndarray  # matched GT index per prediction, -1 if none
    fn: int  # ground truths left unmatched

    @property
    def n_tp(self):
        return int(self.tp.sum())

    @property
    def n_fp(self):
        return int(len(self.tp) - self.tp.sum())


def match_detections(preds: Sequence[Detection], gts: Sequence[Detection], iou_threshold=0.5,
                     class_aware: bool = True) -> MatchResult:
    """Greedy matching by descending confidence (ties keep input order).

    Each prediction takes the unmatched GT of its class with the highest IoU
    at or above ``iou_threshold`` (ties go to the lower GT index).
    """
    taken = [False] * len(gts)
    tp = np.zeros(len(preds), dtype=bool)
    gi = np.full(len(preds), -1, dtype=int)
    for p in _by_confidence(preds):
        best, best_iou = -1, iou_threshold
        for g, gt in enumerate(gts):
            if taken[g] or (class_aware and gt.class_id != preds[p].class_id):
                continue
            v = iou(preds[p].bbox, gt.bbox)
            if v >= best_iou and (best < 0 or v > best_iou):
                best, best_iou = g, v
        if best >= 0:
            taken[best] = True
            tp[p] = True
            gi[p] = best
    return MatchResult(tp, gi, taken.count(False))


def precision_recall(tp, confidences, n_gt: int, confidence_threshold: float = 0.0):
    """Precision and recall over predictions at or above ``confidence_threshold``.

    ``n_gt`` is the number of ground truths. With no predictions precision is 1
    when there is no ground truth and 0 otherwise; with no ground truth recall is 1.
    """
    tp = np.asarray(tp, dtype=bool)
    keep = np.asarray(confidences, dtype=float) >= confidence_threshold
    n_pred = int(keep.sum())
    n_tp = int(tp[keep].sum())
    if n_pred == 0:
        precision = 1.0 if n_gt == 0 else 0.0
    else:
        precision = n_tp / n_pred
    recall = 1.0 if n_gt == 0 else n_tp / n_gt
    return precision, recall


def pr_curve(tp, confidences, n_gt: int):
    """Cumulative (recall, precision) after each prediction in descending-confidence order."""
    tp = np.asarray(tp, dtype=bool)
    order = np.argsort(-np.asarray(confidences, dtype=float), kind="stable")
    ctp = np.cumsum(tp[order])
    k = np.arange(1, len(order) + 1)
    recall = ctp / n_gt if n_gt else np.zeros(len(order))
    return recall, ctp / k


def ap_from_curve(recall, precision, interpolation=Interpolation.ALL_POINT) -> float:
    """Area under the monotone precision envelope."""
    recall = np.asarray(recall, dtype=float)
    precision = np.asarray(precision, dtype=float)
    if recall.size == 0:
        return 0.0
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    if Interpolation(interpolation) is Interpolation.ALL_POINT:
        widths = np.diff(np.concatenate(([0.0], recall)))
        return float(np.sum(widths * envelope))
    # k/100 by division so grid points compare equal to tp/n_gt recalls
    grid = np.arange(101) / 100
    idx = np.searchsorted(recall, grid, side="left")
    sampled = np.where(idx < len(envelope), envelope[np.minimum(idx, len(envelope) - 1)], 0.0)
    return float(sampled.mean())


def _images(x):
    if isinstance(x, Mapping):
        return x
    return {0: list(x)}


def _truncate(preds: Sequence[Detection], config: Optional[EvalConfig]):
    if config is None:
        return list(preds)
    kept = [preds[i] for i in _by_confidence(preds) if preds[i].confidence >= config.confidence_threshold]
    return kept[: config.max_detections]


def _class_matches(preds_by_image, gts_by_image, cid, iou_threshold, config=None):
    """Concatenated (tp, confidences) and GT count for one class over all images."""
    tps, confs, n_gt = [], [], 0
    for key in sorted(set(preds_by_image) | set(gts_by_image), key=str):
        preds = [d for d in _truncate(preds_by_image.get(key, []), config) if d.class_id == cid]
        gts = [g for g in gts_by_image.get(key, []) if g.class_id == cid]
        m = match_detections(preds, gts, iou_threshold)
        tps.append(m.tp)
        confs.append([d.confidence for d in preds])
        n_gt += len(gts)
    tp = np.concatenate(tps) if tps else np.zeros(0, dtype=bool)
    conf = np.concatenate([np.asarray(c, dtype=float) for c in confs]) if confs else np.zeros(0)
    return tp, conf, n_gt


def average_precision(preds, gts, iou_threshold=0.5, interpolation=Interpolation.ALL_POINT,
                      class_id: Optional[int] = None) -> float:
    """AP for one class. ``preds``/``gts`` are detection lists for one image or
    mappings image -> list. ``class_id`` defaults to the single class present."""
    preds, gts = _images(preds), _images(gts)
    if class_id is None:
        present = {d.class_id for v in preds.values() for d in v} | {d.class_id for v in gts.values() for d in v}
        if len(present) > 1:
            raise ValueError("several classes present; pass class_id")
        class_id = present.pop() if present else 0
    tp, conf, n_gt = _class_matches(preds, gts, class_id, iou_threshold)
    if n_gt == 0:
        return 0.0
    recall, precision = pr_curve(tp, conf, n_gt)
    return ap_from_curve(recall, precision, interpolation)


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    map50: float
    map50_95: float


@dataclass
class MetricsReport:
    per_class: Dict[str, ClassMetrics]
    overall: ClassMetrics

    def to_dict(self):
        row = lambda m: {"precision": m.precision, "recall": m.recall, "mAP50": m.map50, "mAP50_95": m.map50_95}  # noqa: E731
        return {"per_class": {k: row(v) for k, v in self.per_class.items()}, "overall": row(self.overall)}

    def table(self) -> str:
        head = f"{'Category':<10}{'Precision':>11}{'Recall':>9}{'mAP50':>9}{'mAP50-95':>10}"
        lines = [head, "-" * len(head)]
        for name, m in [*((k.capitalize(), v) for k, v in self.per_class.items()), ("Overall", self.overall)]:
            lines.append(f"{name:<10}{m.precision:>11.3f}{m.recall:>9.3f}{m.map50:>9.3f}{m.map50_95:>10.3f}")
        return "\n".join(lines)


# Trained-detector results from the field study; kept for report formatting only.
REFERENCE_TABLE = MetricsReport(
    per_class={
        "car": ClassMetrics(0.855, 0.83, 0.899, 0.638),
        "person": ClassMetrics(0.884, 0.819, 0.883, 0.478),
    },
    overall=ClassMetrics(0.869, 0.824, 0.891, 0.558),
)


def _ap_at(preds_by_image, gts_by_image, cid, thr, config):
    t, c, n = _class_matches(preds_by_image, gts_by_image, cid, thr, config)
    if n == 0:
        return 1.0 if len(c) == 0 else 0.0
    rec, prec = pr_curve(t, c, n)
    return ap_from_curve(rec, prec, config.interpolation)


def map_report(preds_by_image, gts_by_image, config: EvalConfig = EvalConfig()) -> MetricsReport:
    """Per-class and overall precision, recall, mAP50 and mAP50-95.

    Only classes seen in the ground truth or the predictions are reported.
    Overall values are unweighted means over classes that have ground truth.
    Precision and recall are taken at ``config.display_confidence`` and IoU
    ``config.iou_threshold``; predictions below ``config.confidence_threshold``
    or beyond ``config.max_detections`` per image are dropped first.
    """
    preds_by_image, gts_by_image = _images(preds_by_image), _images(gts_by_image)
    known = set(config.classes)
    for key, preds in preds_by_image.items():
        for d in preds:
            if d.class_id not in known:
                raise ValueError(f"unknown class {class_name(d.class_id)!r} in predictions for image {key}")
    seen = {d.class_id for v in (*preds_by_image.values(), *gts_by_image.values()) for d in v}

    per_class, with_gt = {}, []
    for cid in config.classes:
        if cid not in seen:
            continue
        tp, conf, n_gt = _class_matches(preds_by_image, gts_by_image, cid, config.iou_threshold, config)
        p, r = precision_recall(tp, conf, n_gt, config.display_confidence)
        aps = [_ap_at(preds_by_image, gts_by_image, cid, thr, config) for thr in config.iou_range]
        m = ClassMetrics(p, r, _ap_at(preds_by_image, gts_by_image, cid, 0.5, config), float(np.mean(aps)))
        per_class[class_name(cid)] = m
        if n_gt:
            with_gt.append(m)

    pool = with_gt or list(per_class.values())
    if not pool:
        overall = ClassMetrics(1.0, 1.0, 1.0, 1.0)
    else:
        overall = ClassMetrics(*(float(np.mean([getattr(m, f) for m in pool]))
                                 for f in ("precision", "recall", "map50", "map50_95")))
    return MetricsReport(per_class, overall)


# --- confusion matrix -------------------------------------------------------------

@dataclass
class ConfusionMatrix:
    """``counts[true][predicted]`` over classes plus a trailing background index."""

    labels: List[str]
    counts: np.ndarray

    @property
    def background(self) -> int:
        return len(self.labels) - 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def diagonal_fraction(self) -> float:
        return float(np.trace(self.counts)) / self.total if self.total else 0.0

    def normalized(self, axis: str = "row") -> np.ndarray:
        """Row ("row": per true class) or column ("column": per predicted class) normalization."""
        c = self.counts.astype(float)
        ax = 1 if axis == "row" else 0
        s = c.sum(axis=ax, keepdims=True)
        return np.divide(c, s, out=np.zeros_like(c), where=s > 0)

    def to_dict(self):
        return {
            "labels": self.labels,
            "counts": self.counts.tolist(),
            "row_normalized": self.normalized("row").tolist(),
            "column_normalized": self.normalized("column").tolist(),
        }

    def table(self) -> str:
        w = max(10, *(len(s) + 2 for s in self.labels))
        lines = ["true \\ pred".ljust(w) + "".join(s.rjust(w) for s in self.labels)]
        for s, row in zip(self.labels, self.counts):
            lines.append(s.ljust(w) + "".join(str(int(v)).rjust(w) for v in row))
        return "\n".join(lines)


def confusion_matrix(preds_by_image, gts_by_image, config: EvalConfig = EvalConfig()) -> ConfusionMatrix:
    """Class-agnostic greedy matching at ``config.iou_threshold`` among predictions
    with confidence at or above ``config.display_confidence``."""
    preds_by_image, gts_by_image = _images(preds_by_image), _images(gts_by_image)
    classes = list(config.classes)
    pos = {c: k for k, c in enumerate(classes)}
    bg = len(classes)
    counts = np.zeros((bg + 1, bg + 1), dtype=np.int64)
    for key in sorted(set(preds_by_image) | set(gts_by_image), key=str):
        preds = [d for d in preds_by_image.get(key, []) if d.confidence >= config.display_confidence]
        gts = gts_by_image.get(key, [])
        m = match_detections(preds, gts, config.iou_threshold, class_aware=False)
        matched = set()
        for p, g in enumerate(m.gt_index):
            if g >= 0:
                counts[pos[gts[g].class_id], pos[preds[p].class_id]] += 1
                matched.add(int(g))
            else:
                counts[bg, pos[preds[p].class_id]] += 1
        for g, gt in enumerate(gts):
            if g not in matched:
                counts[pos[gt.class_id], bg] += 1
    return ConfusionMatrix([class_name(c) for c in classes] + ["background"], counts)


# --- timing -----------------------------------------------------------------------

STAGE_LABELS = {
    "preprocessing": "Pre-processing Time",
    "inference": "Inference Time",
    "nms": "Non-Maximum Suppression (NMS) Time",
}


@dataclass
class StageTiming:
    mean_ms: Optional[float]
    count: int


@dataclass
class TimingReport:
    stages: Dict[str, StageTiming] = field(default_factory=dict)

    def to_dict(self):
        return {k: {"label": STAGE_LABELS[k], "mean_ms": v.mean_ms, "count": v.count} for k, v in self.stages.items()}

    def table(self) -> str:
        w = max(len(s) for s in STAGE_LABELS.values()) + 2
        lines = ["Performance Metric".ljust(w) + "Time (milliseconds per image)"]
        for k, v in self.stages.items():
            shown = "n/a" if v.mean_ms is None else f"{v.mean_ms:.1f}"
            lines.append(STAGE_LABELS[k].ljust(w) + shown)
        return "\n".join(lines)


def timing_report(samples: Mapping[str, Sequence[float]]) -> TimingReport:
    """Mean milliseconds per stage. Empty stages report ``mean_ms=None``."""
    stages = {}
    for key in STAGE_LABELS:
        vals = list(samples.get(key, ()))
        if any(v < 0 for v in vals):
            raise ValueError(f"negative timing sample in {key}")
        stages[key] = StageTiming(float(np.mean(vals)) if vals else None, len(vals))
    return TimingReport(stages)
