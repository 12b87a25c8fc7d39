"""Frame-subtraction motion detection on consecutive luma frames."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.ndimage import uniform_filter

from .detect import BBox


@dataclass(frozen=True)
class MotionConfig:
    pixel_threshold: int = 25
    area_fraction_threshold: float = 0.005
    blur_radius: int = 1  # box blur, 0 disables

    def __post_init__(self):
        if not 0 <= self.pixel_threshold <= 255:
            raise ValueError("pixel_threshold must be in [0, 255]")
        if not 0.0 <= self.area_fraction_threshold <= 1.0:
            raise ValueError("area_fraction_threshold must be in [0, 1]")
        if self.blur_radius < 0 or int(self.blur_radius) != self.blur_radius:
            raise ValueError("blur_radius must be a nonnegative integer")


@dataclass(frozen=True)
class MotionResult:
    motion: bool
    changed_fraction: float
    changed_bbox: Optional[BBox] = None


def _plane(frame) -> np.ndarray:
    return frame.y if hasattr(frame, "y") else np.asarray(frame)


def box_blur(plane: np.ndarray, radius: int) -> np.ndarray:
    if radius == 0:
        return plane.astype(np.float64)
    # edge pixels replicate outward
    return uniform_filter(plane.astype(np.float64), size=2 * radius + 1, mode="nearest")


def frame_diff(prev, curr, pixel_threshold=25, blur_radius=0):
    """Binary change mask and the changed fraction.

    ``mask[i]`` is set iff ``|curr[i] - prev[i]| > pixel_threshold`` after both
    inputs are box-blurred with ``blur_radius``.
    """
    a, b = _plane(prev), _plane(curr)
    if a.shape != b.shape:
        raise ValueError(f"frame size mismatch: {a.shape[::-1]} vs {b.shape[::-1]}")
    mask = np.abs(box_blur(b, blur_radius) - box_blur(a, blur_radius)) > pixel_threshold
    return mask, float(np.count_nonzero(mask)) / mask.size


def mask_bbox(mask: np.ndarray) -> Optional[BBox]:
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return BBox(int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))


def detect_motion(prev, curr, config: MotionConfig = MotionConfig()) -> MotionResult:
    mask, frac = frame_diff(prev, curr, config.pixel_threshold, config.blur_radius)
    return MotionResult(frac >= config.area_fraction_threshold, frac, mask_bbox(mask) if frac > 0 else None)


class MotionDetector:
    """Stateful wrapper: compares each luma frame against the previous one.

    The first frame has no predecessor and reports no motion unless a
    ``reference`` plane was supplied.
    """

    def __init__(self, config: MotionConfig = MotionConfig(), reference=None):
        self.config = config
        self._prev = None if reference is None else _plane(reference)

    def __call__(self, luma) -> MotionResult:
        curr = _plane(luma)
        prev, self._prev = self._prev, curr
        if prev is None:
            return MotionResult(False, 0.0, None)
        return detect_motion(prev, curr, self.config)
