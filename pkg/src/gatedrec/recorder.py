"""Activity-gated recording state machine and the frame pipeline driving it.

Three modes share one state machine:

* ``HYBRID``: recording starts on motion plus a relevant detection and
  continues while detections keep arriving within the grace period.
* ``MOTION_ONLY``: same machine with "motion" standing in for "detection".
* ``CONTINUOUS``: every frame is written.

While recording, the grace test is strict: a frame whose elapsed time since
the last hit equals ``grace_seconds`` and carries no hit stops the recording
and is not written.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence

from .detect import DetectorConfig, filter_detections, nms
from .frames import Frame, Y4MWriter, as_fraction, frame_time, to_luma
from .motion import MotionConfig, MotionDetector


class Mode(str, enum.Enum):
    CONTINUOUS = "continuous"
    MOTION_ONLY = "motion_only"
    HYBRID = "hybrid"


class Action(str, enum.Enum):
    NONE = "none"
    START_AND_WRITE = "start_and_write"
    WRITE = "write"
    STOP = "stop"


WRITES = (Action.START_AND_WRITE, Action.WRITE)


@dataclass(frozen=True)
class RecorderConfig:
    grace_seconds: Fraction = Fraction(20)
    mode: Mode = Mode.HYBRID
    fps: Fraction = Fraction(30)

    def __post_init__(self):
        object.__setattr__(self, "grace_seconds", as_fraction(self.grace_seconds))
        object.__setattr__(self, "fps", as_fraction(self.fps))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.grace_seconds < 0:
            raise ValueError("grace_seconds must be nonnegative")
        if self.fps <= 0:
            raise ValueError("fps must be positive")


@dataclass(frozen=True)
class Segment:
    start_index: int
    end_index: int
    start_time: Fraction
    end_time: Fraction

    def __post_init__(self):
        if self.start_index > self.end_index:
            raise ValueError(f"segment start {self.start_index} after end {self.end_index}")

    @property
    def frame_count(self) -> int:
        return self.end_index - self.start_index + 1

    def duration(self, fps) -> Fraction:
        return self.frame_count / as_fraction(fps)


class RecorderState(NamedTuple):
    recording: bool = False
    last_detection_time: Optional[Fraction] = None
    start_index: Optional[int] = None
    start_time: Optional[Fraction] = None
    last_index: Optional[int] = None  # last frame written
    last_write_time: Optional[Fraction] = None
    last_timestamp: Optional[Fraction] = None  # last frame seen

    @property
    def open_segment(self) -> Optional[Segment]:
        if not self.recording:
            return None
        return Segment(self.start_index, self.last_index, self.start_time, self.last_write_time)


IDLE = RecorderState()


class OrderError(ValueError):
    pass


def step(state: RecorderState, frame_index: int, timestamp, motion: bool, detections: Sequence,
         config: RecorderConfig):
    """Advance the state machine by one frame; returns ``(new_state, action)``.

    ``detections`` must already be reduced to relevant, motion-gated hits (the
    pipeline does this); only its emptiness matters.
    """
    if state.last_timestamp is not None and timestamp < state.last_timestamp:
        raise OrderError(f"timestamp {timestamp} precedes {state.last_timestamp} (frame {frame_index})")
    mode = config.mode
    if mode is Mode.CONTINUOUS:
        hit = True
    elif mode is Mode.MOTION_ONLY:
        hit = bool(motion)
    else:
        hit = bool(detections)

    if not state.recording:
        if hit and (motion or mode is Mode.CONTINUOUS):
            return (RecorderState(True, timestamp, frame_index, timestamp, frame_index, timestamp, timestamp),
                    Action.START_AND_WRITE)
        return RecorderState(last_timestamp=timestamp), Action.NONE

    last = state.last_detection_time
    if hit or timestamp - last < config.grace_seconds:
        return (RecorderState(True, timestamp if hit else last, state.start_index, state.start_time,
                              frame_index, timestamp, timestamp),
                Action.WRITE)
    return RecorderState(last_timestamp=timestamp), Action.STOP


def stop_button(state: RecorderState):
    """Close any open segment at its last written frame; ``(idle_state, segment_or_None)``."""
    if not state.recording:
        return state, None
    return RecorderState(last_timestamp=state.last_timestamp), state.open_segment


class Decision(NamedTuple):
    index: int
    timestamp: Fraction
    motion: bool
    hit: bool
    action: Action


@dataclass
class RecordingLog:
    mode: Mode
    fps: Fraction
    segments: List[Segment] = field(default_factory=list)
    total_frames_processed: int = 0
    trace: List[Decision] = field(default_factory=list)

    @property
    def recorded_frame_count(self) -> int:
        return sum(s.frame_count for s in self.segments)

    @property
    def recorded_seconds(self) -> Fraction:
        return self.recorded_frame_count / self.fps

    def recorded_indices(self) -> set:
        out = set()
        for s in self.segments:
            out.update(range(s.start_index, s.end_index + 1))
        return out


class Recorder:
    """Mutable driver around :func:`step` that accumulates a :class:`RecordingLog`.

    ``sink``, if given, receives ``(action, frame)`` for every frame so that
    written frames can be materialized (see :class:`SegmentDumper`).
    """

    def __init__(self, config: RecorderConfig, keep_trace: bool = True, sink=None):
        self.config = config
        self.state = IDLE
        self.log = RecordingLog(config.mode, config.fps)
        self.keep_trace = keep_trace
        self.sink = sink

    def feed(self, index, timestamp, motion, detections, frame=None) -> Action:
        prev = self.state
        self.state, action = step(prev, index, timestamp, motion, detections, self.config)
        self.log.total_frames_processed += 1
        if action is Action.STOP:
            self.log.segments.append(prev.open_segment)
        if self.keep_trace:
            self.log.trace.append(Decision(index, timestamp, bool(motion), bool(detections), action))
        if self.sink is not None:
            self.sink(action, frame)
        return action

    def stop_button(self) -> Optional[Segment]:
        self.state, seg = stop_button(self.state)
        if seg is not None:
            self.log.segments.append(seg)
            if self.sink is not None:
                self.sink(Action.STOP, None)
        return seg

    def finish(self) -> RecordingLog:
        """Close the open segment at stream end."""
        self.stop_button()
        return self.log


def replay(motion: Sequence[bool], objects: Sequence[bool], config: RecorderConfig,
           keep_trace: bool = False) -> RecordingLog:
    """Drive the recorder from per-frame booleans with timestamps ``index / fps``.

    ``objects[i]`` says the detector would report a relevant object on frame
    ``i``; like the pipeline, it only counts on frames with motion.
    """
    if len(motion) != len(objects):
        raise ValueError("motion and objects timelines differ in length")
    rec = Recorder(config, keep_trace=keep_trace)
    marker = (True,)
    fps = config.fps
    for i, (m, o) in enumerate(zip(motion, objects)):
        rec.feed(i, frame_time(i, fps), m, marker if (m and o) else ())
    return rec.finish()


# --- pipeline ----------------------------------------------------------------

STAGES = ("preprocessing", "inference", "nms")


class StageTimer:
    """Collects per-frame wall-clock samples (milliseconds) for each stage."""

    def __init__(self):
        self.samples: Dict[str, List[float]] = {s: [] for s in STAGES}

    def add(self, stage, ms):
        self.samples[stage].append(ms)


class PipelineError(RuntimeError):
    def __init__(self, index, cause):
        super().__init__(f"frame {index}: {cause}")
        self.index = index
        self.__cause__ = cause


def run_modes(stream, motion_config: MotionConfig, detector: Optional[Callable],
              configs: Sequence[RecorderConfig], detector_config: DetectorConfig = DetectorConfig(),
              reference=None, timer: Optional[StageTimer] = None, sinks=None, paced: bool = False,
              keep_trace: bool = True, stop_at: Optional[int] = None) -> List[RecordingLog]:
    """Run one pass over ``stream`` feeding one recorder per config.

    Motion and detections are computed once per frame and shared. The
    detector runs only on frames with motion, and only when some recorder is
    in hybrid mode. ``stop_at`` presses the stop button after that frame index.
    """
    sinks = sinks or [None] * len(configs)
    recorders = [Recorder(c, keep_trace, s) for c, s in zip(configs, sinks)]
    need_detector = any(c.mode is Mode.HYBRID for c in configs)
    if need_detector and detector is None:
        raise ValueError("hybrid mode needs a detector")
    motion_det = MotionDetector(motion_config, reference)
    clock = time.perf_counter
    fps = getattr(getattr(stream, "info", None), "fps", None)
    t_start = clock()

    for frame in stream:
        i = frame.index
        if paced and fps:
            lag = float(frame.timestamp) - (clock() - t_start)
            if lag > 0:
                time.sleep(lag)
        try:
            t0 = clock()
            moved = motion_det(to_luma(frame)).motion
            t1 = clock()
            hits = ()
            if need_detector and moved:
                raw = detector(frame, i)
                t2 = clock()
                hits = nms(filter_detections(raw, detector_config),
                           detector_config.iou_threshold, detector_config.max_detections)
                t3 = clock()
                if timer is not None:
                    timer.add("inference", (t2 - t1) * 1e3)
                    timer.add("nms", (t3 - t2) * 1e3)
            if timer is not None:
                timer.add("preprocessing", (t1 - t0) * 1e3)
        except Exception as exc:  # keep the frame index with the failure
            raise PipelineError(i, exc) from exc
        for r in recorders:
            r.feed(i, frame.timestamp, moved, hits, frame)
        if stop_at is not None and i == stop_at:
            for r in recorders:
                r.stop_button()
    return [r.finish() for r in recorders]


def run_pipeline(stream, motion_config: MotionConfig, detector, recorder_config: RecorderConfig,
                 detector_config: DetectorConfig = DetectorConfig(), **kwargs) -> RecordingLog:
    """Single-mode convenience over :func:`run_modes`."""
    return run_modes(stream, motion_config, detector, [recorder_config], detector_config, **kwargs)[0]


class SegmentDumper:
    """Recorder sink writing each segment's frames to ``<prefix>_<n>.y4m``."""

    def __init__(self, prefix, fps):
        self.prefix = prefix
        self.fps = fps
        self.paths: List[str] = []
        self._out: Optional[Y4MWriter] = None

    def __call__(self, action: Action, frame: Optional[Frame]):
        if action is Action.START_AND_WRITE:
            path = f"{self.prefix}_{len(self.paths):04d}.y4m"
            self.paths.append(path)
            self._out = Y4MWriter(path, frame.width, frame.height, self.fps)
        if action in WRITES:
            self._out.write(frame)
        elif action is Action.STOP and self._out is not None:
            self._out.close()
            self._out = None
