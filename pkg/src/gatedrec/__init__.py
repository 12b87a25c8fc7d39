"""Activity-gated video recording: motion gate, object gate, grace-period recorder,
storage accounting and detection metrics."""

from .detect import (
    CAR, PERSON, BBox, Detection, DetectorConfig, DetectorScript, NoiseSpec, ScriptedDetector,
    filter_detections, iou, nms, scripted_detector,
)
from .evaluation import (
    ConfusionMatrix, EvalConfig, Interpolation, MetricsReport, TimingReport, average_precision,
    confusion_matrix, map_report, match_detections, precision_recall, timing_report,
)
from .frames import Frame, FrameStream, LumaFrame, StreamInfo, from_arrays, open_image_sequence, open_y4m, to_luma, write_y4m
from .motion import MotionConfig, MotionDetector, MotionResult, detect_motion, frame_diff
from .recorder import (
    Action, Mode, Recorder, RecorderConfig, RecorderState, RecordingLog, Segment, SegmentDumper, StageTimer, replay,
    run_modes, run_pipeline, step, stop_button,
)
from .storage import BitrateModel, StorageReport, compare_modes, estimate_bytes, field_reference_note
from .synth import (
    GroundTruthTimeline, ObjectEvent, ScenarioSpec, Wind, desk_scale_scenario, generate_scenario, random_timeline,
    timeline_oracle,
)

__version__ = "0.1.0"
