"""
Storage across recording modes
==============================

Ten minutes of synthetic scene: wind gusts on half of it, cars and people on
a fifth. All three modes share one pass over the frames; storage is a
constant-bitrate estimate.
"""

from gatedrec import (
    Mode, MotionConfig, RecorderConfig, compare_modes, desk_scale_scenario, field_reference_note, generate_scenario,
    run_modes, scripted_detector,
)

spec = desk_scale_scenario()
stream, timeline, script = generate_scenario(spec)
print(f"wind on {timeline.wind_active.mean():.0%} of frames, objects on {timeline.objects_present().mean():.0%}")

modes = [Mode.CONTINUOUS, Mode.MOTION_ONLY, Mode.HYBRID]
logs = run_modes(stream, MotionConfig(), scripted_detector(script), [RecorderConfig(20, m, spec.fps) for m in modes])
report = compare_modes(dict(zip(modes, logs)), spec.fps)
print(report.table())

# how the same model lines up with the one-hour field figures
print(field_reference_note())
