"""
Recording with a grace period
=============================

Three recording modes replay the same boolean timelines. Recording starts on
a hit and continues while less than ``grace_seconds`` have passed since the
last one.
"""

import numpy as np

from gatedrec import Mode, RecorderConfig, replay, timeline_oracle

fps, grace = 1, 20
motion = np.zeros(120, bool)
motion[[0, 5, 50, 51, 52, 90]] = True
objects = np.zeros(120, bool)
objects[[0, 52]] = True

for mode in Mode:
    log = replay(motion, objects, RecorderConfig(grace, mode, fps))
    spans = [(s.start_index, s.end_index) for s in log.segments]
    same = log.recorded_indices() == timeline_oracle(motion, objects, fps, grace, mode)
    print(f"{mode.value:12s} {log.recorded_frame_count:4d} frames  segments={spans}  oracle={same}")

# An object seen only at t=0 is kept for exactly 20 frames: the 20th second is already outside
log = replay([True] + [False] * 59, [True] + [False] * 59, RecorderConfig(20, Mode.HYBRID, 1))
print(sorted(log.recorded_indices())[-1])
