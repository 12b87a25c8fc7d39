"""
Scoring a detector
==================

Greedy IoU matching, precision/recall at an operating point, AP and a
confusion matrix with a background class. Predictions here are ground truth
with dropout, spurious boxes and confidence jitter.
"""

from gatedrec import (
    DetectorScript, EvalConfig, NoiseSpec, ObjectEvent, ScenarioSpec, confusion_matrix, generate_scenario,
    map_report, scripted_detector,
)

spec = ScenarioSpec(30, 5, objects=[
    ObjectEvent("car", 0, 20, (0, 18), (52, 18), (12, 8)),
    ObjectEvent("person", 5, 30, (60, 10), (4, 30), (5, 12)),
])
_, timeline, script = generate_scenario(spec)
gts = {i: [d for d in script.frames.get(i, [])] for i in range(len(timeline))}

noisy = scripted_detector(DetectorScript(script.frames, NoiseSpec(0.1, 0.2, 0.15), seed=1, frame_size=(64, 48)))
preds = {i: noisy(None, i) for i in gts}

cfg = EvalConfig()
print(map_report(preds, gts, cfg).table())
print()
cm = confusion_matrix(preds, gts, cfg)
print(cm.table())
print(f"diagonal fraction {cm.diagonal_fraction():.3f}")
