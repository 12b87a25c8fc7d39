"""Acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line; the lines are repeated in the
pytest terminal summary. Run this file directly to see them without pytest.
"""

import itertools
import time
from fractions import Fraction

import numpy as np

from gatedrec.cli import main
from gatedrec.detect import CAR, PERSON, BBox, Detection, DetectorScript, nms, scripted_detector
from gatedrec.evaluation import (
    EvalConfig, Interpolation, ap_from_curve, average_precision, map_report, match_detections, pr_curve,
    precision_recall, timing_report,
)
from gatedrec.frames import from_arrays
from gatedrec.motion import MotionConfig, detect_motion, frame_diff
from gatedrec.recorder import Mode, RecorderConfig, StageTimer, replay, run_modes, run_pipeline
from gatedrec.storage import BitrateModel, compare_modes, estimate_bytes
from gatedrec.synth import (
    ObjectEvent, ScenarioSpec, Wind, desk_scale_scenario, generate_scenario, random_timeline, save_scenario,
    timeline_oracle,
)

from oracles import box_iou, exhaustive_match, integrate_envelope

RESULTS = []


def report(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_criterion_01_oracle_equivalence():
    rng = np.random.default_rng(20240601)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(0, 2001))
        fps = int(rng.choice([1, 10, 30]))
        grace = int(rng.choice([0, 1, 5, 20]))
        m, o = random_timeline(rng, n, float(rng.uniform(0.02, 0.9)), float(rng.uniform(0.0, 0.6)))
        for mode in (Mode.HYBRID, Mode.MOTION_ONLY):
            got = replay(m, o, RecorderConfig(grace, mode, fps)).recorded_indices()
            mismatches += got != timeline_oracle(m, o, fps, grace, mode)
    dt = time.perf_counter() - t0
    report(1, mismatches == 0 and dt < 30, f"1000 timelines x 2 modes, {mismatches} mismatches, {dt:.1f} s (limit 30 s)")


def test_criterion_02_grace_boundary():
    got = {}
    for fps, n in ((1, 100), (30, 1000)):
        motion = [True] + [False] * (n - 1)
        objects = [True] + [False] * (n - 1)
        got[fps] = sorted(replay(motion, objects, RecorderConfig(20, Mode.HYBRID, fps)).recorded_indices())
    # same example through frames, motion detection and the scripted detector
    frames = [np.full((8, 8), 50, np.uint8) for _ in range(40)]
    frames[0] = frames[0].copy()
    frames[0][2:6, 2:6] = 200
    det = scripted_detector(DetectorScript({0: [Detection(CAR, 0.9, BBox(2, 2, 4, 4))]}))
    log = run_pipeline(from_arrays(frames, fps=1), MotionConfig(), det, RecorderConfig(20, Mode.HYBRID, 1),
                       reference=np.full((8, 8), 50, np.uint8))
    ok = (got[1] == list(range(20)) and got[30] == list(range(600))
          and sorted(log.recorded_indices()) == list(range(20)))
    report(2, ok, f"fps 1 -> {len(got[1])} frames (0..{got[1][-1]}), fps 30 -> {len(got[30])} frames "
                  f"(0..{got[30][-1]}), pipeline fps 1 -> {log.recorded_frame_count} frames")


def _random_scenario(rng):
    dur = int(rng.integers(5, 25))
    objs = []
    for _ in range(int(rng.integers(0, 4))):
        t0 = int(rng.integers(0, dur - 1))
        objs.append(ObjectEvent(str(rng.choice(["car", "person"])), t0, int(rng.integers(t0 + 1, dur + 1)),
                                tuple(rng.integers(0, 60, 2).tolist()), tuple(rng.integers(0, 60, 2).tolist()),
                                (int(rng.integers(4, 14)), int(rng.integers(4, 14)))))
    a = int(rng.integers(0, dur))
    wind = Wind(bool(rng.random() < 0.5), int(rng.integers(5, 60)), [(a, int(rng.integers(a + 1, dur + 1)))])
    return ScenarioSpec(dur, int(rng.choice([1, 5, 10])), 64, 48, objs, wind, seed=int(rng.integers(0, 1000)))


def test_criterion_03_mode_subset():
    rng = np.random.default_rng(3)
    bad = 0
    n_scen = 60
    for _ in range(n_scen):
        spec = _random_scenario(rng)
        stream, _, script = generate_scenario(spec)
        grace = int(rng.choice([0, 1, 5, 20]))
        logs = run_modes(stream, MotionConfig(), scripted_detector(script),
                         [RecorderConfig(grace, m, spec.fps) for m in (Mode.HYBRID, Mode.MOTION_ONLY, Mode.CONTINUOUS)])
        h, mo, c = (lg.recorded_indices() for lg in logs)
        bad += not (h <= mo <= c)
    for _ in range(500):
        n = int(rng.integers(0, 500))
        fps, grace = int(rng.choice([1, 10, 30])), int(rng.choice([0, 1, 5, 20]))
        m, o = random_timeline(rng, n, float(rng.random()), float(rng.random()))
        h, mo, c = (replay(m, o, RecorderConfig(grace, md, fps)).recorded_indices()
                    for md in (Mode.HYBRID, Mode.MOTION_ONLY, Mode.CONTINUOUS))
        bad += not (h <= mo <= c)
    report(3, bad == 0, f"{n_scen} rendered scenarios + 500 timelines, {bad} violations of hybrid <= motion-only <= continuous")


def test_criterion_04_desk_scale():
    spec = desk_scale_scenario()
    stream, tl, script = generate_scenario(spec)
    modes = (Mode.HYBRID, Mode.MOTION_ONLY, Mode.CONTINUOUS)
    logs = dict(zip(modes, run_modes(stream, MotionConfig(), scripted_detector(script),
                                     [RecorderConfig(20, m, spec.fps) for m in modes], keep_trace=True)))
    rep = compare_modes(logs, spec.fps)
    # the oracle replays the motion flags the recorder actually saw; the rendered
    # ground truth differs only on wind-onset frames, where one-sided noise can stay
    # under the area threshold
    seen = [d.motion for d in logs[Mode.HYBRID].trace]
    present = tl.objects_present()
    oracle_ok = all(logs[m].recorded_indices() == timeline_oracle(seen, present, spec.fps, 20, m) for m in modes)
    truth = {m: timeline_oracle(tl.motion_expected, present, spec.fps, 20, m) for m in modes}
    hybrid_truth_ok = logs[Mode.HYBRID].recorded_indices() == truth[Mode.HYBRID]
    motion_gap = len(logs[Mode.MOTION_ONLY].recorded_indices() ^ truth[Mode.MOTION_ONLY])
    secs = {m: rep.modes[m].recorded_seconds for m in modes}
    ratio = secs[Mode.MOTION_ONLY] / secs[Mode.HYBRID]
    cut = rep.bytes_reduction[(Mode.HYBRID, Mode.CONTINUOUS)]
    wind_frac, obj_frac = tl.wind_active.mean(), tl.objects_present().mean()
    ok = ratio >= Fraction(5, 2) and cut >= Fraction(3, 5) and oracle_ok and hybrid_truth_ok
    report(4, ok, f"wind {wind_frac:.0%}, objects {obj_frac:.0%}; motion-only/hybrid {float(ratio):.2f} (>= 2.5), "
                  f"hybrid storage cut {float(cut):.1%} (>= 60%), all modes equal oracle: {oracle_ok}, "
                  f"hybrid equals ground-truth oracle: {hybrid_truth_ok}, motion-only differs from it on {motion_gap} frames")


def test_criterion_05_storage():
    exact = estimate_bytes(825, BitrateModel(7703))
    rng = np.random.default_rng(5)
    lin_bad = 0
    for _ in range(1000):
        a = Fraction(int(rng.integers(0, 10**7)), int(rng.integers(1, 1000)))
        b = Fraction(int(rng.integers(0, 10**7)), int(rng.integers(1, 1000)))
        m = BitrateModel(int(rng.integers(1, 50_000)))
        lin_bad += estimate_bytes(a + b, m) != estimate_bytes(a, m) + estimate_bytes(b, m)
    gap = (exact / 10**6 - 769) / 769
    report(5, exact == 794_371_875 and lin_bad == 0,
           f"825 s @ 7703 kbps = {exact} bytes (gap to reported 769 MB {float(gap):+.1%}), "
           f"linearity failures {lin_bad}/1000")


def _rand_box(rng):
    return BBox(int(rng.integers(0, 12)), int(rng.integers(0, 12)), int(rng.integers(2, 9)), int(rng.integers(2, 9)))


def _rand_det(rng, confs=(0.2, 0.4, 0.6, 0.8)):
    return Detection(int(rng.choice([CAR, PERSON])), float(rng.choice(confs)), _rand_box(rng))


def test_criterion_06_metrics():
    rng = np.random.default_rng(6)
    # (a) greedy matcher vs exhaustive search
    a_bad = 0
    for _ in range(500):
        preds = [_rand_det(rng) for _ in range(int(rng.integers(0, 7)))]
        gts = [_rand_det(rng) for _ in range(int(rng.integers(0, 5)))]
        thr = float(rng.choice([0.1, 0.3, 0.5]))
        a_bad += match_detections(preds, gts, thr).gt_index.tolist() != exhaustive_match(preds, gts, thr)
    # (b) hand-computed AP: TP at 0.9, FP at 0.8, TP at 0.7 over 2 GT -> 0.5*1 + 0.5*(2/3) = 5/6
    preds = [Detection(CAR, 0.9, BBox(0, 0, 10, 10)), Detection(CAR, 0.8, BBox(100, 0, 10, 10)),
             Detection(CAR, 0.7, BBox(30, 0, 10, 10))]
    gts = [Detection(CAR, 1.0, BBox(0, 0, 10, 10)), Detection(CAR, 1.0, BBox(30, 0, 10, 10))]
    ap = average_precision(preds, gts, 0.5, Interpolation.ALL_POINT)
    b_ok = abs(ap - 5 / 6) <= 1e-9 and abs(ap - integrate_envelope([1, 0, 1], 2)) <= 1e-9
    # (c) Grid101 vs AllPoint
    worst = 0.0
    for _ in range(200):
        k = int(rng.integers(1, 30))
        labels = rng.random(k) < rng.random()
        n_gt = int(labels.sum() + rng.integers(0, 5)) or 1
        rec, prec = pr_curve(labels, rng.random(k), n_gt)
        worst = max(worst, abs(ap_from_curve(rec, prec, Interpolation.GRID101) - ap_from_curve(rec, prec)))
    # (d) perfect predictions
    gt_set = {i: [Detection(CAR, 1.0, BBox(3 * i, 0, 10, 10)), Detection(PERSON, 1.0, BBox(0, 30, 5, 12))]
              for i in range(20)}
    pr_set = {i: [Detection(d.class_id, 1.0, d.bbox) for d in v] for i, v in gt_set.items()}
    rep = map_report(pr_set, gt_set, EvalConfig())
    d_ok = all((m.precision, m.recall, m.map50, m.map50_95) == (1.0, 1.0, 1.0, 1.0)
               for m in (*rep.per_class.values(), rep.overall))
    # (e) 87 TP / 13 FP
    p, _ = precision_recall([True] * 87 + [False] * 13, [0.9] * 100, 100)
    e_ok = round(p, 3) == 0.870 and p == 0.87
    ok = a_bad == 0 and b_ok and worst <= 0.01 and d_ok and e_ok
    report(6, ok, f"(a) matcher mismatches {a_bad}/500; (b) AP {ap:.10f} vs 5/6; (c) max |grid101 - allpoint| "
                  f"{worst:.4f} (<= 0.01); (d) perfect set all 1.0: {d_ok}; (e) precision {p:.3f}")


def test_criterion_07_nms():
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(1000):
        dets = [_rand_det(rng, tuple(np.round(np.linspace(0.05, 1, 20), 2))) for _ in range(int(rng.integers(0, 15)))]
        thr = float(rng.uniform(0, 1))
        cap = int(rng.integers(1, 12))
        out = nms(dets, thr, cap)
        ids = [id(d) for d in out]
        subset = all(any(d is x for x in dets) for d in out) and len(set(ids)) == len(ids)
        idem = nms(out, thr, cap) == out
        spaced = all(box_iou(a.bbox, b.bbox) <= thr for a, b in itertools.combinations(out, 2) if a.class_id == b.class_id)
        bad += not (subset and idem and spaced and len(out) <= cap)
    report(7, bad == 0, f"1000 random sets: subset, idempotence, same-class IoU <= threshold, cap; {bad} failures")


def test_criterion_08_motion():
    rng = np.random.default_rng(8)
    bad = 0
    for _ in range(1000):
        a = rng.integers(0, 256, (64, 64), dtype=np.uint8)
        b = a.copy()
        k = int(rng.integers(0, 4096))
        idx = rng.choice(4096, k, replace=False)
        b.flat[idx] = rng.integers(0, 256, k, dtype=np.uint8)
        t = int(rng.integers(0, 255))
        blur = int(rng.integers(0, 3))
        m1, f1 = frame_diff(a, b, t, blur)
        m2, f2 = frame_diff(b, a, t, blur)
        _, f_hi = frame_diff(a, b, min(255, t + int(rng.integers(1, 40))), blur)
        _, f_same = frame_diff(a, a.copy(), t, blur)
        r = detect_motion(a, b, MotionConfig(t, float(rng.random()), blur))
        ok = (np.array_equal(m1, m2) and f1 == f2 and f_hi <= f1 and f_same == 0.0
              and 0.0 <= f1 <= 1.0 and r.changed_fraction == f1)
        bad += not ok
    report(8, bad == 0, f"1000 pairs at 64x64: symmetry, threshold monotonicity, zero on identical, bounds; {bad} failures")


def test_criterion_09_timing():
    spec = ScenarioSpec(10, 5, objects=[ObjectEvent("car", 1, 8, (0, 10), (50, 10), (10, 6))])
    stream, _, script = generate_scenario(spec)
    timer = StageTimer()
    run_pipeline(stream, MotionConfig(), scripted_detector(script), RecorderConfig(20, Mode.HYBRID, spec.fps), timer=timer)
    rep = timing_report(timer.samples)
    text = rep.table()
    labels = ("Pre-processing Time", "Inference Time", "Non-Maximum Suppression (NMS) Time")
    ok = all(lbl in text for lbl in labels) and all(s.count > 0 and s.mean_ms >= 0 for s in rep.stages.values())
    report(9, ok, "timing table lists " + ", ".join(f"{lbl!r}" for lbl in labels)
           + f" with {', '.join(str(s.count) for s in rep.stages.values())} samples")


def test_criterion_10_determinism(tmp_path):
    spec = ScenarioSpec(60, 10, objects=[ObjectEvent("car", 10, 30, (0, 18), (52, 18), (12, 8))],
                        wind=Wind(True, 40, [(0, 30)]), seed=11)
    sc = tmp_path / "scenario.json"
    save_scenario(sc, spec)
    out = tmp_path / "out"
    snaps = []
    for _ in range(2):
        assert main(["simulate", "--scenario", str(sc), "--seed", "11", "--out", str(out)]) == 0
        snaps.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    ok = snaps[0] == snaps[1] and len(snaps[0]) > 0
    report(10, ok, f"simulate twice with seed 11: {len(snaps[0])} report files byte-identical: {ok}")


if __name__ == "__main__":
    import pathlib
    import tempfile

    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(pathlib.Path(d))
                else:
                    fn()
            except AssertionError:
                pass
