from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gatedrec.detect import CAR, PERSON
from gatedrec.frames import to_luma
from gatedrec.motion import MotionConfig, MotionDetector, frame_diff
from gatedrec.recorder import Mode, RecorderConfig, replay
from gatedrec.synth import (
    ObjectEvent, ScenarioSpec, Wind, generate_scenario, load_scenario, object_box, random_timeline, save_scenario,
    timeline_oracle,
)

from oracles import replay_decisions


def _motion_flags(stream, cfg=MotionConfig()):
    det = MotionDetector(cfg)
    return np.array([det(to_luma(f).y).motion for f in stream])


def test_static_scene_has_no_expected_motion():
    stream, tl, script = generate_scenario(ScenarioSpec(10, 5))
    assert not tl.motion_expected.any() and not tl.objects_present().any()
    assert script.frames == {}
    assert not _motion_flags(stream).any()


def test_car_pass_script_indices():
    spec = ScenarioSpec(20, 1, objects=[ObjectEvent("car", 0, 10, (0, 10), (40, 10), (10, 6))])
    _, tl, script = generate_scenario(spec)
    assert sorted(script.frames) == list(range(10))
    assert all(d.class_id == CAR and d.confidence == 1.0 for ds in script.frames.values() for d in ds)
    assert tl.objects_present().tolist() == [True] * 10 + [False] * 10


def test_wind_fires_motion_on_most_frames():
    spec = ScenarioSpec(60, 10, wind=Wind(True, 40, [(0, 60)]), seed=2)
    stream, tl, _ = generate_scenario(spec)
    flags = _motion_flags(stream)
    assert tl.wind_active.all()
    # the first frame can never report motion
    assert flags[1:].mean() > 0.95


def test_wind_without_objects_keeps_hybrid_idle():
    spec = ScenarioSpec(30, 5, wind=Wind(True, 40, [(0, 30)]))
    _, tl, _ = generate_scenario(spec)
    assert timeline_oracle(tl.motion_expected, tl.objects_present(), 5, 20, "hybrid") == set()


def test_generation_is_deterministic():
    spec = ScenarioSpec(8, 10, objects=[ObjectEvent("person", 1, 6, (3, 3), (50, 30), (5, 12))],
                        wind=Wind(True, 30, [(2, 5)]), channels=3, seed=9)
    s1, t1, c1 = generate_scenario(spec)
    s2, t2, c2 = generate_scenario(ScenarioSpec.from_dict(spec.to_dict()))
    for a, b in zip(s1, s2):
        assert np.array_equal(a.pixels, b.pixels) and a.timestamp == b.timestamp
    # the stream is re-iterable and yields the same frames again
    assert all(np.array_equal(a.pixels, b.pixels) for a, b in zip(s1, s1))
    assert np.array_equal(t1.motion_expected, t2.motion_expected) and c1.frames == c2.frames


def test_scenario_file_round_trip(tmp_path):
    spec = ScenarioSpec(Fraction(33, 2), Fraction(30000, 1001), objects=[ObjectEvent(PERSON, "1/3", 5, (0, 0), (9, 9), (4, 4))])
    p = tmp_path / "s.json"
    save_scenario(p, spec)
    back = load_scenario(p)
    assert back.to_dict() == spec.to_dict()
    assert back.frame_count == spec.frame_count


@pytest.mark.parametrize("kwargs", [
    dict(fps=0),
    dict(duration_seconds=-1),
    dict(width=0),
    dict(channels=2),
    dict(objects=[ObjectEvent("car", 5, 5, (0, 0), (0, 0), (4, 4))]),
    dict(objects=[ObjectEvent("car", 0, 100, (0, 0), (0, 0), (4, 4))]),
    dict(objects=[ObjectEvent("car", 0, 5, (0, 0), (0, 0), (100, 4))]),
    dict(wind=Wind(True, 300, [(0, 1)])),
])
def test_invalid_scenarios(kwargs):
    with pytest.raises(ValueError):
        generate_scenario(ScenarioSpec(**{"duration_seconds": 10, "fps": 5, **kwargs}))


def test_object_box_rounds_and_clamps():
    ev = ObjectEvent("car", 0, 10, (-5, 0), (100, 0), (10, 5))
    assert object_box(ev, Fraction(0), 64, 48).x == 0
    assert object_box(ev, Fraction(9), 64, 48).x == 54
    assert object_box(ev, Fraction(10), 64, 48) is None
    half = ObjectEvent("car", 0, 2, (0, 0), (1, 0), (2, 2))
    assert object_box(half, Fraction(1), 64, 48).x == 1  # 0.5 rounds up


def test_oracle_examples():
    motion = [False, True, True, False, False, False, True]
    objects = [False, True, False, False, False, False, False]
    assert timeline_oracle(motion, objects, 1, 2, "hybrid") == {1, 2}
    assert timeline_oracle(motion, objects, 1, 0, "hybrid") == {1}
    assert timeline_oracle(motion, objects, 1, 1, "motion_only") == {1, 2, 6}
    assert timeline_oracle(motion, objects, 1, 2, Mode.CONTINUOUS) == set(range(7))
    # an object seen without motion never counts
    assert timeline_oracle([False] * 3, [True] * 3, 1, 20, "hybrid") == set()
    with pytest.raises(ValueError):
        timeline_oracle([True], [True, False], 1, 1, "hybrid")
    with pytest.raises(ValueError):
        timeline_oracle([True], [True], 1, 1, "sometimes")


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 150), st.sampled_from([1, 10, 30, Fraction(30000, 1001)]),
       st.sampled_from([0, 1, Fraction(3, 2), 20]), st.integers(0, 2**31))
def test_oracle_agrees_with_pseudocode(n, fps, grace, seed):
    rng = np.random.default_rng(seed)
    m, o = random_timeline(rng, n, 0.5, 0.3)
    for mode in ("hybrid", "motion_only", "continuous"):
        want = {i for i, w in enumerate(replay_decisions(m, o, fps, grace, mode)) if w}
        assert timeline_oracle(m, o, fps, grace, mode) == want
        assert replay(m, o, RecorderConfig(grace, Mode(mode), fps)).recorded_indices() == want


def test_random_timeline_density():
    rng = np.random.default_rng(1)
    m, o = random_timeline(rng, 200_000, 0.3, 0.05)
    assert m.mean() == pytest.approx(0.3, abs=0.02)
    assert o.mean() == pytest.approx(0.05, abs=0.01)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 3))
def test_noise_free_motion_matches_expectation(seed, n_objects):
    rng = np.random.default_rng(seed)
    objects = []
    for _ in range(n_objects):
        t0 = int(rng.integers(0, 8))
        objects.append(ObjectEvent(
            str(rng.choice(["car", "person"])), t0, t0 + int(rng.integers(1, 5)),
            tuple(rng.integers(0, 50, 2).tolist()), tuple(rng.integers(0, 50, 2).tolist()),
            (int(rng.integers(6, 14)), int(rng.integers(6, 14))),
        ))
    spec = ScenarioSpec(12, 4, objects=objects, seed=seed)
    stream, tl, _ = generate_scenario(spec)
    frames = [f.pixels[:, :, 0] for f in stream]
    for i in range(1, len(frames)):
        _, frac = frame_diff(frames[i - 1], frames[i], 25, 1)
        if not tl.motion_expected[i]:
            assert frac == 0.0
    # any actually-changed frame must be flagged
    changed = [i for i in range(1, len(frames)) if not np.array_equal(frames[i - 1], frames[i])]
    assert all(tl.motion_expected[i] for i in changed)


def test_timeline_save(tmp_path):
    from gatedrec.detect import read_detections_jsonl

    spec = ScenarioSpec(3, 2, objects=[ObjectEvent("car", 0, 1, (0, 0), (5, 5), (4, 4))])
    _, tl, _ = generate_scenario(spec)
    p = tmp_path / "gt.jsonl"
    tl.save(p)
    rows = read_detections_jsonl(p)
    assert len(rows) == 6
