import math

import numpy as np
import pytest
from scipy.stats import binomtest

from conftest import profile
from tsmot.attention import GridSpec, render_heatmap
from tsmot.core import BoundingBox
from tsmot.simworld import WorldConfig, detect, generate_world, rotation_transform, GtObject


def same_sequence(a, b):
    assert len(a.frames) == len(b.frames)
    for fa, fb in zip(a.frames, b.frames):
        assert [(o.object_id, o.box, o.occluded) for o in fa] == [(o.object_id, o.box, o.occluded) for o in fb]
        for x, y in zip(fa, fb):
            assert np.array_equal(x.embedding, y.embedding)


def test_world_deterministic(small_world_config):
    same_sequence(generate_world(small_world_config), generate_world(small_world_config))


def test_constant_population_without_births_or_deaths(small_world):
    ids = [{o.object_id for o in f} for f in small_world.frames]
    assert all(s == ids[0] for s in ids) and len(ids[0]) == 5


def test_static_world():
    gt = generate_world(WorldConfig(n_objects=6, frames=25, speed_range=(0, 0), accel_std=0,
                                    birth_rate=0, death_rate=0))
    for f in gt.frames[1:]:
        assert [o.box for o in f] == [o.box for o in gt.frames[0]]


def test_boxes_inside_arena_with_stable_embeddings():
    gt = generate_world(WorldConfig(n_objects=10, frames=200, speed_range=(4, 8), seed=1))
    emb = {}
    for f in gt.frames:
        for o in f:
            assert -1e-9 <= o.box.left and o.box.right <= gt.width + 1e-9
            assert -1e-9 <= o.box.top and o.box.bottom <= gt.height + 1e-9
            assert abs(np.linalg.norm(o.embedding) - 1) < 1e-12
            assert np.array_equal(emb.setdefault(o.object_id, o.embedding), o.embedding)


def test_world_config_validation():
    with pytest.raises(ValueError):
        WorldConfig(birth_rate=1.5)
    with pytest.raises(ValueError):
        WorldConfig(width=0)


def test_rotation_is_orthogonal():
    R = rotation_transform(16, math.radians(60), seed=7)
    np.testing.assert_allclose(R @ R.T, np.eye(16), atol=1e-12)


def test_perfect_detector_returns_ground_truth(small_world):
    objs = small_world.frames[0]
    fd = detect(profile(), objs, 0, seed=1, arena=(small_world.width, small_world.height))
    assert [d.rect for d in fd.detections] == [o.box for o in objs]
    for d, o in zip(fd.detections, objs):
        np.testing.assert_array_equal(d.feature, o.embedding)


def test_keep_probability_contract():
    p = profile(base_recall=0.6, occluded_recall=0.2, attention_gain=0.3)
    assert p.keep_probability(False, 1.0) == pytest.approx(0.9)
    assert p.keep_probability(True, 0.0) == pytest.approx(0.2)
    assert profile(base_recall=0.9, occluded_recall=0.5, attention_gain=0.5).keep_probability(False, 1.0) == 1.0


def test_profile_validation():
    with pytest.raises(ValueError):
        profile(base_recall=0.5, occluded_recall=0.6)
    with pytest.raises(ValueError):
        profile(cost_per_frame=0)


def windowed_objects():
    return [GtObject(i, BoundingBox(20 * i, 20, 10, 10), np.eye(8)[i % 8]) for i in range(1, 6)]


def test_zero_gain_ignores_attention():
    objs = windowed_objects()
    p = profile("student", base_recall=0.5, occluded_recall=0.5, clutter_rate=2.0, localization_std=1.5,
                feature_noise=0.1)
    heat = render_heatmap([(o.box.center(), o.box) for o in objs], GridSpec(200, 100, 4))
    for t in range(30):
        a = detect(p, objs, t, seed=4, arena=(200, 100))
        b = detect(p, objs, t, seed=4, arena=(200, 100), attention=heat)
        assert len(a.detections) == len(b.detections)
        for x, y in zip(a.detections, b.detections):
            assert x.rect == y.rect and x.score == y.score and np.array_equal(x.feature, y.feature)


def test_attention_only_flips_threshold_crossings():
    objs = windowed_objects()
    p = profile("student", base_recall=0.4, occluded_recall=0.4, attention_gain=0.4, localization_std=1.0)
    heat = render_heatmap([(o.box.center(), o.box) for o in objs], GridSpec(200, 100, 4))
    for t in range(50):
        plain = {d.rect for d in detect(p, objs, t, seed=2, arena=(200, 100)).detections}
        boosted = {d.rect for d in detect(p, objs, t, seed=2, arena=(200, 100), attention=heat).detections}
        # A draw kept at the lower probability stays kept, with the same box.
        assert plain <= boosted


@pytest.mark.parametrize("attention,occluded", [(0.0, False), (0.5, False), (1.0, True)])
def test_empirical_detection_frequency(attention, occluded):
    p = profile("student", base_recall=0.55, occluded_recall=0.3, attention_gain=0.35)
    o = GtObject(3, BoundingBox(40, 40, 16, 16), np.eye(4)[0], occluded=occluded)
    heat = render_heatmap([((48, 48), BoundingBox(0, 0, 16, 16))], GridSpec(100, 100, 4))
    heat = type(heat)(heat.grid * attention, 4)
    n = 10_000
    hits = sum(len(detect(p, [o], t, seed=13, arena=(100, 100), attention=heat).detections)
               for t in range(n))
    expected = p.keep_probability(occluded, attention)
    assert abs(hits / n - expected) <= 0.02


def test_teacher_detects_at_least_as_many():
    gt = generate_world(WorldConfig(n_objects=8, frames=1000, seed=6))
    t = profile("teacher", base_recall=0.9, occluded_recall=0.8)
    s = profile("student", base_recall=0.7, occluded_recall=0.3)
    arena = (gt.width, gt.height)
    wins = ties = 0
    for k, objs in enumerate(gt.frames):
        nt = len(detect(t, objs, k, seed=0, arena=arena).detections)
        ns = len(detect(s, objs, k, seed=0, arena=arena).detections)
        wins += nt > ns
        ties += nt == ns
    # Sign test: among non-tied frames the teacher should win more than half.
    res = binomtest(wins, 1000 - ties, 0.5, alternative="greater")
    assert res.pvalue < 0.01


def test_clutter_rate_mean():
    p = profile("student", clutter_rate=1.5)
    counts = [len(detect(p, [], t, seed=3, arena=(500, 500)).detections) for t in range(4000)]
    # Poisson mean 1.5, standard error sqrt(1.5 / 4000).
    assert abs(np.mean(counts) - 1.5) < 4 * math.sqrt(1.5 / 4000)
