import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parthoe.errors import InvalidInputError
from parthoe.skeleton import (
    FULL,
    JOINT_NAMES,
    LEFT_RIGHT_PAIRS,
    LOWER_JOINTS,
    LOWER_ONLY,
    N_JOINTS,
    UPPER_JOINTS,
    UPPER_ONLY,
    OcclusionMode,
    SampleSet,
    clean_joints,
    gen_dataset,
    generate_samples,
    header_path,
    load_dataset,
    make_heatmaps,
    parse_mix,
    synthesize,
    template_skeleton,
)

J = {name: i for i, name in enumerate(JOINT_NAMES)}


def test_template_symmetry_and_shape():
    t = template_skeleton()
    assert t.shape == (23, 3)
    assert t[J["left_shoulder"], 0] == -t[J["right_shoulder"], 0]
    for l, r in LEFT_RIGHT_PAIRS:
        assert t[l, 0] == -t[r, 0]
        assert np.array_equal(t[l, 1:], t[r, 1:])
    assert t[J["nose"], 2] > t[J["left_hip"], 2]
    assert t[J["left_heel"], 2] == 0.0 and t[J["right_heel"], 2] == 0.0
    assert t[J["left_shoulder"], 2] > t[J["left_hip"], 2] > t[J["left_ankle"], 2]


def test_frontal_view_is_symmetric():
    s = synthesize(0.0, FULL, 0.0, seed=1).skeleton
    ls, rs = s[J["left_shoulder"]], s[J["right_shoulder"]]
    assert ls[0] - 0.5 == pytest.approx(0.5 - rs[0], abs=1e-12)
    assert ls[1] == pytest.approx(rs[1])


def test_side_view_foreshortens_shoulders():
    front = synthesize(0.0, FULL, 0.0, seed=1).skeleton
    side = synthesize(90.0, FULL, 0.0, seed=1).skeleton
    width = lambda s: abs(s[J["left_shoulder"], 0] - s[J["right_shoulder"], 0])
    assert width(side) < width(front)


def test_lower_only_visibility():
    s = synthesize(0.0, LOWER_ONLY, 0.02, seed=3).skeleton
    hidden = ["nose", "left_eye", "right_eye", "left_ear", "right_ear", "left_shoulder", "right_shoulder",
              "left_elbow", "right_elbow", "left_wrist", "right_wrist"]
    for name in hidden:
        assert s[J[name], 2] == 0 and s[J[name], 0] == 0 and s[J[name], 1] == 0
    for name in JOINT_NAMES[11:]:
        assert s[J[name], 2] == 1


def test_visible_counts_partition():
    full = synthesize(10.0, FULL).skeleton[:, 2]
    lower = synthesize(10.0, LOWER_ONLY).skeleton[:, 2]
    upper = synthesize(10.0, UPPER_ONLY).skeleton[:, 2]
    assert full.sum() == N_JOINTS
    assert np.array_equal(lower + upper, full)
    assert set(np.flatnonzero(lower)) == set(LOWER_JOINTS)
    assert set(np.flatnonzero(upper)) == set(UPPER_JOINTS)


@settings(max_examples=50)
@given(st.floats(0, 360, exclude_max=True), st.sampled_from(["full", "lower", "upper", "drop:0.5", "drop:0.95"]),
       st.floats(0, 0.1), st.integers(0, 2 ** 32))
def test_synthesize_is_pure_and_bounded(theta, mode, noise, seed):
    a = synthesize(theta, mode, noise, seed)
    b = synthesize(theta, mode, noise, seed)
    assert np.array_equal(a.skeleton, b.skeleton)
    vis = a.skeleton[:, 2] > 0
    assert vis.any()
    xy = a.skeleton[vis, :2]
    assert xy.min() >= -1e-12 and xy.max() <= 1 + 1e-12
    assert np.all(a.skeleton[~vis] == 0)


@settings(max_examples=50)
@given(st.floats(0, 360, exclude_max=True))
def test_opposite_yaw_swaps_left_right(theta):
    a = synthesize(theta, FULL).skeleton
    b = synthesize(theta + 180.0, FULL).skeleton
    for l, r in LEFT_RIGHT_PAIRS:
        da, db = a[l, 0] - a[r, 0], b[l, 0] - b[r, 0]
        if abs(da) > 1e-6:
            assert np.sign(da) == -np.sign(db)


def test_random_drop_never_hides_everything():
    for seed in range(50):
        s = synthesize(0.0, OcclusionMode("drop", 0.99), 0.0, seed=seed).skeleton
        assert s[:, 2].sum() >= 1


def test_bad_inputs():
    with pytest.raises(InvalidInputError):
        synthesize(0.0, FULL, -0.1)
    with pytest.raises(InvalidInputError):
        OcclusionMode("drop", 1.0)
    with pytest.raises(InvalidInputError):
        OcclusionMode("sideways")
    with pytest.raises(InvalidInputError):
        generate_samples(0)


def test_parse_mix():
    mix = parse_mix("full:0.5,lower:0.5")
    assert mix == [(FULL, 0.5), (LOWER_ONLY, 0.5)]
    assert parse_mix("drop@0.3:2")[0] == (OcclusionMode("drop", 0.3), 2.0)
    assert str(OcclusionMode.parse("drop:0.3")) == "drop:0.3"


def test_gen_dataset_byte_identical(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    gen_dataset(a, 10, [(FULL, 1.0)], 0.02, seed=7)
    gen_dataset(b, 10, [(FULL, 1.0)], 0.02, seed=7)
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 10
    rec = json.loads(a.read_text().splitlines()[0])
    assert set(rec) == {"id", "theta_deg", "mode", "joints"}
    assert len(rec["joints"]) == 23 and all(len(j) == 3 for j in rec["joints"])
    header = json.loads(header_path(a).read_text())
    assert header == {"version": 1, "convention": "0deg-facing-camera-ccw", "noise_sigma": 0.02, "seed": 7}


def test_dataset_roundtrip(tmp_path):
    path = tmp_path / "d.jsonl"
    samples = gen_dataset(path, 25, [(FULL, 1.0), (LOWER_ONLY, 1.0)], 0.03, seed=2)
    loaded = load_dataset(path)
    ref = SampleSet.from_samples(samples)
    assert np.array_equal(loaded.joints, ref.joints)
    assert np.array_equal(loaded.theta_deg, ref.theta_deg)
    assert [str(m) for m in loaded.modes] == [str(m) for m in ref.modes]


def test_mode_mix_fraction():
    # binomial: std of the fraction is 0.005 at n = 10000, so 0.48-0.52 is a 4-sigma band
    samples = generate_samples(10_000, [(FULL, 1.0), (LOWER_ONLY, 1.0)], 0.0, seed=5)
    frac = sum(s.mode == LOWER_ONLY for s in samples) / len(samples)
    assert 0.48 <= frac <= 0.52


def test_gen_dataset_unwritable(tmp_path):
    with pytest.raises(OSError):
        gen_dataset(tmp_path / "missing" / "d.jsonl", 3)


def test_heatmap_single_joint():
    joints = np.zeros((23, 3))
    joints[4] = (0.5, 0.5, 1)
    hm = make_heatmaps(joints, 16, 16, 1.5)
    assert hm.shape == (23, 16, 16)
    assert hm[4, 8, 8] == 1.0
    assert np.unravel_index(np.argmax(hm[4]), hm[4].shape) == (8, 8)
    others = np.delete(hm, 4, axis=0)
    assert not others.any()


def test_heatmap_small_sigma_single_pixel():
    s = synthesize(33.0, LOWER_ONLY, 0.01, seed=4).skeleton
    hm = make_heatmaps(s, 16, 16, 1e-3)
    for j in range(23):
        expected = 1 if s[j, 2] else 0
        assert np.count_nonzero(hm[j]) == expected
        if expected:
            assert hm[j].max() == 1.0


def test_heatmap_golden(golden):
    joints = np.zeros((1, 3))
    joints[0] = (0.25, 0.5, 1)
    hm = make_heatmaps(joints, 16, 16, 2.0)
    np.testing.assert_allclose(hm[0], golden["heatmap_025_05_16_s2"], rtol=1e-12, atol=1e-300)


def test_heatmap_validation():
    with pytest.raises(InvalidInputError):
        make_heatmaps(np.zeros((23, 3)), 3, 16, 1.0)
    with pytest.raises(InvalidInputError):
        make_heatmaps(np.zeros((23, 3)), 16, 16, 0.0)


def test_clean_joints_match_noise_free_full():
    thetas = np.array([0.0, 45.0, 200.0])
    batch = clean_joints(thetas)
    for th, row in zip(thetas, batch):
        np.testing.assert_allclose(row, synthesize(th, FULL, 0.0).skeleton, atol=1e-12)
