import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from signkit.features import (
    Hand,
    _mirror_permutation,
    both_hands_presence,
    dominant_hand,
    frame_features,
    hand_presence,
)
from signkit.pose import PoseSequence, parse_pose_file, select_components, serialize_pose
from signkit.synthetic import (
    OcclusionSpec,
    SignerProfile,
    SynthesisConfig,
    TooFewSigners,
    apply_occlusion,
    generate_dataset,
    occlude_samples,
    signer_disjoint_split,
)
from signkit.models import LabeledSample


@pytest.fixture(scope="module")
def dataset():
    return generate_dataset(SynthesisConfig(classes=4, samples_per_class=6, signers=3, seed=1))


def test_dataset_size_and_determinism(dataset):
    again = generate_dataset(SynthesisConfig(classes=4, samples_per_class=6, signers=3, seed=1))
    assert len(dataset) == 24
    assert [serialize_pose(s.pose) for s in dataset] == [serialize_pose(s.pose) for s in again]
    assert [(s.sample_id, s.label, s.signer_id) for s in dataset] == \
        [(s.sample_id, s.label, s.signer_id) for s in again]
    other = generate_dataset(SynthesisConfig(classes=4, samples_per_class=6, signers=3, seed=2))
    assert serialize_pose(other[0].pose) != serialize_pose(dataset[0].pose)


def test_default_dataset_size():
    cfg = SynthesisConfig()
    assert (cfg.classes, cfg.samples_per_class, cfg.signers) == (10, 50, 6)


def test_generated_samples_are_valid(dataset):
    for s in dataset:
        assert s.pose.header.total_points == 75
        assert parse_pose_file(serialize_pose(s.pose)) == s.pose
        assert 0 <= s.label < 4


def test_config_invariants():
    with pytest.raises(ValueError):
        SynthesisConfig(classes=1)
    with pytest.raises(ValueError):
        SynthesisConfig(signers=1)
    with pytest.raises(ValueError):
        SignerProfile("a", scale=1.3)
    with pytest.raises(ValueError):
        SignerProfile("a", speed=0.5)
    with pytest.raises(ValueError):
        SignerProfile("a", noise_sd=-0.1)
    with pytest.raises(ValueError):
        OcclusionSpec(fraction=1.5)


def _clean(handedness=Hand.RIGHT):
    return [SignerProfile("s0", handedness=handedness), SignerProfile("s1", handedness=handedness)]


def _clean_data(classes=10, frames=(16, 16), n=4):
    return generate_dataset(SynthesisConfig(classes=classes, samples_per_class=n, signers=_clean(),
                                            frames=frames, seed=0))


def test_classes_are_separable_without_noise():
    data = _clean_data()
    by_class = {s.label: frame_features(s.pose).values for s in data if s.signer_id == "s0"}
    for a in range(10):
        for b in range(a + 1, 10):
            diff = np.abs(by_class[a] - by_class[b]) > 1e-3
            assert diff.mean() >= 0.10, (a, b)


def test_noise_free_class_samples_identical():
    data = _clean_data(classes=3, n=4)
    for k in range(3):
        poses = [serialize_pose(s.pose) for s in data if s.label == k]
        assert len(set(poses)) == 1


def test_left_handed_signers_mirror():
    right = generate_dataset(SynthesisConfig(2, 2, _clean(Hand.RIGHT), (10, 10), 0))
    left = generate_dataset(SynthesisConfig(2, 2, _clean(Hand.LEFT), (10, 10), 0))
    assert dominant_hand(right[0].pose) is Hand.RIGHT
    assert dominant_hand(left[0].pose) is Hand.LEFT
    # mirrored about the image centre line of the signer
    r = np.asarray(right[0].pose.body.frames)
    lf = np.asarray(left[0].pose.body.frames)
    np.testing.assert_allclose(r[..., 1], lf[..., 1][:, _mirror_permutation(right[0].pose.header, None)], atol=1e-6)


# --------------------------------------------------------------------------- #
# occlusion


def test_fraction_zero_identity(dataset):
    p = dataset[0].pose
    assert apply_occlusion(p, OcclusionSpec(fraction=0.0)) is p


@pytest.mark.parametrize("mode", ["random-drop", "hand-face", "hands-interaction"])
def test_fraction_one_removes_dominant_hand(dataset, mode):
    for s in dataset[:6]:
        dom = dominant_hand(s.pose)
        q = apply_occlusion(s.pose, OcclusionSpec(mode=mode, fraction=1.0))
        assert hand_presence(q, dom) == 0.0
        assert hand_presence(q, dom.other) == hand_presence(s.pose, dom.other)


def test_target_both():
    p = _clean_data(classes=2, n=2)[0].pose
    q = apply_occlusion(p, OcclusionSpec(target="both", fraction=1.0))
    assert hand_presence(q, Hand.LEFT) == hand_presence(q, Hand.RIGHT) == 0.0


def test_half_of_hundred_frames():
    p = _clean_data(classes=2, frames=(100, 100), n=2)[0].pose
    assert p.n_frames == 100
    for seed in range(5):
        q = apply_occlusion(p, OcclusionSpec(fraction=0.5, seed=seed))
        assert hand_presence(q, Hand.RIGHT) == 0.5


def test_both_hands_presence_variants():
    p = _clean_data(classes=2, frames=(100, 100), n=2)[0].pose
    q = apply_occlusion(p, OcclusionSpec(fraction=0.3, seed=1))
    assert both_hands_presence(q) == 0.7
    assert both_hands_presence(q, "any") == 1.0
    q = apply_occlusion(p, OcclusionSpec(fraction=0.3, seed=1, target="both"))
    assert both_hands_presence(q, "any") == 0.7
    with pytest.raises(ValueError):
        both_hands_presence(q, "left")


def test_occlusion_is_seeded(dataset):
    p = dataset[1].pose
    a = apply_occlusion(p, OcclusionSpec(fraction=0.4, seed=3))
    b = apply_occlusion(p, OcclusionSpec(fraction=0.4, seed=3))
    assert serialize_pose(a) == serialize_pose(b)


def test_hand_face_prefers_frames_near_nose():
    p = _clean_data(classes=2, frames=(40, 40), n=2)[0].pose
    q = apply_occlusion(p, OcclusionSpec(mode="hand-face", fraction=0.25))
    start = p.header.offset("BODY")
    hand = p.header.offset("RIGHT_HAND")
    frames = np.asarray(p.body.frames)
    dist = np.hypot(*(frames[:, hand, :2] - frames[:, start, :2]).T)
    dropped = np.asarray(q.body.confidences)[:, hand] == 0
    assert dropped.sum() == 10
    assert dist[dropped].max() <= dist[~dropped].min()


@given(st.integers(0, 10**6), st.floats(0, 1), st.sampled_from(["random-drop", "hand-face", "hands-interaction"]),
       st.sampled_from(["dominant", "both"]))
def test_occlusion_only_zeroes(seed, fraction, mode, target):
    p = _PROPERTY_POSES[seed % len(_PROPERTY_POSES)]
    q = apply_occlusion(p, OcclusionSpec(mode=mode, target=target, fraction=fraction, seed=seed))
    f0, c0 = np.asarray(p.body.frames), np.asarray(p.body.confidences)
    f1, c1 = np.asarray(q.body.frames), np.asarray(q.body.confidences)
    changed = c1 != c0
    assert np.all(c1[changed] == 0)
    assert np.all((f1 == f0) | (f1 == 0))
    np.testing.assert_array_equal(f1[c1 > 0], f0[c1 > 0])
    assert isinstance(q, PoseSequence)


_PROPERTY_POSES = [s.pose for s in generate_dataset(SynthesisConfig(3, 2, 2, (8, 14), 5))]


@given(st.integers(0, 10**6), st.floats(0, 1), st.sampled_from(["dominant", "both"]),
       st.sampled_from([["LEFT_HAND", "RIGHT_HAND"], ["BODY", "RIGHT_HAND", "LEFT_HAND"]]))
def test_occlusion_commutes_with_selection(seed, fraction, target, keep):
    p = _PROPERTY_POSES[seed % len(_PROPERTY_POSES)]
    spec = OcclusionSpec(fraction=fraction, seed=seed, target=target)
    a = select_components(apply_occlusion(p, spec), keep)
    b = apply_occlusion(select_components(p, keep), spec)
    assert a == b


def test_occlude_samples_independent_of_order(dataset):
    spec = OcclusionSpec(fraction=0.5, seed=4)
    fwd = {s.sample_id: serialize_pose(s.pose) for s in occlude_samples(dataset, spec)}
    rev = {s.sample_id: serialize_pose(s.pose) for s in occlude_samples(dataset[::-1], spec)}
    assert fwd == rev


# --------------------------------------------------------------------------- #
# splits


def _samples(signer_sizes):
    p = _PROPERTY_POSES[0]
    out = []
    for i, n in enumerate(signer_sizes):
        out += [LabeledSample(f"s{i}_{j}", p, j % 2, f"signer{i}") for j in range(n)]
    return out


def test_two_signers_half():
    tr, va = signer_disjoint_split(_samples([5, 5]), 0.5, 0)
    assert len({s.signer_id for s in tr}) == 1 and len({s.signer_id for s in va}) == 1


def test_five_equal_signers():
    for seed in range(10):
        tr, va = signer_disjoint_split(_samples([10] * 5), 0.8, seed)
        assert len({s.signer_id for s in tr}) == 4
        assert len({s.signer_id for s in va}) == 1


def test_too_few_signers():
    with pytest.raises(TooFewSigners):
        signer_disjoint_split(_samples([6]), 0.8, 0)
    with pytest.raises(ValueError):
        signer_disjoint_split(_samples([3, 3]), 1.0, 0)


@given(st.lists(st.integers(1, 20), min_size=2, max_size=8), st.floats(0.05, 0.95), st.integers(0, 1000))
def test_split_is_disjoint_and_complete(sizes, fraction, seed):
    samples = _samples(sizes)
    tr, va = signer_disjoint_split(samples, fraction, seed)
    assert not ({s.signer_id for s in tr} & {s.signer_id for s in va})
    assert tr and va
    assert sorted(s.sample_id for s in tr + va) == sorted(s.sample_id for s in samples)


def test_default_dataset_split_is_five_to_one():
    data = generate_dataset(SynthesisConfig())
    tr, va = signer_disjoint_split(data, 0.8, 0)
    assert len({s.signer_id for s in tr}) == 5
    assert len({s.signer_id for s in va}) == 1
