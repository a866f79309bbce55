import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_pose
from signkit.pose import (
    BadMagic,
    ComponentSpec,
    InvariantViolation,
    PoseBody,
    PoseFormatError,
    PoseHeader,
    PoseSequence,
    TruncatedFile,
    UnknownComponent,
    component_slice,
    find_layout,
    load_layout,
    make_pose,
    parse_pose_file,
    read_pose,
    select_components,
    serialize_pose,
    write_pose,
)


def small_pose():
    frames = [[[0.5, 1.0], [0.0, 0.0], [-2.0, 3.25]], [[1.5, 0.25], [4.0, 8.0], [0.0, 0.0]]]
    conf = [[1.0, 0.0, 0.5], [1.0, 1.0, 0.0]]
    return make_pose([ComponentSpec("HAND", 3, 2, ((0, 1), (1, 2)))], frames, conf, fps=30.0)


def test_small_roundtrip_bit_exact():
    p = small_pose()
    q = parse_pose_file(serialize_pose(p))
    assert q == p
    assert q.body.frames.tobytes() == p.body.frames.tobytes()


def test_golden_bytes():
    expected = (
        b"SPS1" + struct.pack("<HfBB", 1, 30.0, 2, 1)
        + bytes([4]) + b"HAND" + struct.pack("<HH", 3, 2) + struct.pack("<4H", 0, 1, 1, 2)
        + struct.pack("<I", 2)
        + struct.pack("<12f", 0.5, 1.0, 0.0, 0.0, -2.0, 3.25, 1.5, 0.25, 4.0, 8.0, 0.0, 0.0)
        + struct.pack("<6f", 1.0, 0.0, 0.5, 1.0, 1.0, 0.0)
    )
    assert serialize_pose(small_pose()) == expected


def test_serialize_deterministic():
    p = small_pose()
    assert serialize_pose(p) == serialize_pose(p)


def test_bad_magic():
    with pytest.raises(BadMagic):
        parse_pose_file(b"XXXX" + serialize_pose(small_pose())[4:])


def test_short_prefix_of_magic_is_truncation():
    with pytest.raises(TruncatedFile):
        parse_pose_file(b"SP")


def test_trailing_bytes_rejected():
    with pytest.raises(TruncatedFile):
        parse_pose_file(serialize_pose(small_pose()) + b"\x00")


def test_empty_components_rejected_at_construction():
    with pytest.raises(InvariantViolation):
        PoseHeader(fps=25.0, components=())


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(name="", point_count=3),
        dict(name="A", point_count=0),
        dict(name="A", point_count=3, dims=4),
        dict(name="A", point_count=3, limbs=((1, 1),)),
        dict(name="A", point_count=3, limbs=((0, 3),)),
    ],
)
def test_component_invariants(kwargs):
    with pytest.raises(InvariantViolation):
        ComponentSpec(**kwargs)


def test_header_invariants():
    a = ComponentSpec("A", 2)
    with pytest.raises(InvariantViolation):
        PoseHeader(25.0, (a, ComponentSpec("A", 3)))
    with pytest.raises(InvariantViolation):
        PoseHeader(25.0, (a, ComponentSpec("B", 3, dims=3)))
    with pytest.raises(InvariantViolation):
        PoseHeader(0.0, (a,))


def test_body_invariants():
    with pytest.raises(InvariantViolation):
        PoseBody(np.zeros((0, 2, 2)), np.zeros((0, 2)))
    with pytest.raises(InvariantViolation):
        PoseBody(np.zeros((1, 2, 2)), np.full((1, 2), 1.5))
    with pytest.raises(InvariantViolation):
        PoseBody(np.ones((1, 2, 2)), np.zeros((1, 2)))
    with pytest.raises(InvariantViolation):
        PoseBody(np.full((1, 2, 2), np.nan), np.ones((1, 2)))
    with pytest.raises(InvariantViolation):
        make_pose([ComponentSpec("A", 3)], np.zeros((1, 2, 2)))


def test_parse_rejects_confidence_above_one():
    data = bytearray(serialize_pose(small_pose()))
    data[-4:] = struct.pack("<f", 1.5)
    with pytest.raises(InvariantViolation):
        parse_pose_file(bytes(data))


def test_parse_rejects_limb_out_of_range():
    data = bytearray(serialize_pose(small_pose()))
    # second limb (1, 2) -> (1, 9); limbs start after magic+head(12)+len(1)+name(4)+counts(4)
    struct.pack_into("<H", data, 12 + 1 + 4 + 4 + 6, 9)
    with pytest.raises(InvariantViolation):
        parse_pose_file(bytes(data))


def test_holistic_543_total_points(layout543):
    header = layout543.header()
    assert [c.name for c in header.components] == ["FACE", "BODY", "LEFT_HAND", "RIGHT_HAND"]
    p = parse_pose_file(serialize_pose(random_pose(np.random.default_rng(0), header, 2)))
    assert p.header.total_points == 543
    assert find_layout(p.header) is not None


def test_543_payload_size(layout543):
    # fixed head 12; FACE 1+4+4; BODY 1+4+4+32*4; LEFT_HAND 1+9+4+20*4; RIGHT_HAND 1+10+4+20*4; T 4
    header_bytes = 351
    assert layout543.header().dims == 3
    for T in (1, 5):
        p = random_pose(np.random.default_rng(T), layout543.header(), T)
        assert len(serialize_pose(p)) == 4 * T * 543 * (3 + 1) + header_bytes


def test_component_slice(layout543):
    p = random_pose(np.random.default_rng(0), layout543.header(), 1)
    assert component_slice(p, "BODY") == (468, 33)
    assert component_slice(p, "FACE") == (0, 468)
    assert component_slice(p, "RIGHT_HAND") == (522, 21)
    single = small_pose()
    assert component_slice(single, "HAND") == (0, 3)
    with pytest.raises(UnknownComponent):
        component_slice(single, "BODY")


def test_select_543_to_75(layout543, layout75):
    p = random_pose(np.random.default_rng(3), layout543.header(), 4)
    q = select_components(p, ["RIGHT_HAND", "BODY", "LEFT_HAND"])
    assert q.header.total_points == 75
    assert q.header.names == ["BODY", "LEFT_HAND", "RIGHT_HAND"]
    assert q.n_frames == 4
    np.testing.assert_array_equal(q.body.frames, p.body.frames[:, 468:])
    np.testing.assert_array_equal(q.body.confidences, p.body.confidences[:, 468:])
    assert [c.limbs for c in q.header.components] == [c.limbs for c in layout75.components]


def test_select_all_is_identity(layout543):
    p = random_pose(np.random.default_rng(1), layout543.header(), 2)
    assert select_components(p, p.header.names) == p


def test_select_unknown():
    with pytest.raises(UnknownComponent):
        select_components(small_pose(), ["NOSE_RING"])


def test_file_io(tmp_path):
    p = small_pose()
    write_pose(tmp_path / "a.pose", p)
    assert read_pose(tmp_path / "a.pose") == p


def test_immutable():
    p = small_pose()
    with pytest.raises(ValueError):
        p.body.frames[0, 0, 0] = 1.0


def test_layout_files(layout75, layout543):
    assert layout75.header().total_points == 75
    assert sum(len(c.limbs) for c in layout75.components) == 72
    assert layout543.header().total_points == 543
    assert layout75.point_index("BODY", layout75.point_names["BODY"][11]) == 11
    assert load_layout("holistic_75") is layout75


# --------------------------------------------------------------------------- #
# properties


@st.composite
def poses(draw, max_frames=16, max_points=50):
    n_comp = draw(st.integers(1, 4))
    dims = draw(st.sampled_from([2, 3]))
    budget = max_points
    comps = []
    for i in range(n_comp):
        if budget < 1:
            break
        k = draw(st.integers(1, min(budget, 20)))
        budget -= k
        pairs = [(a, b) for a in range(k) for b in range(k) if a != b]
        limbs = draw(st.lists(st.sampled_from(pairs), max_size=6)) if pairs else []
        name = draw(st.text(min_size=1, max_size=8)) + f"#{i}"
        comps.append(ComponentSpec(name, k, dims, tuple(limbs)))
    T = draw(st.integers(1, max_frames))
    seed = draw(st.integers(0, 2**32 - 1))
    fps = draw(st.floats(1.0, 240.0))
    header = PoseHeader(fps=fps, components=tuple(comps))
    return random_pose(np.random.default_rng(seed), header, T)


@given(poses())
def test_roundtrip_property(p):
    data = serialize_pose(p)
    q = parse_pose_file(data)
    assert q == p
    assert q.header == p.header
    assert serialize_pose(q) == data


@given(poses(), st.data())
def test_select_idempotent_and_value_preserving(p, data):
    names = data.draw(st.lists(st.sampled_from(p.header.names), min_size=1, unique=True))
    once = select_components(p, names)
    assert select_components(once, names) == once
    for name in names:
        f0, c0 = p.component_data(name)
        f1, c1 = once.component_data(name)
        np.testing.assert_array_equal(f0, f1)
        np.testing.assert_array_equal(c0, c1)


@given(poses(max_frames=4, max_points=12), st.data())
def test_truncation_always_typed(p, data):
    raw = serialize_pose(p)
    cut = data.draw(st.integers(0, len(raw) - 1))
    with pytest.raises(TruncatedFile):
        parse_pose_file(raw[:cut])


@given(poses(max_frames=4, max_points=12), st.data())
def test_corruption_never_crashes(p, data):
    raw = bytearray(serialize_pose(p))
    for _ in range(data.draw(st.integers(1, 4))):
        i = data.draw(st.integers(0, len(raw) - 1))
        raw[i] = data.draw(st.integers(0, 255))
    try:
        q = parse_pose_file(bytes(raw))
    except PoseFormatError:
        return
    assert isinstance(q, PoseSequence)
