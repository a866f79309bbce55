"""Per-frame features from pose sequences.

Normalization, horizontal flip, limb angle/length features, multi-source
concatenation and hand-presence statistics. ``PoseFeaturizer`` wraps the
whole chain as a scikit-learn transformer.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .pose import (
    PoseHeader,
    PoseSequence,
    UnknownComponent,
    component_slice,
    find_layout,
    select_components,
)

HAND_COMPONENTS = ("LEFT_HAND", "RIGHT_HAND")
DEFAULT_COMPONENTS = ("BODY", "LEFT_HAND", "RIGHT_HAND")
WRIST = 0


class MissingMirrorTable(ValueError):
    pass


class DegenerateAnchors(ValueError):
    pass


class IncompatibleLengths(ValueError):
    pass


class Hand(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"

    @property
    def component(self) -> str:
        return "LEFT_HAND" if self is Hand.LEFT else "RIGHT_HAND"

    @property
    def other(self) -> "Hand":
        return Hand.RIGHT if self is Hand.LEFT else Hand.LEFT


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature matrix contains NaN or Inf")
        names = tuple(self.feature_names) or tuple(f"f{i}" for i in range(v.shape[1]))
        if len(names) != v.shape[1]:
            raise ValueError(f"{len(names)} feature names for {v.shape[1]} columns")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "feature_names", names)

    @property
    def shape(self):
        return self.values.shape

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return self.feature_names == other.feature_names and np.array_equal(self.values, other.values)


@dataclass(frozen=True)
class NormalizationSpec:
    """Similarity normalization anchored on two keypoints (default: the shoulders)."""

    anchor_a: tuple[str, int] = ("BODY", 11)
    anchor_b: tuple[str, int] = ("BODY", 12)
    target_distance: float = 1.0

    def __post_init__(self):
        if tuple(self.anchor_a) == tuple(self.anchor_b):
            raise ValueError("normalization anchors must differ")
        if not self.target_distance > 0:
            raise ValueError("target_distance must be positive")


def _global_index(header: PoseHeader, anchor) -> int:
    comp, idx = anchor
    start, n = component_slice(header, comp)
    if not 0 <= idx < n:
        raise IndexError(f"{comp} has {n} points, anchor index {idx}")
    return start + idx


def normalize_pose(p: PoseSequence, spec: NormalizationSpec = NormalizationSpec()) -> PoseSequence:
    """Center each frame on the anchor midpoint and scale the anchor distance.

    Frames where an anchor is missing (or the anchors coincide) reuse the last
    valid frame's transform, or the identity before the first valid frame.
    """
    ia = _global_index(p.header, spec.anchor_a)
    ib = _global_index(p.header, spec.anchor_b)
    frames = p.body.frames
    conf = p.body.confidences
    out = np.array(frames)
    center = np.zeros(p.header.dims)
    scale = 1.0
    seen_anchor_pair = False
    valid_any = False
    for t in range(p.n_frames):
        if conf[t, ia] > 0 and conf[t, ib] > 0:
            seen_anchor_pair = True
            a, b = frames[t, ia, :2], frames[t, ib, :2]
            dist = float(np.hypot(*(b - a)))
            if dist >= 1e-6:
                valid_any = True
                center = np.zeros(p.header.dims)
                center[:2] = (a + b) / 2.0
                scale = spec.target_distance / dist
        present = conf[t] > 0
        out[t, present] = (frames[t, present] - center) * scale
    if seen_anchor_pair and not valid_any:
        raise DegenerateAnchors("anchor distance < 1e-6 in every frame where both are present")
    return p.with_body(out, conf)


def _mirror_permutation(header: PoseHeader, mirror: Mapping[str, object] | None) -> np.ndarray:
    """perm[i] = index of the point that lands on slot i after flipping."""
    if mirror is None:
        layout = find_layout(header)
        mirror = layout.mirror if layout is not None else None
    if mirror is None:
        raise MissingMirrorTable("layout has no mirror declaration")
    partner = {}
    for comp, rule in mirror.items():
        if isinstance(rule, str):
            partner[comp] = rule
            partner[rule] = comp
    perm = np.arange(header.total_points)
    for c in header.components:
        start = header.offset(c.name)
        if c.name in partner:
            other = partner[c.name]
            try:
                ostart, on = component_slice(header, other)
            except UnknownComponent as e:
                raise MissingMirrorTable(f"{c.name} mirrors onto missing component {other}") from e
            if on != c.point_count:
                raise MissingMirrorTable(f"{c.name} and {other} differ in size")
            perm[start:start + c.point_count] = np.arange(ostart, ostart + on)
        elif c.name in mirror:
            for i, j in mirror[c.name]:
                perm[start + i], perm[start + j] = start + j, start + i
        else:
            raise MissingMirrorTable(f"no mirror rule for component {c.name}")
    return perm


def flip_horizontal(p: PoseSequence, mirror: Mapping[str, object] | None = None) -> PoseSequence:
    """Mirror a normalized pose: negate x and swap left/right points.

    ``mirror`` defaults to the table of the shipped layout matching the header.
    """
    perm = _mirror_permutation(p.header, mirror)
    frames = p.body.frames[:, perm].copy()
    conf = p.body.confidences[:, perm]
    # absent points keep their stored zero
    frames[..., 0] = np.where(conf > 0, -frames[..., 0], frames[..., 0])
    return p.with_body(frames, conf)


def _limb_geometry(frames, conf, limbs):
    # works on (..., K, D) coordinates and (..., K) confidences
    a, b = limbs[:, 0], limbs[:, 1]
    d = frames[..., b, :2] - frames[..., a, :2]
    present = (conf[..., a] > 0) & (conf[..., b] > 0)
    length = np.where(present, np.hypot(d[..., 0], d[..., 1]), 0.0)
    angle = np.where(present, np.arctan2(d[..., 1], d[..., 0]), 0.0)
    # atan2(-0.0, x<0) gives -pi; keep the half-open range
    angle = np.where(angle == -np.pi, np.pi, angle)
    return angle, length


def limb_features(frame, confidences, limbs) -> tuple[np.ndarray, np.ndarray]:
    """Angle (radians, in (-pi, pi]) and length of each limb in one frame."""
    limbs = np.asarray(limbs, dtype=np.int64).reshape(-1, 2)
    return _limb_geometry(np.asarray(frame, dtype=np.float64), np.asarray(confidences), limbs)


def feature_names(header: PoseHeader) -> tuple[str, ...]:
    names = []
    for c in header.components:
        for i in range(c.point_count):
            names += [f"{c.name}.{i}.x", f"{c.name}.{i}.y"]
    for c in header.components:
        for a, b in c.limbs:
            names += [f"{c.name}.{a}-{b}.angle", f"{c.name}.{a}-{b}.length"]
    return tuple(names)


def frame_features(p: PoseSequence) -> FeatureMatrix:
    """Row t = x,y of every point, then angle,length of every limb (layout order)."""
    frames = p.body.frames[..., :2]
    conf = p.body.confidences
    t, k = conf.shape
    coords = np.where((conf > 0)[..., None], frames, 0.0).reshape(t, k * 2)
    limbs = np.asarray(p.header.global_limbs(), dtype=np.int64).reshape(-1, 2)
    angle, length = _limb_geometry(frames, conf, limbs)
    limb_block = np.stack([angle, length], axis=-1).reshape(t, -1)
    values = np.concatenate([coords, limb_block], axis=1) + 0.0  # drops -0.0
    return FeatureMatrix(values, feature_names(p.header))


def mirror_feature_map(header: PoseHeader, mirror: Mapping[str, object] | None = None):
    """Column permutation and per-column rule mapping features of p to features of flip(p).

    Returns ``(perm, rule)``: ``flipped[:, i]`` is obtained from ``values[:, perm[i]]``
    where rule 0 keeps the value, 1 negates an x coordinate, 2 reflects a limb
    angle (pi - theta, wrapped into (-pi, pi]) and 3 negates the angle of a limb
    that mirrors onto itself reversed.
    """
    perm_pts = _mirror_permutation(header, mirror)
    k = header.total_points
    perm = []
    rule = []
    for i in range(k):
        src = perm_pts[i]
        perm += [2 * src, 2 * src + 1]
        rule += [1, 0]
    limbs = header.global_limbs()
    where = {l: j for j, l in enumerate(limbs)}
    inv = np.empty_like(perm_pts)
    inv[perm_pts] = np.arange(k)  # old point -> its slot after the flip
    limb_perm = [None] * len(limbs)
    for j, (a, b) in enumerate(limbs):
        ma, mb = int(inv[a]), int(inv[b])
        if (ma, mb) in where:
            limb_perm[where[(ma, mb)]] = (j, 2)
        elif (mb, ma) in where:
            limb_perm[where[(mb, ma)]] = (j, 3)
        else:
            raise MissingMirrorTable(f"limb set is not closed under mirroring: {(a, b)}")
    for j in range(len(limbs)):
        src, r = limb_perm[j]
        perm += [2 * k + 2 * src, 2 * k + 2 * src + 1]
        rule += [r, 0]
    return np.asarray(perm), np.asarray(rule)


def flip_features(values: np.ndarray, perm: np.ndarray, rule: np.ndarray) -> np.ndarray:
    """Apply a ``mirror_feature_map`` result to a (T, F) feature array."""
    v = np.asarray(values)[:, perm]
    out = v.copy()
    neg = rule == 1
    out[:, neg] = -v[:, neg]
    refl = rule == 2
    ang = v[:, refl]
    length = v[:, np.flatnonzero(refl) + 1]
    out[:, refl] = np.where(length == 0, 0.0, np.where(ang >= 0, np.pi - ang, -np.pi - ang))
    rev = rule == 3
    out[:, rev] = np.where(v[:, rev] == np.pi, np.pi, -v[:, rev])
    return out + 0.0


def concat_sources(a: FeatureMatrix, b: FeatureMatrix, resample: bool = True,
                   prefixes: tuple[str, str] = ("a", "b")) -> FeatureMatrix:
    """Per-frame concatenation of two feature sources.

    When frame counts differ, ``b`` is resampled to ``a``'s length by nearest
    frame index ``round(t * (Tb - 1) / (Ta - 1))``.
    """
    if b.shape[1] == 0:
        return a
    if a.shape[1] == 0:
        return b
    ta, tb = a.shape[0], b.shape[0]
    bv = b.values
    if ta != tb:
        if not resample:
            raise IncompatibleLengths(f"{ta} vs {tb} frames")
        if ta == 1:
            idx = np.zeros(1, dtype=int)
        else:
            idx = np.floor(np.arange(ta) * (tb - 1) / (ta - 1) + 0.5).astype(int)
        bv = bv[idx]
    names = tuple(f"{prefixes[0]}:{n}" for n in a.feature_names) + tuple(
        f"{prefixes[1]}:{n}" for n in b.feature_names
    )
    return FeatureMatrix(np.concatenate([a.values, bv], axis=1), names)


def hand_presence(p: PoseSequence, hand: Hand | str) -> float:
    """Fraction of frames in which at least one keypoint of the hand is present."""
    hand = Hand(hand)
    _, conf = p.component_data(hand.component)
    return float(np.count_nonzero((conf > 0).any(axis=1)) / p.n_frames)


def wrist_path_length(p: PoseSequence, hand: Hand | str) -> float:
    """Length of the wrist's path through the frames where it is present.

    Gaps are bridged: consecutive present observations are joined directly.
    """
    frames, conf = p.component_data(Hand(hand).component)
    wrist = frames[conf[:, WRIST] > 0, WRIST, :2]
    if len(wrist) < 2:
        return 0.0
    return float(np.hypot(*np.diff(wrist, axis=0).T).sum())


def dominant_hand(p: PoseSequence) -> Hand:
    left = wrist_path_length(p, Hand.LEFT)
    right = wrist_path_length(p, Hand.RIGHT)
    return Hand.LEFT if left > right else Hand.RIGHT


def dominant_hand_presence(p: PoseSequence) -> float:
    return hand_presence(p, dominant_hand(p))


def both_hands_presence(p: PoseSequence, require: str = "both") -> float:
    """Fraction of frames with keypoints on both hands (``require="both"``) or on either (``"any"``)."""
    if require not in ("both", "any"):
        raise ValueError(f"require must be 'both' or 'any', got {require!r}")
    seen = [(p.component_data(h.component)[1] > 0).any(axis=1) for h in (Hand.LEFT, Hand.RIGHT)]
    hit = seen[0] & seen[1] if require == "both" else seen[0] | seen[1]
    return float(np.count_nonzero(hit) / p.n_frames)


class PoseFeaturizer(TransformerMixin, BaseEstimator):
    """Turn pose sequences into (T, F) feature arrays.

    Parameters
    ----------
    components : tuple of str
        Components kept before featurizing (the face mesh is dropped by default).
    normalize : bool
        Apply shoulder-anchored normalization.
    canonical_hand : {None, "right"}
        With "right", samples whose dominant hand is the left one are flipped
        so every sample is presented as right-handed.
    """

    def __init__(self, components=DEFAULT_COMPONENTS, normalize=True, canonical_hand=None):
        self.components = components
        self.normalize = normalize
        self.canonical_hand = canonical_hand

    def fit(self, X, y=None):
        if self.canonical_hand not in (None, "right"):
            raise ValueError(f"canonical_hand must be None or 'right', got {self.canonical_hand!r}")
        X = check_pose_list(X)
        first = self.prepare(X[0])
        self.header_ = first.header
        self.n_features_out_ = len(feature_names(first.header))
        return self

    def prepare(self, p: PoseSequence, flip: bool = False) -> PoseSequence:
        """Selection, normalization and optional flip; the pose just before featurizing."""
        if self.components is not None:
            p = select_components(p, self.components)
        if self.normalize:
            p = normalize_pose(p)
        if self.canonical_hand == "right" and dominant_hand(p) is Hand.LEFT:
            flip = not flip
        if flip:
            p = flip_horizontal(p)
        return p

    def transform(self, X, flip: bool = False):
        X = check_pose_list(X)
        return [frame_features(self.prepare(p, flip=flip)).values for p in X]

    def get_feature_names_out(self, input_features=None):
        return np.asarray(feature_names(self.header_), dtype=object)


def check_pose_list(X) -> list[PoseSequence]:
    if isinstance(X, PoseSequence):
        raise TypeError("expected a list of PoseSequence, got a single PoseSequence")
    X = list(X)
    if not X:
        raise ValueError("empty input")
    for i, p in enumerate(X):
        if not isinstance(p, PoseSequence):
            raise TypeError(f"element {i} is {type(p).__name__}, expected PoseSequence")
    return X


def is_pose_list(X: Sequence) -> bool:
    return len(X) > 0 and all(isinstance(p, PoseSequence) for p in X)
