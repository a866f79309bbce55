"""Synthetic sign classes, signer variation and hand occlusion.

Each class is a Lissajous trajectory of the dominant wrist (with a
class-specific hand orientation) over the 75-point body+hands layout. The
rest of the body is static. Signers vary in scale, position, speed, noise
and handedness; left-handed signers perform the mirrored motion.
"""

from __future__ import annotations

import enum
import zlib
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .features import Hand, dominant_hand, flip_horizontal
from .models import LabeledSample
from .nn import make_rng
from .pose import PoseBody, PoseSequence, load_layout

# body-centric template: shoulder midpoint at the origin, shoulder width 1,
# y pointing down (image convention); the person's left is +x
_BODY = np.array([
    (0.0, -0.6),
    (0.06, -0.7), (0.1, -0.71), (0.14, -0.7),
    (-0.06, -0.7), (-0.1, -0.71), (-0.14, -0.7),
    (0.2, -0.65), (-0.2, -0.65),
    (0.06, -0.5), (-0.06, -0.5),
    (0.5, 0.0), (-0.5, 0.0),
    (0.6, 0.6), (-0.6, 0.6),
    (0.4, 1.1), (-0.4, 1.1),
    (0.37, 1.2), (-0.37, 1.2),
    (0.41, 1.22), (-0.41, 1.22),
    (0.44, 1.15), (-0.44, 1.15),
    (0.3, 1.4), (-0.3, 1.4),
    (0.3, 2.2), (-0.3, 2.2),
    (0.3, 3.0), (-0.3, 3.0),
    (0.32, 3.1), (-0.32, 3.1),
    (0.3, 3.2), (-0.3, 3.2),
])

# right hand relative to its wrist, fingers up
_RIGHT_HAND = np.array([
    (0.0, 0.0),
    (0.08, -0.05), (0.14, -0.1), (0.18, -0.15), (0.21, -0.2),
    (0.07, -0.2), (0.075, -0.28), (0.078, -0.33), (0.08, -0.37),
    (0.0, -0.21), (0.0, -0.3), (0.0, -0.35), (0.0, -0.4),
    (-0.06, -0.2), (-0.065, -0.27), (-0.068, -0.32), (-0.07, -0.35),
    (-0.11, -0.17), (-0.12, -0.23), (-0.125, -0.27), (-0.13, -0.3),
])
_LEFT_HAND = _RIGHT_HAND * (-1.0, 1.0)

_R_SHOULDER, _R_ELBOW, _R_WRIST = 12, 14, 16
_R_PINKY, _R_INDEX, _R_THUMB = 18, 20, 22
_REST_LEFT = np.array([0.4, 1.1])
_SIGN_CENTER = np.array([-0.3, 0.35])
_AMPLITUDE = 0.35


class OcclusionMode(str, enum.Enum):
    HANDS_INTERACTION = "hands-interaction"
    HAND_FACE = "hand-face"
    RANDOM_DROP = "random-drop"


class OcclusionTarget(str, enum.Enum):
    DOMINANT = "dominant"
    BOTH = "both"


@dataclass(frozen=True)
class SignerProfile:
    signer_id: str
    scale: float = 1.0
    speed: float = 1.0
    noise_sd: float = 0.0
    handedness: Hand = Hand.RIGHT
    offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not 0.8 <= self.scale <= 1.2:
            raise ValueError(f"scale {self.scale} outside [0.8, 1.2]")
        if not 0.7 <= self.speed <= 1.3:
            raise ValueError(f"speed {self.speed} outside [0.7, 1.3]")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        object.__setattr__(self, "handedness", Hand(self.handedness))


@dataclass(frozen=True)
class SynthesisConfig:
    classes: int = 10
    samples_per_class: int = 50
    signers: int | Sequence[SignerProfile] = 6
    frames: tuple[int, int] = (12, 20)
    seed: int = 7
    fps: float = 25.0
    left_handed_rate: float = 0.25
    noise_range: tuple[float, float] = (0.002, 0.01)

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError("need at least 2 classes")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")
        n = self.signers if isinstance(self.signers, int) else len(self.signers)
        if n < 2:
            raise ValueError("need at least 2 signers for signer-disjoint splits")
        lo, hi = self.frames
        if not 2 <= lo <= hi:
            raise ValueError(f"bad frame range {self.frames}")


@dataclass(frozen=True)
class OcclusionSpec:
    mode: OcclusionMode = OcclusionMode.RANDOM_DROP
    target: OcclusionTarget = OcclusionTarget.DOMINANT
    fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", OcclusionMode(self.mode))
        object.__setattr__(self, "target", OcclusionTarget(self.target))
        if not 0 <= self.fraction <= 1:
            raise ValueError("fraction must be in [0, 1]")


def make_signers(n: int, seed: int, left_handed_rate: float = 0.25,
                 noise_range: tuple[float, float] = (0.002, 0.01)) -> list[SignerProfile]:
    rng = make_rng(seed, 100)
    out = []
    for i in range(n):
        out.append(SignerProfile(
            signer_id=f"signer{i:02d}",
            scale=float(rng.uniform(0.8, 1.2)),
            speed=float(rng.uniform(0.7, 1.3)),
            noise_sd=float(rng.uniform(*noise_range)),
            handedness=Hand.LEFT if rng.random() < left_handed_rate else Hand.RIGHT,
            offset=(float(rng.uniform(-0.05, 0.05)), float(rng.uniform(-0.05, 0.05))),
        ))
    return out


def class_parameters(k: int) -> dict:
    """Lissajous frequencies, phase and hand rotation for class ``k``."""
    return {
        "fx": 1 + k % 3,
        "fy": 1 + (k // 3) % 3,
        "phase": np.pi / 4 * (1 + 2 * (k // 9 % 4)),
        "rotation": -0.5 + 0.25 * (k % 5),
    }


def _rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def class_trajectory(k: int, n_frames: int) -> np.ndarray:
    """Body-centric (T, 75, 2) right-handed coordinates for one performance of class ``k``."""
    prm = class_parameters(k)
    s = np.linspace(0.0, 1.0, n_frames)
    wrist = _SIGN_CENTER + _AMPLITUDE * np.stack(
        [np.sin(2 * np.pi * prm["fx"] * s + prm["phase"]), np.sin(2 * np.pi * prm["fy"] * s)], axis=1
    )
    hand = _RIGHT_HAND @ _rotation(prm["rotation"]).T
    right = wrist[:, None, :] + hand[None]
    left = np.broadcast_to(_REST_LEFT + _LEFT_HAND, (n_frames, 21, 2))
    body = np.broadcast_to(_BODY, (n_frames, 33, 2)).copy()
    shoulder = _BODY[_R_SHOULDER]
    body[:, _R_WRIST] = wrist
    body[:, _R_ELBOW] = shoulder + 0.5 * (wrist - shoulder) + np.array([-0.2, 0.25])
    body[:, _R_PINKY] = right[:, 17]
    body[:, _R_INDEX] = right[:, 5]
    body[:, _R_THUMB] = right[:, 1]
    return np.concatenate([body, left, right], axis=1)


def _render(frames_bc: np.ndarray, signer: SignerProfile, rng, fps: float) -> PoseSequence:
    """Body-centric coordinates -> image coordinates of one signer, float32-exact."""
    layout = load_layout("holistic_75")
    header = layout.header(fps)
    conf = np.ones(frames_bc.shape[:2])
    pose = PoseSequence(header, PoseBody(frames_bc, conf))
    if signer.handedness is Hand.LEFT:
        pose = flip_horizontal(pose)
    xy = np.array(pose.body.frames)
    if signer.noise_sd > 0:
        xy = xy + rng.normal(0.0, signer.noise_sd, size=xy.shape)
    width = 0.25 * signer.scale
    center = np.array([0.5, 0.4]) + np.asarray(signer.offset)
    img = (center + width * xy).astype(np.float32).astype(np.float64)
    return PoseSequence(header, PoseBody(img, conf))


def generate_dataset(cfg: SynthesisConfig) -> list[LabeledSample]:
    """Deterministic labeled dataset; sample j of every class goes to signer j mod S."""
    signers = (
        make_signers(cfg.signers, cfg.seed, cfg.left_handed_rate, cfg.noise_range)
        if isinstance(cfg.signers, int) else list(cfg.signers)
    )
    lo, hi = cfg.frames
    out = []
    for k in range(cfg.classes):
        for j in range(cfg.samples_per_class):
            signer = signers[j % len(signers)]
            rng = make_rng(cfg.seed, 200, k, j)
            base = int(rng.integers(lo, hi + 1))
            n_frames = max(2, int(round(base / signer.speed)))
            pose = _render(class_trajectory(k, n_frames), signer, rng, cfg.fps)
            out.append(LabeledSample(f"c{k:03d}_s{j:04d}", pose, k, signer.signer_id))
    return out


# --------------------------------------------------------------------------- #
# occlusion


def _n_affected(fraction: float, n_frames: int) -> int:
    return int(np.floor(fraction * n_frames + 0.5))


def _wrist(p: PoseSequence, hand: Hand):
    frames, conf = p.component_data(hand.component)
    return frames[:, 0, :2], conf[:, 0] > 0


def apply_occlusion(p: PoseSequence, spec: OcclusionSpec) -> PoseSequence:
    """Blank the target hand(s) in a chosen subset of frames.

    RandomDrop picks frames uniformly (seeded); HandFace picks the frames where
    the dominant wrist is closest to the nose; HandsInteraction the frames where
    the two wrists are closest. Only confidences and coordinates of the target
    hand(s) in those frames change, and only to zero.
    """
    T = p.n_frames
    k = _n_affected(spec.fraction, T)
    if k == 0:
        return p
    dom = dominant_hand(p)
    hands = [dom] if spec.target is OcclusionTarget.DOMINANT else [Hand.LEFT, Hand.RIGHT]

    if spec.mode is OcclusionMode.RANDOM_DROP:
        chosen = make_rng(spec.seed, 300).choice(T, size=k, replace=False)
    else:
        w, present = _wrist(p, dom)
        if spec.mode is OcclusionMode.HAND_FACE:
            start = p.header.offset("BODY")
            nose = p.body.frames[:, start, :2]
            present = present & (p.body.confidences[:, start] > 0)
            dist = np.hypot(*(w - nose).T)
        else:
            w2, present2 = _wrist(p, dom.other)
            present = present & present2
            dist = np.hypot(*(w - w2).T)
        dist = np.where(present, dist, np.inf)
        chosen = np.argsort(dist, kind="stable")[:k]

    frames = np.array(p.body.frames)
    conf = np.array(p.body.confidences)
    for hand in hands:
        start = p.header.offset(hand.component)
        n = p.header.component(hand.component).point_count
        conf[np.ix_(chosen, np.arange(start, start + n))] = 0.0
        frames[np.ix_(chosen, np.arange(start, start + n))] = 0.0
    return p.with_body(frames, conf)


def sample_seed(seed: int, sample_id: str) -> int:
    """Stable per-sample seed, independent of dataset order."""
    return (int(seed) * 1_000_003 + zlib.crc32(sample_id.encode("utf-8"))) % 2**63


def occlude_samples(samples: Sequence[LabeledSample], spec: OcclusionSpec) -> list[LabeledSample]:
    return [
        replace(s, pose=apply_occlusion(s.pose, replace(spec, seed=sample_seed(spec.seed, s.sample_id))))
        for s in samples
    ]


# --------------------------------------------------------------------------- #
# splits


class TooFewSigners(ValueError):
    pass


def signer_disjoint_split(samples: Sequence[LabeledSample], train_fraction: float = 0.8, seed: int = 0):
    """Split by whole signers so no signer appears on both sides.

    Signers are shuffled (seeded) and the train side takes the prefix whose
    sample count is closest to ``train_fraction``; both sides keep at least
    one signer.
    """
    signers = sorted({s.signer_id for s in samples})
    if len(signers) < 2:
        raise TooFewSigners(f"need at least 2 signers, got {len(signers)}")
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    order = [signers[i] for i in make_rng(seed, 400).permutation(len(signers))]
    counts = {sid: 0 for sid in signers}
    for s in samples:
        counts[s.signer_id] += 1
    goal = train_fraction * len(samples)
    cum = np.cumsum([counts[sid] for sid in order])[:-1]
    n_train = int(np.argmin(np.abs(cum - goal))) + 1
    train_ids = set(order[:n_train])
    train = [s for s in samples if s.signer_id in train_ids]
    val = [s for s in samples if s.signer_id not in train_ids]
    return train, val
