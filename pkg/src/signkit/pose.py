"""Skeletal pose data model and the SPS1 binary container.

SPS1 layout (little-endian throughout)::

    magic            4 bytes  b"SPS1"
    version          u16      (1)
    fps              f32
    dims             u8       (2 or 3)
    component count  u8
    per component:
        name length  u8, name bytes (UTF-8)
        point count  u16
        limb count   u16
        limbs        limb count x (u16, u16)
    frame count T    u32
    coordinates      T*K*D f32  (frame-major, then point, then dim)
    confidences      T*K   f32

The file ends right after the confidence block. See FORMAT.md for a worked
byte-level example.
"""

from __future__ import annotations

import functools
import json
import struct
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np

MAGIC = b"SPS1"
FORMAT_VERSION = 1

_FIXED_HEAD = struct.Struct("<4sHfBB")
_U8 = struct.Struct("<B")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")


class PoseFormatError(ValueError):
    """Base class for everything the SPS1 parser can reject."""


class BadMagic(PoseFormatError):
    pass


class TruncatedFile(PoseFormatError):
    """Byte length disagrees with what the header declares."""


class InvariantViolation(PoseFormatError):
    pass


class UnknownComponent(KeyError):
    pass


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    point_count: int
    dims: int = 2
    limbs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "limbs", tuple((int(a), int(b)) for a, b in self.limbs))
        if not self.name:
            raise InvariantViolation("component name must be non-empty")
        if len(self.name.encode("utf-8")) > 255:
            raise InvariantViolation(f"component name too long: {self.name[:20]}...")
        if not 0 < self.point_count <= 0xFFFF:
            raise InvariantViolation(f"{self.name}: point_count must be in [1, 65535]")
        if self.dims not in (2, 3):
            raise InvariantViolation(f"{self.name}: dims must be 2 or 3, got {self.dims}")
        if len(self.limbs) > 0xFFFF:
            raise InvariantViolation(f"{self.name}: too many limbs")
        for a, b in self.limbs:
            if a == b:
                raise InvariantViolation(f"{self.name}: self-edge ({a},{a})")
            if not (0 <= a < self.point_count and 0 <= b < self.point_count):
                raise InvariantViolation(
                    f"{self.name}: limb ({a},{b}) out of range for {self.point_count} points"
                )


@dataclass(frozen=True)
class PoseHeader:
    fps: float
    components: tuple[ComponentSpec, ...]
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        # stored at file precision so headers survive a round trip unchanged
        object.__setattr__(self, "fps", float(np.float32(self.fps)))
        if not self.components:
            raise InvariantViolation("a pose header needs at least one component")
        if len(self.components) > 255:
            raise InvariantViolation("at most 255 components")
        if not (np.isfinite(self.fps) and self.fps > 0):
            raise InvariantViolation(f"fps must be positive, got {self.fps}")
        names = [c.name for c in self.components]
        if len(set(names)) != len(names):
            raise InvariantViolation(f"duplicate component names in {names}")
        if len({c.dims for c in self.components}) != 1:
            raise InvariantViolation("all components must share the same dims")

    @property
    def dims(self) -> int:
        return self.components[0].dims

    @property
    def total_points(self) -> int:
        return sum(c.point_count for c in self.components)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.components]

    def component(self, name: str) -> ComponentSpec:
        for c in self.components:
            if c.name == name:
                return c
        raise UnknownComponent(name)

    def offset(self, name: str) -> int:
        start = 0
        for c in self.components:
            if c.name == name:
                return start
            start += c.point_count
        raise UnknownComponent(name)

    def global_limbs(self) -> list[tuple[int, int]]:
        """All limbs in layout order, as indices into the flattened point axis."""
        out = []
        start = 0
        for c in self.components:
            out.extend((start + a, start + b) for a, b in c.limbs)
            start += c.point_count
        return out


@dataclass(frozen=True, eq=False)
class PoseBody:
    """Per-frame coordinates (T, K, D) and confidences (T, K).

    Arrays are held as read-only float64. Values parsed from a file are exact
    float32 values; serialization rounds back to float32.
    """

    frames: np.ndarray
    confidences: np.ndarray

    def __post_init__(self):
        frames = np.array(self.frames, dtype=np.float64)
        conf = np.array(self.confidences, dtype=np.float64)
        if frames.ndim != 3:
            raise InvariantViolation(f"frames must be (T, K, D), got shape {frames.shape}")
        if conf.shape != frames.shape[:2]:
            raise InvariantViolation(
                f"confidences shape {conf.shape} does not match frames {frames.shape[:2]}"
            )
        if frames.shape[0] < 1:
            raise InvariantViolation("a pose body needs at least one frame")
        if not np.all(np.isfinite(frames)):
            raise InvariantViolation("non-finite coordinate")
        if not np.all((conf >= 0) & (conf <= 1)):
            raise InvariantViolation("confidences must lie in [0, 1]")
        if np.any(frames[conf == 0] != 0):
            raise InvariantViolation("coordinates of absent (confidence 0) keypoints must be 0")
        object.__setattr__(self, "frames", _readonly(frames))
        object.__setattr__(self, "confidences", _readonly(conf))

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def __eq__(self, other):
        if not isinstance(other, PoseBody):
            return NotImplemented
        return (
            self.frames.shape == other.frames.shape
            and self.frames.tobytes() == other.frames.tobytes()
            and self.confidences.tobytes() == other.confidences.tobytes()
        )


@dataclass(frozen=True)
class PoseSequence:
    header: PoseHeader
    body: PoseBody

    def __post_init__(self):
        _, k, d = self.body.frames.shape
        if k != self.header.total_points:
            raise InvariantViolation(
                f"body has {k} points, header declares {self.header.total_points}"
            )
        if d != self.header.dims:
            raise InvariantViolation(f"body has {d} dims, header declares {self.header.dims}")

    @property
    def n_frames(self) -> int:
        return self.body.n_frames

    def component_data(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """(frames, confidences) restricted to one component."""
        start, n = component_slice(self, name)
        return self.body.frames[:, start:start + n], self.body.confidences[:, start:start + n]

    def with_body(self, frames, confidences) -> "PoseSequence":
        return PoseSequence(self.header, PoseBody(frames, confidences))


def make_pose(components: Sequence[ComponentSpec], frames, confidences=None, fps: float = 25.0):
    """Convenience constructor. Missing confidences default to 1 everywhere."""
    frames = np.asarray(frames, dtype=np.float64)
    if confidences is None:
        confidences = np.ones(frames.shape[:2])
    return PoseSequence(PoseHeader(fps=fps, components=tuple(components)), PoseBody(frames, confidences))


# --------------------------------------------------------------------------- #
# serialization


def serialize_pose(p: PoseSequence) -> bytes:
    h = p.header
    out = bytearray()
    out += _FIXED_HEAD.pack(MAGIC, h.format_version, h.fps, h.dims, len(h.components))
    for c in h.components:
        name = c.name.encode("utf-8")
        out += _U8.pack(len(name)) + name
        out += _U16.pack(c.point_count) + _U16.pack(len(c.limbs))
        for a, b in c.limbs:
            out += _U16.pack(a) + _U16.pack(b)
    out += _U32.pack(p.n_frames)
    out += p.body.frames.astype("<f4").tobytes()
    out += p.body.confidences.astype("<f4").tobytes()
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        end = self.pos + n
        if end > len(self.data):
            raise TruncatedFile(
                f"need {n} bytes at offset {self.pos}, only {len(self.data) - self.pos} left"
            )
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, s: struct.Struct):
        return s.unpack(self.take(s.size))


def parse_pose_file(data: bytes) -> PoseSequence:
    data = bytes(data)
    if len(data) < 4 and MAGIC.startswith(data):
        raise TruncatedFile(f"only {len(data)} bytes")
    if data[:4] != MAGIC:
        raise BadMagic(f"not an SPS1 file (starts with {data[:4]!r})")
    r = _Reader(data)
    _, version, fps, dims, n_comp = r.unpack(_FIXED_HEAD)
    if version != FORMAT_VERSION:
        raise InvariantViolation(f"unsupported format version {version}")
    components = []
    for _ in range(n_comp):
        (name_len,) = r.unpack(_U8)
        raw = bytes(r.take(name_len))
        try:
            name = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise InvariantViolation(f"component name is not UTF-8: {raw!r}") from e
        (points,) = r.unpack(_U16)
        (n_limbs,) = r.unpack(_U16)
        flat = np.frombuffer(r.take(4 * n_limbs), dtype="<u2").reshape(-1, 2)
        components.append(ComponentSpec(name, points, dims, tuple(map(tuple, flat.tolist()))))
    header = PoseHeader(fps=float(fps), components=tuple(components), format_version=version)
    (t,) = r.unpack(_U32)
    if t < 1:
        raise InvariantViolation("frame count must be >= 1")
    k = header.total_points
    expected = r.pos + 4 * t * k * (dims + 1)
    if len(data) != expected:
        raise TruncatedFile(f"header implies {expected} bytes, file has {len(data)}")
    frames = np.frombuffer(r.take(4 * t * k * dims), dtype="<f4").reshape(t, k, dims)
    conf = np.frombuffer(r.take(4 * t * k), dtype="<f4").reshape(t, k)
    return PoseSequence(header, PoseBody(frames, conf))


def read_pose(path) -> PoseSequence:
    with open(path, "rb") as f:
        return parse_pose_file(f.read())


def write_pose(path, p: PoseSequence) -> None:
    with open(path, "wb") as f:
        f.write(serialize_pose(p))


# --------------------------------------------------------------------------- #
# component access


def component_slice(p: PoseSequence | PoseHeader, name: str) -> tuple[int, int]:
    header = p.header if isinstance(p, PoseSequence) else p
    return header.offset(name), header.component(name).point_count


def select_components(p: PoseSequence, names: Iterable[str]) -> PoseSequence:
    """Keep only the named components, preserving header order."""
    wanted = set(names)
    missing = wanted - set(p.header.names)
    if missing:
        raise UnknownComponent(", ".join(sorted(missing)))
    keep = [c for c in p.header.components if c.name in wanted]
    idx = np.concatenate([np.arange(*_range(p.header, c.name)) for c in keep])
    header = PoseHeader(fps=p.header.fps, components=tuple(keep), format_version=p.header.format_version)
    return PoseSequence(header, PoseBody(p.body.frames[:, idx], p.body.confidences[:, idx]))


def _range(header: PoseHeader, name: str) -> tuple[int, int]:
    start = header.offset(name)
    return start, start + header.component(name).point_count


# --------------------------------------------------------------------------- #
# layouts


@dataclass(frozen=True)
class Layout:
    """A named skeleton layout plus its optional left/right mirror table.

    ``mirror`` maps a component name either to a list of swapped point pairs
    inside that component (unlisted points mirror onto themselves) or to the
    name of another component whose block it swaps with.
    """

    name: str
    components: tuple[ComponentSpec, ...]
    point_names: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    mirror: Mapping[str, object] | None = None

    def header(self, fps: float = 25.0) -> PoseHeader:
        return PoseHeader(fps=fps, components=self.components)

    def matches(self, header: PoseHeader) -> bool:
        return tuple(header.components) == tuple(self.components)

    def point_index(self, component: str, point: str) -> int:
        return self.point_names[component].index(point)


def _layout_from_dict(d: dict) -> Layout:
    dims = int(d.get("dims", 2))
    comps = tuple(
        ComponentSpec(c["name"], len(c["points"]), dims, tuple(tuple(l) for l in c["limbs"]))
        for c in d["components"]
    )
    names = {c["name"]: tuple(c["points"]) for c in d["components"]}
    mirror = d.get("mirror")
    if mirror is not None:
        mirror = {k: (v if isinstance(v, str) else tuple(tuple(p) for p in v)) for k, v in mirror.items()}
    return Layout(d["name"], comps, names, mirror)


@functools.lru_cache(maxsize=32)
def load_layout(name_or_path: str = "holistic_75") -> Layout:
    """Load a layout file; bare names resolve to the files shipped with the package."""
    if name_or_path.endswith(".json"):
        with open(name_or_path, encoding="utf-8") as f:
            return _layout_from_dict(json.load(f))
    text = resources.files("signkit.layouts").joinpath(f"{name_or_path}.json").read_text("utf-8")
    return _layout_from_dict(json.loads(text))


def with_dims(layout: Layout, dims: int) -> Layout:
    comps = tuple(ComponentSpec(c.name, c.point_count, dims, c.limbs) for c in layout.components)
    return Layout(layout.name, comps, layout.point_names, layout.mirror)


@functools.lru_cache(maxsize=1)
def known_layouts() -> tuple[Layout, ...]:
    base = [load_layout("holistic_75"), load_layout("holistic_543")]
    return tuple(with_dims(l, d) for l in base for d in (2, 3))


def find_layout(header: PoseHeader) -> Layout | None:
    for layout in known_layouts():
        if layout.matches(header):
            return layout
    return None
