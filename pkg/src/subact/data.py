"""Motion records, cleansing transforms, the synthetic generator and the JSON-lines format."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, ConfigError, ParseError, ValidationError
from .labels import NONE_ID, NONE_TEXT, LabelMap

DATASET_FORMAT = "subact-dataset"
DATASET_VERSION = 1
OBSERVATION_RATIOS = (0.25, 0.5, 0.75, 1.0)

Segment = tuple[int, int, int]


@dataclass(frozen=True, eq=False)
class MotionSequence:
    """Joint trajectories as a (frames, joints, 4) array: x, y, z and timestamp in seconds."""

    data: np.ndarray
    topology: tuple[tuple[int, int], ...] = ()

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def joints(self) -> int:
        return self.data.shape[1]

    @property
    def timestamps(self) -> np.ndarray:
        return self.data[:, 0, 3]

    def validate(self, strict_time: bool = True) -> None:
        if self.data.ndim != 3 or self.data.shape[2] != 4:
            raise ValidationError(f"motion must have shape (frames, joints, 4), got {self.data.shape}")
        if self.frames < 1 or self.joints < 1:
            raise ValidationError("motion needs at least one frame and one joint")
        dt = np.diff(self.timestamps)
        if (strict_time and np.any(dt <= 0)) or np.any(dt < 0):
            raise ValidationError("timestamps must increase")
        for a, b in self.topology:
            if not (0 <= a < self.joints and 0 <= b < self.joints):
                raise ValidationError(f"topology edge ({a}, {b}) references a missing joint")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MotionSequence)
            and self.topology == other.topology
            and self.data.shape == other.data.shape
            and bool(np.array_equal(self.data, other.data))
        )


@dataclass(frozen=True)
class SubActionTrack:
    segments: tuple[Segment, ...]
    padded_labels: tuple[int, ...] | None = None

    @property
    def classes(self) -> list[int]:
        return [c for c, _, _ in self.segments]

    def __len__(self) -> int:
        return len(self.segments)

    def validate(self, frames: int) -> None:
        pos = 0
        for c, s, e in self.segments:
            if s != pos or e <= s:
                raise ValidationError(f"segments must be contiguous and non-empty, got {self.segments}")
            pos = e
        if self.segments and pos != frames:
            raise ValidationError(f"segments cover [0, {pos}) but the motion has {frames} frames")


@dataclass(frozen=True)
class Sample:
    motion: MotionSequence
    track: SubActionTrack
    holistic_label: int
    sample_id: str


@dataclass(eq=False)
class Dataset:
    samples: list[Sample]
    labels: LabelMap

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __eq__(self, other) -> bool:
        return isinstance(other, Dataset) and self.labels == other.labels and self.samples == other.samples

    def by_id(self) -> dict[str, Sample]:
        return {s.sample_id: s for s in self.samples}

    def max_segments(self) -> int:
        return max((len(s.track) for s in self.samples), default=0)


def nearest_indices(source_frames: int, target_frames: int) -> np.ndarray:
    """Source frame index for each output frame, rounding half away from zero."""
    if target_frames < 1:
        raise ConfigError(f"target length must be >= 1, got {target_frames}")
    if source_frames < 1:
        raise ConfigError("source motion has no frames")
    if target_frames == 1:
        return np.zeros(1, dtype=np.int64)
    i = np.arange(target_frames, dtype=np.int64)
    span = target_frames - 1
    # floor(i*(S-1)/(F-1) + 1/2) in exact integer arithmetic
    return (2 * i * (source_frames - 1) + span) // (2 * span)


def interpolate_nearest(m: MotionSequence, target_frames: int) -> MotionSequence:
    """Resample to ``target_frames`` by copying whole skeleton frames (timestamps included)."""
    idx = nearest_indices(m.frames, target_frames)
    return MotionSequence(m.data[idx].copy(), m.topology)


def pad_subactions(track: SubActionTrack, l_max: int) -> SubActionTrack:
    n = len(track.segments)
    if n > l_max:
        raise CapacityError(f"{n} segments exceed the padded capacity {l_max}")
    return replace(track, padded_labels=tuple(track.classes) + (NONE_ID,) * (l_max - n))


def kept_frames(total: int, ratio: float) -> int:
    if not 0.0 < ratio <= 1.0:
        raise ConfigError(f"observation ratio must lie in (0, 1], got {ratio}")
    return max(1, math.floor(Fraction(repr(ratio)) * total))


def clip_track(track: SubActionTrack, n: int) -> SubActionTrack:
    return SubActionTrack(tuple((c, s, min(e, n)) for c, s, e in track.segments if s < n))


def truncate_to_ratio(sample: Sample, ratio: float) -> Sample:
    """Keep the leading ``max(1, floor(ratio * frames))`` raw frames and clip the track to them."""
    n = kept_frames(sample.motion.frames, ratio)
    if n == sample.motion.frames:
        return sample
    motion = MotionSequence(sample.motion.data[:n].copy(), sample.motion.topology)
    return replace(sample, motion=motion, track=clip_track(sample.track, n))


# synthetic compositional motion

DEFAULT_TOPOLOGY = ((0, 1), (1, 2), (2, 3), (2, 4), (2, 5), (0, 6), (0, 7))
_REST = np.array(
    [[0, 0, 1.0], [0, 0, 1.4], [0, 0, 1.7], [0, 0, 1.9], [-0.4, 0, 1.5], [0.4, 0, 1.5], [-0.2, 0, 0.1], [0.2, 0, 0.1]]
)
_VERBS = ("raise", "swing", "twist", "push", "shake", "lift", "circle", "stretch", "kick", "bend", "wave", "tap")
_PARTS = ("left arm", "right arm", "left leg", "right leg", "torso", "head")


@dataclass
class GeneratorConfig:
    n_holistic: int = 8
    n_primitives: int = 12
    n_train: int = 200
    n_test: int = 100
    joints: int = 8
    min_segment_frames: int = 12
    max_segment_frames: int = 28
    min_grammar: int = 2
    max_grammar: int = 4
    fps: float = 30.0
    noise: float = 1.0
    # pairs of holistic classes built from the same primitives in a different order
    reordered_pairs: bool = True
    topology: tuple[tuple[int, int], ...] | None = None

    def validate(self) -> None:
        if self.n_holistic < 2:
            raise ConfigError("the generator needs at least 2 holistic classes")
        if self.n_primitives < self.max_grammar or self.min_grammar < 2 or self.max_grammar > 4:
            raise ConfigError("grammars hold 2-4 primitives drawn without replacement")
        if self.min_grammar > self.max_grammar or self.min_segment_frames < 1:
            raise ConfigError("inconsistent grammar or segment length bounds")
        if self.joints < 2:
            raise ConfigError("the generator needs at least 2 joints")


def _default_topology(joints: int) -> tuple[tuple[int, int], ...]:
    if joints == len(_REST):
        return DEFAULT_TOPOLOGY
    return tuple((j, j + 1) for j in range(joints - 1))


def _rest_pose(joints: int) -> np.ndarray:
    if joints <= len(_REST):
        return _REST[:joints].copy()
    extra = np.stack([np.array([0.1 * j, 0.0, 1.0]) for j in range(joints - len(_REST))])
    return np.vstack([_REST, extra])


@dataclass(frozen=True)
class Primitive:
    text: str
    joints: tuple[int, ...]
    amplitude: np.ndarray = field(compare=False)  # (active joints, 3)
    frequency: float = 1.0
    phase: float = 0.0
    drift: np.ndarray = field(default=None, compare=False)  # (active joints, 3)

    def displacement(self, u: np.ndarray) -> np.ndarray:
        """Offsets of the active joints at normalized times ``u`` in [0, 1]; shape (len(u), active, 3)."""
        wave = np.sin(2 * np.pi * self.frequency * u + self.phase)[:, None, None]
        return wave * self.amplitude[None] + u[:, None, None] * self.drift[None]


def build_grammar(cfg: GeneratorConfig, seed: int) -> tuple[list[Primitive], list[tuple[int, ...]], LabelMap]:
    """Primitive templates, per-class primitive sequences (ids from 1) and the label tables."""
    cfg.validate()
    rng = np.random.default_rng([seed, 0])
    texts: list[str] = []
    for i in range(cfg.n_primitives):
        verb = _VERBS[i % len(_VERBS)]
        part = _PARTS[(i * 5 + i // len(_VERBS)) % len(_PARTS)]
        texts.append(f"{verb} {part}")
    prims = []
    for text in texts:
        k = int(rng.integers(2, min(4, cfg.joints) + 1))
        joints = tuple(sorted(int(j) for j in rng.choice(cfg.joints, size=k, replace=False)))
        prims.append(
            Primitive(
                text=text,
                joints=joints,
                amplitude=rng.uniform(0.3, 0.8, size=(k, 3)) * rng.choice([-1, 1], size=(k, 3)),
                frequency=float(rng.choice([0.5, 1.0, 1.5])),
                phase=float(rng.uniform(0, 2 * np.pi)),
                drift=rng.uniform(-0.4, 0.4, size=(k, 3)),
            )
        )
    grammars: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    while len(grammars) < cfg.n_holistic:
        size = int(rng.integers(cfg.min_grammar, cfg.max_grammar + 1))
        g = tuple(int(p) + 1 for p in rng.choice(cfg.n_primitives, size=size, replace=False))
        if g in seen:
            continue
        pair = tuple(reversed(g))
        if cfg.reordered_pairs and len(grammars) + 1 < cfg.n_holistic and pair not in seen:
            grammars += [g, pair]
            seen.update((g, pair))
        elif not cfg.reordered_pairs or len(grammars) + 1 == cfg.n_holistic:
            grammars.append(g)
            seen.add(g)
    sub = {NONE_ID: NONE_TEXT, **{i + 1: t for i, t in enumerate(texts)}}
    holistic = {c: " then ".join(texts[p - 1] for p in g) for c, g in enumerate(grammars)}
    return prims, grammars, LabelMap(holistic=holistic, sub=sub)


def _render(
    prims: Sequence[Primitive], grammar: Sequence[int], cfg: GeneratorConfig, rest: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, list[Segment]]:
    lengths = rng.integers(cfg.min_segment_frames, cfg.max_segment_frames + 1, size=len(grammar))
    total = int(lengths.sum())
    pos = np.repeat(rest[None], total, axis=0)
    scale = rng.uniform(0.8, 1.2)
    segments: list[Segment] = []
    start = 0
    carry = np.zeros_like(rest)
    for p, n in zip(grammar, lengths):
        prim = prims[p - 1]
        u = np.linspace(0.0, 1.0, int(n))
        disp = scale * prim.displacement(u)
        block = np.repeat(carry[None], int(n), axis=0)
        block[:, list(prim.joints)] += disp
        pos[start : start + n] += block
        carry = carry * 0.5
        carry[list(prim.joints)] += 0.5 * disp[-1]
        segments.append((p, start, start + int(n)))
        start += int(n)
    pos += rng.normal(0.0, cfg.noise, size=pos.shape)
    pos += rng.normal(0.0, 0.1, size=(1, 1, 3))
    t = np.arange(total) / cfg.fps
    data = np.concatenate([pos, np.broadcast_to(t[:, None, None], (total, rest.shape[0], 1))], axis=2)
    return data, segments


def _sample_seed(seed: int, split: str, index: int) -> list[int]:
    return [seed, 1 if split == "train" else 2, index]


def generate_synthetic(cfg: GeneratorConfig, seed: int, split: str = "train") -> Dataset:
    """Deterministic compositional dataset; holistic classes assigned round-robin."""
    prims, grammars, labels = build_grammar(cfg, seed)
    topology = cfg.topology or _default_topology(cfg.joints)
    rest = _rest_pose(cfg.joints)
    count = cfg.n_train if split == "train" else cfg.n_test
    samples = []
    for i in range(count):
        label = i % cfg.n_holistic
        rng = np.random.default_rng(_sample_seed(seed, split, i))
        data, segments = _render(prims, grammars[label], cfg, rest, rng)
        samples.append(
            Sample(
                motion=MotionSequence(data, tuple(tuple(e) for e in topology)),
                track=SubActionTrack(tuple(segments)),
                holistic_label=label,
                sample_id=f"{split}-{i:05d}",
            )
        )
    return Dataset(samples, labels)


def generate_splits(cfg: GeneratorConfig, seed: int) -> tuple[Dataset, Dataset]:
    return generate_synthetic(cfg, seed, "train"), generate_synthetic(cfg, seed, "test")


# JSON-lines storage


def _sample_to_record(s: Sample) -> dict:
    m = s.motion
    return {
        "id": s.sample_id,
        "label": s.holistic_label,
        "joints": m.joints,
        "frames": m.frames,
        "channels": np.transpose(m.data, (1, 0, 2)).reshape(-1).tolist(),
        "topology": [list(e) for e in m.topology],
        "segments": [list(seg) for seg in s.track.segments],
    }


def _record_to_sample(rec: dict, labels: LabelMap, line: int) -> Sample:
    try:
        joints, frames = int(rec["joints"]), int(rec["frames"])
        flat = np.asarray(rec["channels"], dtype=np.float64)
        if flat.size != joints * frames * 4:
            raise ParseError(f"channels hold {flat.size} values, expected {joints * frames * 4}", line)
        data = np.transpose(flat.reshape(joints, frames, 4), (1, 0, 2)).copy()
        topology = tuple((int(a), int(b)) for a, b in rec["topology"])
        segments = tuple((int(c), int(a), int(b)) for c, a, b in rec["segments"])
        label = int(rec["label"])
        sample_id = str(rec["id"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed sample record: {exc!r}", line) from None
    if label not in labels.holistic:
        raise ValidationError(f"line {line}: unknown holistic class id {label}")
    for c, _, _ in segments:
        if c not in labels.sub or c == NONE_ID:
            raise ValidationError(f"line {line}: unknown sub-action class id {c}")
    motion = MotionSequence(data, topology)
    try:
        motion.validate(strict_time=False)
        track = SubActionTrack(segments)
        track.validate(frames)
    except ValidationError as exc:
        raise ValidationError(f"line {line}: {exc}") from None
    return Sample(motion, track, label, sample_id)


def labels_path_for(path: Path) -> Path:
    return Path(path).parent / "labels.json"


def write_dataset(dataset: Dataset, path: Path, labels_path: Path | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dataset.labels.save(labels_path or labels_path_for(path))
    with open(path, "w") as fh:
        fh.write(json.dumps({"format": DATASET_FORMAT, "version": DATASET_VERSION}) + "\n")
        for s in dataset.samples:
            fh.write(json.dumps(_sample_to_record(s), separators=(",", ":")) + "\n")


def read_dataset(path: Path, labels_path: Path | None = None) -> Dataset:
    path = Path(path)
    labels = LabelMap.load(labels_path or labels_path_for(path))
    samples = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
            if lineno == 1:
                if rec.get("format") != DATASET_FORMAT or rec.get("version") != DATASET_VERSION:
                    raise ParseError(f"missing or unsupported format header {rec}", lineno)
                continue
            samples.append(_record_to_sample(rec, labels, lineno))
    if not samples and path.stat().st_size == 0:
        raise ParseError("empty dataset file", 1)
    return Dataset(samples, labels)


def stable_seed(*parts) -> int:
    """64-bit seed derived from arbitrary printable parts (independent of PYTHONHASHSEED)."""
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def relabel_subactions(dataset: Dataset, mapping: dict[int, int], labels: LabelMap) -> Dataset:
    """Apply a sub-action id remapping (e.g. from label merging), fusing adjacent equal segments."""
    out = []
    for s in dataset.samples:
        segs: list[list[int]] = []
        for c, a, b in s.track.segments:
            c = mapping[c]
            if segs and segs[-1][0] == c:
                segs[-1][2] = b
            else:
                segs.append([c, a, b])
        out.append(replace(s, track=SubActionTrack(tuple(tuple(x) for x in segs))))
    return Dataset(out, labels)


def iter_ratios(ratios: Iterable[float]) -> list[float]:
    out = [float(r) for r in ratios]
    for r in out:
        kept_frames(1, r)
    return out
