"""Frozen stand-ins for a pretrained sub-action segmenter."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import MotionSequence, SubActionTrack, stable_seed
from .errors import ConfigError, LabelLookupError, ParseError, UndefinedMetricError


def inject_errors(track: SubActionTrack, rate: float, seed, classes: Sequence[int]) -> SubActionTrack:
    """Relabel each segment with probability ``rate`` to a uniformly drawn *different* class.

    Boundaries and segment count are left untouched.
    """
    if not 0.0 <= rate <= 1.0:
        raise ConfigError(f"error rate must lie in [0, 1], got {rate}")
    classes = list(classes)
    if len(classes) < 2:
        raise ConfigError("error injection needs at least 2 sub-action classes")
    if rate == 0.0 or not track.segments:
        return SubActionTrack(track.segments)
    rng = np.random.default_rng(seed)
    flips = rng.random(len(track.segments)) < rate
    picks = rng.integers(0, len(classes) - 1, size=len(track.segments))
    out = []
    for (c, a, b), flip, k in zip(track.segments, flips, picks):
        if flip:
            others = [x for x in classes if x != c]
            c = others[int(k) % len(others)]
        out.append((c, a, b))
    return SubActionTrack(tuple(out))


def segmentation_accuracy(pred: SubActionTrack, truth: SubActionTrack) -> float:
    """Fraction of ground-truth segments whose class is matched at the same temporal position."""
    if not truth.segments:
        raise UndefinedMetricError("segmentation accuracy is undefined for a track with no segments")
    hits = sum(p == t for p, t in zip(pred.classes, truth.classes))
    return hits / len(truth.segments)


class SegmentationOracle:
    """Produces a sub-action track for a motion. Never trainable."""

    def segment(self, motion: MotionSequence, truth: SubActionTrack, sample_id: str = "") -> SubActionTrack:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


class GroundTruthOracle(SegmentationOracle):
    def segment(self, motion, truth, sample_id=""):
        return truth

    def describe(self):
        return {"kind": "ground_truth"}


@dataclass
class ErrorInjectedOracle(SegmentationOracle):
    rate: float
    seed: int
    classes: Sequence[int]

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ConfigError(f"error rate must lie in [0, 1], got {self.rate}")

    def segment(self, motion, truth, sample_id=""):
        return inject_errors(truth, self.rate, stable_seed(self.seed, sample_id), self.classes)

    def describe(self):
        return {"kind": "error_injected", "rate": self.rate, "seed": self.seed}


class FileOracle(SegmentationOracle):
    """Replays predictions stored as JSON lines ``{"id": ..., "segments": [[class, start, end], ...]}``."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.predictions = read_predictions(self.path)

    def segment(self, motion, truth, sample_id=""):
        try:
            return self.predictions[sample_id]
        except KeyError:
            raise LabelLookupError(f"no stored prediction for sample {sample_id!r} in {self.path}") from None

    def describe(self):
        return {"kind": "from_file", "path": str(self.path)}


def write_predictions(path: Path, predictions: dict[str, SubActionTrack]) -> None:
    with open(path, "w") as fh:
        for sid in sorted(predictions):
            segs = [list(s) for s in predictions[sid].segments]
            fh.write(json.dumps({"id": sid, "segments": segs}) + "\n")


def read_predictions(path: Path) -> dict[str, SubActionTrack]:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                out[str(rec["id"])] = SubActionTrack(tuple((int(c), int(a), int(b)) for c, a, b in rec["segments"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"malformed prediction record: {exc!r}", lineno) from None
    return out


def make_oracle(spec: dict | None, classes: Sequence[int]) -> SegmentationOracle:
    spec = spec or {"kind": "ground_truth"}
    kind = spec.get("kind", "ground_truth")
    if kind == "ground_truth":
        return GroundTruthOracle()
    if kind == "error_injected":
        return ErrorInjectedOracle(float(spec["rate"]), int(spec.get("seed", 0)), classes)
    if kind == "from_file":
        return FileOracle(Path(spec["path"]))
    raise ConfigError(f"unknown oracle kind {kind!r}")
