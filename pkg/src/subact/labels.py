"""Label tables, label merging by embedding similarity, and word-level tokenization."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InputError, LabelLookupError, ValidationError

NONE_ID = 0
NONE_TEXT = "none"

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<pad>", "<bos>", "<eos>", "<unk>")
CONTEXT_LENGTH = 77


@dataclass
class LabelMap:
    """Id-to-text tables for holistic actions and sub-actions.

    Sub-action id 0 is reserved for the padding class with text ``"none"``.
    """

    holistic: dict[int, str]
    sub: dict[int, str]
    _rev_hol: dict[str, int] = field(init=False, repr=False, compare=False)
    _rev_sub: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.holistic = {int(k): v for k, v in self.holistic.items()}
        self.sub = {int(k): v for k, v in self.sub.items()}
        for kind, table in (("holistic", self.holistic), ("sub", self.sub)):
            if sorted(table) != list(range(len(table))):
                raise ValidationError(f"{kind} label ids must be dense from 0")
            for k, text in table.items():
                if not text or not text.strip():
                    raise ValidationError(f"{kind} label {k} has empty text")
        if self.sub.get(NONE_ID) != NONE_TEXT:
            raise ValidationError(f"sub-action id {NONE_ID} must be reserved for {NONE_TEXT!r}")
        self._rev_hol = {v: k for k, v in self.holistic.items()}
        self._rev_sub = {v: k for k, v in self.sub.items()}

    @property
    def n_holistic(self) -> int:
        return len(self.holistic)

    @property
    def n_sub(self) -> int:
        """Sub-action table size including the reserved padding class."""
        return len(self.sub)

    def sub_classes(self) -> list[int]:
        return [k for k in sorted(self.sub) if k != NONE_ID]

    def holistic_id(self, text: str) -> int:
        return self._rev_hol[text]

    def sub_id(self, text: str) -> int:
        return self._rev_sub[text]

    def to_json(self) -> dict:
        return {
            "holistic": {str(k): v for k, v in sorted(self.holistic.items())},
            "sub": {str(k): v for k, v in sorted(self.sub.items())},
        }

    @classmethod
    def from_json(cls, obj: dict) -> LabelMap:
        return cls(holistic=obj["holistic"], sub=obj["sub"])

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path: Path) -> LabelMap:
        return cls.from_json(json.loads(Path(path).read_text()))

    def texts(self) -> list[str]:
        return [self.holistic[k] for k in sorted(self.holistic)] + [self.sub[k] for k in sorted(self.sub)]


def retrieve_text(label_id: int, labels: LabelMap, kind: str = "sub") -> str:
    if kind not in ("sub", "holistic"):
        raise InputError(f"kind must be 'sub' or 'holistic', got {kind!r}")
    table = labels.sub if kind == "sub" else labels.holistic
    try:
        return table[int(label_id)]
    except KeyError:
        raise LabelLookupError(f"unknown {kind} label id {label_id}") from None


def _word_vector(word: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.sha256(f"{seed}:{word}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little")).standard_normal(dim)


def embed_label(text: str, dim: int = 64, seed: int = 0) -> np.ndarray:
    """Deterministic bag-of-words embedding: hashed Gaussian word vectors, averaged, unit-normalized."""
    words = text.lower().split()
    if not words:
        raise InputError("cannot embed empty label text")
    v = np.mean([_word_vector(w, dim, seed) for w in words], axis=0)
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class MergeResult:
    group: dict[str, int]
    representative: dict[str, str]

    def groups(self) -> list[set[str]]:
        out: dict[int, set[str]] = {}
        for label, g in self.group.items():
            out.setdefault(g, set()).add(label)
        return [out[g] for g in sorted(out)]

    def write_report(self, path: Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "group", "representative"])
            for label in sorted(self.group):
                w.writerow([label, self.group[label], self.representative[label]])


def merge_labels(
    labels: Sequence[str],
    threshold: float = 0.9,
    embed: Callable[[str], np.ndarray] = embed_label,
) -> MergeResult:
    """Single-linkage grouping: labels whose cosine similarity reaches ``threshold`` are linked.

    Groups are connected components, represented by their lexicographically
    smallest member and numbered in representative order.
    """
    uniq = sorted(set(labels))
    if not uniq:
        raise InputError("merge_labels needs at least one label")
    vecs = np.stack([embed(t) for t in uniq])
    sims = vecs @ vecs.T
    linked = sims >= threshold
    np.fill_diagonal(linked, True)
    rows, cols = np.nonzero(linked)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(uniq), len(uniq)))
    _, comp = connected_components(graph, directed=False)
    rep_of_comp: dict[int, str] = {}
    for label, c in zip(uniq, comp):
        rep_of_comp.setdefault(int(c), label)  # uniq is sorted, so first seen is smallest
    ordered = sorted(rep_of_comp.values())
    gid = {rep: i for i, rep in enumerate(ordered)}
    rep = {label: rep_of_comp[int(c)] for label, c in zip(uniq, comp)}
    return MergeResult(group={k: gid[v] for k, v in rep.items()}, representative=rep)


@dataclass(frozen=True)
class TokenSequence:
    ids: np.ndarray
    length: int

    @property
    def eos_index(self) -> int:
        return self.length - 1


class Vocabulary:
    """Word-level vocabulary with fixed special ids and a 77-token context."""

    def __init__(self, words: Iterable[str], context_length: int = CONTEXT_LENGTH):
        self.context_length = context_length
        self.itos = list(SPECIALS) + sorted(set(words) - set(SPECIALS))
        self.stoi = {w: i for i, w in enumerate(self.itos)}

    @classmethod
    def from_texts(cls, texts: Iterable[str], context_length: int = CONTEXT_LENGTH) -> Vocabulary:
        return cls({w for t in texts for w in t.lower().split()}, context_length)

    @classmethod
    def from_labels(cls, labels: LabelMap) -> Vocabulary:
        return cls.from_texts(labels.texts())

    def __len__(self) -> int:
        return len(self.itos)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos and self.context_length == other.context_length

    def tokenize(self, text: str) -> TokenSequence:
        words = text.lower().split()[: self.context_length - 2]
        ids = np.full(self.context_length, PAD, dtype=np.int64)
        body = [self.stoi.get(w, UNK) for w in words]
        ids[0] = BOS
        ids[1 : 1 + len(body)] = body
        ids[1 + len(body)] = EOS
        return TokenSequence(ids=ids, length=len(body) + 2)

    def to_json(self) -> dict:
        return {"context_length": self.context_length, "tokens": self.itos}

    @classmethod
    def from_json(cls, obj: dict) -> Vocabulary:
        vocab = cls((), obj["context_length"])
        vocab.itos = list(obj["tokens"])
        vocab.stoi = {w: i for i, w in enumerate(vocab.itos)}
        if tuple(vocab.itos[:4]) != SPECIALS:
            raise ValidationError("vocabulary specials must occupy ids 0-3")
        return vocab

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path: Path) -> Vocabulary:
        return cls.from_json(json.loads(Path(path).read_text()))


def tokenize(text: str, vocab: Vocabulary) -> TokenSequence:
    return vocab.tokenize(text)
