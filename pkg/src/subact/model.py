"""The dual-branch recognizer: GCN kinematics fused with sub-action text semantics."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from . import tensor as T
from .backbone import Backbone, SkeletonGraph
from .errors import CompatibilityError, ConfigError
from .fusion import ATTENTION_VARIANTS, Classifier, Fusion, Mlp1
from .labels import LabelMap, Vocabulary
from .objectives import LossWeights, Mlp2, recognition_loss, semantic_loss, total_loss
from .tensor.nn import Module, number_dropouts
from .text_encoder import LabelTextEncoder, OneHotSubEncoder, TextEncoder


@dataclass
class ModelConfig:
    joints: int = 8
    frames: int = 32
    channels: int = 4
    d_model: int = 32
    n_blocks: int = 4
    stride_blocks: tuple[int, ...] = (2,)
    learn_adjacency: bool = True
    text_layers: int = 2
    text_heads: int = 4
    ff_mult: int = 4
    text_pooling: str = "eos"
    d_k: int | None = None
    fusion: str = "cross_attention"
    dropout: float = 0.1
    l_max: int = 4
    n_holistic: int = 8
    text_retrieval: bool = True
    classifier_bias: bool = True
    qkv_init_std: float = 1e-3
    topology: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        self.stride_blocks = tuple(int(s) for s in self.stride_blocks)
        self.topology = tuple((int(a), int(b)) for a, b in self.topology)
        if self.d_k is None:
            self.d_k = self.d_model
        if self.text_pooling not in ("eos", "mean"):
            raise ConfigError(f"unknown text pooling {self.text_pooling!r}")

    def to_json(self) -> dict:
        d = asdict(self)
        d["stride_blocks"] = list(self.stride_blocks)
        d["topology"] = [list(e) for e in self.topology]
        return d

    @classmethod
    def from_json(cls, obj: dict) -> ModelConfig:
        obj = dict(obj)
        obj["stride_blocks"] = tuple(obj.get("stride_blocks", (2,)))
        obj["topology"] = tuple(tuple(e) for e in obj.get("topology", ()))
        return cls(**obj)


class ModelOutput(NamedTuple):
    logits: T.Tensor
    attention: T.Tensor | None
    t_sub: T.Tensor | None
    t_hol: T.Tensor | None


class SubActionModel(Module):
    def __init__(self, cfg: ModelConfig, vocab: Vocabulary, labels: LabelMap, seed: int = 0):
        if labels.n_holistic != cfg.n_holistic:
            raise CompatibilityError(f"config expects {cfg.n_holistic} holistic classes, label map has {labels.n_holistic}")
        rng = np.random.default_rng([seed, 17])
        self.cfg = cfg
        self.vocab = vocab
        self.labels = labels
        graph = SkeletonGraph(cfg.joints, cfg.topology)
        self.backbone = Backbone(
            graph, rng, cfg.channels, cfg.d_model, cfg.n_blocks, cfg.stride_blocks, cfg.learn_adjacency
        )
        self.t_out = self.backbone.output_frames(cfg.frames)
        self.text_encoder = TextEncoder(
            len(vocab), rng, cfg.d_model, cfg.text_layers, cfg.text_heads, cfg.ff_mult, vocab.context_length, cfg.text_pooling
        )
        self.onehot = OneHotSubEncoder(labels.n_sub, cfg.d_model, rng) if not cfg.text_retrieval else None
        self.mlp1 = Mlp1(cfg.d_model, cfg.l_max, self.t_out, rng, cfg.dropout)
        self.fusion = Fusion(cfg.fusion, cfg.d_model, cfg.d_k, rng, cfg.qkv_init_std)
        self.classifier = Classifier(cfg.d_model, cfg.n_holistic, rng, cfg.classifier_bias)
        self.mlp2 = Mlp2(cfg.l_max, cfg.d_model, rng, cfg.dropout)
        self.label_text = LabelTextEncoder(self.text_encoder, vocab, labels)
        self.assign_names()
        number_dropouts(self, seed)

    def forward(self, motion: np.ndarray, sub_ids: np.ndarray, hol_ids: np.ndarray | None = None) -> ModelOutput:
        """``motion`` (batch, frames, joints, 4); ``sub_ids`` (batch, L) padded; ``hol_ids`` (batch,) or None."""
        x = self.backbone(motion)
        t_sub = t_hol = None
        if self.fusion.uses_semantics or hol_ids is not None:
            want_sub = sub_ids if self.onehot is None else None
            t_sub, t_hol = self.label_text.encode(want_sub, hol_ids)
            if self.onehot is not None:
                t_sub = self.onehot(sub_ids)
        tm = self.mlp1(t_sub) if self.fusion.uses_semantics else None
        fused, attn = self.fusion(x, tm)
        return ModelOutput(self.classifier(fused), attn, t_sub, t_hol)

    def loss(self, out: ModelOutput, y: np.ndarray, weights: LossWeights) -> tuple[T.Tensor, T.Tensor, T.Tensor | None]:
        l_recog = recognition_loss(out.logits, y)
        if weights.lambda2 == 0 or out.t_hol is None:
            return total_loss(l_recog, 0.0, weights), l_recog, None
        l_sem = semantic_loss(out.t_sub, out.t_hol, self.mlp2)
        return total_loss(l_recog, l_sem, weights), l_recog, l_sem

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        state.update({f"buffer:{name}": b.copy() for name, b in self.named_buffers()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> list[str]:
        """Copies matching arrays in place; returns the names that were skipped."""
        skipped = []
        targets = {name: p.data for name, p in self.named_parameters()}
        targets.update({f"buffer:{name}": b for name, b in self.named_buffers()})
        for name, dst in targets.items():
            src = state.get(name)
            if src is None or src.shape != dst.shape:
                if strict:
                    raise CompatibilityError(f"checkpoint entry {name!r} missing or mis-shaped")
                skipped.append(name)
                continue
            dst[...] = src
        if strict and set(state) - set(targets):
            raise CompatibilityError(f"unexpected checkpoint entries: {sorted(set(state) - set(targets))[:5]}")
        return skipped

    @property
    def has_attention(self) -> bool:
        return self.cfg.fusion in ATTENTION_VARIANTS
