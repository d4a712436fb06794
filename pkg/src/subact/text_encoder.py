"""From-scratch CLIP-style text encoder over the word-level vocabulary."""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .data import SubActionTrack
from .errors import DimensionError
from .labels import CONTEXT_LENGTH, LabelMap, TokenSequence, Vocabulary, retrieve_text
from .tensor.nn import LayerNorm, Linear, Module


class SelfAttention(Module):
    def __init__(self, d: int, heads: int, rng: np.random.Generator):
        if d % heads:
            raise DimensionError(f"width {d} is not divisible by {heads} heads")
        self.heads = heads
        self.q = Linear(d, d, rng)
        self.k = Linear(d, d, rng)
        self.v = Linear(d, d, rng)
        self.out = Linear(d, d, rng)

    def _split(self, x: T.Tensor) -> T.Tensor:
        n, length, d = x.shape
        return x.reshape(n, length, self.heads, d // self.heads).transpose(0, 2, 1, 3)

    def forward(self, x: T.Tensor, mask: np.ndarray) -> T.Tensor:
        n, length, d = x.shape
        q, k, v = self._split(self.q(x)), self._split(self.k(x)), self._split(self.v(x))
        scores = T.matmul(q, k.swapaxes(-1, -2)) * (1.0 / np.sqrt(d // self.heads))
        weights = T.softmax(T.masked_fill(scores, mask), axis=-1)
        ctx = T.matmul(weights, v).transpose(0, 2, 1, 3).reshape(n, length, d)
        return self.out(ctx)


class TransformerBlock(Module):
    """Pre-norm residual block: self-attention then a GELU feed-forward."""

    def __init__(self, d: int, heads: int, ff_mult: int, rng: np.random.Generator):
        self.norm1 = LayerNorm(d)
        self.attn = SelfAttention(d, heads, rng)
        self.norm2 = LayerNorm(d)
        self.ff1 = Linear(d, ff_mult * d, rng)
        self.ff2 = Linear(ff_mult * d, d, rng)

    def forward(self, x: T.Tensor, mask: np.ndarray) -> T.Tensor:
        x = x + self.attn(self.norm1(x), mask)
        return x + self.ff2(T.gelu(self.ff1(self.norm2(x))))


class TextEncoder(Module):
    """Token + learned positional embedding, causal transformer, final layer norm.

    A sequence is summarized by its feature at the EOS position (``pooling="eos"``)
    or by the mean over real tokens (``pooling="mean"``).
    """

    def __init__(
        self,
        vocab_size: int,
        rng: np.random.Generator,
        d_model: int = 64,
        n_layers: int = 2,
        heads: int = 4,
        ff_mult: int = 4,
        context_length: int = CONTEXT_LENGTH,
        pooling: str = "eos",
    ):
        self.vocab_size = vocab_size
        self.context_length = context_length
        self.pooling = pooling
        self.token_embedding = T.Parameter(rng.normal(0.0, 0.02, size=(vocab_size, d_model)), init_spec="normal(0, 0.02)")
        self.position_embedding = T.Parameter(
            rng.normal(0.0, 0.01, size=(context_length, d_model)), init_spec="normal(0, 0.01)"
        )
        self.layers = [TransformerBlock(d_model, heads, ff_mult, rng) for _ in range(n_layers)]
        self.final_norm = LayerNorm(d_model)
        self._causal = np.triu(np.ones((context_length, context_length), dtype=bool), k=1)

    def forward(self, ids: np.ndarray, lengths: np.ndarray) -> T.Tensor:
        """``ids`` (n, context) token ids, ``lengths`` (n,) real-token counts -> (n, d_model)."""
        ids = np.asarray(ids, dtype=np.int64)
        lengths = np.asarray(lengths, dtype=np.int64)
        if ids.ndim != 2 or ids.shape[1] != self.context_length:
            raise DimensionError(f"token ids must have shape (n, {self.context_length}), got {ids.shape}")
        if ids.size and (ids.max() >= self.vocab_size or ids.min() < 0):
            raise DimensionError(f"token id {int(ids.max())} outside a vocabulary of {self.vocab_size}")
        # causal masking makes columns past the longest sequence inert, so they are not computed
        window = int(lengths.max()) if ids.size else 1
        ids = ids[:, :window]
        x = T.take_rows(self.token_embedding, ids) + self.position_embedding[:window]
        pad_keys = (np.arange(window)[None, :] >= lengths[:, None])[:, None, None, :]
        mask = self._causal[None, None, :window, :window] | pad_keys
        for layer in self.layers:
            x = layer(x, mask)
        if self.pooling == "mean":
            weights = (np.arange(window)[None, :] < lengths[:, None]) / lengths[:, None]
            pooled = T.tsum(x * weights[:, :, None], axis=1)
        else:
            pooled = x[np.arange(ids.shape[0]), lengths - 1]
        return self.final_norm(pooled)


def encode_tokens(tokens: TokenSequence, encoder: TextEncoder) -> T.Tensor:
    return encoder(tokens.ids[None], np.array([tokens.length]))[0]


class LabelTextEncoder:
    """Encodes label ids through text retrieval, tokenization and the shared encoder.

    Each distinct label text in a request is encoded once and gathered back.
    """

    def __init__(self, encoder: TextEncoder, vocab: Vocabulary, labels: LabelMap):
        self.encoder = encoder
        self.vocab = vocab
        self.labels = labels
        self._tokens: dict[str, TokenSequence] = {}

    def tokens_for(self, text: str) -> TokenSequence:
        tok = self._tokens.get(text)
        if tok is None:
            tok = self._tokens[text] = self.vocab.tokenize(text)
        return tok

    def encode(self, sub_ids: np.ndarray | None = None, hol_ids: np.ndarray | None = None):
        """Returns ``(T_sub, T_hol)``; ``T_sub`` is (batch, L, D) and ``T_hol`` is (batch, D)."""
        texts: list[str] = []
        index: dict[str, int] = {}

        def slot(text: str) -> int:
            if text not in index:
                index[text] = len(texts)
                texts.append(text)
            return index[text]

        sub_slots = hol_slots = None
        if sub_ids is not None:
            sub_ids = np.asarray(sub_ids)
            sub_slots = np.array([slot(retrieve_text(i, self.labels, "sub")) for i in sub_ids.reshape(-1)]).reshape(sub_ids.shape)
        if hol_ids is not None:
            hol_ids = np.asarray(hol_ids)
            hol_slots = np.array([slot(retrieve_text(i, self.labels, "holistic")) for i in hol_ids.reshape(-1)]).reshape(hol_ids.shape)
        if not texts:
            return None, None
        toks = [self.tokens_for(t) for t in texts]
        feats = self.encoder(np.stack([t.ids for t in toks]), np.array([t.length for t in toks]))
        t_sub = T.take_rows(feats, sub_slots) if sub_slots is not None else None
        t_hol = T.take_rows(feats, hol_slots) if hol_slots is not None else None
        return t_sub, t_hol


def encode_subactions(track: SubActionTrack, labels: LabelMap, vocab: Vocabulary, encoder: TextEncoder) -> T.Tensor:
    """(L_max, D) features for a padded track; padding rows encode the text "none"."""
    ids = track.padded_labels if track.padded_labels is not None else tuple(track.classes)
    t_sub, _ = LabelTextEncoder(encoder, vocab, labels).encode(sub_ids=np.array([ids]))
    return t_sub[0]


def encode_holistic(label: int, labels: LabelMap, vocab: Vocabulary, encoder: TextEncoder) -> T.Tensor:
    _, t_hol = LabelTextEncoder(encoder, vocab, labels).encode(hol_ids=np.array([label]))
    return t_hol[0]


class OneHotSubEncoder(Module):
    """Affine map of one-hot sub-action classes; the text-retrieval-off replacement for ``T_sub``."""

    def __init__(self, n_classes: int, d_model: int, rng: np.random.Generator):
        self.weight = T.Parameter(rng.normal(0.0, 1.0 / np.sqrt(d_model), size=(n_classes, d_model)), init_spec="normal")
        self.bias = T.Parameter(np.zeros(d_model), init_spec="zeros")

    def forward(self, sub_ids: np.ndarray) -> T.Tensor:
        # one_hot(ids) @ W + b without materializing the one-hot rows
        return T.take_rows(self.weight, np.asarray(sub_ids)) + self.bias

