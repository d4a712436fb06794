"""Skeleton graph-convolution branch."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import tensor as T
from .errors import ConfigError, DimensionError
from .tensor.nn import BatchNorm, Module


class SkeletonGraph:
    """Fixed adjacency ``D^-1/2 (A + I) D^-1/2`` built from an undirected edge list."""

    def __init__(self, joints: int, edges: Sequence[tuple[int, int]] = (), normalize: bool = True):
        a = np.eye(joints)
        for i, j in edges:
            if not (0 <= i < joints and 0 <= j < joints):
                raise DimensionError(f"edge ({i}, {j}) outside {joints} joints")
            a[i, j] = a[j, i] = 1.0
        if normalize:
            d = 1.0 / np.sqrt(a.sum(axis=1))
            a = a * d[:, None] * d[None, :]
        self.joints = joints
        self.edges = tuple((int(i), int(j)) for i, j in edges)
        self.adjacency = a

    @classmethod
    def from_matrix(cls, adjacency: np.ndarray) -> SkeletonGraph:
        g = cls(adjacency.shape[0], (), normalize=False)
        g.adjacency = np.array(adjacency, dtype=np.float64)
        return g

    def permuted(self, perm: Sequence[int]) -> SkeletonGraph:
        """Graph with joints relabelled so that new joint ``k`` is old joint ``perm[k]``."""
        p = np.asarray(perm)
        return SkeletonGraph.from_matrix(self.adjacency[np.ix_(p, p)])


class GcnBlock(Module):
    """``relu(batchnorm(A X W))`` with ``A = base + B`` and ``B`` a learnable offset (zero init)."""

    def __init__(self, c_in: int, c_out: int, graph: SkeletonGraph, rng: np.random.Generator, learn_adjacency: bool = True):
        self.c_in, self.c_out = c_in, c_out
        self.base = graph.adjacency
        self.weight = T.Parameter(rng.normal(0.0, np.sqrt(2.0 / c_in), size=(c_in, c_out)), init_spec="he-normal")
        j = graph.joints
        self.adj_offset = T.Parameter(np.zeros((j, j)), init_spec="zeros") if learn_adjacency else None
        self.bn = BatchNorm(c_out)

    def adjacency(self) -> T.Tensor:
        return T.Tensor(self.base) if self.adj_offset is None else T.add(self.base, self.adj_offset)

    def forward(self, x) -> T.Tensor:
        return gcn_layer(x, self)


def gcn_layer(x, block: GcnBlock) -> T.Tensor:
    x = T.as_tensor(x)
    if x.shape[-1] != block.c_in or x.shape[-2] != block.base.shape[0]:
        raise DimensionError(
            f"gcn_layer: input {x.shape} does not match joints={block.base.shape[0]}, channels={block.c_in}"
        )
    mixed = T.matmul(T.matmul(block.adjacency(), x), block.weight)
    return T.relu(block.bn(mixed))


def channel_schedule(in_channels: int, d_model: int, n_blocks: int) -> list[tuple[int, int]]:
    half = max(1, d_model // 2)
    widths = [half if i < n_blocks // 2 else d_model for i in range(n_blocks)]
    widths[-1] = d_model
    ins = [in_channels] + widths[:-1]
    return list(zip(ins, widths))


class Backbone(Module):
    """N graph-convolution blocks, optional temporal stride-2 after chosen blocks, mean over joints.

    Input ``(batch, frames, joints, channels)``; output ``(batch, frames', d_model)``.
    """

    def __init__(
        self,
        graph: SkeletonGraph,
        rng: np.random.Generator,
        in_channels: int = 4,
        d_model: int = 64,
        n_blocks: int = 4,
        stride_blocks: Sequence[int] = (2,),
        learn_adjacency: bool = True,
    ):
        if n_blocks < 1:
            raise ConfigError("the backbone needs at least one block")
        self.graph = graph
        self.stride_blocks = tuple(stride_blocks)
        self.blocks = [GcnBlock(ci, co, graph, rng, learn_adjacency) for ci, co in channel_schedule(in_channels, d_model, n_blocks)]

    def output_frames(self, frames: int) -> int:
        for i in range(len(self.blocks)):
            if i in self.stride_blocks:
                frames //= 2
        if frames < 1:
            raise ConfigError("temporal striding leaves no frames; use longer inputs or fewer strides")
        return frames

    def forward(self, x) -> T.Tensor:
        x = T.as_tensor(x)
        if x.ndim == 3:
            x = x.reshape((1,) + x.shape)
        self.output_frames(x.shape[1])
        for i, block in enumerate(self.blocks):
            x = block(x)
            if i in self.stride_blocks:
                keep = 2 * (x.shape[1] // 2)
                x = x[:, 0:keep:2]
        return T.mean(x, axis=2)


def backbone_forward(x, backbone: Backbone) -> T.Tensor:
    return backbone(x)
