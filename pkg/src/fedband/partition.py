"""Dyadic binary partition of the unit box [0,1]^d.

Cells form a binary tree: the root covers the whole box, and each node
splits in half along one dimension, cycling through dimensions by depth.
All geometry here is deterministic and shared by every simulated client,
and midpoints are the only points ever sampled, so boundary ownership of
closed cells never matters in practice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

# Widths underflow well before this, and index arithmetic stays exact in
# 64-bit floats only while 2^(depth+1) is representable.
MAX_DEPTH = 60


class PartitionError(ValueError):
    pass


class NodeId(NamedTuple):
    """Tree coordinate of a cell: depth h >= 0 and 1-based index i."""

    depth: int
    index: int


def root() -> NodeId:
    return NodeId(0, 1)


def _check(node) -> NodeId:
    h, i = node
    if h < 0 or h > MAX_DEPTH:
        raise PartitionError(f"node depth {h} outside [0, {MAX_DEPTH}]")
    if not 1 <= i <= (1 << h):
        raise PartitionError(f"node index {i} invalid at depth {h}")
    return NodeId(h, i)


def children(node, max_depth: int = MAX_DEPTH) -> tuple[NodeId, NodeId]:
    """Both halves of a cell, ((h+1, 2i-1), (h+1, 2i))."""
    h, i = _check(node)
    if h + 1 > max_depth:
        raise PartitionError(f"depth overflow: children of depth {h} exceed max depth {max_depth}")
    return NodeId(h + 1, 2 * i - 1), NodeId(h + 1, 2 * i)


def parent(node) -> NodeId:
    h, i = _check(node)
    if h == 0:
        raise PartitionError("root has no parent")
    return NodeId(h - 1, (i + 1) // 2)


def sibling(node) -> NodeId:
    h, i = _check(node)
    if h == 0:
        raise PartitionError("root has no sibling")
    return NodeId(h, i + 1 if i % 2 == 1 else i - 1)


@dataclass(frozen=True)
class Cell:
    """Closed box, one (lo, hi) interval per dimension."""

    bounds: tuple[tuple[float, float], ...]

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def width(self, k: int) -> float:
        lo, hi = self.bounds[k]
        return hi - lo

    def volume(self) -> float:
        v = 1.0
        for k in range(self.dim):
            v *= self.width(k)
        return v

    def diameter(self) -> float:
        """Sup-norm diameter, the largest side."""
        return max(self.width(k) for k in range(self.dim))

    def center(self) -> tuple[float, ...]:
        return tuple((lo + hi) / 2.0 for lo, hi in self.bounds)

    def contains(self, x) -> bool:
        if len(x) != self.dim:
            raise PartitionError(f"point dim {len(x)} != cell dim {self.dim}")
        return all(lo <= xi <= hi for xi, (lo, hi) in zip(x, self.bounds))


def _side_path(node: NodeId) -> list[int]:
    """Left/right (0/1) choices from the root down to node."""
    path = []
    n = node
    while n.depth > 0:
        path.append((n.index - 1) % 2)
        n = parent(n)
    path.reverse()
    return path


def cell(node, dim: int = 1) -> Cell:
    """Region of a node under cyclic halving (depth h splits dimension h mod dim)."""
    node = _check(node)
    if dim < 1:
        raise PartitionError(f"dimension {dim} must be >= 1")
    lo = [0.0] * dim
    hi = [1.0] * dim
    for level, side in enumerate(_side_path(node)):
        k = level % dim
        mid = (lo[k] + hi[k]) / 2.0
        if side == 0:
            hi[k] = mid
        else:
            lo[k] = mid
    return Cell(tuple(zip(lo, hi)))


def midpoint(node, dim: int = 1) -> tuple[float, ...]:
    return cell(node, dim).center()


def midpoint_1d(node) -> float:
    """Center of a one-dimensional cell, (2i-1) / 2^(h+1), exact in floats."""
    h, i = _check(node)
    return (2 * i - 1) / float(1 << (h + 1))


def locate(x, depth: int, dim: int = 1) -> NodeId:
    """Node at the given depth whose cell contains x.

    Points exactly on an interior cut belong to both closed cells; this maps
    them to the higher-index cell (except the domain edge x_k = 1).
    """
    if isinstance(x, (int, float)):
        x = (float(x),)
    if len(x) != dim:
        raise PartitionError(f"point dim {len(x)} != {dim}")
    if depth < 0 or depth > MAX_DEPTH:
        raise PartitionError(f"depth {depth} outside [0, {MAX_DEPTH}]")
    for k in range(dim):
        if not 0.0 <= x[k] <= 1.0:
            raise PartitionError(f"coordinate {x[k]} outside [0, 1]")
    if dim == 1:
        n = 1 << depth
        idx = min(int(x[0] * n), n - 1) + 1
        return NodeId(depth, idx)
    node = root()
    for level in range(depth):
        left, right = children(node)
        k = level % dim
        lo, hi = cell(node, dim).bounds[k]
        mid = (lo + hi) / 2.0
        node = right if x[k] >= mid else left
    return node


def diameter(depth: int, dim: int = 1) -> float:
    """Sup-norm diameter of any depth-h cell: 2^(-floor(h/dim))."""
    if depth < 0:
        raise PartitionError(f"negative depth {depth}")
    return 2.0 ** (-(depth // dim))


def default_constants(dim: int = 1) -> tuple[float, float]:
    """Tightest (nu1, rho) with diameter(h) <= nu1 * rho^h for cyclic halving."""
    if dim < 1:
        raise PartitionError(f"dimension {dim} must be >= 1")
    if dim == 1:
        return 1.0, 0.5
    return 2.0, 2.0 ** (-1.0 / dim)


@dataclass(frozen=True)
class PartitionSpec:
    """Partition parameters a whole run agrees on."""

    dimension: int = 1
    nu1: float = 1.0
    rho: float = 0.5
    max_depth: int = MAX_DEPTH

    def __post_init__(self):
        if self.dimension < 1:
            raise PartitionError(f"dimension {self.dimension} must be >= 1")
        if self.nu1 <= 0:
            raise PartitionError(f"nu1 {self.nu1} must be positive")
        if not 0.0 < self.rho < 1.0:
            raise PartitionError(f"rho {self.rho} must lie in (0, 1)")
        if not 0 < self.max_depth <= MAX_DEPTH:
            raise PartitionError(f"max_depth {self.max_depth} outside (0, {MAX_DEPTH}]")

    @classmethod
    def default(cls, dimension: int = 1) -> "PartitionSpec":
        nu1, rho = default_constants(dimension)
        return cls(dimension=dimension, nu1=nu1, rho=rho)

    def children(self, node) -> tuple[NodeId, NodeId]:
        return children(node, self.max_depth)

    def cell(self, node) -> Cell:
        return cell(node, self.dimension)

    def midpoint(self, node) -> tuple[float, ...]:
        return midpoint(node, self.dimension)

    def locate(self, x, depth: int) -> NodeId:
        return locate(x, depth, self.dimension)

    def diameter_bound(self, depth: int) -> float:
        """The assumed bound nu1 * rho^depth; actual diameters never exceed it."""
        return self.nu1 * self.rho**depth

    def check_diameter(self, depth: int) -> None:
        actual = diameter(depth, self.dimension)
        bound = self.diameter_bound(depth)
        if actual > bound * (1.0 + 1e-12):
            raise PartitionError(
                f"cell diameter {actual} at depth {depth} exceeds bound {bound}"
            )


def canonical_order(nodes) -> tuple[NodeId, ...]:
    """Sorted by (depth, index); the shared tie-break and scheduling order."""
    return tuple(sorted(NodeId(*n) for n in nodes))
