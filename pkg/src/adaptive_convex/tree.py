"""Binary interval tree shared by the samplers, and the piecewise-linear model they emit."""

from __future__ import annotations

import bisect
import csv
import os
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .convex_fn import Interval
from .errors import ShapeError, StateError


@dataclass(eq=False)
class Node:
    lo: float
    hi: float
    parent: Optional["Node"] = None
    left: Optional["Node"] = None
    right: Optional["Node"] = None
    depth: int = 0

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def interval(self) -> Interval:
        return Interval(self.lo, self.hi)

    def points(self) -> tuple[float, float, float]:
        return self.lo, self.mid, self.hi

    def __repr__(self):
        return f"Node([{self.lo}, {self.hi}])"


class IntervalTree:
    """Dyadic refinement tree over [0, 1].

    Leaves are kept sorted by left endpoint, so they always partition
    [0, 1] into adjacent intervals.
    """

    def __init__(self):
        self.root = Node(0.0, 1.0)
        self._leaves: list[Node] = [self.root]
        self._los: list[float] = [0.0]
        self.splits: list[Node] = []

    @property
    def leaves(self) -> list[Node]:
        return list(self._leaves)

    def __len__(self) -> int:
        return len(self._leaves)

    def iter_leaves(self) -> Iterator[Node]:
        return iter(self._leaves)

    def split(self, node: Node) -> tuple[Node, Node]:
        """Bisect a leaf; children share its midpoint exactly."""
        if not node.is_leaf:
            raise StateError(f"{node!r} is not a leaf")
        k = self._index(node)
        m = node.mid
        node.left = Node(node.lo, m, node, depth=node.depth + 1)
        node.right = Node(m, node.hi, node, depth=node.depth + 1)
        self._leaves[k:k + 1] = [node.left, node.right]
        self._los[k:k + 1] = [node.lo, m]
        self.splits.append(node)
        return node.left, node.right

    def _index(self, node: Node) -> int:
        k = bisect.bisect_left(self._los, node.lo)
        if k >= len(self._leaves) or self._leaves[k] is not node:
            raise StateError(f"{node!r} is not a leaf of this tree")
        return k

    def leaf_containing(self, x: float) -> Node:
        k = max(bisect.bisect_right(self._los, x) - 1, 0)
        return self._leaves[k]

    def leaves_touching(self, x: float) -> list[Node]:
        """Leaves having x as an endpoint or midpoint."""
        k = max(bisect.bisect_right(self._los, x) - 1, 0)
        out = []
        for j in (k - 1, k):
            if 0 <= j < len(self._leaves):
                leaf = self._leaves[j]
                if x in (leaf.lo, leaf.mid, leaf.hi):
                    out.append(leaf)
        return out

    def has_leaf(self, node: Node) -> bool:
        try:
            self._index(node)
        except StateError:
            return False
        return True

    def breakpoints(self) -> list[float]:
        """Leaf endpoints, ascending."""
        return self._los + [1.0]


@dataclass(frozen=True)
class SecantModel:
    """Piecewise-linear function given by its knots.

    Linear between knots; constant beyond the outermost knots.
    """

    xs: np.ndarray
    ys: np.ndarray
    certified: bool = True
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.shape != ys.shape or xs.ndim != 1 or len(xs) < 1:
            raise ShapeError("xs and ys must be equal-length 1-d arrays")
        if np.any(np.diff(xs) <= 0):
            raise ShapeError("knots must be strictly increasing")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, float]], **kw) -> "SecantModel":
        pts = sorted(pairs)
        return cls(np.array([p[0] for p in pts]), np.array([p[1] for p in pts]), **kw)

    def __call__(self, x):
        val = np.interp(np.asarray(x, dtype=float), self.xs, self.ys)
        return float(val) if np.ndim(x) == 0 else val

    @property
    def knots(self) -> list[tuple[float, float]]:
        return list(zip(self.xs.tolist(), self.ys.tolist()))

    def sup_error(self, f, grid_points: int = 10001, lo: float = 0.0, hi: float = 1.0) -> float:
        grid = np.linspace(lo, hi, grid_points)
        return float(np.max(np.abs(self(grid) - f(grid))))


def write_trace_csv(path: str | os.PathLike, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
