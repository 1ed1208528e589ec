"""Greedy recursive secant approximation from exact function values.

The sampler keeps a tree of intervals whose endpoints have all been
queried. Each round it looks at the leaf whose midpoint secant error is
largest: if that midpoint is still unknown it is queried, otherwise the
leaf is bisected and the left child's midpoint is queried. Once every
leaf's midpoint error is at most eps, the leaf-wise secant is within
2 eps of f everywhere.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from .convex_fn import ConvexFn
from .errors import BudgetExhausted, DomainError
from .tree import IntervalTree, Node, SecantModel, write_trace_csv

TRACE_HEADER = ("t", "x_queried", "max_delta")


@dataclass
class NoiselessState:
    """Tree, queried values and per-query trace.

    Unqueried points are simply absent from ``values``.
    """

    tree: IntervalTree = field(default_factory=IntervalTree)
    values: dict[float, float] = field(default_factory=dict)
    queries: int = 0
    trace: list[tuple[int, float, float]] = field(default_factory=list)

    def is_queried(self, x: float) -> bool:
        return x in self.values

    def leaf_delta(self, leaf: Node) -> float:
        """Midpoint secant error from queried values; +inf if the midpoint is absent."""
        m = leaf.mid
        if m not in self.values:
            return math.inf
        return 0.5 * (self.values[leaf.lo] + self.values[leaf.hi]) - self.values[m]

    def secant_model(self, certified: bool = True) -> SecantModel:
        xs = self.tree.breakpoints()
        return SecantModel.from_pairs([(x, self.values[x]) for x in xs], certified=certified)

    def write_trace(self, path: str | os.PathLike) -> None:
        write_trace_csv(path, TRACE_HEADER, self.trace)


class NoiselessRun(NamedTuple):
    model: SecantModel
    tau: int
    state: NoiselessState
    certified: bool


def _query(state: NoiselessState, f: Callable, x: float, max_delta: float) -> None:
    state.values[x] = float(f(x))
    state.queries += 1
    state.trace.append((state.queries, x, max_delta))


def _select(state: NoiselessState) -> tuple[Node, float]:
    """Leaf of largest midpoint error; ties go to the leftmost leaf."""
    best, best_val = None, -math.inf
    for leaf in state.tree.iter_leaves():
        val = state.leaf_delta(leaf)
        if val > best_val:
            best, best_val = leaf, val
    return best, best_val


def run_noiseless(f: ConvexFn, eps: float, budget: int = 1_000_000,
                  raise_on_budget: bool = False) -> NoiselessRun:
    """Query f until every leaf has midpoint secant error at most eps.

    Args:
        f: Function to approximate; queried exactly.
        eps: Target midpoint error per leaf.
        budget: Maximum number of queries (at least 3).
        raise_on_budget: Raise :class:`BudgetExhausted` instead of returning
            an uncertified result when the budget runs out.

    Returns:
        A ``NoiselessRun``. ``tau`` is the number of queries used and
        ``certified`` tells whether the stopping rule fired.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    if budget < 3:
        raise DomainError("budget must be at least 3")
    state = NoiselessState()
    _query(state, f, 0.0, math.nan)
    _query(state, f, 1.0, math.nan)
    while True:
        leaf, worst = _select(state)
        if worst <= eps:
            return NoiselessRun(state.secant_model(True), state.queries, state, True)
        if state.queries >= budget:
            break
        if math.isinf(worst):
            _query(state, f, leaf.mid, worst)
        else:
            left, _ = state.tree.split(leaf)
            _query(state, f, left.mid, worst)
    result = NoiselessRun(state.secant_model(False), state.queries, state, False)
    if raise_on_budget:
        raise BudgetExhausted(f"no certificate within {budget} queries", result)
    return result
