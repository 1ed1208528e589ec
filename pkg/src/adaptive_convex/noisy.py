"""Active sampler for convex functions observed through Gaussian noise.

The state is an interval tree over [0, 1]. Each tracked design point
(endpoints and midpoints of leaves) carries a sample count, a running
mean and its own share of the failure probability. Every round:

1. Each leaf gets a score: its confidence width B plus its positive
   empirical midpoint secant error.
2. The certificate eps_t drops to 4 x (largest score) if that is smaller.
3. The top-scoring leaf is chosen, and its least-certain point is sampled.
4. The leaf is bisected when its empirical secant error exceeds
   (1 + beta) B, i.e. when bias clearly dominates noise there.

On the event that every running mean stays inside its confidence band,
the convex projection of the current secant model is within eps_t of f.
"""

from __future__ import annotations

import functools
import heapq
import math
import os
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import zeta

from .convex_fn import ConvexFn
from .errors import BudgetExhausted, DomainError, OracleError, StateError
from .regression import PiecewiseLinearFit, linf_project
from .tree import IntervalTree, Node, SecantModel, write_trace_csv

TRACE_HEADER = ("t", "x_t", "y_t", "eps_t", "n_leaves")
CHECKPOINT_HEADER = ("t", "grid_sup_error", "eps_t")
KAUFMANN_ETA = 1.1


@functools.lru_cache(maxsize=4096)
def kaufmann_threshold(delta: float, eta: float = KAUFMANN_ETA) -> float:
    """Smallest x with sqrt(e) zeta(eta (1 - 1/(2x))) (sqrt(x)/(2 sqrt 2) + 1)^eta e^-x <= delta/2.

    The search starts above both 8/(e - 1) and the pole of the zeta term.
    """
    def h(x):
        return (math.sqrt(math.e) * float(zeta(eta * (1.0 - 1.0 / (2.0 * x)), 1))
                * (math.sqrt(x) / (2.0 * math.sqrt(2.0)) + 1.0) ** eta * math.exp(-x))

    lo = max(8.0 / (math.e - 1.0), eta / (2.0 * (eta - 1.0))) * (1.0 + 1e-9)
    target = delta / 2.0
    if h(lo) <= target:
        return lo
    hi = 2.0 * lo
    while h(hi) > target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) <= target:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12 * hi:
            break
    return hi


@dataclass(frozen=True)
class ConfidenceFn:
    """Anytime deviation bound phi(n, delta) for a running mean of n samples.

    ``kind="simple"`` is sqrt(16 sigma^2 log(log2(2n) / delta) / n).
    ``kind="kaufmann"`` is sigma sqrt(2 (eta log log(e n) + x(delta)) / n),
    where x(delta) comes from :func:`kaufmann_threshold`; it is several
    times tighter for moderate n.
    """

    kind: str = "simple"
    sigma: float = 1.0
    eta: float = KAUFMANN_ETA

    def __post_init__(self):
        if self.kind not in ("simple", "kaufmann"):
            raise DomainError(f"unknown confidence kind {self.kind!r}")
        if self.sigma < 0:
            raise DomainError("sigma must be non-negative")

    def __call__(self, n: int, delta: float) -> float:
        if not 0.0 < delta < 1.0:
            raise DomainError(f"delta must lie in (0, 1), got {delta!r}")
        if n <= 0:
            return math.inf
        if self.sigma == 0.0:
            return 0.0
        if self.kind == "simple":
            return math.sqrt(16.0 * self.sigma**2 * math.log(math.log2(2.0 * n) / delta) / n)
        x = kaufmann_threshold(delta, self.eta)
        return self.sigma * math.sqrt(2.0 * (self.eta * math.log(math.log(math.e * n)) + x) / n)


def phi(cf: ConfidenceFn, t: int, delta: float) -> float:
    return cf(t, delta)


@dataclass
class PointStats:
    n: int = 0
    mean: float = math.nan
    delta_pnt: float = 0.5

    def update(self, y: float) -> None:
        self.n += 1
        self.mean = y / self.n + (self.mean * (self.n - 1) / self.n if self.n > 1 else 0.0)


class NoisyOracle:
    """f plus i.i.d. N(0, sigma^2) noise, drawn from a seeded generator in blocks."""

    def __init__(self, f: Callable, sigma: float, rng: np.random.Generator | int | None = None,
                 block: int = 4096):
        self.f = f
        self.sigma = float(sigma)
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self._block = block
        self._buf = np.empty(0)
        self._pos = 0
        self.calls = 0

    def noise(self) -> float:
        if self.sigma == 0.0:
            return 0.0
        if self._pos >= len(self._buf):
            self._buf = self.rng.standard_normal(self._block)
            self._pos = 0
        z = self._buf[self._pos]
        self._pos += 1
        return self.sigma * float(z)

    def __call__(self, x: float) -> float:
        try:
            val = float(self.f(x))
        except Exception as exc:  # surfaced as the oracle's failure
            raise OracleError(f"oracle failed at x={x!r}: {exc}") from exc
        self.calls += 1
        return val + self.noise()


class LeafScore(NamedTuple):
    score: float
    b: float
    delta_pnt: float


@dataclass
class Snapshot:
    t: int
    eps_t: float
    xs: np.ndarray
    ys: np.ndarray
    _fit: Optional[PiecewiseLinearFit] = None

    def projected(self) -> SecantModel:
        if self._fit is None:
            if len(self.xs) >= 3:
                self._fit = linf_project(list(zip(self.xs, self.ys)))
            else:
                self._fit = PiecewiseLinearFit(self.xs, self.ys, 0.0)
        return SecantModel(self._fit.xs, self._fit.ys)


class NoisyState:
    """Full mutable state of the noisy sampler.

    Attributes:
        tree: Interval tree; every leaf's endpoints and midpoint are tracked.
        stats: PointStats for every tracked design point.
        eps_t: Current certificate, non-increasing, +inf until all of the
            root's points are sampled.
        n_queries: Total oracle calls so far.
        delta_spent: Sum of all per-point failure budgets handed out.
        splits: (t, lo, hi) for every bisection, in order.
    """

    def __init__(self, sigma: float, delta: float, beta: float = 0.5,
                 confidence: ConfidenceFn | str = "simple", sharper: bool = False,
                 literal_child_delta: bool = False, record_trace: bool = True):
        if not 0.0 < delta < 1.0:
            raise DomainError("delta must lie in (0, 1)")
        if not beta > 0:
            raise DomainError("beta must be positive")
        if sigma < 0:
            raise DomainError("sigma must be non-negative")
        self.sigma = float(sigma)
        self.delta = float(delta)
        self.beta = float(beta)
        self.cf = confidence if isinstance(confidence, ConfidenceFn) else ConfidenceFn(confidence, sigma)
        self.sharper = sharper
        self.literal_child_delta = literal_child_delta
        self.record_trace = record_trace
        self.tree = IntervalTree()
        self.stats: dict[float, PointStats] = {}
        self.delta_spent = 0.0
        for x in (0.0, 0.5, 1.0):
            self._track(x, delta / 6.0)
        self.eps_t = math.inf
        self.n_queries = 0
        self.trace: list[tuple] = []
        self.eps_history: list[tuple[int, float]] = []
        self.snapshots: list[Snapshot] = []
        self.splits: list[tuple[int, float, float]] = []
        self._heap: list = []
        self._version: dict[int, int] = {}
        self._scores: dict[int, LeafScore] = {}

    # bookkeeping -------------------------------------------------------

    @property
    def t(self) -> int:
        """Round index: one more than the number of samples taken."""
        return self.n_queries + 1

    def _track(self, x: float, delta_pnt: float) -> None:
        if x not in self.stats:
            self.stats[x] = PointStats(delta_pnt=delta_pnt)
            self.delta_spent += delta_pnt

    def point_phi(self, x: float) -> float:
        st = self.stats[x]
        return self.cf(st.n, st.delta_pnt)

    def record(self, x: float, y: float) -> None:
        """Fold one observation into the running mean at a tracked point."""
        if x not in self.stats:
            raise StateError(f"point {x!r} is not tracked")
        self.stats[x].update(y)
        self.n_queries += 1
        for leaf in self.tree.leaves_touching(x):
            self._rescore(leaf)

    # scores ------------------------------------------------------------

    def _compute(self, leaf: Node) -> LeafScore:
        lo, m, hi = leaf.lo, leaf.mid, leaf.hi
        s_lo, s_m, s_hi = self.stats[lo], self.stats[m], self.stats[hi]
        p_lo = self.cf(s_lo.n, s_lo.delta_pnt)
        p_m = self.cf(s_m.n, s_m.delta_pnt)
        p_hi = self.cf(s_hi.n, s_hi.delta_pnt)
        b = p_m + 0.5 * max(p_lo, p_hi)
        if math.isinf(b):
            return LeafScore(math.inf, math.inf, math.nan)
        d = 0.5 * (s_lo.mean + s_hi.mean) - s_m.mean
        if self.sharper:
            score = max(d + b, 0.5 * max(p_lo, p_hi))
        else:
            score = b + max(0.0, d)
        return LeafScore(score, b, d)

    def _rescore(self, leaf: Node) -> None:
        key = id(leaf)
        sc = self._compute(leaf)
        self._scores[key] = sc
        ver = self._version.get(key, 0) + 1
        self._version[key] = ver
        heapq.heappush(self._heap, (-sc.score, leaf.lo, ver, key, leaf))

    def _drop(self, leaf: Node) -> None:
        key = id(leaf)
        self._version[key] = self._version.get(key, 0) + 1
        self._scores.pop(key, None)

    def b_bound(self, leaf: Node) -> float:
        """Confidence width B of a leaf: phi(mid) + max(phi(lo), phi(hi)) / 2."""
        if not self.tree.has_leaf(leaf):
            raise StateError(f"{leaf!r} is not a leaf")
        return self._compute(leaf).b

    def leaf_delta(self, leaf: Node) -> float:
        """Empirical midpoint secant error; nan while the midpoint is unsampled."""
        if not self.tree.has_leaf(leaf):
            raise StateError(f"{leaf!r} is not a leaf")
        return self._compute(leaf).delta_pnt

    def leaf_score(self, leaf: Node) -> LeafScore:
        if not self.tree.has_leaf(leaf):
            raise StateError(f"{leaf!r} is not a leaf")
        return self._compute(leaf)

    def top(self) -> tuple[Node, LeafScore]:
        """Leaf with the largest score; ties go to the smallest left endpoint."""
        if not self._scores:
            for leaf in self.tree.iter_leaves():
                self._rescore(leaf)
        heap = self._heap
        while True:
            neg, _, ver, key, leaf = heap[0]
            if self._version.get(key) == ver and key in self._scores:
                return leaf, self._scores[key]
            heapq.heappop(heap)

    def refresh(self) -> float:
        """Update eps_t from the current scores and snapshot if it fell."""
        _, best = self.top()
        cand = 4.0 * best.score
        if cand < self.eps_t:
            self.eps_t = cand
            self.eps_history.append((self.n_queries, cand))
            xs = np.asarray(self.tree.breakpoints())
            ys = np.array([self.stats[x].mean for x in xs])
            self.snapshots.append(Snapshot(self.n_queries, cand, xs, ys))
        return self.eps_t

    # models ------------------------------------------------------------

    def secant_model(self) -> SecantModel:
        xs = self.tree.breakpoints()
        return SecantModel.from_pairs([(x, self.stats[x].mean) for x in xs])

    @property
    def f_hat(self) -> Optional[SecantModel]:
        """Convex projection of the secant model at the last eps_t decrease."""
        if not self.snapshots:
            return None
        return self.snapshots[-1].projected()

    def samples(self) -> list[tuple[float, float, int]]:
        """(x, running mean, count) for every sampled point, ascending x."""
        return [(x, s.mean, s.n) for x, s in sorted(self.stats.items()) if s.n > 0]

    def write_trace(self, path: str | os.PathLike) -> None:
        write_trace_csv(path, TRACE_HEADER, self.trace)

    # dynamics ----------------------------------------------------------

    def choose_point(self, leaf: Node) -> float:
        """Point of the leaf with the widest band; ties prefer lo, then mid, then hi."""
        best_x, best_p = None, -1.0
        for x in (leaf.lo, leaf.mid, leaf.hi):
            p = self.point_phi(x)
            if p > best_p:
                best_x, best_p = x, p
        return best_x

    def _child_delta(self, n_leaves: int) -> float:
        if self.literal_child_delta:
            return self.delta / (2.0 * n_leaves**2)
        return self.delta / (4.0 * n_leaves**2)

    def split(self, leaf: Node) -> tuple[Node, Node]:
        self._drop(leaf)
        left, right = self.tree.split(leaf)
        share = self._child_delta(len(self.tree))
        for child in (left, right):
            self._track(child.mid, share)
        self.splits.append((self.n_queries, leaf.lo, leaf.hi))
        self._rescore(left)
        self._rescore(right)
        return left, right


def initial_state(f_oracle: Callable[[float], float], sigma: float, delta: float, beta: float = 0.5,
                  **kw) -> NoisyState:
    """Fresh state with x = 0 and x = 1 each sampled once."""
    state = NoisyState(sigma, delta, beta, **kw)
    for x in (0.0, 1.0):
        y = f_oracle(x)
        state.record(x, y)
        if state.record_trace:
            state.trace.append((state.n_queries, x, y, state.eps_t, len(state.tree)))
    return state


def step(state: NoisyState, oracle: Callable[[float], float]) -> NoisyState:
    """One round: refresh eps_t, pick a leaf and a point, sample, maybe bisect."""
    state.refresh()
    leaf, sc = state.top()
    x = state.choose_point(leaf)
    y = oracle(x)
    state.record(x, y)
    if (1.0 + state.beta) * sc.b < sc.delta_pnt:
        state.split(leaf)
    if state.record_trace:
        state.trace.append((state.n_queries, x, y, state.eps_t, len(state.tree)))
    return state


class NoisyRun(NamedTuple):
    f_hat: Optional[SecantModel]
    eps_trace: list
    state: NoisyState
    certified: bool
    checkpoints: list


def default_checkpoints(budget: int) -> list[int]:
    pts = {budget}
    k = 16
    while k < budget:
        pts.add(k)
        k *= 2
    return sorted(pts)


def run_noisy(f: ConvexFn, sigma: float, delta: float = 0.05, beta: float = 0.5,
              eps_target: float | None = None, budget: int | None = None,
              seed: int | np.random.Generator | None = 0, confidence: str | ConfidenceFn = "simple",
              sharper: bool = False, checkpoints: Sequence[int] | None = None,
              grid_points: int = 10001, raise_on_budget: bool = False,
              record_trace: bool = True, oracle: Callable | None = None) -> NoisyRun:
    """Run the noisy sampler until eps_t <= eps_target or the budget is spent.

    Args:
        f: Ground truth; observed as f(x) + N(0, sigma^2).
        sigma: Noise level, known to the sampler.
        delta: Overall failure probability, in (0, 1/2).
        beta: Bias/variance trade-off in the split rule.
        eps_target: Stop once the certificate reaches this value.
        budget: Total oracle calls allowed, including the two initial ones.
        seed: Seed or generator for the noise.
        confidence: ``"simple"``, ``"kaufmann"`` or a ConfidenceFn.
        sharper: Use the asymmetric lower bound in the leaf score.
        checkpoints: Query counts at which to log the grid error of f_hat.
        grid_points: Grid size for checkpoint errors.

    Returns:
        A ``NoisyRun``; ``checkpoints`` holds (t, grid_sup_error, eps_t)
        rows and ``certified`` says whether eps_target was reached.
    """
    if not 0.0 < delta < 0.5:
        raise DomainError("delta must lie in (0, 1/2)")
    if eps_target is None and budget is None:
        raise DomainError("give eps_target, budget or both")
    if budget is not None and budget < 2:
        raise DomainError("budget must be at least 2")
    cf = confidence if isinstance(confidence, ConfidenceFn) else ConfidenceFn(confidence, sigma)
    orc = oracle if oracle is not None else NoisyOracle(f, sigma, seed)
    state = initial_state(orc, sigma, delta, beta, confidence=cf, sharper=sharper,
                          record_trace=record_trace)
    marks = sorted(set(checkpoints)) if checkpoints is not None else (
        default_checkpoints(budget) if budget else [])
    grid = np.linspace(0.0, 1.0, grid_points)
    f_grid = None
    logged: list[tuple[int, float, float]] = []
    mark_i = 0

    def log_until(n):
        nonlocal mark_i, f_grid
        while mark_i < len(marks) and marks[mark_i] <= n:
            if f_grid is None:
                f_grid = f(grid)
            model = state.f_hat
            err = math.inf if model is None else float(np.max(np.abs(model(grid) - f_grid)))
            logged.append((marks[mark_i], err, state.eps_t))
            mark_i += 1

    certified = False
    while True:
        state.refresh()
        log_until(state.n_queries)
        if eps_target is not None and state.eps_t <= eps_target:
            certified = True
            break
        if budget is not None and state.n_queries >= budget:
            break
        step(state, orc)
    log_until(state.n_queries)
    result = NoisyRun(state.f_hat, list(state.eps_history), state, certified, logged)
    if eps_target is not None and not certified and raise_on_budget:
        raise BudgetExhausted(f"eps_target {eps_target} not reached in {budget} queries", result)
    return result


def write_checkpoints_csv(path: str | os.PathLike, rows) -> None:
    write_trace_csv(path, CHECKPOINT_HEADER, rows)
