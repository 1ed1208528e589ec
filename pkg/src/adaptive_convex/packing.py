"""Packings of adjacent equal-error intervals and the clairvoyant design built on them.

A packing walks left to right from 2 t_left, each time taking the widest
interval whose midpoint secant error is still eps. The resulting intervals
are a certificate of difficulty (many of them means many places where f
bends), and their endpoints and midpoints form the design an oracle that
knows f would sample.
"""

from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .convex_fn import ConvexFn, Interval, delta
from .errors import DomainError, MissingPointError, ToleranceError
from .modulus import BISECT_MAX_ITER, BISECT_REL_TOL, BISECT_TOL, t_left_result, t_right_result

PACKING_TOL = 1e-8
CONTAIN_TOL = 1e-9


@dataclass(frozen=True)
class Packing:
    """Adjacent intervals with secant error eps, plus a cover of [0, 1].

    Attributes:
        eps: Target midpoint secant error.
        intervals: The packing intervals, left to right, sharing endpoints.
        cover: End pieces plus every constructed interval; unions to [0, 1].
        constructed: All intervals produced before the final one was
            possibly discarded (used for the cover).
    """

    eps: float
    intervals: tuple[Interval, ...]
    cover: tuple[Interval, ...]
    constructed: tuple[Interval, ...] = field(default=())

    @property
    def n_pck(self) -> int:
        return len(self.intervals)

    @property
    def midpoints(self) -> tuple[float, ...]:
        return tuple(iv.mid for iv in self.intervals)

    def design_points(self) -> list[float]:
        """Endpoints and midpoints of the cover, sorted and deduplicated."""
        pts = set()
        for iv in self.cover:
            pts.update((iv.lo, iv.mid, iv.hi))
        return sorted(pts)


@dataclass(frozen=True)
class OracleAllocation:
    design_points: tuple[float, ...]
    samples_per_point: int
    sigma: float
    delta: float
    eps: float

    @property
    def total(self) -> int:
        return len(self.design_points) * self.samples_per_point


class Decision(str, enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


def _max_step(f: ConvexFn, b: float, eps: float):
    """sup{t in [0, (1-b)/2] : delta(f, b+t, t) <= eps}, and whether it is interior."""
    f_b = float(f(b))

    def g(t):
        return 0.5 * (f_b + f(min(b + 2.0 * t, 1.0))) - f(b + t)

    lo, hi = 0.0, (1.0 - b) / 2.0
    if g(hi) <= eps:
        return hi, False
    for _ in range(BISECT_MAX_ITER):
        if hi - lo <= min(BISECT_TOL, BISECT_REL_TOL * hi):
            break
        mid = 0.5 * (lo + hi)
        if g(mid) <= eps:
            lo = mid
        else:
            hi = mid
    return lo, True


def build_packing(f: ConvexFn, eps: float, max_intervals: int = 1_000_000) -> Packing:
    """Greedy left-to-right packing of intervals with secant error eps.

    Raises:
        DomainError: If eps is not positive.
        ToleranceError: If a packing interval misses eps by more than 1e-8.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    whole = (Interval(0.0, 1.0),)
    left = t_left_result(f, eps)
    if not left.saturated or eps >= 2.0 * f.sup_norm():
        return Packing(eps, (), whole, ())
    right = t_right_result(f, eps)
    start = 2.0 * left.value
    stop = 1.0 - 2.0 * right.value

    built: list[Interval] = []
    b = start
    while b < stop - CONTAIN_TOL and len(built) < max_intervals:
        t, interior_root = _max_step(f, b, eps)
        if not interior_root or t <= 0.0:
            break
        hi = b + 2.0 * t
        if hi > 1.0 - BISECT_TOL:
            hi = 1.0
        built.append(Interval(b, hi))
        b = hi

    kept = list(built)
    if kept and not (kept[-1].lo >= start - CONTAIN_TOL and kept[-1].hi <= stop + CONTAIN_TOL):
        kept.pop()
    for iv in kept:
        err = delta(f, iv)
        if abs(err - eps) > PACKING_TOL:
            raise ToleranceError(f"interval [{iv.lo}, {iv.hi}] has delta {err}, target {eps}")

    cover: list[Interval] = []
    first = built[0].lo if built else start
    if first > 0.0:
        cover.append(Interval(0.0, first))
    cover.extend(built)
    last = built[-1].hi if built else first
    if last < 1.0:
        cover.append(Interval(last, 1.0))
    return Packing(float(eps), tuple(kept), tuple(cover), tuple(built))


def samples_per_point(n_points: int, eps: float, sigma: float, delta_: float) -> int:
    """max(1, ceil(8 sigma^2 / eps^2 * log(n_points / (2 delta))))."""
    if sigma == 0:
        return 1
    raw = 8.0 * sigma**2 / eps**2 * math.log(n_points / (2.0 * delta_))
    return max(1, math.ceil(raw))


def oracle_allocation(f: ConvexFn, eps: float, sigma: float, delta: float,
                      packing: Packing | None = None) -> OracleAllocation:
    """Equal-count design over the packing cover points."""
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    if sigma < 0:
        raise DomainError("sigma must be non-negative")
    pk = packing if packing is not None else build_packing(f, eps)
    pts = tuple(pk.design_points())
    n = samples_per_point(len(pts), eps, sigma, delta)
    return OracleAllocation(pts, n, float(sigma), float(delta), float(eps))


def oracle_test(f_star: ConvexFn, measured: Mapping[float, float], eps: float,
                design_points=None) -> Decision:
    """Reject iff some measured mean is at least eps/2 away from f_star.

    Raises:
        MissingPointError: If a design point has no measurement.
    """
    points = list(measured) if design_points is None else list(design_points)
    worst = 0.0
    for x in points:
        if x not in measured:
            raise MissingPointError(f"no measurement at design point {x!r}")
        worst = max(worst, abs(measured[x] - f_star(x)))
    return Decision.REJECT if worst >= eps / 2.0 else Decision.ACCEPT


def measure(f_true: ConvexFn, allocation: OracleAllocation, rng: np.random.Generator) -> dict[float, float]:
    """Empirical means of Gaussian-noise samples at every design point."""
    xs = np.asarray(allocation.design_points)
    n = allocation.samples_per_point
    noise = rng.normal(0.0, allocation.sigma, size=(len(xs), n)) if allocation.sigma > 0 else np.zeros((len(xs), n))
    means = f_true(xs) + noise.mean(axis=1)
    return dict(zip(allocation.design_points, means.tolist()))


class ChordReplacement(ConvexFn):
    """f with its graph over one interval replaced by the chord.

    The result is convex and deviates from f by delta(f, I) at the
    midpoint of I, so it makes a convenient nearby alternative.
    """

    name = "chord-replacement"

    def __init__(self, base: ConvexFn, interval: Interval, shift: float = 0.0):
        self.base = base
        self.interval = interval
        self.shift = float(shift)
        self._flo = float(base(interval.lo))
        self._fhi = float(base(interval.hi))

    def _eval(self, x):
        out = self.base._eval(x)
        lo, hi = self.interval.lo, self.interval.hi
        inside = (x >= lo) & (x <= hi)
        chord = ((hi - x) * self._flo + (x - lo) * self._fhi) / (hi - lo)
        return np.where(inside, chord, out) + self.shift


class Shifted(ConvexFn):
    name = "shifted"

    def __init__(self, base: ConvexFn, shift: float):
        self.base = base
        self.shift = float(shift)

    def _eval(self, x):
        return self.base._eval(x) + self.shift


def _csv_out(target, header, rows) -> None:
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", newline="") as fh:
            _csv_out(fh, header, rows)
        return
    w = csv.writer(target, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def write_packing_csv(out, f: ConvexFn, packing: Packing) -> None:
    """Packing intervals as CSV (lo, hi, midpoint, delta) to a path or text stream."""
    rows = [[repr(iv.lo), repr(iv.hi), repr(iv.mid), repr(delta(f, iv))] for iv in packing.intervals]
    _csv_out(out, ["lo", "hi", "midpoint", "delta"], rows)


def write_allocation_csv(out, allocation: OracleAllocation) -> None:
    """Design points and per-point sample counts as CSV to a path or text stream."""
    rows = [[repr(x), allocation.samples_per_point] for x in allocation.design_points]
    _csv_out(out, ["x", "n_samples"], rows)
