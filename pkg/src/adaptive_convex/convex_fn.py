"""Ground-truth convex functions on [0, 1] and their secant geometry.

Every function here is immutable after construction and evaluates
vectorised over numpy arrays. Scalars in give Python floats out.

>>> f = Quadratic(a=2.0)
>>> f(0.5)
0.25
>>> delta(f, Interval(0.0, 1.0))
0.25
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ShapeError

# Rounding slack for arguments produced by arithmetic such as x + t.
DOMAIN_SLACK = 1e-12
CONVEXITY_TOL = 1e-10


def _as_domain_array(x, lo=0.0, hi=1.0):
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < lo - DOMAIN_SLACK) or np.any(arr > hi + DOMAIN_SLACK):
        raise DomainError(f"argument outside [{lo}, {hi}]: {x!r}")
    return np.clip(arr, lo, hi)


def _unwrap(value, like):
    if np.ndim(like) == 0:
        return float(value)
    return value


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] inside [0, 1]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi <= 1.0):
            raise DomainError(f"invalid interval [{self.lo}, {self.hi}]")

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi

    def halves(self) -> tuple["Interval", "Interval"]:
        m = self.mid
        return Interval(self.lo, m), Interval(m, self.hi)

    def __iter__(self):
        yield self.lo
        yield self.hi


class ConvexFn:
    """Base class: a convex function evaluable on [0, 1]."""

    name = "convex"

    def __call__(self, x):
        arr = _as_domain_array(x)
        return _unwrap(self._eval(arr), x)

    def _eval(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sup_norm(self, grid_points: int = 4097) -> float:
        """max |f| over a uniform grid (plus knots for piecewise-linear f)."""
        xs = np.linspace(0.0, 1.0, grid_points)
        return float(np.max(np.abs(self._eval(xs))))

    def spec(self) -> str:
        """Short text form accepted by :func:`parse_function`."""
        raise NotImplementedError


class PiecewiseLinear(ConvexFn):
    """Convex piecewise-linear interpolant of sorted knots covering [0, 1]."""

    name = "piecewise"

    def __init__(self, knots: Iterable[Sequence[float]], tol: float = CONVEXITY_TOL):
        pts = np.asarray([tuple(map(float, k)) for k in knots], dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ShapeError("knots must be a sequence of at least two (x, y) pairs")
        xs, ys = pts[:, 0].copy(), pts[:, 1].copy()
        if np.any(np.diff(xs) <= 0):
            raise ShapeError("knot x values must be strictly increasing")
        if xs[0] != 0.0 or xs[-1] != 1.0:
            raise DomainError("knots must start at x=0 and end at x=1")
        if len(xs) >= 3 and not check_convex_grid(list(zip(xs, ys)), tol):
            raise ShapeError("knots do not describe a convex function")
        xs.setflags(write=False)
        ys.setflags(write=False)
        self._xs = xs
        self._ys = ys

    @property
    def knots(self) -> list[tuple[float, float]]:
        return list(zip(self._xs.tolist(), self._ys.tolist()))

    @property
    def xs(self) -> np.ndarray:
        return self._xs

    @property
    def ys(self) -> np.ndarray:
        return self._ys

    def _eval(self, x):
        return np.interp(x, self._xs, self._ys)

    def sup_norm(self, grid_points: int = 4097) -> float:
        return float(np.max(np.abs(self._ys)))

    def spec(self) -> str:
        return "piecewise:" + ";".join(f"{x!r} {y!r}" for x, y in self.knots)

    def __repr__(self):
        return f"PiecewiseLinear({self.knots!r})"


class Quadratic(ConvexFn):
    """f(x) = a x^2 / 2 + b x + c with a >= 0."""

    name = "quadratic"

    def __init__(self, a: float, b: float = 0.0, c: float = 0.0):
        if a < 0:
            raise DomainError("Quadratic requires a >= 0")
        self.a, self.b, self.c = float(a), float(b), float(c)

    def _eval(self, x):
        return 0.5 * self.a * x * x + self.b * x + self.c

    def spec(self) -> str:
        return f"quadratic:{self.a!r},{self.b!r},{self.c!r}"

    def __repr__(self):
        return f"Quadratic(a={self.a}, b={self.b}, c={self.c})"


class NegSqrt(ConvexFn):
    """f(x) = scale * (1 - sqrt(x)); curvature concentrates at x = 0."""

    name = "negsqrt"

    def __init__(self, scale: float = 1.0):
        if scale <= 0:
            raise DomainError("NegSqrt requires scale > 0")
        self.scale = float(scale)

    def _eval(self, x):
        return self.scale * (1.0 - np.sqrt(x))

    def spec(self) -> str:
        return f"negsqrt:{self.scale!r}"

    def __repr__(self):
        return f"NegSqrt(scale={self.scale})"


class SoftPlus(ConvexFn):
    """f(x) = log(1 + exp(-s k (x - 1/2))) / s, a smoothed hinge at 1/2."""

    name = "softplus"

    def __init__(self, s: float = 100.0, k: float = 1.0):
        if s <= 0 or k <= 0:
            raise DomainError("SoftPlus requires s > 0 and k > 0")
        self.s, self.k = float(s), float(k)

    def _eval(self, x):
        return np.logaddexp(0.0, -self.s * self.k * (x - 0.5)) / self.s

    def spec(self) -> str:
        return f"softplus:{self.s!r},{self.k!r}"

    def __repr__(self):
        return f"SoftPlus(s={self.s}, k={self.k})"


# Stand-in for a fitted temporal-discounting curve: steep early drop, long
# flat tail. Values are illustrative, not measured data.
DATA_DERIVED_KNOTS = (
    (0.00, 0.95),
    (0.02, 0.80),
    (0.05, 0.64),
    (0.10, 0.48),
    (0.15, 0.38),
    (0.22, 0.29),
    (0.30, 0.23),
    (0.40, 0.18),
    (0.50, 0.15),
    (0.65, 0.12),
    (0.80, 0.10),
    (1.00, 0.08),
)


class DataDerived(PiecewiseLinear):
    """Decreasing convex discount-curve stand-in with 12 knots."""

    name = "data-derived"

    def __init__(self, knots: Iterable[Sequence[float]] = DATA_DERIVED_KNOTS):
        super().__init__(knots)

    def spec(self) -> str:
        return "data-derived"

    def __repr__(self):
        return "DataDerived()"


def hinge() -> PiecewiseLinear:
    """max{1 - 5x, 0}, the standard piecewise-linear test function."""
    return PiecewiseLinear([(0.0, 1.0), (0.2, 0.0), (1.0, 0.0)])


def affine(slope: float = 1.0, intercept: float = 0.0) -> PiecewiseLinear:
    return PiecewiseLinear([(0.0, intercept), (1.0, intercept + slope)])


def evaluate(f: ConvexFn, x):
    """f(x) with domain checking; same as calling ``f`` directly."""
    return f(x)


def secant(f: ConvexFn, interval: Interval, x):
    """Chord of f through the endpoints of ``interval``, evaluated at x."""
    if not isinstance(interval, Interval):
        interval = Interval(*interval)
    lo, hi = interval.lo, interval.hi
    arr = np.asarray(x, dtype=float)
    if np.any(arr < lo - DOMAIN_SLACK) or np.any(arr > hi + DOMAIN_SLACK):
        raise DomainError(f"x={x!r} outside interval [{lo}, {hi}]")
    arr = np.clip(arr, lo, hi)
    flo, fhi = f(lo), f(hi)
    val = ((hi - arr) * flo + (arr - lo) * fhi) / (hi - lo)
    return _unwrap(val, x)


def delta(f: ConvexFn, interval_or_x, t=None):
    """Midpoint secant error.

    ``delta(f, I)`` is (f(lo) + f(hi))/2 - f(mid). ``delta(f, x, t)`` is the
    same quantity on [x - t, x + t] and broadcasts over arrays x and t.
    """
    if t is None:
        interval = interval_or_x
        if not isinstance(interval, Interval):
            interval = Interval(*interval)
        lo, hi = interval.lo, interval.hi
        vals = f._eval(np.array([lo, hi, 0.5 * (lo + hi)]))
        return float(0.5 * (vals[0] + vals[1]) - vals[2])
    return delta_xt(f, interval_or_x, t)


def delta_xt(f: ConvexFn, x, t):
    x_arr = np.asarray(x, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > np.minimum(x_arr, 1.0 - x_arr) + DOMAIN_SLACK):
        raise DomainError("need 0 <= t <= min(x, 1 - x)")
    _as_domain_array(x_arr)
    left = np.clip(x_arr - t_arr, 0.0, 1.0)
    right = np.clip(x_arr + t_arr, 0.0, 1.0)
    val = 0.5 * (f._eval(left) + f._eval(right)) - f._eval(x_arr)
    if x_arr.ndim == 0 and t_arr.ndim == 0:
        return float(val)
    return val


def delta_values(flo, fmid, fhi):
    """Midpoint secant error from the three function values."""
    return 0.5 * (flo + fhi) - fmid


def check_convex_grid(values: Sequence[Sequence[float]], tol: float = CONVEXITY_TOL) -> bool:
    """True iff the discrete slopes of ``values`` never decrease by more than tol."""
    pts = np.asarray(values, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeError("values must be (x, y) pairs")
    if len(pts) < 3:
        raise ShapeError("need at least three points to test convexity")
    dx = np.diff(pts[:, 0])
    if np.any(dx <= 0):
        raise ShapeError("x values must be strictly increasing")
    slopes = np.diff(pts[:, 1]) / dx
    return bool(np.all(np.diff(slopes) >= -tol))


def load_knots(path: str | os.PathLike) -> PiecewiseLinear:
    """Read a knot file: one ``x y`` pair per line, ascending x.

    Blank lines and ``#`` comments are ignored.
    """
    knots = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ShapeError(f"{path}:{lineno}: expected 'x y', got {line!r}")
            try:
                knots.append((float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise ShapeError(f"{path}:{lineno}: {exc}") from None
    return PiecewiseLinear(knots)


def save_knots(path: str | os.PathLike, knots: Iterable[Sequence[float]]) -> None:
    with open(path, "w") as fh:
        for x, y in knots:
            fh.write(f"{float(x)!r} {float(y)!r}\n")


def parse_function(text: str) -> ConvexFn:
    """Build a ConvexFn from a short text spec.

    Accepted forms::

        hinge                      max{1 - 5x, 0}
        data-derived
        quadratic:a[,b[,c]]
        negsqrt[:scale]
        softplus[:s[,k]]
        affine[:slope[,intercept]]
        piecewise:x0 y0;x1 y1;...
        knots:PATH
    """
    text = text.strip()
    kind, _, args = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "knots":
            return load_knots(args.strip())
        if kind == "piecewise":
            pairs = [p.split() for p in args.split(";") if p.strip()]
            return PiecewiseLinear([(float(a), float(b)) for a, b in pairs])
        nums = [float(v) for v in args.split(",") if v.strip()]
    except ValueError as exc:
        raise ShapeError(f"cannot parse function spec {text!r}: {exc}") from None
    if kind == "hinge":
        return hinge()
    if kind in ("data-derived", "data", "dataderived"):
        return DataDerived()
    if kind == "quadratic":
        return Quadratic(*nums)
    if kind == "negsqrt":
        return NegSqrt(*nums)
    if kind == "softplus":
        return SoftPlus(*nums)
    if kind == "affine":
        return affine(*nums)
    raise ShapeError(f"unknown function kind {kind!r}")


def test_functions() -> dict[str, ConvexFn]:
    """The standard battery used by the property and acceptance suites."""
    return {
        "quadratic": Quadratic(a=2.0),
        "hinge": hinge(),
        "negsqrt": NegSqrt(1.0),
        "softplus": SoftPlus(100.0, 1.0),
        "data-derived": DataDerived(),
    }


test_functions.__test__ = False  # keep pytest from collecting it


def is_affine(f: ConvexFn, tol: float = 1e-14) -> bool:
    return math.isclose(delta(f, Interval(0.0, 1.0)), 0.0, abs_tol=tol)
