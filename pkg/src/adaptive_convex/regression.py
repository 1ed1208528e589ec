"""Convex fits to scattered one-dimensional data.

Two estimators live here:

* :func:`convex_lsq`, weighted least squares over convex functions, solved
  exactly by a Lawson-Hanson active-set method on the hinge basis
  g(x) = a + b x + sum_j c_j (x - x_j)_+ with c_j >= 0. Each subproblem is
  a weighted fit by a linear spline, whose normal equations are tridiagonal,
  so an iteration costs O(n).
* :func:`linf_project`, the minimax convex fit at the given knots. The
  optimal value is half the largest gap between the data and its lower
  convex hull, which gives an O(n) closed form; an LP solve is available
  for cross-checking.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import linprog

from .convex_fn import CONVEXITY_TOL, check_convex_grid, save_knots
from .errors import ConvergenceError, DomainError, ShapeError

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10**6


class WeightedSample(NamedTuple):
    x: float
    y_mean: float
    n: int = 1


@dataclass(frozen=True)
class PiecewiseLinearFit:
    """Convex piecewise-linear fit at the sample locations.

    Attributes:
        xs: Sorted distinct sample locations.
        ys: Fitted values at ``xs``.
        objective: Weighted sum of squares for least squares fits, or the
            sup deviation for minimax fits.
        kkt_residual: Largest optimality-condition violation at exit.
        iterations: Solver iterations used.
    """

    xs: np.ndarray
    ys: np.ndarray
    objective: float
    kkt_residual: float = 0.0
    iterations: int = 0

    def __call__(self, x):
        val = np.interp(np.asarray(x, dtype=float), self.xs, self.ys)
        return float(val) if np.ndim(x) == 0 else val

    @property
    def knots(self) -> list[tuple[float, float]]:
        return list(zip(self.xs.tolist(), self.ys.tolist()))

    def is_convex(self, tol: float = 1e-8) -> bool:
        if len(self.xs) < 3:
            return True
        return check_convex_grid(self.knots, tol)

    def save(self, path: str | os.PathLike) -> None:
        save_knots(path, self.knots)


def merge_duplicates(x, y, w):
    """Sort by x and merge repeated x by weighted averaging."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if not (x.shape == y.shape == w.shape) or x.ndim != 1:
        raise ShapeError("x, y and weights must be equal-length 1-d arrays")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise DomainError("weights must be positive")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("non-finite sample")
    ux, inv = np.unique(x, return_inverse=True)
    if len(ux) == len(x):
        order = np.argsort(x, kind="stable")
        return x[order], y[order], w[order]
    sw = np.bincount(inv, weights=w)
    swy = np.bincount(inv, weights=w * y)
    return ux, swy / sw, sw


def _unpack(samples) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = [tuple(s) for s in samples]
    if not rows:
        raise ShapeError("no samples")
    arr = np.asarray([(r[0], r[1], r[2] if len(r) > 2 else 1.0) for r in rows], dtype=float)
    return arr[:, 0], arr[:, 1], arr[:, 2]


class _SplineLSQ:
    """Weighted least squares by linear splines with knots at chosen data indices."""

    def __init__(self, x, y, w):
        self.x, self.y, self.w = x, y, w
        self.n = len(x)

    def fit(self, knot_idx: np.ndarray) -> np.ndarray:
        """Fitted values at every data point; knot_idx includes 0 and n-1."""
        x, y, w = self.x, self.y, self.w
        kx = x[knot_idx]
        m = len(knot_idx)
        seg = np.clip(np.searchsorted(kx, x, side="right") - 1, 0, m - 2)
        h = kx[seg + 1] - kx[seg]
        right = (x - kx[seg]) / h
        left = 1.0 - right
        diag = np.bincount(seg, w * left * left, m) + np.bincount(seg + 1, w * right * right, m)
        off = np.bincount(seg, w * left * right, m - 1)
        rhs = np.bincount(seg, w * y * left, m) + np.bincount(seg + 1, w * y * right, m)
        ab = np.zeros((3, m))
        ab[0, 1:] = off
        ab[1] = diag
        ab[2, :-1] = off
        vals = solve_banded((1, 1), ab, rhs)
        return left * vals[seg] + right * vals[seg + 1]

    def jumps(self, g: np.ndarray) -> np.ndarray:
        """Slope increase at each interior data point."""
        slopes = np.diff(g) / np.diff(self.x)
        out = np.zeros(self.n)
        out[1:-1] = np.diff(slopes)
        return out

    def dual(self, g: np.ndarray) -> np.ndarray:
        """Correlation of the residual with each hinge column (x - x_j)_+."""
        wr = self.w * (self.y - g)
        s0 = np.concatenate([np.cumsum(wr[::-1])[::-1][1:], [0.0]])
        s1 = np.concatenate([np.cumsum((wr * self.x)[::-1])[::-1][1:], [0.0]])
        d = s1 - self.x * s0
        d[0] = d[-1] = -np.inf
        return d


def convex_lsq_arrays(x, y, weights=None, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER) -> PiecewiseLinearFit:
    """Weighted convex least squares; see :func:`convex_lsq`."""
    if not tol > 0:
        raise DomainError("tol must be positive")
    w = np.ones(len(np.atleast_1d(x))) if weights is None else weights
    x, y, w = merge_duplicates(x, y, w)
    n = len(x)
    if n <= 2:
        return PiecewiseLinearFit(x, y.copy(), 0.0, 0.0, 0)
    # Work in a scale where the KKT tolerance is meaningful.
    y_scale = float(np.max(np.abs(y - np.average(y, weights=w)))) or 1.0
    kkt_scale = float(w.max()) * y_scale * (x[-1] - x[0])
    solver = _SplineLSQ(x, y, w)

    active = np.zeros(n, dtype=bool)
    active[0] = active[-1] = True
    g = solver.fit(np.flatnonzero(active))
    c = np.zeros(n)
    iters = 0
    stalled = False
    while True:
        d = solver.dual(g)
        d[active] = -np.inf
        j = int(np.argmax(d))
        kkt = max(0.0, float(d[j])) / kkt_scale
        if kkt <= tol:
            break
        active[j] = True
        first = True
        while True:
            iters += 1
            if iters > max_iter:
                raise ConvergenceError(f"convex_lsq did not converge in {max_iter} iterations")
            z_fit = solver.fit(np.flatnonzero(active))
            z = solver.jumps(z_fit)
            inner = active.copy()
            inner[0] = inner[-1] = False
            bad = inner & (z <= 0)
            if not bad.any():
                g, c = z_fit, z
                break
            if first and bad[j] and c[j] == 0.0:
                # The entering column cannot move off zero: round-off
                # stalemate, so the current point is optimal to precision.
                active[j] = False
                stalled = True
                break
            # Step toward z until the first jump hits zero, then drop it.
            bad_idx = np.flatnonzero(bad)
            ratio = c[bad_idx] / (c[bad_idx] - z[bad_idx])
            k = int(np.argmin(ratio))
            c = c + float(ratio[k]) * (z - c)
            drop = inner & (c <= 0.0)
            drop[bad_idx[k]] = True
            active &= ~drop
            c[~active] = 0.0
            first = False
        if stalled:
            break
    obj = float(np.sum(w * (g - y) ** 2))
    return PiecewiseLinearFit(x, g, obj, kkt, iters)


def convex_lsq(samples: Iterable[Sequence[float]], tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER) -> PiecewiseLinearFit:
    """Convex least squares: minimise sum_i n_i (g(x_i) - y_i)^2 over convex g.

    Args:
        samples: ``WeightedSample`` items or ``(x, y_mean[, n])`` tuples.
            Repeated x values are merged by weighted averaging.
        tol: Bound on the scaled KKT residual at exit.
        max_iter: Cap on inner active-set iterations.

    Returns:
        The fit at the distinct sample locations.

    Raises:
        ConvergenceError: If ``max_iter`` is exceeded.
    """
    x, y, w = _unpack(samples)
    return convex_lsq_arrays(x, y, w, tol=tol, max_iter=max_iter)


def lower_hull(x, y) -> np.ndarray:
    """Lower convex hull of the points (x_i, y_i), evaluated at every x_i.

    x must be strictly increasing.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    hull: list[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # Drop b if it lies on or above the segment a -> i.
            if (y[b] - y[a]) * (x[i] - x[a]) >= (y[i] - y[a]) * (x[b] - x[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(x, x[hull], y[hull])


def _check_sorted_pairs(values):
    pts = np.asarray(values, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeError("values must be (x, y) pairs")
    if len(pts) < 3:
        raise ShapeError("need at least three points")
    if np.any(np.diff(pts[:, 0]) <= 0):
        raise ShapeError("x values must be strictly increasing")
    return pts[:, 0].copy(), pts[:, 1].copy()


def linf_project(values: Sequence[Sequence[float]], method: str = "hull") -> PiecewiseLinearFit:
    """Convex g on the same knots minimising max_i |g(x_i) - y_i|.

    With ``method="hull"`` (default) the answer is the lower convex hull of
    the data lifted by s = max_i (y_i - hull_i)/2, which is optimal and
    exact. ``method="lp"`` solves the linear program with HiGHS instead.

    Examples:
        >>> fit = linf_project([(0, 0), (0.5, 1), (1, 0)])
        >>> fit.objective, fit.ys.tolist()
        (0.5, [0.5, 0.5, 0.5])
    """
    x, y = _check_sorted_pairs(values)
    if method == "hull":
        hull = lower_hull(x, y)
        s = max(0.0, float(np.max(y - hull)) / 2.0)
        g = hull + s
        return PiecewiseLinearFit(x, g, float(np.max(np.abs(g - y))), 0.0, 1)
    if method == "lp":
        return _linf_lp(x, y)
    raise DomainError(f"unknown method {method!r}")


def _linf_lp(x, y) -> PiecewiseLinearFit:
    n = len(x)
    h = np.diff(x)
    # Variables: g_0..g_{n-1}, s. Minimise s.
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    rows = []
    for i in range(1, n - 1):
        r = np.zeros(n + 1)
        # -(slope_i - slope_{i-1}) <= 0
        r[i - 1] = -1.0 / h[i - 1]
        r[i] = 1.0 / h[i - 1] + 1.0 / h[i]
        r[i + 1] = -1.0 / h[i]
        rows.append(r)
    eye = np.eye(n)
    upper = np.hstack([eye, -np.ones((n, 1))])   # g - s <= y
    lower = np.hstack([-eye, -np.ones((n, 1))])  # -g - s <= -y
    a_ub = np.vstack(rows + [upper, lower])
    b_ub = np.concatenate([np.zeros(n - 2), y, -y])
    bounds = [(None, None)] * n + [(0, None)]
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise ConvergenceError(f"linear program failed: {res.message}")
    g = res.x[:n]
    return PiecewiseLinearFit(x, g, float(res.x[-1]), 0.0, int(getattr(res, "nit", 0)))


def convexity_violation(xs, ys) -> float:
    """Largest decrease between consecutive slopes (0 for convex data)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 3:
        return 0.0
    slopes = np.diff(ys) / np.diff(xs)
    return max(0.0, float(-np.min(np.diff(slopes))))


__all__ = [
    "CONVEXITY_TOL",
    "PiecewiseLinearFit",
    "WeightedSample",
    "convex_lsq",
    "convex_lsq_arrays",
    "convexity_violation",
    "linf_project",
    "lower_hull",
    "merge_duplicates",
]
