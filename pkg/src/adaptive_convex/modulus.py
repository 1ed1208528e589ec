"""Local approximation moduli and the complexity measures built from them.

The modulus omega(f, x, eps) is the smallest half-width t at which the
midpoint secant error of f around x reaches eps. Small moduli mean f bends
sharply near x, so more queries are needed there. The integral and the sup
of 1/omega over the interior summarise how hard f is to learn to accuracy eps.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .convex_fn import ConvexFn
from .errors import DomainError, IntegrationError

BISECT_TOL = 1e-12
BISECT_MAX_ITER = 200
BISECT_REL_TOL = 1e-13
QUAD_RTOL = 1e-6
GRID_POINTS = 4097


@dataclass(frozen=True)
class ModulusResult:
    """Root of the secant-error equation.

    Attributes:
        value: The half-width t.
        saturated: Whether the secant error actually reaches eps within the
            admissible range. When False, ``value`` is the end of that range.
    """

    value: float
    saturated: bool

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class ComplexityReport:
    epsilon: float
    t_left: float
    t_right: float
    lambda_avg: float
    lambda_max: float
    omega_min: float
    omega_max: float
    n_lower: int

    @staticmethod
    def csv_header() -> str:
        return ",".join(f.name for f in fields(ComplexityReport))

    def csv_row(self) -> str:
        return ",".join(repr(v) for v in asdict(self).values())


def _check_eps(eps):
    if not (eps > 0 and math.isfinite(eps)):
        raise DomainError(f"eps must be positive and finite, got {eps!r}")


def _bisect_increasing(g, hi, eps):
    """Vectorised smallest t in [0, hi] with g(t) >= eps, for increasing g.

    Returns (t, saturated). Unsaturated entries get t = hi.
    """
    hi = np.asarray(hi, dtype=float).copy()
    lo = np.zeros_like(hi)
    saturated = g(hi) >= eps
    active = saturated.copy()
    for _ in range(BISECT_MAX_ITER):
        # Absolute tolerance, tightened to relative for very small roots.
        active &= (hi - lo) > np.minimum(BISECT_TOL, BISECT_REL_TOL * hi)
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        mid = 0.5 * (lo[idx] + hi[idx])
        above = g(mid, idx) >= eps
        hi[idx[above]] = mid[above]
        lo[idx[~above]] = mid[~above]
    return hi, saturated


def omega_array(f: ConvexFn, x, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`omega`: returns (values, saturated) arrays."""
    _check_eps(eps)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0) or np.any(x >= 1):
        raise DomainError("omega needs x in the open interval (0, 1)")
    fx = f._eval(x)
    reach = np.minimum(x, 1.0 - x)

    def g(t, idx=None):
        xs = x if idx is None else x[idx]
        fxs = fx if idx is None else fx[idx]
        left = np.maximum(xs - t, 0.0)
        right = np.minimum(xs + t, 1.0)
        return 0.5 * (f._eval(left) + f._eval(right)) - fxs

    return _bisect_increasing(g, reach, eps)


def omega(f: ConvexFn, x: float, eps: float) -> ModulusResult:
    """Smallest t in [0, min(x, 1-x)] with delta(f, x, t) >= eps.

    Examples:
        >>> from adaptive_convex.convex_fn import Quadratic
        >>> r = omega(Quadratic(2.0), 0.5, 0.01)
        >>> round(r.value, 9), r.saturated
        (0.1, True)
    """
    if not (0.0 < x < 1.0):
        raise DomainError(f"omega needs x in (0, 1), got {x!r}")
    vals, sat = omega_array(f, [x], eps)
    return ModulusResult(float(vals[0]), bool(sat[0]))


def _boundary(f: ConvexFn, eps: float, side: str) -> ModulusResult:
    _check_eps(eps)
    anchor = 0.0 if side == "left" else 1.0
    sign = 1.0 if side == "left" else -1.0
    f_anchor = float(f._eval(np.array([anchor]))[0])

    def g(t, idx=None):
        return 0.5 * (f_anchor + f._eval(anchor + sign * 2.0 * t)) - f._eval(anchor + sign * t)

    t, sat = _bisect_increasing(g, np.array([0.5]), eps)
    return ModulusResult(float(t[0]), bool(sat[0]))


def t_left_result(f: ConvexFn, eps: float) -> ModulusResult:
    """inf{t <= 1/2 : delta(f, t, t) >= eps}, with a saturation flag."""
    return _boundary(f, eps, "left")


def t_right_result(f: ConvexFn, eps: float) -> ModulusResult:
    """Mirror image of :func:`t_left_result` anchored at x = 1."""
    return _boundary(f, eps, "right")


def t_left(f: ConvexFn, eps: float) -> float:
    return t_left_result(f, eps).value


def t_right(f: ConvexFn, eps: float) -> float:
    return t_right_result(f, eps).value


def interior(f: ConvexFn, eps: float) -> tuple[float, float]:
    """The range [t_left, 1 - t_right] over which the measures are taken."""
    return t_left(f, eps), 1.0 - t_right(f, eps)


def _inv_omega(f, eps):
    def h(x):
        vals, _ = omega_array(f, x, eps)
        return 1.0 / vals

    return h


def adaptive_simpson(h, a: float, b: float, rtol: float = QUAD_RTOL,
                     initial_panels: int = 64, max_depth: int = 40,
                     max_panels: int = 2_000_000) -> float:
    """Level-synchronous adaptive Simpson quadrature of a vectorised h.

    All panels that still fail the local error test are refined together,
    so each level costs one vectorised call to ``h``.

    Raises:
        IntegrationError: If the panel count or depth cap is hit.
    """
    if not b > a:
        return 0.0
    edges = np.linspace(a, b, initial_panels + 1)
    span = b - a
    tiny = max(min(a, 1.0 - b), 1e-15)
    if a > 0 and b < 1 and tiny < span / 2:
        # 1/omega can behave like 1/x near the ends; geometric panels
        # toward both ends keep the first level from missing that mass.
        offs = np.geomspace(tiny, span / 2, initial_panels) - tiny
        edges = np.unique(np.concatenate([edges, a + offs, b - offs]))
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    f_lo, f_mid, f_hi = h(lo), h(mid), h(hi)
    whole = (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi)
    scale = abs(float(whole.sum()))
    total = 0.0
    for _ in range(max_depth):
        q1 = 0.5 * (lo + mid)
        q3 = 0.5 * (mid + hi)
        f_q1, f_q3 = h(q1), h(q3)
        left = (mid - lo) / 6.0 * (f_lo + 4.0 * f_q1 + f_mid)
        right = (hi - mid) / 6.0 * (f_mid + 4.0 * f_q3 + f_hi)
        err = left + right - whole
        budget = 15.0 * rtol * max(scale, 1e-300) * (hi - lo) / (b - a)
        done = np.abs(err) <= budget
        total += float(np.sum((left + right + err / 15.0)[done]))
        keep = ~done
        if not keep.any():
            return total
        if 2 * keep.sum() > max_panels:
            break
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        f_lo_new = np.concatenate([f_lo[keep], f_mid[keep]])
        f_hi_new = np.concatenate([f_mid[keep], f_hi[keep]])
        f_mid = np.concatenate([f_q1[keep], f_q3[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        f_lo, f_hi = f_lo_new, f_hi_new
        mid = 0.5 * (lo + hi)
    raise IntegrationError(f"adaptive Simpson did not reach rtol={rtol} on [{a}, {b}]")


def lambda_avg(f: ConvexFn, eps: float, rtol: float = QUAD_RTOL) -> float:
    """1 + integral of 1/omega over [t_left, 1 - t_right]; 1 if that is empty."""
    a, b = interior(f, eps)
    if not b > a:
        return 1.0
    return 1.0 + adaptive_simpson(_inv_omega(f, eps), a, b, rtol=rtol)


def _golden_max(h, lo, hi, iters=80):
    """Maximise a scalar function on [lo, hi] by golden-section search."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    hc, hd = h(c), h(d)
    for _ in range(iters):
        if hi - lo < 1e-13:
            break
        if hc >= hd:
            hi, d, hd = d, c, hc
            c = hi - invphi * (hi - lo)
            hc = h(c)
        else:
            lo, c, hc = c, d, hd
            d = lo + invphi * (hi - lo)
            hd = h(d)
    return max(hc, hd)


def _grid_extremes(f: ConvexFn, eps: float, grid_points: int = GRID_POINTS):
    """(omega_min, omega_max) over the interior, or None when it is empty."""
    a, b = interior(f, eps)
    if not b > a:
        return None
    xs = np.linspace(a, b, grid_points)
    vals, _ = omega_array(f, xs, eps)
    k_min = int(np.argmin(vals))
    k_max = int(np.argmax(vals))

    def refine(k, sign):
        lo = xs[max(k - 1, 0)]
        hi = xs[min(k + 1, len(xs) - 1)]
        if hi <= lo:
            return vals[k]
        best = _golden_max(lambda x: sign * omega_array(f, [x], eps)[0][0], lo, hi)
        return sign * max(sign * vals[k], best)

    w_min = refine(k_min, -1.0)
    w_max = refine(k_max, 1.0)
    return float(w_min), float(w_max)


def lambda_max(f: ConvexFn, eps: float, grid_points: int = GRID_POINTS) -> float:
    """1 + sup of 1/omega over [t_left, 1 - t_right]; 1 if that is empty."""
    ext = _grid_extremes(f, eps, grid_points)
    if ext is None:
        return 1.0
    return 1.0 + 1.0 / ext[0]


def omega_range(f: ConvexFn, eps: float, grid_points: int = GRID_POINTS) -> tuple[float, float]:
    """(omega_min, omega_max) over the interior; (nan, nan) if it is empty."""
    ext = _grid_extremes(f, eps, grid_points)
    return ext if ext is not None else (math.nan, math.nan)


def n_lower_from(lam_avg: float, w_min: float, w_max: float) -> int:
    if not (w_min > 0 and w_max >= w_min):
        return 0
    val = lam_avg / (4.0 * (1.0 + math.log(w_max / w_min))) - 2.0
    return max(0, math.ceil(val))


def n_lower(f: ConvexFn, eps: float) -> int:
    """Lower-bound count ceil(lambda_avg / (4 (1 + log(w_max / w_min))) - 2), at least 0."""
    w_min, w_max = omega_range(f, eps)
    if math.isnan(w_min):
        return 0
    return n_lower_from(lambda_avg(f, eps), w_min, w_max)


def complexity_report(f: ConvexFn, eps: float) -> ComplexityReport:
    tl, tr = t_left(f, eps), t_right(f, eps)
    lam = lambda_avg(f, eps)
    w_min, w_max = omega_range(f, eps)
    if math.isnan(w_min):
        lam_max, count = 1.0, 0
    else:
        lam_max, count = 1.0 + 1.0 / w_min, n_lower_from(lam, w_min, w_max)
    return ComplexityReport(
        epsilon=float(eps), t_left=tl, t_right=tr, lambda_avg=lam,
        lambda_max=lam_max, omega_min=w_min, omega_max=w_max, n_lower=count,
    )
