"""Experiment orchestration: sampling strategies, error measurement, slopes, configs.

Four strategies are compared at a fixed query budget:

``passive-dyadic``
    Query 0, 1, 1/2, 1/4, 3/4, ... and fit convex least squares.
``active``
    Run the noisy active sampler to the budget, then fit convex least
    squares to everything it collected.
``active-dyadic``
    Alternate active rounds with dyadic refill queries inside the leaf that
    has received the fewest refill queries so far.
``oracle``
    Spread the budget evenly over the design of a packing whose
    allocation fits the budget. Needs the true f, so it is a yardstick only.
"""

from __future__ import annotations

import csv
import functools
import io
import logging
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .convex_fn import ConvexFn, parse_function
from .errors import DomainError, ShapeError
from .noisy import ConfidenceFn, NoisyOracle, initial_state, step
from .packing import build_packing, oracle_allocation
from .regression import convex_lsq_arrays

log = logging.getLogger(__name__)

METHODS = ("passive-dyadic", "active", "active-dyadic", "oracle")
CSV_HEADER = ("method", "budget", "trial", "seed", "sup_error_full", "sup_error_interior", "wall_time_ms")


def dyadic_seq(k: int) -> float:
    """k-th term of 0, 1, 1/2, 1/4, 3/4, 1/8, 3/8, 5/8, 7/8, 1/16, ...

    Examples:
        >>> [dyadic_seq(k) for k in range(8)]
        [0.0, 1.0, 0.5, 0.25, 0.75, 0.125, 0.375, 0.625]
    """
    if k < 0:
        raise DomainError("k must be non-negative")
    if k < 2:
        return float(k)
    j = k - 1  # 1-based position among the midpoints
    level = j.bit_length() - 1  # level L holds 2^L points
    offset = j - (1 << level)
    return (2 * offset + 1) / float(1 << (level + 1))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment table."""

    function: str = "hinge"
    sigma: float = 0.1
    methods: tuple[str, ...] = ("passive-dyadic", "active")
    budgets: tuple[int, ...] = (100, 316, 1000)
    trials: int = 5
    delta: float = 0.05
    beta: float = 0.5
    seed: int = 0
    grid_points: int = 10001
    error_subinterval: Optional[tuple[float, float]] = (0.1, 0.9)
    confidence: str = "simple"
    sharper: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("trials must be at least 1")
        if list(self.budgets) != sorted(set(self.budgets)):
            raise DomainError("budgets must be strictly increasing")
        if any(b < 3 for b in self.budgets):
            raise DomainError("budgets must be at least 3")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise DomainError(f"unknown methods {bad}")
        if self.sigma < 0:
            raise DomainError("sigma must be non-negative")
        if self.grid_points < 2:
            raise DomainError("grid_points must be at least 2")
        ConfidenceFn(self.confidence, self.sigma)

    def fn(self) -> ConvexFn:
        return _parse_cached(self.function)


@functools.lru_cache(maxsize=64)
def _parse_cached(text: str) -> ConvexFn:
    return parse_function(text)


def _parse_bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _parse_budgets(v: str) -> tuple[int, ...]:
    out = []
    for tok in v.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "^" in tok:  # e.g. 10^2.5
            base, exp = tok.split("^")
            out.append(int(round(float(base) ** float(exp))))
        else:
            out.append(int(float(tok)))
    return tuple(out)


def _parse_subinterval(v: str):
    if v.strip().lower() in ("", "none"):
        return None
    lo, hi = (float(t) for t in v.split(","))
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError("error_subinterval must satisfy 0 <= lo < hi <= 1")
    return (lo, hi)


_PARSERS: dict[str, Callable[[str], object]] = {
    "function": str.strip,
    "sigma": float,
    "methods": lambda v: tuple(m.strip() for m in v.split(",") if m.strip()),
    "budgets": _parse_budgets,
    "trials": int,
    "delta": float,
    "beta": float,
    "seed": int,
    "grid_points": int,
    "error_subinterval": _parse_subinterval,
    "confidence": str.strip,
    "sharper": _parse_bool,
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse flat ``key = value`` lines. ``#`` starts a comment.

    Raises:
        ShapeError: On unknown keys, repeated keys or unparsable values.
    """
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ShapeError(f"line {lineno}: expected 'key = value'")
        key, _, val = (p.strip() for p in line.partition("="))
        if key not in _PARSERS:
            raise ShapeError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ShapeError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](val)
        except ValueError as exc:
            raise ShapeError(f"line {lineno}: bad value for {key}: {exc}") from None
    return ExperimentConfig(**values)


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name in ("methods", "budgets"):
            v = ",".join(str(x) for x in v)
        elif f.name == "error_subinterval":
            v = "none" if v is None else f"{v[0]},{v[1]}"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RunRecord:
    method: str
    budget: int
    trial: int
    seed: int
    sup_error_full: float
    sup_error_interior: float
    wall_time_ms: float = 0.0

    def row(self) -> list[str]:
        return [self.method, str(self.budget), str(self.trial), str(self.seed),
                repr(self.sup_error_full), repr(self.sup_error_interior), f"{self.wall_time_ms:.3f}"]


@dataclass
class _Errors:
    grid_points: int = 10001
    subinterval: Optional[tuple[float, float]] = (0.1, 0.9)

    def __call__(self, f: ConvexFn, model) -> tuple[float, float]:
        grid = np.linspace(0.0, 1.0, self.grid_points)
        diff = np.abs(model(grid) - f(grid))
        full = float(np.max(diff))
        if self.subinterval is None:
            return full, full
        lo, hi = self.subinterval
        mask = (grid >= lo) & (grid <= hi)
        return full, float(np.max(diff[mask])) if mask.any() else math.nan


def _noise(sigma: float, rng: np.random.Generator, size: int) -> np.ndarray:
    if sigma == 0:
        return np.zeros(size)
    return sigma * rng.standard_normal(size)


def passive_dyadic_fit(f: ConvexFn, sigma: float, budget: int, seed):
    rng = np.random.default_rng(seed)
    x = np.array([dyadic_seq(k) for k in range(budget)])
    y = f(x) + _noise(sigma, rng, budget)
    return convex_lsq_arrays(x, y)


def active_fit(f: ConvexFn, sigma: float, delta: float, beta: float, budget: int, seed,
               confidence: str = "simple", sharper: bool = False, dyadic: bool = False):
    """Active (optionally with dyadic refill) sampling followed by convex LSQ.

    Returns the fit and the sampler state.
    """
    if budget < 2:
        raise DomainError("budget must be at least 2")
    oracle = NoisyOracle(f, sigma, np.random.default_rng(seed))
    cf = ConfidenceFn(confidence, sigma)
    state = initial_state(oracle, sigma, delta, beta, confidence=cf, sharper=sharper,
                          record_trace=False)
    extra_x: list[float] = []
    extra_y: list[float] = []
    refill: dict[int, int] = {}
    round_no = 0
    while state.n_queries + len(extra_x) < budget:
        round_no += 1
        if dyadic and round_no % 2 == 0:
            leaf = min(state.tree.iter_leaves(), key=lambda nd: (refill.get(id(nd), 0), nd.lo))
            j = refill.get(id(leaf), 0)
            refill[id(leaf)] = j + 1
            x = leaf.lo + (leaf.hi - leaf.lo) * dyadic_seq(j)
            extra_x.append(x)
            extra_y.append(oracle(x))
        else:
            step(state, oracle)
    pts = state.samples()
    xs = [p[0] for p in pts] + extra_x
    ys = [p[1] for p in pts] + extra_y
    ws = [float(p[2]) for p in pts] + [1.0] * len(extra_x)
    return convex_lsq_arrays(np.array(xs), np.array(ys), np.array(ws)), state


@functools.lru_cache(maxsize=256)
def _oracle_design(fn_text: str, sigma: float, delta: float, budget: int):
    """Allocation at the largest eps whose total cost fits the budget."""
    f = _parse_cached(fn_text)
    hi = max(2.0 * f.sup_norm(), 1e-12) * 1.01
    floor = hi * 1e-10

    def cost(eps):
        return oracle_allocation(f, eps, sigma, delta).total

    if cost(hi) > budget:
        return oracle_allocation(f, hi, sigma, delta)
    # Walk down until the design no longer fits; small eps is expensive to
    # pack, so never start there.
    lo = hi
    while cost(lo) <= budget:
        hi = lo
        lo = hi / 4.0
        if lo < floor:
            return oracle_allocation(f, hi, sigma, delta)
    # Bisect on log eps; cost is decreasing in eps up to packing granularity.
    for _ in range(40):
        mid = math.sqrt(lo * hi)
        if cost(mid) <= budget:
            hi = mid
        else:
            lo = mid
        if hi / lo < 1.0 + 1e-4:
            break
    return oracle_allocation(f, hi, sigma, delta)


def oracle_fit(f: ConvexFn, fn_text: str, sigma: float, delta: float, budget: int, seed):
    alloc = _oracle_design(fn_text, sigma, delta, budget)
    pts = np.asarray(alloc.design_points)
    base, extra = divmod(budget, len(pts))
    counts = np.full(len(pts), base)
    counts[:extra] += 1
    keep = counts > 0
    pts, counts = pts[keep], counts[keep]
    rng = np.random.default_rng(seed)
    means = np.array([f(x) + float(np.mean(_noise(sigma, rng, int(c)))) for x, c in zip(pts, counts)])
    return convex_lsq_arrays(pts, means, counts.astype(float))


def _measure(method: str, budget: int, trial: int, seed: int, errors: _Errors,
             record_wall_time: bool, body: Callable[[], object], f: ConvexFn) -> RunRecord:
    start = time.monotonic()
    try:
        model = body()
        full, inner = errors(f, model)
    except Exception as exc:  # one failed run must not sink the table
        log.warning("%s budget=%d trial=%d failed: %s", method, budget, trial, exc)
        full = inner = math.nan
    ms = (time.monotonic() - start) * 1000.0 if record_wall_time else 0.0
    return RunRecord(method, budget, trial, seed, full, inner, ms)


def run_passive_dyadic(f: ConvexFn, sigma: float, budget: int, seed: int, trial: int = 0,
                       grid_points: int = 10001, error_subinterval=(0.1, 0.9),
                       record_wall_time: bool = True) -> RunRecord:
    errs = _Errors(grid_points, error_subinterval)
    return _measure("passive-dyadic", budget, trial, seed, errs, record_wall_time,
                    lambda: passive_dyadic_fit(f, sigma, budget, seed), f)


def run_active(f: ConvexFn, sigma: float, delta: float, beta: float, budget: int, seed: int,
               trial: int = 0, grid_points: int = 10001, error_subinterval=(0.1, 0.9),
               confidence: str = "simple", sharper: bool = False,
               record_wall_time: bool = True) -> RunRecord:
    errs = _Errors(grid_points, error_subinterval)
    return _measure("active", budget, trial, seed, errs, record_wall_time,
                    lambda: active_fit(f, sigma, delta, beta, budget, seed, confidence, sharper)[0], f)


def run_active_dyadic(f: ConvexFn, sigma: float, delta: float, beta: float, budget: int, seed: int,
                      trial: int = 0, grid_points: int = 10001, error_subinterval=(0.1, 0.9),
                      confidence: str = "simple", sharper: bool = False,
                      record_wall_time: bool = True) -> RunRecord:
    errs = _Errors(grid_points, error_subinterval)
    return _measure("active-dyadic", budget, trial, seed, errs, record_wall_time,
                    lambda: active_fit(f, sigma, delta, beta, budget, seed, confidence, sharper,
                                       dyadic=True)[0], f)


def run_oracle(fn_text: str, sigma: float, delta: float, budget: int, seed: int, trial: int = 0,
               grid_points: int = 10001, error_subinterval=(0.1, 0.9),
               record_wall_time: bool = True) -> RunRecord:
    f = _parse_cached(fn_text)
    errs = _Errors(grid_points, error_subinterval)
    return _measure("oracle", budget, trial, seed, errs, record_wall_time,
                    lambda: oracle_fit(f, fn_text, sigma, delta, budget, seed), f)


def derive_seed(seed: int, method: str, budget: int, trial: int) -> int:
    """Stable per-run seed from the experiment seed and the run's coordinates."""
    ss = np.random.SeedSequence([int(seed), METHODS.index(method), int(budget), int(trial)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _run_one(task) -> RunRecord:
    cfg, method, budget, trial, record_wall_time = task
    f = cfg.fn()
    seed = derive_seed(cfg.seed, method, budget, trial)
    common = dict(trial=trial, grid_points=cfg.grid_points, error_subinterval=cfg.error_subinterval,
                  record_wall_time=record_wall_time)
    if method == "passive-dyadic":
        return run_passive_dyadic(f, cfg.sigma, budget, seed, **common)
    if method == "active":
        return run_active(f, cfg.sigma, cfg.delta, cfg.beta, budget, seed,
                          confidence=cfg.confidence, sharper=cfg.sharper, **common)
    if method == "active-dyadic":
        return run_active_dyadic(f, cfg.sigma, cfg.delta, cfg.beta, budget, seed,
                                 confidence=cfg.confidence, sharper=cfg.sharper, **common)
    return run_oracle(cfg.function, cfg.sigma, cfg.delta, budget, seed, **common)


def experiment_tasks(cfg: ExperimentConfig, record_wall_time: bool = True) -> list[tuple]:
    return [(cfg, m, b, k, record_wall_time)
            for m in cfg.methods for b in cfg.budgets for k in range(cfg.trials)]


def run_experiment(cfg: ExperimentConfig, threads: int = 1, record_wall_time: bool = True) -> list[RunRecord]:
    """All (method, budget, trial) runs, in that order regardless of scheduling."""
    tasks = experiment_tasks(cfg, record_wall_time)
    if threads <= 1:
        return [_run_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * threads))))


def write_records(records: Iterable[RunRecord], out) -> None:
    """Write records as CSV to a path or an open text stream."""
    if isinstance(out, (str, os.PathLike)):
        with open(out, "w", newline="") as fh:
            write_records(records, fh)
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row())


def records_to_csv(records: Iterable[RunRecord]) -> str:
    buf = io.StringIO()
    write_records(records, buf)
    return buf.getvalue()


def read_records(path_or_stream) -> list[RunRecord]:
    if isinstance(path_or_stream, (str, os.PathLike)):
        with open(path_or_stream, newline="") as fh:
            return read_records(fh)
    reader = csv.DictReader(path_or_stream)
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ShapeError(f"unexpected CSV header {reader.fieldnames}")
    return [RunRecord(r["method"], int(r["budget"]), int(r["trial"]), int(r["seed"]),
                      float(r["sup_error_full"]), float(r["sup_error_interior"]),
                      float(r["wall_time_ms"])) for r in reader]


def fit_slope(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(err) against log(n).

    Examples:
        >>> round(fit_slope([(n, n ** -0.5) for n in (10, 100, 1000)]), 12)
        -0.5
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ShapeError("need at least three (n, err) pairs")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise DomainError("fit_slope needs positive finite values")
    return float(np.polyfit(np.log(pts[:, 0]), np.log(pts[:, 1]), 1)[0])


def median_curve(records: Iterable[RunRecord], method: str, interior: bool = True) -> list[tuple[int, float]]:
    """(budget, median error) for one method, skipping failed runs."""
    by_budget: dict[int, list[float]] = {}
    for r in records:
        if r.method != method:
            continue
        err = r.sup_error_interior if interior else r.sup_error_full
        if math.isfinite(err):
            by_budget.setdefault(r.budget, []).append(err)
    return [(b, statistics.median(v)) for b, v in sorted(by_budget.items())]


def slopes(records: Sequence[RunRecord], interior: bool = True) -> dict[str, float]:
    """Fitted log-log slope of the median error curve for every method present."""
    out = {}
    for m in dict.fromkeys(r.method for r in records):
        curve = median_curve(records, m, interior)
        out[m] = fit_slope(curve) if len(curve) >= 3 else math.nan
    return out
