import numpy as np
import pytest
from hypothesis import settings

from adaptive_convex.convex_fn import (
    DataDerived,
    NegSqrt,
    PiecewiseLinear,
    Quadratic,
    SoftPlus,
    test_functions,
)

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(params=sorted(test_functions()))
def named_fn(request):
    return request.param, test_functions()[request.param]


def random_convex(rng: np.random.Generator):
    """A random instance of one of the function families."""
    kind = rng.integers(5)
    if kind == 0:
        return Quadratic(rng.uniform(0.1, 5.0), rng.uniform(-2, 2), rng.uniform(-1, 1))
    if kind == 1:
        return NegSqrt(rng.uniform(0.2, 3.0))
    if kind == 2:
        return SoftPlus(rng.uniform(5.0, 200.0), rng.uniform(0.5, 2.0))
    if kind == 3:
        return DataDerived()
    n = rng.integers(3, 9)
    xs = np.concatenate([[0.0], np.sort(rng.uniform(0.02, 0.98, n - 2)), [1.0]])
    slopes = np.sort(rng.normal(0, 3, n - 1))
    y0 = rng.normal()
    ys = np.concatenate([[y0], y0 + np.cumsum(slopes * np.diff(xs))])
    return PiecewiseLinear(list(zip(xs, ys)))


# Acceptance results, one (criterion, passed, detail) per check; printed at
# the end of the session so they survive output capture.
ACCEPTANCE: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
