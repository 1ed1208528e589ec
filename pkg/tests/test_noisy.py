import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import zeta

from adaptive_convex.convex_fn import Quadratic, delta, hinge, secant
from adaptive_convex.errors import BudgetExhausted, DomainError, OracleError, StateError
from adaptive_convex.noiseless import run_noiseless
from adaptive_convex.noisy import (
    ConfidenceFn,
    NoisyOracle,
    PointStats,
    initial_state,
    kaufmann_threshold,
    phi,
    run_noisy,
    step,
    write_checkpoints_csv,
)
from adaptive_convex.regression import convexity_violation

SQ = Quadratic(2.0)


class TestConfidence:
    def test_simple_value(self):
        # sqrt(16 log(log2(2) / 0.05)) = sqrt(16 log 20)
        assert phi(ConfidenceFn("simple", 1.0), 1, 0.05) == pytest.approx(6.9233, abs=1e-4)
        assert phi(ConfidenceFn("simple", 1.0), 1, 0.05) == pytest.approx(math.sqrt(16 * math.log(20)))

    @pytest.mark.parametrize("kind", ["simple", "kaufmann"])
    def test_unsampled_infinite(self, kind):
        assert ConfidenceFn(kind, 0.3)(0, 0.1) == math.inf

    @pytest.mark.parametrize("kind", ["simple", "kaufmann"])
    def test_noiseless_zero(self, kind):
        assert ConfidenceFn(kind, 0.0)(5, 0.1) == 0.0

    @pytest.mark.parametrize("d", [0.0, 1.0, -0.1])
    def test_bad_delta(self, d):
        with pytest.raises(DomainError):
            ConfidenceFn("simple", 1.0)(3, d)

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            ConfidenceFn("hoeffding", 1.0)

    @pytest.mark.parametrize("kind", ["simple", "kaufmann"])
    def test_monotone(self, kind):
        cf = ConfidenceFn(kind, 1.0)
        vals = [cf(n, 0.05) for n in range(1, 500)]
        assert np.all(np.diff(vals) < 0)
        # Larger failure probability means a narrower band.
        assert cf(10, 0.01) > cf(10, 0.05) > cf(10, 0.2)

    def test_kaufmann_tighter(self):
        s, k = ConfidenceFn("simple", 1.0), ConfidenceFn("kaufmann", 1.0)
        for n in (2, 10, 100, 10**4):
            assert k(n, 0.01) < s(n, 0.01)

    @pytest.mark.parametrize("d", [0.3, 0.05, 1e-4])
    def test_kaufmann_threshold_root(self, d):
        eta = 1.1

        def h(x):
            return (math.sqrt(math.e) * zeta(eta * (1 - 1 / (2 * x)))
                    * (math.sqrt(x) / (2 * math.sqrt(2)) + 1) ** eta * math.exp(-x))

        x = kaufmann_threshold(d)
        assert h(x) <= d / 2 * (1 + 1e-9)
        assert x >= 5.5  # above the pole at eta / (2 (eta - 1)) and above 8 / (e - 1)
        if x > 5.51:
            assert h(x * (1 - 1e-6)) > d / 2


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50))
def test_running_mean(ys):
    ps = PointStats()
    for y in ys:
        ps.update(y)
    assert ps.n == len(ys)
    assert ps.mean == pytest.approx(np.mean(ys), abs=1e-9)


class TestOracle:
    def test_seeded(self):
        a, b = NoisyOracle(SQ, 0.1, 4), NoisyOracle(SQ, 0.1, 4)
        assert [a(0.3) for _ in range(5)] == [b(0.3) for _ in range(5)]
        assert a.calls == 5

    def test_failure_wrapped(self):
        def broken(x):
            raise ValueError("nope")
        with pytest.raises(OracleError):
            NoisyOracle(broken, 0.1, 0)(0.5)


class TestState:
    def setup_method(self):
        self.orc = NoisyOracle(SQ, 0.1, 0)
        self.state = initial_state(self.orc, 0.1, 0.05)

    def test_preamble(self):
        s = self.state
        assert s.n_queries == 2 and s.t == 3
        assert {x: p.delta_pnt for x, p in s.stats.items()} == {0.0: 0.05 / 6, 0.5: 0.05 / 6, 1.0: 0.05 / 6}
        assert s.eps_t == math.inf

    def test_first_query_is_midpoint(self):
        step(self.state, self.orc)
        assert self.state.trace[-1][1] == 0.5

    def test_b_bound_cases(self):
        root = self.state.tree.root
        assert self.state.b_bound(root) == math.inf
        step(self.state, self.orc)
        p = self.state.cf(1, 0.05 / 6)
        assert self.state.b_bound(root) == pytest.approx(1.5 * p)

    def test_b_bound_noiseless(self):
        orc = NoisyOracle(SQ, 0.0, 0)
        s = initial_state(orc, 0.0, 0.05)
        step(s, orc)
        assert s.b_bound(s.tree.leaves[0]) == 0.0

    def test_b_bound_non_leaf(self):
        orc = NoisyOracle(SQ, 0.0, 0)
        s = initial_state(orc, 0.0, 0.05)
        # The split test uses the score from before the round's sample, so
        # the root splits on the second round.
        step(s, orc)
        step(s, orc)
        assert len(s.tree) == 2
        with pytest.raises(StateError):
            s.b_bound(s.tree.root)

    def test_child_delta(self):
        for literal, denom in ((False, 4), (True, 2)):
            orc = NoisyOracle(SQ, 0.0, 0)
            s = initial_state(orc, 0.0, 0.05, literal_child_delta=literal)
            step(s, orc)
            step(s, orc)
            assert s.stats[0.25].delta_pnt == pytest.approx(0.05 / (denom * 2**2))

    def test_record_untracked(self):
        with pytest.raises(StateError):
            self.state.record(0.3, 1.0)

    @pytest.mark.parametrize("kw", [{"delta": 1.0}, {"beta": 0.0}, {"sigma": -1.0}])
    def test_bad_state_args(self, kw):
        args = {"sigma": 0.1, "delta": 0.05, "beta": 0.5} | kw
        with pytest.raises(DomainError):
            initial_state(self.orc, **args)


class TestNoiseless:
    @pytest.mark.parametrize("eps", [1e-2, 1e-3])
    def test_certificate(self, named_fn, eps):
        _, f = named_fn
        run = run_noisy(f, 0.0, eps_target=eps, budget=10**5)
        assert run.certified
        assert run.f_hat.sup_error(f) <= eps

    def test_matches_noiseless_leaves(self, named_fn):
        _, f = named_fn
        run = run_noisy(f, 0.0, eps_target=0.01, budget=10**5)
        ref = run_noiseless(f, 0.0025)
        assert [(n.lo, n.hi) for n in run.state.tree.leaves] == [(n.lo, n.hi) for n in ref.state.tree.leaves]
        assert run.state.n_queries <= 2 * ref.tau


class TestNoisyRun:
    @pytest.fixture(scope="class")
    @staticmethod
    def run():
        return run_noisy(hinge(), 0.1, budget=3000, seed=3, confidence="kaufmann")

    def test_budget_identity(self, run):
        s = run.state
        assert s.n_queries == 3000
        assert s.t == 1 + sum(p.n for p in s.stats.values())

    def test_eps_non_increasing(self, run):
        eps = [e for _, e in run.eps_trace]
        assert np.all(np.diff(eps) < 0)
        assert [row[3] for row in run.state.trace][2:] == sorted([row[3] for row in run.state.trace][2:],
                                                                 reverse=True)

    def test_projection_convex(self, run):
        for snap in run.state.snapshots:
            m = snap.projected()
            assert convexity_violation(m.xs, m.ys) <= 1e-8

    def test_delta_budget(self, run):
        assert run.state.delta_spent <= 0.05
        assert sum(p.delta_pnt for p in run.state.stats.values()) == pytest.approx(run.state.delta_spent)

    def test_checkpoints(self, run, tmp_path):
        assert [c[0] for c in run.checkpoints] == [16, 32, 64, 128, 256, 512, 1024, 2048, 3000]
        write_checkpoints_csv(tmp_path / "c.csv", run.checkpoints)
        rows = list(csv.reader(open(tmp_path / "c.csv")))
        assert rows[0] == ["t", "grid_sup_error", "eps_t"] and len(rows) == 10

    def test_trace(self, run, tmp_path):
        run.state.write_trace(tmp_path / "t.csv")
        rows = list(csv.reader(open(tmp_path / "t.csv")))
        assert rows[0] == ["t", "x_t", "y_t", "eps_t", "n_leaves"]
        assert len(rows) == 3001

    def test_deterministic(self, run):
        again = run_noisy(hinge(), 0.1, budget=3000, seed=3, confidence="kaufmann")
        assert again.state.trace == run.state.trace

    def test_sandwich_on_good_event(self, run):
        f, s = hinge(), run.state
        good = all(abs(p.mean - f(x)) <= s.cf(p.n, p.delta_pnt) for x, p in s.stats.items() if p.n)
        assert good  # holds for this seed; the bound below is conditional on it
        for leaf in s.tree.iter_leaves():
            sc = s.leaf_score(leaf)
            if math.isinf(sc.b):
                continue
            x = np.linspace(leaf.lo, leaf.hi, 33)
            chord = np.interp(x, [leaf.lo, leaf.hi], [s.stats[leaf.lo].mean, s.stats[leaf.hi].mean])
            assert np.max(np.abs(chord - f(x))) <= 2 * (max(0.0, sc.delta_pnt) + sc.b) + 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_stopping_properties(seed):
    beta = 0.5
    run = run_noisy(hinge(), 0.05, beta=beta, eps_target=0.15, budget=10**6, seed=seed)
    s = run.state
    assert run.certified
    eps = s.eps_t
    # No point is sampled much past the level its band needs.
    for p in s.stats.values():
        if p.n <= 1:
            continue
        cap = 1
        while s.cf(cap + 1, p.delta_pnt) >= eps / (6 * (2 + beta)):
            cap += 1
        assert p.n <= cap + 1
    # Every bisected interval had genuine curvature.
    for _, lo, hi in s.splits:
        assert delta(hinge(), (lo, hi)) >= beta * eps / (4 * (2 + beta))


class TestRunArgs:
    def test_bad_delta(self):
        with pytest.raises(DomainError):
            run_noisy(SQ, 0.1, delta=0.5, budget=10)

    def test_needs_stop_rule(self):
        with pytest.raises(DomainError):
            run_noisy(SQ, 0.1)

    def test_budget_exhausted(self):
        with pytest.raises(BudgetExhausted) as info:
            run_noisy(SQ, 0.1, eps_target=1e-6, budget=50, raise_on_budget=True)
        assert not info.value.result.certified

    def test_secant_model_consistent(self):
        run = run_noisy(SQ, 0.0, budget=40)
        m = run.state.secant_model()
        for x in m.xs:
            assert m(x) == pytest.approx(SQ(x))
        assert secant(SQ, (0.0, 1.0), 0.5) >= m(0.5)
