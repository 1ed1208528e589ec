import io
import math
from fractions import Fraction

import numpy as np
import pytest

from adaptive_convex.convex_fn import PiecewiseLinear, Quadratic, hinge
from adaptive_convex.errors import DomainError, ShapeError
from adaptive_convex.harness import (
    CSV_HEADER,
    ExperimentConfig,
    active_fit,
    derive_seed,
    dyadic_seq,
    fit_slope,
    format_config,
    median_curve,
    parse_config,
    read_records,
    records_to_csv,
    run_active,
    run_active_dyadic,
    run_experiment,
    run_oracle,
    run_passive_dyadic,
    slopes,
)
from adaptive_convex.noisy import run_noisy

SQ = Quadratic(2.0)


def _level_order(levels):
    """Independent enumeration of the dyadic sequence with exact fractions."""
    out = [Fraction(0), Fraction(1)]
    for lev in range(1, levels + 1):
        out += [Fraction(2 * i + 1, 2**lev) for i in range(2 ** (lev - 1))]
    return out


class TestDyadic:
    def test_prefix(self):
        assert [dyadic_seq(k) for k in (0, 1, 2, 4, 7)] == [0, 1, 0.5, 0.75, 0.625]

    def test_matches_enumeration(self):
        ref = _level_order(10)
        got = [dyadic_seq(k) for k in range(len(ref))]
        assert got == [float(r) for r in ref]
        assert len(set(got)) == len(got)
        # The first 2^L + 1 terms are exactly the level-L grid.
        assert sorted(got[:9]) == [i / 8 for i in range(9)]

    def test_negative(self):
        with pytest.raises(DomainError):
            dyadic_seq(-1)


class TestMethods:
    def test_passive_quadratic_nine(self):
        r = run_passive_dyadic(SQ, 0.0, 9, seed=0)
        # Cells of width 1/8; the chord of x^2 peaks (w/2)^2 above it.
        assert r.sup_error_full == pytest.approx(1 / 256, abs=1e-14)

    def test_passive_exact_on_dyadic_knots(self):
        f = PiecewiseLinear([(0, 1), (0.25, 0.2), (0.625, 0.1), (1, 0.6)])
        r = run_passive_dyadic(f, 0.0, 17, seed=0)
        assert r.sup_error_full <= 1e-12

    def test_passive_seeds_differ(self):
        a = run_passive_dyadic(hinge(), 0.1, 50, seed=1, trial=0)
        b = run_passive_dyadic(hinge(), 0.1, 50, seed=2, trial=1)
        assert (a.method, a.budget) == (b.method, b.budget)
        assert a.sup_error_full != b.sup_error_full

    def test_active_noiseless_beats_certificate(self):
        fit, state = active_fit(SQ, 0.0, 0.05, 0.5, 60, seed=0)
        grid = np.linspace(0, 1, 10001)
        lsq_err = np.max(np.abs(fit(grid) - SQ(grid)))
        assert lsq_err <= state.f_hat.sup_error(SQ) + 1e-12

    @pytest.mark.parametrize("runner", [run_active, run_active_dyadic])
    def test_tiny_budget(self, runner):
        r = runner(hinge(), 0.1, 0.05, 0.5, 3, seed=0)
        assert math.isfinite(r.sup_error_full)

    def test_active_dyadic_base_case(self):
        a = run_active(SQ, 0.0, 0.05, 0.5, 3, seed=0, record_wall_time=False)
        b = run_active_dyadic(SQ, 0.0, 0.05, 0.5, 3, seed=0, record_wall_time=False)
        assert a.row()[4:] == b.row()[4:]

    def test_refill_points(self):
        # With sigma = 0 the refills follow the dyadic order inside each leaf.
        fit, state = active_fit(SQ, 0.0, 0.05, 0.5, 12, seed=0, dyadic=True)
        xs = set(fit.xs.tolist())
        assert {0.0, 0.5, 1.0} <= xs
        assert all(float(Fraction(x).limit_denominator(1 << 20)) == x for x in xs)

    def test_active_dyadic_deterministic(self):
        a = run_active_dyadic(hinge(), 0.1, 0.05, 0.5, 300, seed=9, record_wall_time=False)
        b = run_active_dyadic(hinge(), 0.1, 0.05, 0.5, 300, seed=9, record_wall_time=False)
        assert a == b

    def test_active_error_falls_with_budget(self):
        med = []
        for budget in (100, 1000, 10000):
            errs = [run_active(hinge(), 0.1, 0.05, 0.5, budget, seed=s, grid_points=2001,
                               confidence="kaufmann").sup_error_interior for s in range(20)]
            med.append(np.median(errs))
        assert med[0] > med[1] > med[2]

    def test_oracle(self):
        r = run_oracle("quadratic:2,0,0", 0.0, 0.05, 11, seed=0)
        assert r.sup_error_full <= 0.02 + 1e-12
        big = run_oracle("quadratic:2,0,0", 0.1, 0.05, 20000, seed=0)
        assert big.sup_error_full < 0.05

    def test_failure_becomes_nan_row(self, caplog):
        class Broken(Quadratic):
            def _eval(self, x):
                raise FloatingPointError("boom")

        r = run_passive_dyadic(Broken(2.0), 0.0, 9, seed=0)
        assert math.isnan(r.sup_error_full) and math.isnan(r.sup_error_interior)
        assert "failed" in caplog.text


class TestConfig:
    def test_parse(self):
        cfg = parse_config("""
            # rate experiment
            function = hinge
            methods = passive-dyadic, active
            budgets = 100, 10^2.5, 1000
            trials = 2
            sharper = yes
        """)
        assert cfg.budgets == (100, 316, 1000)
        assert cfg.sharper is True and cfg.trials == 2

    def test_round_trip(self):
        cfg = ExperimentConfig(function="quadratic:2,0,0", methods=("oracle",), budgets=(20, 40, 80),
                               error_subinterval=None)
        assert parse_config(format_config(cfg)) == cfg

    @pytest.mark.parametrize("text", ["colour = red", "trials = 1\ntrials = 2", "trials = many", "trials"])
    def test_bad(self, text):
        with pytest.raises(ShapeError):
            parse_config(text)

    @pytest.mark.parametrize("kw", [{"trials": 0}, {"budgets": (100, 50)}, {"methods": ("random",)},
                                    {"budgets": (2, 10)}])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            ExperimentConfig(**kw)


class TestExperiment:
    def test_single_row(self):
        cfg = ExperimentConfig(methods=("passive-dyadic",), budgets=(100,), trials=1)
        recs = run_experiment(cfg)
        assert len(recs) == 1 and recs[0].seed == derive_seed(0, "passive-dyadic", 100, 0)

    def test_byte_identical_and_thread_independent(self):
        cfg = ExperimentConfig(methods=("passive-dyadic", "active", "active-dyadic", "oracle"),
                               budgets=(30, 60), trials=2, grid_points=501)
        a = records_to_csv(run_experiment(cfg, record_wall_time=False))
        b = records_to_csv(run_experiment(cfg, record_wall_time=False))
        c = records_to_csv(run_experiment(cfg, threads=2, record_wall_time=False))
        assert a == b == c
        lines = a.splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert len(lines) == 1 + 4 * 2 * 2
        assert sum(1 for ln in lines if ln.startswith("oracle,")) == 4

    def test_read_back(self):
        cfg = ExperimentConfig(methods=("passive-dyadic",), budgets=(20, 40, 80), trials=2, grid_points=201)
        recs = run_experiment(cfg)
        back = read_records(io.StringIO(records_to_csv(recs)))
        assert [(r.method, r.budget, r.trial, r.seed) for r in back] == \
            [(r.method, r.budget, r.trial, r.seed) for r in recs]
        assert back[0].sup_error_full == recs[0].sup_error_full

    def test_bad_header(self):
        with pytest.raises(ShapeError):
            read_records(io.StringIO("a,b\n1,2\n"))

    def test_seeds_distinct(self):
        seeds = {derive_seed(0, m, b, k) for m in ("active", "oracle") for b in (10, 20) for k in range(5)}
        assert len(seeds) == 20


class TestSlopes:
    @pytest.mark.parametrize("p", [-0.5, -1 / 3, 0.0])
    def test_power_laws(self, p):
        ns = [100, 1000, 10000]
        assert fit_slope([(n, 7.0 * n**p) for n in ns]) == pytest.approx(p, abs=1e-12)

    def test_errors(self):
        with pytest.raises(ShapeError):
            fit_slope([(1, 1), (2, 2)])
        with pytest.raises(DomainError):
            fit_slope([(1, 1), (2, 0), (3, 1)])

    def test_median_curve_skips_nan(self):
        cfg = ExperimentConfig(methods=("passive-dyadic",), budgets=(20, 40, 80), trials=3, grid_points=201)
        recs = run_experiment(cfg)
        curve = median_curve(recs, "passive-dyadic")
        assert [b for b, _ in curve] == [20, 40, 80]
        assert set(slopes(recs)) == {"passive-dyadic"}


def test_active_uses_noisy_sampler_queries():
    # The active method's sampling pattern is the noisy sampler's, fed to LSQ.
    fit, state = active_fit(hinge(), 0.1, 0.05, 0.5, 500, seed=4)
    run = run_noisy(hinge(), 0.1, budget=500, seed=np.random.default_rng(4), record_trace=False)
    assert state.samples() == run.state.samples()
    assert fit.is_convex()
