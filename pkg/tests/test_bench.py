import functools

import numpy as np
import pytest

from nsi.bench import (
    BenchConfig,
    EstimatorStats,
    baseline_estimate,
    enumerate_targets,
    run_bench,
    si_estimate,
)
from nsi.donors import DonorSet, find_donors, si_donors
from nsi.errors import EmptyDonorSet, InputError
from nsi.estimator import estimate
from nsi.graph import empty_graph
from nsi.panel import ObservationPanel, SimConfig, TreatmentPanel, simulate


def _small(**kw):
    base = dict(n_units=120, t_pre=40, t_post=10, n_sims=2, n_eval_units=6, seed=3)
    base.update(kw)
    return BenchConfig(**base)


class TestDonorComparison:
    def test_no_spillover_si_equals_nsi(self):
        rng = np.random.default_rng(0)
        g = empty_graph(60)
        tp = TreatmentPanel.from_parts(rng.integers(1, 3, size=(60, 1)).repeat(30, axis=1),
                                       rng.integers(1, 3, size=60), 8, 2)
        z, _ = simulate(g, tp, SimConfig(seed=0))
        compared = 0
        for n in range(60):
            for a in (1, 2):
                nsi = find_donors(g, tp, n, [a])
                si = si_donors(tp, n, a)
                assert nsi.indices == si.indices
                if len(si) >= 2:
                    p1 = estimate(z, nsi, kappa="knee").point
                    p2 = si_estimate(z, tp, n, a).point
                    assert abs(p1 - p2) <= 1e-10
                    compared += 1
        assert compared > 50

    def test_ring_pattern_counts(self, donor_ring):
        g, tp, ego, target = donor_ring
        assert len(si_donors(tp, ego, target[1])) == 7
        assert len(find_donors(g, tp, ego, target)) == 4


class TestBaseline:
    def test_single_donor(self):
        z = ObservationPanel(np.arange(20.0).reshape(5, 4), 3)
        assert baseline_estimate(z, DonorSet(0, (1,), ((2, (0,)),))) == pytest.approx(np.mean([14.0, 18.0]))

    def test_identical_columns(self):
        col = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        z = ObservationPanel(np.column_stack([col] * 4), 2)
        ds = DonorSet(0, (1,), ((1, (0,)), (3, (0,))))
        assert baseline_estimate(z, ds) == pytest.approx(4.0)

    def test_double_loop(self):
        rng = np.random.default_rng(1)
        z = ObservationPanel(rng.normal(size=(12, 9)), 7)
        idx = [5, 2, 8]
        ds = DonorSet(0, (1,), tuple((i, (0,)) for i in idx))
        total = 0.0
        for t in range(7, 12):
            for i in idx:
                total += z.z[t, i]
        assert baseline_estimate(z, ds) == pytest.approx(total / 15, abs=1e-14)

    def test_empty(self):
        with pytest.raises(EmptyDonorSet):
            baseline_estimate(ObservationPanel(np.zeros((3, 3)), 2), DonorSet(0, (1,), ()))


class TestTargets:
    def test_all_eight(self):
        tg = enumerate_targets(3, 2, 64, np.random.default_rng(0))
        assert len(tg) == 8 and len(set(tg)) == 8

    def test_capped(self):
        tg = enumerate_targets(5, 3, 64, np.random.default_rng(0))
        assert len(tg) == 64 and len(set(tg)) == 64
        assert all(len(t) == 5 and set(t) <= {1, 2, 3} for t in tg)


class TestStats:
    def test_merge_order(self):
        rng = np.random.default_rng(0)
        parts = []
        for _ in range(5):
            s = EstimatorStats()
            for _ in range(4):
                truth = rng.normal(size=6)
                s.add(float(rng.normal()), truth + rng.normal(size=6), truth, 3)
            parts.append(s)
        a, b = EstimatorStats(), EstimatorStats()
        for s in parts:
            a.merge(s)
        for s in reversed(parts):
            b.merge(s)
        assert a.n_estimates == b.n_estimates == 20
        assert a.mse == pytest.approx(b.mse, rel=1e-12)
        assert a.r_squared == pytest.approx(b.r_squared, rel=1e-12)
        assert a.mse >= 0 and 0 <= a.coverage <= 1

    def test_perfect_predictions(self):
        s = EstimatorStats()
        truth = np.array([1.0, 2.0, 3.0])
        s.add(2.0, truth.copy(), truth, 1)
        assert s.mse == 0 and s.r_squared == 1.0


class TestRunBench:
    def test_zero_noise_exact(self):
        cfg = _small(n_units=300, t_pre=60, noise_std=0.0, kappa_policy=6, nsi_kappa_min=6,
                     estimators=("nsi",), n_eval_units=10)
        res = run_bench(cfg)
        assert res["nsi"].n_estimates > 20
        assert res["nsi"].mse < 1e-10
        assert res["nsi"].mse_estimand < 1e-10

    def test_seed_determinism(self):
        cfg = _small()
        a, b = run_bench(cfg), run_bench(cfg)
        assert a.to_dict() == b.to_dict()
        for name in cfg.estimators:
            assert np.array_equal(a.residuals[name], b.residuals[name])
        assert run_bench(_small(seed=4)).to_dict() != a.to_dict()

    def test_workers_do_not_change_results(self):
        cfg = _small(n_sims=3)
        serial = run_bench(cfg)
        parallel = run_bench(BenchConfig(**{**cfg.__dict__, "n_workers": 2}))
        assert serial.to_dict()["estimators"] == parallel.to_dict()["estimators"]

    def test_effective_t_pre(self):
        # 120-ring: three colors, so 41 columns hold three periods of 13
        res = run_bench(_small(t_pre=41))
        assert res.effective_t_pre == 39

    def test_random_training_and_synthetic_control(self):
        res = run_bench(_small(training="random", targets="synthetic_control"))
        assert res["si"].n_estimates > 0
        assert res.effective_t_pre == 40

    def test_config_validation(self):
        with pytest.raises(InputError):
            BenchConfig(n_sims=0)
        with pytest.raises(InputError):
            BenchConfig(estimators=("nsi", "oracle"))
        with pytest.raises(InputError):
            BenchConfig.from_dict({"n_units": 10, "colour": 1})
        with pytest.raises(InputError):
            run_bench(_small(t_pre=5))


@functools.lru_cache(maxsize=None)
def _trend_cell(**kw):
    base = dict(n_units=1000, t_pre=100, t_post=50, n_sims=50, n_eval_units=50, training="random",
                targets="synthetic_control", estimators=("nsi",), nsi_kappa_min=1, graph_kind="circulant",
                degree=2, seed=1)
    base.update(kw)
    return float(np.median(run_bench(BenchConfig(**base)).per_sim_mse["nsi"]))


@pytest.mark.slow
def test_mse_trends():
    by_degree = [_trend_cell(degree=d) for d in (2, 4, 6)]
    by_units = [_trend_cell(n_units=n) for n in (250, 500, 1000)]
    by_t_pre = [_trend_cell(t_pre=t) for t in (25, 50, 100)]
    assert by_degree == sorted(by_degree), by_degree
    assert by_units == sorted(by_units, reverse=True), by_units
    assert by_t_pre == sorted(by_t_pre, reverse=True), by_t_pre
