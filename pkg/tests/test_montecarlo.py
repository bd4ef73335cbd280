import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rsdesign import montecarlo as mc
from rsdesign.designs import builtin_design, builtin_random_design
from rsdesign.error_models import ErrorModel
from rsdesign.estimation import ConvergenceError
from rsdesign.montecarlo import (ScenarioConfig, SimulationError, contrast_summary, lb_efficiency,
                                 paired_comparison, run_scenario, uv_variance_study,
                                 var_efficiency, write_series)


def cauchy_factorial(strategy, R=40, seed=3, n=20):
    return ScenarioConfig(ErrorModel.cauchy(1.0), builtin_design("factorial22", n), strategy,
                          [1, 1, 1, 1], n1=8, iterations=R, seed=seed)


class TestConfig:
    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="theta_true"):
            ScenarioConfig(ErrorModel.cauchy(), builtin_design("balanced2", 10), "Fixed", [1, 2, 3])

    def test_adaptive_needs_n1(self):
        with pytest.raises(ValueError, match="n1"):
            ScenarioConfig(ErrorModel.cauchy(), builtin_design("balanced2", 10), "RRSD", [1, 0])

    def test_iterations_positive(self):
        with pytest.raises(ValueError):
            ScenarioConfig(ErrorModel.cauchy(), builtin_design("balanced2", 10), "Fixed", [1, 0],
                           iterations=0)


class TestDeterminism:
    def test_same_seed_same_report(self):
        a = run_scenario(cauchy_factorial("RRSD"))
        b = run_scenario(cauchy_factorial("RRSD"))
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())

    def test_worker_count_does_not_matter(self):
        a = run_scenario(cauchy_factorial("DRSD", R=12), workers=1)
        b = run_scenario(cauchy_factorial("DRSD", R=12), workers=3)
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())

    def test_different_seed_differs(self):
        a = run_scenario(cauchy_factorial("Fixed", seed=1), bootstrap=0)
        b = run_scenario(cauchy_factorial("Fixed", seed=2), bootstrap=0)
        assert not np.array_equal(a.mean_Hinv, b.mean_Hinv)

    def test_substreams_are_distinct(self):
        x = [mc.substream(5, it, tag).random() for it in range(3) for tag in range(3)]
        assert len(set(x)) == 9

    def test_common_random_numbers(self):
        # the Fixed design and an adaptive run share the first-run errors
        a = mc.simulate_once(cauchy_factorial("Fixed"), 0)
        b = mc.simulate_once(cauchy_factorial("RRSD"), 0)
        assert a["counts"].sum() == b["counts"].sum() == 20


class TestFailures:
    def test_retry_then_exclude(self, monkeypatch):
        calls = []
        original = mc.simulate_once

        def flaky(cfg, iteration, attempt=0):
            calls.append((iteration, attempt))
            if iteration == 2:
                raise ConvergenceError("synthetic")
            if iteration == 4 and attempt == 0:
                raise ConvergenceError("synthetic")
            return original(cfg, iteration, attempt)

        monkeypatch.setattr(mc, "simulate_once", flaky)
        rep = run_scenario(cauchy_factorial("Fixed", R=6), bootstrap=0)
        assert rep.R_effective == 5
        assert rep.failed_iterations == [2]
        assert [a for it, a in calls if it == 2] == [0, 1, 2, 3]
        assert (4, 1) in calls

    def test_all_failing(self, monkeypatch):
        def broken(cfg, iteration, attempt=0):
            raise ConvergenceError("synthetic")
        monkeypatch.setattr(mc, "simulate_once", broken)
        with pytest.raises(SimulationError):
            run_scenario(cauchy_factorial("Fixed", R=3))


class TestEstimates:
    def test_gamma_precision_closed_form(self):
        cfg = ScenarioConfig(ErrorModel.hetero_normal_gamma(0.25, 0.25),
                             builtin_design("balanced2", 36), "Fixed", [1, 0],
                             iterations=400, seed=8, contrast=[0, 1])
        s = contrast_summary(run_scenario(cfg, bootstrap=0), [0, 1])
        assert abs(s["rslb"] - 0.5 / 3.5) < 4 * s["rslb_se"]

    def test_normal_errors_have_unit_lb_efficiency(self):
        for strategy in ("Fixed", "RRSD", "DRSD"):
            cfg = ScenarioConfig(ErrorModel.gnd(2.0), builtin_design("balanced2", 20), strategy,
                                 [1, 0], n1=4, iterations=30, seed=2, contrast=[0, 1])
            rep = run_scenario(cfg, bootstrap=0)
            assert_allclose(rep.lb_eff, 1.0, rtol=1e-12)

    def test_efficiency_helpers(self):
        rep = run_scenario(cauchy_factorial("Fixed", R=60), bootstrap=0)
        c = np.array([0, 0, 0, 1.0])
        assert_allclose(lb_efficiency(rep, c), (c @ rep.crlb @ c) / (c @ rep.mean_Hinv @ c))
        rep.var_mle = rep.reference.copy()
        assert_allclose(var_efficiency(rep, "A"), 1.0)

    def test_ordering_of_bounds(self):
        cfg = ScenarioConfig(ErrorModel.gnd(10.0), builtin_design("g_optimal_quadratic", 12),
                             "Fixed", [1, 1, 1], iterations=400, seed=5)
        rep = run_scenario(cfg, bootstrap=0)
        rng = np.random.default_rng(0)
        for _ in range(20):
            c = rng.standard_normal(3)
            c /= np.linalg.norm(c)
            s = contrast_summary(rep, c)
            assert s["var"] >= s["rslb"] - 3 * np.hypot(s["var_se"], s["rslb_se"])
            assert s["rslb"] >= s["crlb"] - 3 * s["rslb_se"]

    def test_unbiased_under_adaptation(self):
        rep = run_scenario(cauchy_factorial("RRSD", R=300, n=24), bootstrap=0)
        z = (rep.mean_theta - 1.0) / rep.mc_se["mean_theta"]
        assert np.all(np.abs(z) < 4)

    def test_random_design_atoms_are_sampled(self):
        cfg = ScenarioConfig(ErrorModel.gnd(10.0), builtin_random_design("g_optimal_quadratic", 10),
                             "Fixed", [1, 1, 1], iterations=90, seed=1)
        counts = run_scenario(cfg, bootstrap=0).samples["counts"]
        assert {tuple(c) for c in counts} == {(4, 3, 3), (3, 4, 3), (3, 3, 4)}

    def test_uv_study_normal_case(self):
        cfg = ScenarioConfig(ErrorModel.gnd(2.0), builtin_design("balanced2", 20), "Fixed",
                             [1, 0], iterations=20, seed=1)
        vu, vv = uv_variance_study(cfg)
        assert_allclose(vu, 0, atol=1e-20)
        assert_allclose(vv, 0, atol=1e-20)


def test_paired_comparison_needs_matching_iterations():
    a = run_scenario(cauchy_factorial("Fixed", R=20), bootstrap=0)
    b = run_scenario(cauchy_factorial("Fixed", R=21), bootstrap=0)
    with pytest.raises(SimulationError):
        paired_comparison(a, b)


def test_series_format(tmp_path):
    path = tmp_path / "s.csv"
    text = write_series([(8, "DRSD", "var_eff_G", 0.35, 0.01), (8, "CRLB", "x", 1.0, None)], path)
    assert text.splitlines()[0] == "n,strategy,metric,value,mc_se"
    assert "\r" not in path.read_bytes().decode()
    assert text.splitlines()[2].endswith(",")
