"""Tests for the convergence-study harness and its report containers."""

import math

import numpy as np
import pytest

from sfavg.average import AveragedDriftProvider
from sfavg.coeffs import example_system
from sfavg.harness import (
    KHASMINSKII_SLOPE_BAND,
    MAX_FAILED_FRACTION,
    RATE_SLOPE_FLOOR,
    ExperimentPlan,
    run_convergence_T1,
    run_convergence_T2,
    run_khasminskii_study,
    stopping_diagnostic,
    strong_error,
)
from sfavg.integrate import IntegratorConfig, PathSample, SeedRecord
from sfavg.reportio import canonical_json_bytes
from sfavg.spaces import (
    DIRICHLET_LAPLACIAN_1D,
    InvalidArgument,
    TimeGrid,
    make_space,
)


def rd_plan(**overrides):
    base = dict(
        system=example_system("reaction_diffusion_1d"),
        eps_list=(0.4, 0.2),
        mc_paths=16,
        horizon=0.25,
        slow_dim=4,
        fast_dim=4,
        step=1e-3,
        seed_base=99,
    )
    base.update(overrides)
    return ExperimentPlan(**base)


def sample_on(grid, slow=None, fast=None):
    rec = SeedRecord(seed=1, streams=(("w1", 1), ("w2", 2)))
    return PathSample(grid=grid, slow=slow, fast=fast, seed_record=rec)


class TestExperimentPlan:
    def test_defaults(self):
        plan = ExperimentPlan(
            system=example_system("reaction_diffusion_1d"),
            eps_list=(0.5, 0.25))
        assert plan.mc_paths == 200
        assert plan.horizon == 1.0
        assert plan.moment_p == 1.0
        assert plan.slow_dim == 16 and plan.fast_dim == 16
        assert plan.step == 2e-4
        assert plan.seed_base == 2024
        assert isinstance(plan.integrator, IntegratorConfig)
        assert plan.integrator.step == plan.step
        assert isinstance(plan.cell_exponent, int)
        assert plan.cell_exponent > 0
        assert isinstance(plan.provider, AveragedDriftProvider)

    def test_eps_list_validation(self):
        with pytest.raises(InvalidArgument, match="non-empty"):
            rd_plan(eps_list=())
        with pytest.raises(InvalidArgument, match=r"\(0, 1\]"):
            rd_plan(eps_list=(0.5, 0.0))
        with pytest.raises(InvalidArgument, match=r"\(0, 1\]"):
            rd_plan(eps_list=(1.5, 0.5))
        with pytest.raises(InvalidArgument, match="strictly decreasing"):
            rd_plan(eps_list=(0.1, 0.2))
        with pytest.raises(InvalidArgument, match="strictly decreasing"):
            rd_plan(eps_list=(0.2, 0.2))
        plan = rd_plan(eps_list=(1.0, 0.5))
        assert plan.eps_list == (1.0, 0.5)

    def test_scalar_validation(self):
        with pytest.raises(InvalidArgument, match="mc_paths"):
            rd_plan(mc_paths=1)
        with pytest.raises(InvalidArgument, match="horizon"):
            rd_plan(horizon=0.0)
        with pytest.raises(InvalidArgument, match="moment_p"):
            rd_plan(moment_p=0.5)
        with pytest.raises(InvalidArgument, match="step"):
            rd_plan(step=0.5, horizon=0.25)
        with pytest.raises(InvalidArgument, match="step"):
            rd_plan(step=0.0)

    def test_build_defaults(self):
        plan = rd_plan(slow_dim=4, fast_dim=3)
        bundle, spaces, grid, x0, y0 = plan.build()
        assert spaces[0].dim == 4 and spaces[1].dim == 3
        assert grid.times[0] == 0.0
        assert grid.times[-1] == pytest.approx(plan.horizon)
        assert np.array_equal(x0, 0.5 / np.arange(1.0, 5.0))
        assert np.array_equal(y0, np.zeros(3))
        assert bundle.slow_space.dim == 4

    def test_build_checks_state_shapes(self):
        with pytest.raises(InvalidArgument, match="x0 shape"):
            rd_plan(x0=np.zeros(3)).build()
        with pytest.raises(InvalidArgument, match="y0 shape"):
            rd_plan(y0=np.zeros(5)).build()
        x0 = np.full(4, 0.25)
        _, _, _, built_x0, _ = rd_plan(x0=x0).build()
        assert np.array_equal(built_x0, x0)
        assert built_x0.dtype == np.float64


class TestStrongError:
    def test_hand_computed_sup_norm(self):
        grid = TimeGrid(0.0, 1.0, 0.25, cell_exponent=8)
        a = np.array([[0.0, 0.0], [1.0, 2.0], [0.0, 1.0],
                      [3.0, 0.0], [0.0, 0.0]])
        b = np.zeros((5, 2))
        pa = sample_on(grid, slow=a)
        pb = sample_on(grid, slow=b)
        assert strong_error(pa, pb, p=1.0) == 9.0
        assert strong_error(pa, pb, p=2.0) == 81.0
        assert strong_error(pb, pa, p=1.0) == 9.0
        assert strong_error(pa, pa, p=1.0) == 0.0

    def test_rejects_bad_inputs(self):
        grid = TimeGrid(0.0, 1.0, 0.25, cell_exponent=8)
        other = TimeGrid(0.0, 1.0, 0.5, cell_exponent=8)
        shifted = TimeGrid(0.0, 1.0, 0.25, cell_exponent=9)
        pa = sample_on(grid, slow=np.zeros((5, 2)))
        pb = sample_on(other, slow=np.zeros((3, 2)))
        pc = sample_on(shifted, slow=np.zeros((5, 2)))
        fast_only = sample_on(grid, fast=np.zeros((5, 2)))
        with pytest.raises(InvalidArgument, match="slow component"):
            strong_error(pa, fast_only)
        with pytest.raises(InvalidArgument, match="different grids"):
            strong_error(pa, pb)
        with pytest.raises(InvalidArgument, match="different grids"):
            strong_error(pa, pc)
        with pytest.raises(InvalidArgument, match="p must be"):
            strong_error(pa, pa, p=0.5)


class TestStoppingDiagnostic:
    def test_zero_path_trace_equals_time(self):
        grid = TimeGrid(0.0, 1.0, 0.125, cell_exponent=8)
        space = make_space(2, DIRICHLET_LAPLACIAN_1D)
        path = sample_on(grid, slow=np.zeros((grid.points, 2)))
        diag = stopping_diagnostic(path, space, threshold_R=0.5)
        assert np.array_equal(diag.times, grid.times)
        assert np.allclose(diag.functional_trace, grid.times, atol=1e-12)
        assert diag.functional_trace[0] == 0.0
        assert np.all(np.diff(diag.functional_trace) >= 0.0)
        assert diag.hit_time == pytest.approx(0.5, abs=1e-12)
        assert diag.threshold_R == 0.5

    def test_constant_path_hand_computed(self):
        grid = TimeGrid(0.0, 1.0, 0.125, cell_exponent=8)
        space = make_space(2, DIRICHLET_LAPLACIAN_1D)
        c = 0.3
        path = sample_on(grid, slow=np.full((grid.points, 2), c))
        k = 2.0 * (1.0 + c * math.sqrt(2.0))
        diag = stopping_diagnostic(path, space, alpha=0.0, beta=1.0,
                                   threshold_R=0.35 * k)
        assert np.allclose(diag.functional_trace, k * grid.times,
                           rtol=1e-12)
        assert diag.hit_time == pytest.approx(0.35, rel=1e-12)

    def test_unreached_threshold_and_rejections(self):
        grid = TimeGrid(0.0, 1.0, 0.125, cell_exponent=8)
        space = make_space(2, DIRICHLET_LAPLACIAN_1D)
        path = sample_on(grid, slow=np.zeros((grid.points, 2)))
        diag = stopping_diagnostic(path, space)
        assert diag.hit_time is None
        fast_only = sample_on(grid, fast=np.zeros((grid.points, 2)))
        with pytest.raises(InvalidArgument, match="slow component"):
            stopping_diagnostic(fast_only, space)
        with pytest.raises(InvalidArgument, match="threshold_R"):
            stopping_diagnostic(path, space, threshold_R=0.0)


class TestRunConvergenceT1:
    def test_report_structure_and_determinism(self):
        rep1 = run_convergence_T1(rd_plan())
        rep2 = run_convergence_T1(rd_plan())
        assert rep1.kind == "T1"
        assert len(rep1.results) == 2
        for r in rep1.results:
            assert r.n_paths == 16
            assert r.failed_paths == 0
            assert not r.flagged_invalid
            assert not r.conditional
            assert math.isfinite(r.error) and r.error > 0.0
            assert r.stderr >= 0.0
            assert r.diag_error is None
        assert rep1.results[0].w1_checksum == rep1.results[1].w1_checksum
        assert rep1.rate.n_points == 2
        assert rep1.rate.slope_stderr == 0.0
        bytes1 = canonical_json_bytes(rep1.as_dict(include_timing=False))
        bytes2 = canonical_json_bytes(rep2.as_dict(include_timing=False))
        assert bytes1 == bytes2
        timed = rep1.as_dict(include_timing=True)
        assert all("wall_time" in row for row in timed["results"])
        assert all("wall_time" not in row
                   for row in rep1.as_dict(include_timing=False)["results"])

    def test_seed_changes_noise_checksum(self):
        rep_a = run_convergence_T1(rd_plan(eps_list=(0.4,), mc_paths=2))
        rep_b = run_convergence_T1(
            rd_plan(eps_list=(0.4,), mc_paths=2, seed_base=100))
        assert rep_a.results[0].w1_checksum != rep_b.results[0].w1_checksum

    def test_error_shrinks_with_scale(self):
        rep = run_convergence_T1(rd_plan(eps_list=(0.5, 0.1), mc_paths=32))
        e_coarse, e_fine = rep.results[0].error, rep.results[1].error
        assert e_fine < e_coarse
        assert rep.monotone

    def test_diverging_paths_are_flagged(self):
        cfg = IntegratorConfig(step=1e-3, divergence_threshold=1e-6)
        plan = rd_plan(mc_paths=8, horizon=0.1, integrator=cfg)
        rep = run_convergence_T1(plan)
        for r in rep.results:
            assert r.failed_paths == 8
            assert r.flagged_invalid
            assert r.conditional
            assert math.isnan(r.error)
        assert not rep.passed
        assert not rep.bound_satisfied
        assert rep.rate.n_points == 0
        assert math.isnan(rep.rate.slope)
        reasons = " | ".join(rep.inconclusive_reasons)
        assert "flagged invalid" in reasons
        assert "fewer than two usable scales" in reasons

    def test_requires_table_capable_provider(self):
        provider = AveragedDriftProvider(mode="nested_mc", ensemble_M=100)
        plan = rd_plan(eps_list=(0.4,), mc_paths=2, provider=provider)
        with pytest.raises(InvalidArgument, match="table-capable"):
            run_convergence_T1(plan)


class TestRunConvergenceT2:
    def test_diagnostic_channel_and_determinism(self):
        kwargs = dict(mc_paths=8, horizon=0.1, slow_dim=3, fast_dim=3,
                      limit_window_T=40.0, limit_anchors=(0.0,))
        rep1 = run_convergence_T2(rd_plan(**kwargs))
        rep2 = run_convergence_T2(rd_plan(**kwargs))
        assert rep1.kind == "T2"
        for r in rep1.results:
            assert r.diag_error is not None
            assert math.isfinite(r.diag_error) and r.diag_error >= 0.0
            assert r.diag_stderr is not None and r.diag_stderr >= 0.0
        rows = rep1.as_dict(include_timing=False)["results"]
        assert all("diag_error" in row and "diag_stderr" in row
                   for row in rows)
        bytes1 = canonical_json_bytes(rep1.as_dict(include_timing=False))
        bytes2 = canonical_json_bytes(rep2.as_dict(include_timing=False))
        assert bytes1 == bytes2


class TestRunKhasminskii:
    def test_delta_list_validation(self):
        plan = rd_plan(eps_list=(0.125,), mc_paths=4, horizon=0.1,
                       slow_dim=3, fast_dim=3)
        with pytest.raises(InvalidArgument, match="at least two"):
            run_khasminskii_study(plan, (0.05,))
        with pytest.raises(InvalidArgument, match="strictly decreasing"):
            run_khasminskii_study(plan, (0.025, 0.05))
        with pytest.raises(InvalidArgument, match="grid step"):
            run_khasminskii_study(plan, (0.05, 1e-5))

    def test_eps_two_thirds_rule_ignores_listed_deltas(self):
        plan = rd_plan(eps_list=(0.125,), mc_paths=6, horizon=0.1,
                       slow_dim=3, fast_dim=3)
        rep = run_khasminskii_study(plan, (0.05, 0.025),
                                    rule="eps_two_thirds")
        assert rep.eps == 0.125
        assert rep.results[0].error == rep.results[1].error
        assert rep.results[0].stderr == rep.results[1].stderr
        assert abs(rep.rate.slope) < 1e-12
        assert not rep.passed
        assert any("acceptance band" in s for s in rep.inconclusive_reasons)

    def test_fixed_rule_structure(self):
        plan = rd_plan(eps_list=(0.125,), mc_paths=6, horizon=0.1,
                       slow_dim=3, fast_dim=3)
        rep = run_khasminskii_study(plan, (0.05, 0.0125), eps=0.25,
                                    rule="fixed")
        assert rep.eps == 0.25
        assert rep.slope_band == KHASMINSKII_SLOPE_BAND
        assert rep.results[0].delta == 0.05
        assert rep.results[1].delta == 0.0125
        assert rep.results[0].error != rep.results[1].error
        for r in rep.results:
            assert r.failed_paths == 0
            assert math.isfinite(r.error) and r.error > 0.0
        d = rep.as_dict(include_timing=False)
        assert d["kind"] == "khasminskii"
        assert d["eps"] == 0.25
        assert all("wall_time" not in row for row in d["results"])

    def test_all_failed_blocks_yield_no_fit(self):
        cfg = IntegratorConfig(step=1e-3, divergence_threshold=1e-6)
        plan = rd_plan(eps_list=(0.125,), mc_paths=4, horizon=0.1,
                       slow_dim=3, fast_dim=3, integrator=cfg)
        rep = run_khasminskii_study(plan, (0.05, 0.025))
        assert all(r.flagged_invalid for r in rep.results)
        assert math.isnan(rep.rate.slope)
        assert not rep.passed
        reasons = " | ".join(rep.inconclusive_reasons)
        assert "fewer than two usable block lengths" in reasons


class TestConstants:
    def test_acceptance_bands(self):
        assert RATE_SLOPE_FLOOR == pytest.approx(1.0 / 6.0)
        assert KHASMINSKII_SLOPE_BAND == (0.3, 0.8)
        assert 0.0 < MAX_FAILED_FRACTION < 1.0
