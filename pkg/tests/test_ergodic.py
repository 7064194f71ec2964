import math

import numpy as np
import pytest

from sfavg import coeffs
from sfavg.ergodic import (
    DEFAULT_BIAS_TOL,
    MeasureEnsemble,
    MixingReport,
    check_evolution_property,
    dbl_distance,
    default_test_functions,
    estimate_evolution_measure,
    estimate_mixing_rate,
    load_ensemble,
    required_pullback,
    save_ensemble,
    semigroup_expectation,
)
from sfavg.spaces import (
    ConfigurationRejected,
    InvalidArgument,
    NEUMANN_LAPLACIAN_1D,
    make_space,
)
from sfavg import timefuncs as tf


def rd_setup(dim=3, **overrides):
    ex = coeffs.example_system("reaction_diffusion_1d", **overrides)
    spaces = coeffs.default_spaces(ex, dim, dim)
    return coeffs.build_system(ex, *spaces), spaces


def scalar_mode_setup(**overrides):
    """Fast space reduced to a single unit-eigenvalue mode."""
    ex = coeffs.example_system("reaction_diffusion_1d", **overrides)
    slow = make_space(1, NEUMANN_LAPLACIAN_1D, mass_shift=1.0)
    fast = make_space(1, NEUMANN_LAPLACIAN_1D, mass_shift=1.0)
    return coeffs.build_system(ex, slow, fast), (slow, fast)


class TestMeasureEnsemble:
    def test_moment_ratio_matches_definition(self):
        pts = np.array([[1.0, 0.0], [0.0, 2.0], [2.0, 2.0]])
        x = np.array([3.0])
        ens = MeasureEnsemble(particles=pts, t_anchor=0.0, x_anchor=x,
                              pullback_horizon=5.0, seed_base=0)
        second = np.mean(np.sum(pts * pts, axis=1))
        assert ens.moment_ratio == pytest.approx(second / (1.0 + 9.0))
        assert ens.size == 3 and ens.dim == 2
        assert np.allclose(ens.mean(), pts.mean(axis=0))

    def test_validation(self):
        with pytest.raises(InvalidArgument):
            MeasureEnsemble(particles=np.zeros(3), t_anchor=0.0,
                            x_anchor=np.zeros(1), pullback_horizon=1.0,
                            seed_base=0)
        with pytest.raises(InvalidArgument):
            MeasureEnsemble(particles=np.array([[np.nan]]), t_anchor=0.0,
                            x_anchor=np.zeros(1), pullback_horizon=1.0,
                            seed_base=0)


class TestRequiredPullback:
    def test_bias_envelope_formula(self):
        bundle, _spaces = rd_setup()
        gamma = bundle.profile.gamma
        x = np.array([1.0, 2.0, 2.0])
        y = np.array([0.0, 3.0, 4.0])
        scale = 1.0 + 3.0 + 5.0
        expect = 2.0 * math.log(2.0 * scale / 1e-3) / gamma
        assert required_pullback(bundle, x, y, 1e-3) == pytest.approx(expect)

    def test_floor_at_inverse_gamma(self):
        bundle, _spaces = rd_setup()
        gamma = bundle.profile.gamma
        loose = required_pullback(bundle, np.zeros(3), None, 1e6)
        assert loose == pytest.approx(1.0 / gamma)


class TestEstimateEvolutionMeasure:
    def test_short_pullback_rejected_with_hint(self):
        bundle, spaces = rd_setup()
        with pytest.raises(ConfigurationRejected) as err:
            estimate_evolution_measure(bundle, spaces, np.ones(3), 0.0,
                                       M=8, S=0.05)
        assert "use S >=" in str(err.value)
        need = required_pullback(bundle, np.ones(3), None, DEFAULT_BIAS_TOL)
        estimate_evolution_measure(bundle, spaces, np.ones(3), 0.0, M=8,
                                   S=need * 1.01, step=5e-3)

    @pytest.mark.parametrize("kw", [{"M": 0, "S": 5.0}, {"M": 8, "S": 0.0}])
    def test_bad_sizes(self, kw):
        bundle, spaces = rd_setup()
        with pytest.raises(InvalidArgument):
            estimate_evolution_measure(bundle, spaces, np.ones(3), 0.0, **kw)

    def test_deterministic_in_the_seed(self):
        bundle, spaces = rd_setup()
        S = required_pullback(bundle, np.ones(3), None, DEFAULT_BIAS_TOL)
        kw = dict(M=16, S=S, step=5e-3)
        a = estimate_evolution_measure(bundle, spaces, np.ones(3), 0.0,
                                       seeds=3, **kw)
        b = estimate_evolution_measure(bundle, spaces, np.ones(3), 0.0,
                                       seeds=3, **kw)
        c = estimate_evolution_measure(bundle, spaces, np.ones(3), 0.0,
                                       seeds=4, **kw)
        assert np.array_equal(a.particles, b.particles)
        assert not np.array_equal(a.particles, c.particles)
        assert a.t_anchor == pytest.approx(0.0)
        assert a.pullback_horizon == pytest.approx(S)


class TestMixingRate:
    def test_degenerate_pair(self):
        bundle, spaces = rd_setup()
        rep = estimate_mixing_rate(bundle, spaces, np.ones(3), np.ones(3),
                                   np.ones(3), horizon=1.0, replicas=2)
        assert rep.degenerate and rep.fitted_rate == 0.0

    def test_scalar_linear_theory(self):
        """For the scalar mode with constant phi the squared synchronous
        distance decays exactly at 2(phi - lambda) + c^2."""
        bundle, spaces = scalar_mode_setup(phi=tf.zero(), c=0.5)
        rep = estimate_mixing_rate(bundle, spaces, np.zeros(1),
                                   np.ones(1), np.zeros(1), horizon=2.0,
                                   replicas=300, seeds=11)
        assert rep.theoretical_gamma == pytest.approx(-1.75)
        assert rep.fitted_rate == pytest.approx(-1.75, rel=0.15)
        assert rep.fit_r2 > 0.99
        assert rep.pairs_used == 300

    def test_modulated_drift_has_no_closed_form(self):
        bundle, spaces = rd_setup()
        rep = estimate_mixing_rate(bundle, spaces, np.ones(3), np.ones(3),
                                   np.zeros(3), horizon=0.5, replicas=8,
                                   step=5e-3)
        assert rep.theoretical_gamma is None
        assert rep.fitted_rate < 0.0

    def test_rejections(self):
        bundle, spaces = rd_setup()
        with pytest.raises(InvalidArgument):
            estimate_mixing_rate(bundle, spaces, np.ones(3), np.ones(3),
                                 np.zeros(3), horizon=0.0)
        with pytest.raises(InvalidArgument):
            estimate_mixing_rate(bundle, spaces, np.ones(3), np.ones(3),
                                 np.zeros(3), horizon=1.0, replicas=0)


class TestSemigroupExpectation:
    def test_zero_elapsed_time_is_the_point_mass(self):
        bundle, spaces = rd_setup()
        y = np.array([0.3, -0.2, 0.1])
        est, se = semigroup_expectation(bundle, spaces, np.ones(3), 1.0, 1.0,
                                        y, lambda v: float(v[0]), M=4)
        assert est == pytest.approx(0.3)
        assert se == 0.0

    def test_noiseless_transition_matches_the_mode_ode(self):
        """With c = 0 the frozen equation is the deterministic ODE
        y' = (phi0 - lambda) y + a x, solvable in closed form."""
        bundle, spaces = scalar_mode_setup(phi=tf.constant(0.25), c=0.0)
        x = np.array([0.8])
        y0 = np.array([0.5])
        t = 1.5
        est, se = semigroup_expectation(bundle, spaces, x, 0.0, t, y0,
                                        lambda v: float(v[0]), M=2,
                                        step=1e-3)
        rate = 0.25 - 1.0
        exact = (math.exp(rate * t) * y0[0]
                 + 0.8 * (math.exp(rate * t) - 1.0) / rate)
        assert se == 0.0
        assert est == pytest.approx(exact, rel=2e-3)

    def test_rejections(self):
        bundle, spaces = rd_setup()
        with pytest.raises(InvalidArgument):
            semigroup_expectation(bundle, spaces, np.ones(3), 1.0, 0.5,
                                  np.zeros(3), lambda v: 0.0, M=4)
        with pytest.raises(InvalidArgument):
            semigroup_expectation(bundle, spaces, np.ones(3), 0.0, 1.0,
                                  np.zeros(3), lambda v: 0.0, M=1)


class TestEvolutionProperty:
    def test_consistent_and_adversarial_anchors(self):
        bundle, spaces = rd_setup(dim=2)
        x = np.array([0.5, 0.25])
        fns = default_test_functions(spaces[1], 4, seed=7)
        honest = check_evolution_property(bundle, spaces, x, 0.0, 0.5, fns,
                                          M=600, seeds=1, step=2e-3)
        assert honest.passed
        assert honest.max_abs_z < 4.0
        assert honest.z_scores.shape == (4,)
        adversarial = check_evolution_property(bundle, spaces, x, 0.0, 0.5,
                                               fns, M=600, seeds=1,
                                               step=2e-3, x_target=2.0 * x)
        assert not adversarial.passed
        assert adversarial.max_abs_z > 4.0

    def test_time_order_rejected(self):
        bundle, spaces = rd_setup()
        with pytest.raises(InvalidArgument):
            check_evolution_property(bundle, spaces, np.ones(3), 1.0, 0.5,
                                     [lambda v: 0.0], M=8)


class TestDictionaryDistance:
    def make(self, pts, seed=0):
        return MeasureEnsemble(particles=pts, t_anchor=0.0,
                               x_anchor=np.zeros(1), pullback_horizon=1.0,
                               seed_base=seed)

    def test_bounded_lipschitz_dictionary(self):
        space = coeffs.default_spaces(
            coeffs.example_system("reaction_diffusion_1d"), 3, 3)[1]
        fns = default_test_functions(space, 6, seed=3)
        rng = np.random.default_rng(0)
        ys = rng.standard_normal((64, 3))
        zs = rng.standard_normal((64, 3))
        for fn in fns:
            vals = np.array([fn(y) for y in ys])
            assert np.max(np.abs(vals)) <= 1.0
            lip = np.abs(vals - np.array([fn(z) for z in zs])) \
                / np.linalg.norm(ys - zs, axis=1)
            assert np.max(lip) <= 1.0 + 1e-12

    def test_metric_properties(self):
        rng = np.random.default_rng(5)
        e1 = self.make(rng.standard_normal((40, 2)))
        e2 = self.make(rng.standard_normal((40, 2)) + 0.5)
        e3 = self.make(rng.standard_normal((40, 2)) - 0.5)
        d12 = dbl_distance(e1, e2, 64, seed=2)
        d21 = dbl_distance(e2, e1, 64, seed=2)
        d13 = dbl_distance(e1, e3, 64, seed=2)
        d23 = dbl_distance(e2, e3, 64, seed=2)
        assert d12 == d21
        assert dbl_distance(e1, e1, 64, seed=2) == 0.0
        assert d23 <= d12 + d13 + 1e-15
        dist, se = dbl_distance(e1, e2, 64, seed=2, return_stderr=True)
        assert dist == d12 and se > 0.0

    def test_dimension_mismatch(self):
        e1 = self.make(np.zeros((4, 2)))
        e2 = self.make(np.zeros((4, 3)))
        with pytest.raises(InvalidArgument):
            dbl_distance(e1, e2)
        with pytest.raises(InvalidArgument):
            dbl_distance(e1, e1, dictionary_size=0)


class TestEnsembleSerialization:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(9)
        ens = MeasureEnsemble(particles=rng.standard_normal((32, 3)),
                              t_anchor=1.5, x_anchor=np.array([0.5, 0.1]),
                              pullback_horizon=4.0, seed_base=12)
        path = tmp_path / "ens.bin"
        save_ensemble(path, ens)
        back = load_ensemble(path)
        assert np.array_equal(back.particles, ens.particles)
        assert back.t_anchor == ens.t_anchor
        assert np.array_equal(back.x_anchor, ens.x_anchor)
        assert back.pullback_horizon == ens.pullback_horizon
        assert back.seed_base == ens.seed_base
        assert back.moment_ratio == ens.moment_ratio

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTANENS" + b"\x00" * 16)
        with pytest.raises(InvalidArgument):
            load_ensemble(path)
