"""Tests for sparsity, marginal densities, accuracy metrics, induced priors."""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import kstest, norm

from bvarsv.model import VarSpec
from bvarsv.sampler import PosteriorDraws
from bvarsv.diagnostics import (
    hoyer,
    induced_prior_experiment,
    log_marginal_density,
    mae,
    marginal_density,
    posterior_hoyer,
    prior_hoyer_study,
    prior_simulate,
    rmspd,
)


def density_integral(family, hyper, lo=1e-12, hi=2000.0):
    """Total mass by symmetric quadrature over |phi| in (lo, hi)."""
    pieces = np.geomspace(lo, hi, 40)
    total = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        total += quad(lambda x: marginal_density(family, hyper, x), a, b, limit=200)[0]
    return 2.0 * total


def density_cdf_grid(family, hyper, grid):
    """CDF of |phi| on a grid by cumulative quadrature (for KS tests)."""
    masses = [0.0]
    for a, b in zip(grid[:-1], grid[1:]):
        masses.append(quad(lambda x: marginal_density(family, hyper, x), a, b, limit=100)[0])
    c = np.cumsum(masses)
    return c / c[-1] if c[-1] > 0 else c


class TestHoyer:
    def test_constant_vector_is_zero(self):
        assert hoyer(np.full(7, 3.2)) == pytest.approx(0.0, abs=1e-12)
        assert hoyer(np.full(7, -3.2)) == pytest.approx(0.0, abs=1e-12)

    def test_one_hot_is_one(self):
        x = np.zeros(10)
        x[4] = -2.5
        assert hoyer(x) == pytest.approx(1.0, abs=1e-12)

    def test_hand_computed_example(self):
        # (sqrt(2) - 7/5) / (sqrt(2) - 1), evaluated by hand
        assert hoyer([3.0, 4.0]) == pytest.approx(0.03431457505076198, rel=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            x = rng.standard_normal(rng.integers(2, 20))
            c = rng.uniform(0.1, 100) * rng.choice([-1, 1])
            assert hoyer(c * x) == pytest.approx(hoyer(x), rel=1e-10)

    def test_errors(self):
        with pytest.raises(ValueError):
            hoyer(np.zeros(5))
        with pytest.raises(ValueError):
            hoyer([1.0])


class TestPriorSimulate:
    def test_flat_variance(self):
        rng = np.random.default_rng(1)
        x = prior_simulate("FLAT", {"v": 10.0}, 50, 2000, rng)
        assert abs(x.var() - 10.0) < 0.3

    def test_shapes_and_determinism(self):
        for fam, hyper in [
            ("R2D2", {"a_pi": 0.26, "b": 0.5}),
            ("DL", {"a": 0.5}),
            ("SSVS", {"tau0": 0.1, "tau1": 16.0}),
            ("HM", {"c": 0.3, "d": 0.3}),
        ]:
            a = prior_simulate(fam, hyper, 20, 50, np.random.default_rng(42))
            b = prior_simulate(fam, hyper, 20, 50, np.random.default_rng(42))
            assert a.shape == (50, 20)
            np.testing.assert_array_equal(a, b)

    def test_grid_hyperprior_path(self):
        rng = np.random.default_rng(2)
        x = prior_simulate("DL", {"a_grid": [0.1, 0.5]}, 10, 30, rng)
        assert x.shape == (30, 10)

    def test_scenario_cells_small(self):
        # reduced-size version of the sparsity table; the acceptance suite
        # runs the full 10000 x 1000 study
        rng = np.random.default_rng(3)
        s = prior_hoyer_study("DL", {"a": 0.51}, 1000, 300, rng)
        assert abs(s.means()["DL"] - 0.60) < 0.03
        s = prior_hoyer_study("HM", {"c": 0.3, "d": 0.3}, 1000, 300, rng)
        assert abs(s.means()["HM"] - 0.21) < 0.03


class TestMarginalDensities:
    def test_ssvs_mixture_at_mode(self):
        tau0, tau1 = 0.1, 16.0
        expected = 0.5 * (norm.pdf(0, scale=tau0) + norm.pdf(0, scale=tau1))
        assert marginal_density("SSVS", {"tau0": tau0, "tau1": tau1}, 0.0) == pytest.approx(
            expected, rel=1e-12
        )

    def test_densities_integrate_to_one(self):
        assert density_integral("DL", {"a": 0.51}) == pytest.approx(1.0, abs=1e-3)
        assert density_integral("HM", {"c": 0.3, "d": 0.3}) == pytest.approx(1.0, abs=1e-3)
        assert density_integral("SSVS", {"tau0": 0.1, "tau1": 16.0}) == pytest.approx(
            1.0, abs=1e-3
        )
        assert density_integral("R2D2", {"a_pi": 0.26, "b": 0.5}, hi=5e5) == pytest.approx(
            1.0, abs=2e-3
        )

    def test_hm_matches_mixture_simulation(self):
        # scale-mixture oracle: phi | lam ~ N(0, lam), lam ~ G(c, d)
        rng = np.random.default_rng(4)
        c = d = 0.3
        lam = rng.gamma(c, 1.0 / d, size=200_000)
        phi = np.abs(rng.standard_normal(200_000) * np.sqrt(lam))
        grid = np.append(0.0, np.geomspace(1e-8, phi.max() * 1.01, 400))
        cdf = density_cdf_grid("HM", {"c": c, "d": d}, grid)
        emp = np.searchsorted(np.sort(phi), grid) / phi.size
        assert np.max(np.abs(emp - cdf)) < 0.01

    def test_dl_matches_mixture_simulation(self):
        # DL univariate: phi ~ DE(zeta), zeta ~ G(a, 1/2)
        rng = np.random.default_rng(5)
        a = 0.51
        zeta = rng.gamma(a, 2.0, size=200_000)
        phi = np.abs(rng.laplace(scale=zeta))
        grid = np.append(0.0, np.geomspace(1e-8, np.quantile(phi, 0.99999), 400))
        cdf = density_cdf_grid("DL", {"a": a}, grid)
        emp = np.searchsorted(np.sort(phi), grid) / phi.size
        # compare on the covered range; the top tail is truncated by the grid
        assert np.max(np.abs(emp - cdf)[:-1]) < 0.01

    def test_dl_tail_decay_order(self):
        # log p(phi) - log p(2 phi) consistent with the stated decay order
        a = 0.51
        for x in (50.0, 100.0, 200.0):
            got = log_marginal_density("DL", {"a": a}, x) - log_marginal_density(
                "DL", {"a": a}, 2 * x
            )
            order = lambda v: (a / 2 - 0.75) * np.log(v) - np.sqrt(2 * v)
            expected = order(x) - order(2 * x)
            assert got == pytest.approx(expected, rel=0.05)

    def test_r2d2_polynomial_tail_slope(self):
        b = 0.5
        xs = np.array([50.0, 150.0, 500.0])
        ld = np.array([log_marginal_density("R2D2", {"a_pi": 0.26, "b": b}, x) for x in xs])
        slope = np.polyfit(np.log(xs), ld, 1)[0]
        assert abs(slope - (-(1 + 2 * b))) / (1 + 2 * b) < 0.1

    def test_concentration_slopes_near_zero(self):
        # local log-log slope at 1e-4..1e-5 matches each family's
        # concentration order; SSVS is flat (no singularity)
        cases = [
            ("DL", {"a": 0.51}, -(1 - 0.51)),
            ("R2D2", {"a_pi": 0.26, "b": 0.5}, -(1 - 2 * 0.26)),
            ("HM", {"c": 0.3, "d": 0.3}, -(1 - 2 * 0.3)),
            ("SSVS", {"tau0": 0.1, "tau1": 16.0}, 0.0),
        ]
        for fam, hyper, target in cases:
            s = (
                log_marginal_density(fam, hyper, 1e-4)
                - log_marginal_density(fam, hyper, 1e-5)
            ) / np.log(10.0)
            assert abs(s - target) < 0.05, fam

    def test_singular_families_increase_toward_zero(self):
        for fam, hyper in [
            ("DL", {"a": 0.51}),
            ("HM", {"c": 0.3, "d": 0.3}),
            ("R2D2", {"a_pi": 0.26, "b": 0.5}),
        ]:
            assert marginal_density(fam, hyper, 1e-6) > marginal_density(fam, hyper, 1e-3)

    def test_invalid_hyper(self):
        with pytest.raises(ValueError):
            log_marginal_density("HM", {"c": -1.0, "d": 1.0}, 0.5)
        with pytest.raises(ValueError):
            log_marginal_density("R2D2", {"a_pi": 0.0, "b": 0.5}, 0.5)


class TestAccuracyMetrics:
    def test_perfect_recovery(self):
        truth = np.array([0.5, -0.2])
        draws = np.tile(truth, (10, 1))
        assert mae(draws, truth) == pytest.approx(0.0, abs=1e-15)
        assert rmspd(draws, truth) == pytest.approx(0.0, abs=1e-15)

    def test_constant_offset(self):
        truth = np.array([1.0, 2.0, 3.0])
        draws = (truth + 1.0)[None, :]
        assert mae(draws, truth) == pytest.approx(1.0)
        assert rmspd(draws, truth) == pytest.approx(1.0)

    def test_symmetric_pair_distinguishes_metrics(self):
        truth = np.array([2.0])
        draws = np.array([[1.0], [3.0]])
        assert mae(draws, truth) == pytest.approx(0.0)
        assert rmspd(draws, truth) == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mae(np.zeros((5, 3)), np.zeros(4))


class TestInducedPrior:
    def test_first_column_is_gaussian(self):
        pvals = []
        for seed in range(10):
            out = induced_prior_experiment(3, 10.0, 4000, np.random.default_rng(seed))
            col1 = out["samples"][:, :, 0].ravel()
            pvals.append(kstest(col1, lambda x: norm.cdf(x, scale=np.sqrt(10))).pvalue)
        assert min(pvals) > 0.01

    def test_kurtosis_increases_across_columns(self):
        out = induced_prior_experiment(3, 10.0, 100_000, np.random.default_rng(11))
        k = out["excess_kurtosis"]
        assert k[0] < k[1] < k[2]
        assert abs(k[0]) < 0.1  # first column stays Gaussian

    def test_m2_variance_of_off_diagonal(self):
        # Var(Phi_12) = Var(b_12) + Var(b_11) Var(linv_12) = 10 + 100
        out = induced_prior_experiment(2, 10.0, 400_000, np.random.default_rng(12))
        v = out["samples"][:, :, 1].ravel().var()
        assert abs(v - 110.0) / 110.0 < 0.05

    def test_rejects_m1(self):
        with pytest.raises(ValueError):
            induced_prior_experiment(1, 10.0, 10, np.random.default_rng(0))


def synthetic_draws(phi_rows, spec):
    R = phi_rows.shape[0]
    M = spec.M
    return PosteriorDraws(
        spec=spec,
        phi=phi_rows,
        l=np.zeros((R, M * (M - 1) // 2)),
        sv_params=np.zeros((R, M, 3)),
        h_last=np.zeros((R, M)),
        hyper_phi=np.empty((R, 0)),
        hyper_l=np.empty((R, 0)),
    )


class TestPosteriorHoyer:
    def test_one_hot_group_scores_one(self):
        spec = VarSpec(M=2, p=1)
        phi = np.zeros((3, 4))
        phi[:, 0] = 1.0  # equation 1, own lag; own group = {phi_11, phi_22}
        s = posterior_hoyer(synthetic_draws(phi, spec))
        assert s.means()["lag1:own"] == pytest.approx(1.0)
        assert s.excluded["lag1:cross"] == 3  # all-zero cross draws excluded

    def test_matches_scripted_per_draw_oracle(self):
        rng = np.random.default_rng(13)
        spec = VarSpec(M=3, p=2)
        phi = rng.standard_normal((20, spec.n))
        s = posterior_hoyer(synthetic_draws(phi, spec))
        from bvarsv.groups import phi_groups, phi_shrink_indices

        g = phi_groups(spec, "semi-global-local")
        beta = phi[:, phi_shrink_indices(spec)]
        for gi, lab in enumerate(g.labels):
            manual = [hoyer(beta[r, g.members(gi)]) for r in range(20)]
            np.testing.assert_allclose(s.values[lab], manual)

    def test_single_coefficient_group_excluded(self):
        spec = VarSpec(M=1, p=2)  # own groups have a single coefficient
        phi = np.ones((4, 2))
        s = posterior_hoyer(synthetic_draws(phi, spec))
        assert s.excluded["lag1:own"] == 4
        assert len(s.values["lag1:own"]) == 0
