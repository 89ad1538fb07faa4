"""Acceptance suite: one test per criterion, each printing a PASS line.

These are the exit criteria of the build. Heavy Monte Carlo settings are
used exactly as stated (1e5-1e6 draws, 1e5 sweeps), so the module takes on
the order of an hour; everything is seeded and deterministic.
"""

import time

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from bvarsv.dgp import DgpScenario, run_sim_study
from bvarsv.diagnostics import (
    induced_prior_experiment,
    log_marginal_density,
    marginal_density,
    prior_hoyer_study,
)
from bvarsv.dists import sample_gig
from bvarsv.dma import dma_run
from bvarsv.forecast import (
    ModelDef,
    PredictiveMixture,
    ScorePanel,
    log_predictive_likelihood,
    predictive_mixture,
    recursive_exercise,
)
from bvarsv.model import Dataset, VarSpec, build_design
from bvarsv.sampler import McmcConfig, PriorConfig, draw_phi_triangular, run_mcmc

from geweke import run_geweke
from geweke_var import VarGewekeModel
from test_sv import SvGewekeModel


def report(name, detail):
    print(f"\nPASS {name}: {detail}")


class TestCriterion1PriorSparsity:
    """Prior Hoyer sparseness reproduction at 10000 x 1000."""

    SCENARIOS = {
        "A": {
            "HM": ({"c": 0.3, "d": 0.3}, 0.21),
            "SSVS": ({"tau0": 0.1, "tau1": 16.0, "p": 0.5}, 0.45),
            "DL": ({"a": 0.51}, 0.60),
            "R2D2": ({"a_pi": 0.26, "b": 0.5}, 0.53),
        },
        "B": {
            "HM": ({"c": 0.01, "d": 0.01}, 0.21),
            "SSVS": ({"tau0": 0.1, "tau1": 10.0, "p": 0.5}, 0.44),
            "DL": ({"a": 0.001}, 0.99),
            "R2D2": ({"a_pi": 5e-4, "b": 1.0}, 0.98),
        },
    }

    def test_prior_hoyer_table(self):
        rng = np.random.default_rng(1001)
        results = []
        for scen, families in self.SCENARIOS.items():
            for fam, (hyper, target) in families.items():
                s = prior_hoyer_study(fam, hyper, n=1000, draws=10_000, rng=rng)
                got = s.means()[fam]
                results.append(f"{scen}/{fam}={got:.3f} (target {target})")
                assert abs(got - target) <= 0.02, f"{scen}/{fam}: {got} vs {target}"
        report("criterion 1 (prior Hoyer sparseness)", "; ".join(results))


class TestCriterion2GettingItRight:
    """Simulator-consistency for every prior family and the SV block."""

    N_SWEEPS = 100_000
    THRESHOLD = 4.0

    @pytest.mark.parametrize(
        "family,grouping",
        [
            ("R2D2", "global"),
            ("R2D2", "semi-global-local"),
            ("DL", "global"),
            ("DL", "semi-global-local"),
            ("SSVS", "global"),
            ("SSVS", "semi-global-local"),
            ("HM", "global"),
        ],
    )
    def test_var_families(self, family, grouping):
        model = VarGewekeModel(family, grouping=grouping)
        rep = run_geweke(model, n_sweeps=self.N_SWEEPS, seed=31)
        assert len(rep.names) >= 20
        assert rep.max_abs_z() < self.THRESHOLD, "\n" + rep.summary()
        report(
            f"criterion 2 ({family}/{grouping})",
            f"max|z| = {rep.max_abs_z():.2f} over {len(rep.names)} statistics",
        )

    def test_sv_block(self):
        rep = run_geweke(SvGewekeModel(), n_sweeps=self.N_SWEEPS, seed=41)
        assert rep.max_abs_z() < self.THRESHOLD, "\n" + rep.summary()
        report(
            "criterion 2 (SV block)",
            f"max|z| = {rep.max_abs_z():.2f} over {len(rep.names)} statistics",
        )


class TestCriterion3CorrectedTriangular:
    """Corrected column draw matches the dense joint conditional; the
    uncorrected shortcut fails the same comparison."""

    def _problem(self):
        rng = np.random.default_rng(33)
        spec = VarSpec(M=2, p=1)
        T = 15
        Y = rng.standard_normal((T + 1, 2))
        X, Yt = build_design(Dataset(Y), spec)
        l = np.array([0.8])
        H = 0.4 * rng.standard_normal((T, 2))
        V = rng.uniform(0.5, 2.0, size=4)
        Phi0 = 0.3 * rng.standard_normal((2, 2))
        return spec, X, Yt, l, H, V, Phi0

    def _oracle(self, X, Yt, l, H, V, phi_vec, col, K):
        from bvarsv.model import orthogonalizer

        T, M = Yt.shape
        W = orthogonalizer(l, M)
        P = np.diag(1.0 / V)
        b = np.zeros(K * M)
        for t in range(T):
            A = W.T @ np.diag(np.exp(-H[t])) @ W
            P += np.kron(A, np.outer(X[t], X[t]))
            b += np.kron(A @ Yt[t], X[t])
        idx = np.arange(col * K, (col + 1) * K)
        other = np.setdiff1d(np.arange(K * M), idx)
        mean = np.linalg.solve(
            P[np.ix_(idx, idx)], b[idx] - P[np.ix_(idx, other)] @ phi_vec[other]
        )
        return mean, np.linalg.inv(P[np.ix_(idx, idx)])

    def test_oracle_pass_and_uncorrected_fail(self):
        spec, X, Yt, l, H, V, Phi0 = self._problem()
        mean_o, cov_o = self._oracle(X, Yt, l, H, V, Phi0.flatten(order="F"), 0, spec.K)
        n_draws = 100_000
        se_mean = np.sqrt(np.diag(cov_o) / n_draws)

        rng = np.random.default_rng(34)
        good = np.empty((n_draws, spec.K))
        for r in range(n_draws):
            good[r] = draw_phi_triangular(Yt, X, Phi0, l, H, V, rng)[:, 0]
        dev_good = np.abs(good.mean(axis=0) - mean_o) / se_mean
        assert np.all(dev_good < 3.0), dev_good
        se_cov = np.sqrt((np.outer(np.diag(cov_o), np.diag(cov_o)) + cov_o**2) / n_draws)
        assert np.all(np.abs(np.cov(good.T) - cov_o) < 3.0 * se_cov)

        bad = np.empty((n_draws, spec.K))
        for r in range(n_draws):
            bad[r] = draw_phi_triangular(Yt, X, Phi0, l, H, V, rng, corrected=False)[:, 0]
        dev_bad = np.abs(bad.mean(axis=0) - mean_o) / se_mean
        assert np.any(dev_bad > 3.0), dev_bad
        report(
            "criterion 3 (corrected triangular)",
            f"corrected max dev {dev_good.max():.2f} se; uncorrected {dev_bad.max():.1f} se",
        )


class TestCriterion4GigSampler:
    """Mean and second moment within 1% of quadrature across 12 points."""

    GRID = [
        (0.5, 1.0, 2.0),
        (0.5, 2.0, 1e-10),
        (-0.5, 2.0, 3.0),
        (1.0, 2.0, 0.0),
        (-6.0, 0.0, 3.0),
        (-9.99, 0.02, 5.0),
        (-49.5, 0.1, 20.0),
        (0.5, 1e-6, 1e-6),
        (20.0, 3.0, 0.5),
        (0.0, 1.0, 1.0),
        (0.99, 0.05, 0.05),
        (-0.3, 1.0, 1.0),
    ]

    @staticmethod
    def moment_quad(k, theta, psi, chi):
        if chi == 0.0:  # gamma limit
            from scipy.special import gammaln

            return np.exp(gammaln(theta + k) - gammaln(theta)) * (2.0 / psi) ** k
        if psi == 0.0:  # inverse-gamma limit
            from scipy.special import gammaln

            return np.exp(gammaln(-theta - k) - gammaln(-theta)) * (chi / 2.0) ** k

        def f(u, extra):
            x = np.exp(u)
            return np.exp((theta + extra) * u - 0.5 * (psi * x + chi / x))

        pieces = np.linspace(-80.0, 80.0, 33)
        num = sum(quad(f, a, b, args=(k,), limit=300)[0] for a, b in zip(pieces[:-1], pieces[1:]))
        den = sum(quad(f, a, b, args=(0,), limit=300)[0] for a, b in zip(pieces[:-1], pieces[1:]))
        return num / den

    def test_twelve_point_grid(self):
        rng = np.random.default_rng(44)
        worst = 0.0
        for theta, psi, chi in self.GRID:
            x = sample_gig(theta, psi, chi, rng, size=1_000_000)
            for k in (1, 2):
                target = self.moment_quad(k, theta, psi, chi)
                got = np.mean(x**k)
                rel = abs(got / target - 1.0)
                worst = max(worst, rel)
                assert rel < 0.01, (theta, psi, chi, k, rel)
        report("criterion 4 (GIG sampler)", f"worst moment rel err {worst:.4f} over 12 points")


class TestCriterion5MarginalDensities:
    def test_closed_forms_integrate_and_match_mixtures(self):
        # normalization
        def integral(family, hyper, hi):
            pieces = np.geomspace(1e-12, hi, 40)
            tot = 0.0
            for a, b in zip(pieces[:-1], pieces[1:]):
                tot += quad(lambda x: marginal_density(family, hyper, x), a, b, limit=200)[0]
            return 2.0 * tot

        i_dl = integral("DL", {"a": 0.51}, 2000.0)
        i_hm = integral("HM", {"c": 0.3, "d": 0.3}, 2000.0)
        assert abs(i_dl - 1.0) < 1e-3 and abs(i_hm - 1.0) < 1e-3

        # KS distance against mixture simulations at 1e6 draws
        rng = np.random.default_rng(55)
        lam = rng.gamma(0.3, 1.0 / 0.3, size=1_000_000)
        phi_hm = np.abs(rng.standard_normal(1_000_000) * np.sqrt(lam))
        zeta = rng.gamma(0.51, 2.0, size=1_000_000)
        phi_dl = np.abs(rng.laplace(scale=zeta))

        def ks_distance(family, hyper, sample):
            # sample is |phi|; the two-sided density integrates to 1/2 on
            # each side, so the absolute-value CDF is twice the integral
            hi = np.quantile(sample, 1.0 - 1e-6)
            grid = np.append(0.0, np.geomspace(1e-9, hi, 500))
            masses = [0.0]
            for a, b in zip(grid[:-1], grid[1:]):
                masses.append(quad(lambda x: marginal_density(family, hyper, x), a, b, limit=100)[0])
            cdf = 2.0 * np.cumsum(masses)
            emp = np.searchsorted(np.sort(sample), grid) / sample.size
            keep = grid <= hi
            return np.max(np.abs(cdf - emp)[keep])

        d_hm = ks_distance("HM", {"c": 0.3, "d": 0.3}, phi_hm)
        d_dl = ks_distance("DL", {"a": 0.51}, phi_dl)
        assert d_hm < 0.01 and d_dl < 0.01

        # R2D2 tail slope within 10% of -(1+2b)
        b = 0.5
        xs = np.array([50.0, 150.0, 500.0])
        ld = np.array([log_marginal_density("R2D2", {"a_pi": 0.26, "b": b}, x) for x in xs])
        slope = np.polyfit(np.log(xs), ld, 1)[0]
        assert abs(slope + (1 + 2 * b)) / (1 + 2 * b) < 0.10

        # concentration orderings at phi = 1e-4
        slopes = {}
        for fam, hyper, target in [
            ("DL", {"a": 0.51}, -(1 - 0.51)),
            ("R2D2", {"a_pi": 0.26, "b": 0.5}, -(1 - 2 * 0.26)),
            ("HM", {"c": 0.3, "d": 0.3}, -(1 - 2 * 0.3)),
            ("SSVS", {"tau0": 0.1, "tau1": 16.0}, 0.0),
        ]:
            s = (
                log_marginal_density(fam, hyper, 1e-4)
                - log_marginal_density(fam, hyper, 1e-5)
            ) / np.log(10.0)
            slopes[fam] = s
            assert abs(s - target) < 0.05, (fam, s, target)
        assert slopes["DL"] < slopes["R2D2"] < slopes["HM"] < slopes["SSVS"] + 0.01
        report(
            "criterion 5 (marginal densities)",
            f"integrals ({i_dl:.4f}, {i_hm:.4f}); KS ({d_dl:.4f}, {d_hm:.4f}); "
            f"R2D2 tail slope {slope:.3f}",
        )


class TestCriterion6InducedPrior:
    def test_column_one_gaussian_and_kurtosis_ordering(self):
        pvals = []
        for seed in range(10):
            out = induced_prior_experiment(3, 10.0, 20_000, np.random.default_rng(600 + seed))
            col1 = out["samples"][:, :, 0].ravel()
            pvals.append(
                stats.kstest(col1, lambda x: stats.norm.cdf(x, scale=np.sqrt(10.0))).pvalue
            )
        assert min(pvals) > 0.01, pvals

        big = induced_prior_experiment(3, 10.0, 100_000, np.random.default_rng(661))
        k = big["excess_kurtosis"]
        assert k[0] < k[1] < k[2], k
        report(
            "criterion 6 (induced prior)",
            f"min KS p = {min(pvals):.3f}; kurtosis {k[0]:.2f} < {k[1]:.2f} < {k[2]:.2f}",
        )


class TestCriterion7SimulationStudy:
    """Scaled-down accuracy study: directional findings, not Table values.

    Full-scale numeric replication of the published table is declared not
    desk-scale reproducible (hundreds of long MCMC runs); this scaled
    version checks the qualitative structure.
    """

    def test_directional_findings(self):
        priors = [
            ("FLAT", PriorConfig(family="FLAT")),
            ("HM", PriorConfig(family="HM")),
            ("DL", PriorConfig(family="DL")),
            ("R2D2", PriorConfig(family="R2D2")),
            ("SSVS", PriorConfig(family="SSVS", options={"c0": 0.01, "c1": 100.0})),
            ("SSVS_bl", PriorConfig(family="SSVS", options={"c0": 0.1, "c1": 10.0})),
        ]
        scenarios = [
            DgpScenario.sparse(M=5, T=50),
            DgpScenario.sparse(M=5, T=250),
            DgpScenario.dense(M=5, T=50),
            DgpScenario.dense(M=5, T=250),
        ]
        t0 = time.time()
        rows = run_sim_study(
            scenarios, priors, replications=10,
            mcmc=McmcConfig(draws=2000, burnin=1000, thin=2, seed=700),
        )
        cells = {(r["scenario"], r["T"], r["prior"]): r for r in rows}
        assert all(r["failures"] == 0 for r in rows), rows

        # (a) medians shrink from T=50 to T=250 for every prior and scenario
        for kind in ("sparse", "dense"):
            for name, _ in priors:
                assert cells[(kind, 250, name)]["mae"] < cells[(kind, 50, name)]["mae"], (
                    kind, name)
                assert cells[(kind, 250, name)]["rmspd"] < cells[(kind, 50, name)]["rmspd"], (
                    kind, name)

        # (b) the loose spike/slab scales overfit worst at T=50 among the
        # shrinkage priors (the unshrunk benchmark overfits by construction)
        for kind in ("sparse", "dense"):
            others = [
                cells[(kind, 50, n)]["mae"]
                for n, _ in priors
                if n not in ("SSVS_bl", "FLAT")
            ]
            assert cells[(kind, 50, "SSVS_bl")]["mae"] > max(others), (
                kind, cells[(kind, 50, "SSVS_bl")]["mae"], others)

        # (c) the lag-structured prior wins RMSPD in the dense scenario at T=250
        dense250 = {n: cells[("dense", 250, n)]["rmspd"] for n, _ in priors}
        assert dense250["HM"] == min(dense250.values()), dense250
        report(
            "criterion 7 (simulation study)",
            f"24 cells in {time.time() - t0:.0f}s; dense-T250 RMSPD ranking "
            + ", ".join(f"{k}={v:.4f}" for k, v in sorted(dense250.items(), key=lambda kv: kv[1])),
        )


class TestCriterion8ForecastScoring:
    def test_mixture_density_oracle_and_multistep(self):
        # one-step joint and subset LPLs against brute-force summation
        rng = np.random.default_rng(80)
        means = rng.standard_normal((3, 3))
        covs = []
        for _ in range(3):
            A = rng.standard_normal((3, 3))
            covs.append(A @ A.T + np.eye(3))
        mix = PredictiveMixture(means=means, covs=np.array(covs), horizon=1)
        y = rng.standard_normal(3)

        def brute(idx):
            total = np.longdouble(0.0)
            for c in range(3):
                sub_mean = means[c][idx]
                sub_cov = covs[c][np.ix_(idx, idx)]
                dev = y[idx] - sub_mean
                q = dev @ np.linalg.solve(sub_cov, dev)
                det = np.linalg.det(sub_cov)
                total += np.exp(
                    np.longdouble(-0.5 * (len(idx) * np.log(2 * np.pi) + np.log(det) + q))
                )
            return float(np.log(total / 3))

        joint = log_predictive_likelihood(mix, y)
        assert abs(joint - brute([0, 1, 2])) < 1e-10
        sub = log_predictive_likelihood(mix, y, subset=[1])
        assert abs(sub - brute([1])) < 1e-10

        # four-step mixture mean against a pure path-simulation oracle
        from bvarsv.sampler import PosteriorDraws
        from bvarsv.model import orthogonalizer
        from bvarsv.sv import SvParams, sv_forecast

        spec = VarSpec(M=2, p=1)
        R = 200
        phi = np.tile(np.array([0.5, 0.1, -0.2, 0.3]), (R, 1))
        draws = PosteriorDraws(
            spec=spec, phi=phi, l=np.full((R, 1), 0.4),
            sv_params=np.tile(np.array([-1.0, 0.8, 0.2]), (R, 2, 1)),
            h_last=np.full((R, 2), -1.0),
            hyper_phi=np.empty((R, 0)), hyper_l=np.empty((R, 0)),
        )
        x = np.array([0.5, -0.5])
        mix4 = predictive_mixture(draws, x, 4, np.random.default_rng(81), paths_per_draw=100)
        mix_mean = mix4.means.mean(axis=0)

        r2 = np.random.default_rng(82)
        n_paths = 100_000
        Phi = phi[0].reshape(2, 2, order="F")
        W = orthogonalizer(np.array([0.4]), 2)
        Winv = np.linalg.inv(W)
        acc = np.zeros(2)
        for _ in range(n_paths):
            xx = x.copy()
            h = np.array([-1.0, -1.0])
            for s in range(4):
                h = np.array(
                    [sv_forecast(h[i], SvParams(-1.0, 0.8, 0.2), 1, r2)[0] for i in range(2)]
                )
                cov = Winv @ np.diag(np.exp(h)) @ Winv.T
                xx = r2.multivariate_normal(Phi.T @ xx, cov, method="cholesky")
            acc += xx
        oracle = acc / n_paths
        assert np.all(np.abs(mix_mean - oracle) < 0.02)

        # toy-window pipeline: self-benchmark cumulative LPL identically zero
        rng = np.random.default_rng(83)
        Y = np.zeros((36, 2))
        for t in range(1, 36):
            Y[t] = 0.4 * Y[t - 1] + 0.2 * rng.standard_normal(2)
        model = ModelDef(
            name="flat", spec=spec,
            phi_prior=PriorConfig(family="FLAT"), l_prior=PriorConfig(family="FLAT"),
        )
        panels = recursive_exercise(
            Dataset(Y), [model], 30, 33,
            mcmc=McmcConfig(draws=40, burnin=20, thin=1, seed=84),
        )
        rel = panels[(1, "all")].cumulative_relative("flat")
        assert np.all(rel == 0.0)
        report(
            "criterion 8 (forecast scoring)",
            f"joint/subset oracle to 1e-10; 4-step mean max dev "
            f"{np.max(np.abs(mix_mean - oracle)):.4f}; self-benchmark 0",
        )


class TestCriterion9Dma:
    def test_bma_equivalence_symmetry_and_oracle(self):
        rng = np.random.default_rng(90)
        lpl = rng.standard_normal((5, 3)) * 0.8
        panel = ScorePanel(
            window_labels=[f"t{t}" for t in range(5)],
            model_names=["a", "b", "c"], lpl=lpl, horizon=1,
        )

        st = dma_run(panel, alpha=1.0)
        for t in range(5):
            log_w = lpl[: t + 1].sum(axis=0) - np.log(3.0)
            w = np.exp(log_w - log_w.max())
            w /= w.sum()
            assert np.max(np.abs(st.updated[t] - w)) < 1e-12

        col = rng.standard_normal(6)
        sym = dma_run(
            ScorePanel(window_labels=[f"t{t}" for t in range(6)],
                       model_names=["x", "y"],
                       lpl=np.column_stack([col, col]), horizon=1),
            alpha=0.97,
        )
        assert np.max(np.abs(sym.updated - 0.5)) < 1e-12

        # direct recursion oracle on a hand panel
        init = np.array([0.2, 0.5, 0.3])
        st2 = dma_run(panel, alpha=0.99, init=init)
        w = init.copy()
        for t in range(5):
            wp = np.maximum(w, 1e-300) ** 0.99
            wp /= wp.sum()
            pl = np.exp(lpl[t])
            wu = wp * pl / (wp @ pl)
            assert np.max(np.abs(st2.predicted[t] - wp)) < 1e-12
            assert np.max(np.abs(st2.updated[t] - wu)) < 1e-12
            w = wu
        report("criterion 9 (DMA)", "BMA equality, symmetry, and recursion oracle at 1e-12")


class TestCriterion10Determinism:
    def test_full_pipeline_bit_identical(self, tmp_path):
        import json
        from click.testing import CliRunner

        from bvarsv.cli import main as cli_main

        rng = np.random.default_rng(100)
        T = 36
        levels = np.exp(np.cumsum(0.01 * rng.standard_normal((T, 2)), axis=0)) * 50
        data_path = tmp_path / "data.csv"
        with open(data_path, "w") as fh:
            fh.write("date,a,b\n")
            y, q = 1980, 1
            for t in range(T):
                fh.write(f"{y}:Q{q}," + ",".join(f"{v:.8f}" for v in levels[t]) + "\n")
                q += 1
                if q == 5:
                    y, q = y + 1, 1

        cfg = {
            "data": {"path": "data.csv"},
            "model": {"p": 1, "intercept": True},
            "prior_phi": {"family": "R2D2", "grouping": "semi-global-local"},
            "prior_l": {"family": "R2D2"},
            "mcmc": {"draws": 60, "burnin": 20, "thin": 2, "seed": 9},
            "forecast": {
                "window_start": 30, "window_end": 33, "horizons": [1],
                "models": [
                    {"name": "flat", "prior_phi": {"family": "FLAT"},
                     "prior_l": {"family": "FLAT"}},
                    {"name": "r2d2", "prior_phi": {"family": "R2D2"},
                     "prior_l": {"family": "FLAT"}},
                ],
            },
            "dma": {"panel": "out/scores/h1_all.csv", "alpha": 0.99},
            "output_dir": "out",
            "seed": 9,
        }
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(cfg))

        def run_all():
            runner = CliRunner()
            for cmd in ("estimate", "forecast", "dma"):
                res = runner.invoke(cli_main, [cmd, "--config", str(cfg_path)])
                assert res.exit_code == 0, res.output
            return {
                p.name: p.read_bytes()
                for p in sorted((tmp_path / "out").rglob("*"))
                if p.is_file()
            }

        first = run_all()
        second = run_all()
        assert first.keys() == second.keys()
        for name in first:
            assert first[name] == second[name], f"artifact {name} differs between runs"
        report(
            "criterion 10 (determinism)",
            f"{len(first)} artifacts bit-identical across two seeded runs",
        )
