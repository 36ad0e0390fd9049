import numpy as np
import pytest

from twohorizon.dataset import validate
from twohorizon.errors import DataError
from twohorizon.simgen import (DgpATable, DgpSpec, apply_missingness,
                               enumerate_truth, generate,
                               generate_uncorrelated)

CANON = DgpATable.canonical()


class TestEnumerateTruth:
    # reference values computed independently with exact fraction arithmetic
    FROZEN = {
        (0, 0): (0.3, 0.22),
        (1, 1): (0.6, 0.54),
        (0, 1): (0.45, 0.38),
    }

    @pytest.mark.parametrize("pi,expect", [(k, v) for k, v in FROZEN.items()])
    def test_frozen_values(self, pi, expect):
        ts = enumerate_truth(CANON, list(pi), lam=1.0, combination="additive")
        assert ts.v_s == pytest.approx(expect[0], abs=1e-12)
        assert ts.v_y == pytest.approx(expect[1], abs=1e-12)

    def test_frozen_gap(self):
        ts = enumerate_truth(CANON, [0, 1])
        assert ts.gap == pytest.approx(991 / 42000, abs=1e-12)

    def test_policy_independent_outcome_collapses(self):
        # make y ignore s and a: value equals the x-average of p_y
        py = np.full((2, 2, 2), 0.0)
        py[0, :, :] = 0.35
        py[1, :, :] = 0.6
        table = DgpATable(p_x1=0.5, e=CANON.e, ps=CANON.ps, robs=CANON.robs, py=py)
        for pi in ([0, 0], [1, 0], [0.3, 0.9]):
            ts = enumerate_truth(table, pi)
            assert ts.v_y == pytest.approx(0.5 * 0.35 + 0.5 * 0.6, abs=1e-12)

    def test_treat_all_unrolls_to_definition(self):
        ts = enumerate_truth(CANON, [1, 1])
        expect = 0.5 * CANON.ps[0, 1] + 0.5 * CANON.ps[1, 1]
        assert ts.v_s == pytest.approx(expect, abs=1e-12)

    def test_identification_identity_across_tables(self):
        # potential-outcome and observed-joint factorizations must coincide;
        # enumerate_truth asserts this internally, so construction suffices
        rng = np.random.default_rng(0)
        for _ in range(25):
            table = DgpATable(
                p_x1=rng.uniform(0.2, 0.8),
                e=rng.uniform(0.1, 0.9, 2),
                ps=rng.uniform(0.1, 0.9, (2, 2)),
                robs=rng.uniform(0.1, 0.9, (2, 2, 2)),
                py=rng.uniform(0.1, 0.9, (2, 2, 2)),
            )
            pi = rng.uniform(0, 1, 2)
            ts = enumerate_truth(table, pi, lam=rng.uniform(0, 1))
            assert ts.gap >= 0.0

    def test_cost_shifts_treated_value(self):
        base = enumerate_truth(CANON, [1, 1], cost=0.0)
        shifted = enumerate_truth(CANON, [1, 1], cost=0.25)
        assert shifted.v_s == pytest.approx(base.v_s - 0.25, abs=1e-12)
        assert shifted.v_y == pytest.approx(base.v_y - 0.25, abs=1e-12)

    def test_pi_star_tie_treats(self):
        # canonical effects are positive everywhere
        ts = enumerate_truth(CANON, [0, 0], lam=0.0)
        assert ts.pi_star.tolist() == [1, 1]

    def test_table_requires_interior_probabilities(self):
        with pytest.raises(ValueError, match="strictly"):
            DgpATable(p_x1=0.5, e=np.array([0.0, 0.7]), ps=CANON.ps,
                      robs=CANON.robs, py=CANON.py)


class TestGenerateDgpA:
    def test_propensity_matches_table(self):
        ds = generate(DgpSpec(family="dgp_a", n=1000, table=CANON, seed=5))
        x = ds.x[:, 0]
        assert abs(ds.a[x == 1].mean() - 0.7) < 0.05
        assert validate(ds) == []

    def test_deterministic(self):
        spec = DgpSpec(family="dgp_a", n=500, table=CANON, seed=9)
        d1, d2 = generate(spec), generate(spec)
        np.testing.assert_array_equal(d1.x, d2.x)
        np.testing.assert_array_equal(d1.a, d2.a)
        np.testing.assert_array_equal(d1.s, d2.s)
        np.testing.assert_array_equal(d1.y, d2.y)
        np.testing.assert_array_equal(d1.r, d2.r)

    def test_observation_rate_follows_s(self):
        ds = generate(DgpSpec(family="dgp_a", n=20000, table=CANON, seed=2))
        r1 = ds.r[ds.s == 1].mean()
        r0 = ds.r[ds.s == 0].mean()
        assert abs(r1 - 0.8) < 0.02 and abs(r0 - 0.6) < 0.02

    def test_moments_match_enumeration(self):
        ds = generate(DgpSpec(family="dgp_a", n=50000, table=CANON, seed=3))
        ts = enumerate_truth(CANON, [1, 1])
        assert abs(ds.truth.s1.mean() - ts.v_s) < 0.01
        assert abs(ds.truth.y1.mean() - ts.v_y) < 0.01


class TestGenerateSemiSynthetic:
    def test_forced_coefficients_pin_the_s_distribution(self):
        p = 3
        spec = DgpSpec(family="ihdp_like", n=10000, p=p, seed=4,
                       sigma0=1e-9, sigma1=1e-9,
                       w0=np.zeros(p), w1=np.zeros(p), t_steps=2)
        ds = generate(spec)
        sig = lambda v: 1 / (1 + np.exp(-v))
        assert abs(ds.truth.s0.mean() - sig(1.0)) < 0.03
        assert abs(ds.truth.s1.mean() - sig(3.0)) < 0.03

    def test_jobs_noise_defaults(self):
        spec = DgpSpec(family="jobs_like", n=8000, p=2, seed=6,
                       sigma0=1e-9, sigma1=1e-9, w0=np.zeros(2), w1=np.zeros(2),
                       t_steps=1)
        ds = generate(spec)
        sig = lambda v: 1 / (1 + np.exp(-v))
        assert abs(ds.truth.s0.mean() - sig(0.0)) < 0.03
        assert abs(ds.truth.s1.mean() - sig(2.0)) < 0.03

    def test_consistency_and_full_observation(self):
        ds = generate(DgpSpec(family="jobs_like", n=300, p=4, seed=7))
        assert validate(ds) == []
        assert ds.n_missing == 0
        np.testing.assert_array_equal(
            ds.s, np.where(ds.a == 1, ds.truth.s1, ds.truth.s0))

    def test_deterministic(self):
        spec = DgpSpec(family="ihdp_like", n=200, p=3, seed=11)
        d1, d2 = generate(spec), generate(spec)
        np.testing.assert_array_equal(d1.y, d2.y)

    def test_csv_covariates_and_resampling(self, tmp_path):
        path = tmp_path / "cov.csv"
        path.write_text("x0\n0.0\n1.0\n")
        spec = DgpSpec(family="jobs_like", n=50, covariates_csv=str(path),
                       resample=True, seed=1, t_steps=1)
        ds = generate(spec)
        assert set(np.unique(ds.x)) <= {0.0, 1.0}
        with pytest.raises(DataError, match="resample"):
            generate(DgpSpec(family="jobs_like", n=50, covariates_csv=str(path),
                             seed=1))


class TestApplyMissingness:
    def test_endpoints(self):
        ds = generate(DgpSpec(family="jobs_like", n=40, p=2, seed=0, t_steps=1))
        all_obs = apply_missingness(ds, 0.0)
        assert all_obs.n_missing == 0
        none_obs = apply_missingness(ds, 1.0)
        assert none_obs.n_missing == 40
        assert np.all(np.isnan(none_obs.y))

    def test_top_scores_hidden(self):
        ds = generate(DgpSpec(family="jobs_like", n=4, p=1, seed=0, t_steps=1))
        # rig scores to [5, 1, 3, 2] via covariates, s forced to 0 contribution
        ds = ds.replace(x=np.array([[5.0], [1.0], [3.0], [2.0]]),
                        s=np.zeros(4),
                        truth=None, y=ds.y, r=np.ones(4, dtype=int))
        out = apply_missingness(ds, 0.5)
        assert out.r.tolist() == [0, 1, 0, 1]

    def test_truth_and_inputs_untouched(self):
        ds = generate(DgpSpec(family="jobs_like", n=60, p=2, seed=2, t_steps=2))
        out = apply_missingness(ds, 0.4)
        np.testing.assert_array_equal(out.x, ds.x)
        np.testing.assert_array_equal(out.a, ds.a)
        np.testing.assert_array_equal(out.s, ds.s)
        np.testing.assert_array_equal(out.truth.y1, ds.truth.y1)
        assert out.n_missing == int(0.4 * 60)

    def test_count_is_floor(self):
        ds = generate(DgpSpec(family="jobs_like", n=7, p=1, seed=3, t_steps=1))
        assert apply_missingness(ds, 0.5).n_missing == 3

    def test_gamma_out_of_range(self):
        ds = generate(DgpSpec(family="jobs_like", n=5, p=1, seed=3, t_steps=1))
        with pytest.raises(ValueError):
            apply_missingness(ds, 1.5)


class TestUncorrelated:
    def _stratified_corr(self, ds):
        # single binary covariate: exact strata
        out = []
        for v in (0.0, 1.0):
            for a in (0, 1):
                mask = (ds.x[:, 0] == v) & (ds.a == a)
                s, y = ds.s[mask], ds.y[mask]
                if len(s) > 30 and s.std() > 0 and y.std() > 0:
                    out.append(np.corrcoef(s, y)[0, 1])
        return out

    def _binary_cov_spec(self, tmp_path, **kw):
        path = tmp_path / "cov.csv"
        path.write_text("x0\n0.0\n1.0\n")
        return DgpSpec(family="jobs_like", n=20000, covariates_csv=str(path),
                       resample=True, t_steps=3, scale_c=0.5, seed=13, **kw)

    def test_uncorrelated_strata(self, tmp_path):
        ds = generate_uncorrelated(self._binary_cov_spec(tmp_path))
        corrs = self._stratified_corr(ds)
        assert corrs and all(abs(c) < 0.05 for c in corrs)

    def test_correlated_strata(self, tmp_path):
        ds = generate(self._binary_cov_spec(tmp_path))
        corrs = self._stratified_corr(ds)
        assert corrs and max(abs(c) for c in corrs) > 0.1

    def test_deterministic(self, tmp_path):
        spec = self._binary_cov_spec(tmp_path)
        d1 = generate_uncorrelated(spec)
        d2 = generate_uncorrelated(spec)
        np.testing.assert_array_equal(d1.y, d2.y)

    def test_dgp_a_rejected(self):
        with pytest.raises(ValueError):
            generate_uncorrelated(DgpSpec(family="dgp_a", n=10, table=CANON))

    def test_ihdp_uncorrelated_breaks_seed_link(self):
        spec = DgpSpec(family="ihdp_like", n=30000, p=1, seed=21, t_steps=1,
                       scale_c=1.0)
        corr_ds = generate(spec)
        unc_ds = generate_uncorrelated(spec)

        def corr_within(ds):
            vals = []
            med = np.median(ds.x[:, 0])
            for half in (ds.x[:, 0] <= med, ds.x[:, 0] > med):
                s, y = ds.truth.s0[half], ds.truth.y0[half]
                vals.append(np.corrcoef(s, y)[0, 1])
            return np.array(vals)

        assert np.max(np.abs(corr_within(corr_ds))) > \
            np.max(np.abs(corr_within(unc_ds)))
