"""Random-coefficient logit: degenerate mixture, recovery, simulated MLE."""
import numpy as np
import pytest

import tastenet as tn
from tastenet import choice, estimation, synthetic as syn
from tastenet.model import RclModel


def mnl_as_rcl(mnl_model, sigma, n_draws=64, draw_seed=5):
    """Wrap a fitted MNL-I as an RCL with the time coefficient randomized."""
    uspec = mnl_model.utility
    base = syn.utility_rcl_base()
    mu = np.array([mnl_model.beta_mnl[uspec.param_index(n)]
                   for n in ("time", "inc_time", "full_time", "flex_time")])
    return RclModel(
        utility=base,
        beta_mnl=np.array([mnl_model.beta_mnl[uspec.param_index("asc_1")]]),
        random_attr="time",
        mean_terms=syn.RCL_I_MEAN,
        mu=mu,
        sigma=sigma,
        n_draws=n_draws,
        draw_seed=draw_seed,
    )


@pytest.fixture(scope="module")
def fitted_mnl_i(small_splits, quick_cfg):
    return tn.estimate_mnl(syn.utility_mnl_i(), small_splits[0], small_splits[1], quick_cfg)


class TestDegenerateMixture:
    def test_sigma_zero_equals_plain_mnl(self, fitted_mnl_i, small_splits):
        te = small_splits[2]
        rcl = mnl_as_rcl(fitted_mnl_i, sigma=0.0)
        assert tn.dataset_nll(rcl, te) == pytest.approx(
            tn.dataset_nll(fitted_mnl_i, te), abs=1e-10)

    def test_sigma_zero_via_log_clamp(self, fitted_mnl_i, small_splits):
        # s -> -inf parameterization: exp(s) == 0 exactly
        tr = small_splits[0]
        design = choice.compile_design(syn.utility_mnl_i(), tr)
        rcl = mnl_as_rcl(fitted_mnl_i, sigma=0.0, n_draws=16)
        feats = rcl.random_features(tr)
        z_mu = rcl.mean_design(tr)
        eps = rcl.draws(len(tr))
        d2 = choice.compile_design(syn.utility_rcl_base(), tr)
        nll, *_ = estimation.simulated_loss(d2, feats, z_mu, eps, rcl.beta_mnl,
                                            rcl.mu, -np.inf)
        assert nll == pytest.approx(tn.dataset_nll(fitted_mnl_i, tr), abs=1e-10)

    def test_positive_sigma_changes_likelihood(self, fitted_mnl_i, small_splits):
        te = small_splits[2]
        a = tn.dataset_nll(mnl_as_rcl(fitted_mnl_i, 0.0), te)
        b = tn.dataset_nll(mnl_as_rcl(fitted_mnl_i, 0.08), te)
        assert a != b


class TestSimulatedGradients:
    def test_matches_finite_differences(self, small_splits):
        tr = small_splits[0]
        base = syn.utility_rcl_base()
        design = choice.compile_design(base, tr).take(slice(0, 24))
        rcl = tn.RclSpec(base_utility=base, random_attr="time",
                         mean_terms=syn.RCL_I_MEAN, n_draws=16)
        feats = estimation._random_features(tr, "time")[:24]
        z_mu = estimation._mean_design(tr, rcl.mean_terms)[:24]
        rng = np.random.default_rng(8)
        eps = rng.standard_normal((24, 16))
        beta = rng.standard_normal(1) * 0.1
        mu = rng.standard_normal(4) * 0.2
        s_log = np.array([np.log(0.08)])

        _, d_par, d_mu, d_s = estimation.simulated_loss(
            design, feats, z_mu, eps, beta, mu, float(s_log[0]))

        def loss():
            return estimation.simulated_loss(design, feats, z_mu, eps, beta, mu,
                                             float(s_log[0]))[0]

        from test_mlp import fd_gradient
        fd_beta, fd_mu, fd_s = fd_gradient(loss, [beta, mu, s_log])
        assert np.abs(d_par - fd_beta).max() / max(np.abs(fd_beta).max(), 1e-10) < 1e-4
        assert np.abs(d_mu - fd_mu).max() / max(np.abs(fd_mu).max(), 1e-10) < 1e-4
        assert abs(d_s - fd_s[0]) / max(abs(fd_s[0]), 1e-10) < 1e-4


class TestRecovery:
    def test_known_sigma_recovered(self):
        # data with a genuinely random time coefficient: beta ~ N(-0.35, 0.1^2)
        rng = np.random.default_rng(42)
        n = 3000
        t0, t1 = rng.uniform(1, 30, n), rng.uniform(1, 30, n)
        c0 = rng.uniform(0.2, 10, n)
        c1 = np.clip(c0 + 0.35 * (t0 - t1) + rng.uniform(-1.5, 1.5, n), 0.2, 10)
        beta = -0.35 + 0.1 * rng.standard_normal(n)
        dv = -0.1 - (c1 - c0) + beta * (t1 - t0)
        y = (rng.uniform(size=n) < 1 / (1 + np.exp(-dv))).astype(float)
        z = tn.draw_characteristics(n, 3)
        cols = {"inc": z[:, 0], "full": z[:, 1], "flex": z[:, 2],
                "cost0": c0, "time0": t0, "cost1": c1, "time1": t1, "choice": y}
        full = tn.Dataset(syn.synthetic_schema(), cols)
        tr, dv_ds, _ = tn.split_dataset(full, (0.84, 0.08, 0.08), seed=1)
        rcl = tn.RclSpec(base_utility=syn.utility_rcl_base(),
                         random_attr="time", mean_terms=((),), n_draws=200)
        model = tn.estimate_rcl(rcl, tr, dv_ds,
                                tn.TrainConfig(seed=6, restarts=1, max_epochs=120,
                                               patience=12))
        assert model.sigma == pytest.approx(0.1, abs=0.03)
        assert model.mu[0] == pytest.approx(-0.35, abs=0.05)

    def test_beats_matching_mnl_on_train(self, fitted_mnl_i, small_splits):
        tr, dv_ds, _ = small_splits
        rcl = tn.RclSpec(base_utility=syn.utility_rcl_base(), random_attr="time",
                         mean_terms=syn.RCL_I_MEAN, n_draws=100)
        model = tn.estimate_rcl(rcl, tr, dv_ds,
                                tn.TrainConfig(seed=6, restarts=1, max_epochs=80,
                                               patience=10))
        assert 0 < model.sigma < 0.15
        assert tn.dataset_nll(model, tr) <= tn.dataset_nll(fitted_mnl_i, tr) + 1e-6

    def test_deterministic(self, small_splits):
        tr, dv_ds, _ = small_splits
        rcl = tn.RclSpec(base_utility=syn.utility_rcl_base(), random_attr="time",
                         mean_terms=syn.RCL_I_MEAN, n_draws=16)
        cfg = tn.TrainConfig(seed=3, restarts=1, max_epochs=4, patience=4)
        a = tn.estimate_rcl(rcl, tr, dv_ds, cfg)
        b = tn.estimate_rcl(rcl, tr, dv_ds, cfg)
        np.testing.assert_array_equal(a.mu, b.mu)
        np.testing.assert_array_equal(a.beta_mnl, b.beta_mnl)
        assert a.sigma == b.sigma
