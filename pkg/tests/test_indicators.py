"""Economic indicators: VOT, elasticities, recovery regression, metrics, probe."""
import numpy as np
import pytest

import tastenet as tn
from tastenet import choice, indicators, mlp, synthetic as syn
from test_choice import synthetic_obs


class TestErrorMetrics:
    def test_equal_inputs(self):
        m = tn.error_metrics([1.0, 2.0], [1.0, 2.0])
        assert (m.rmse, m.mae, m.mape) == (0.0, 0.0, 0.0)

    def test_hand_arithmetic(self):
        m = tn.error_metrics([1.0, 3.0], [2.0, 2.0])
        assert m.rmse == pytest.approx(1.0)
        assert m.mae == pytest.approx(1.0)
        assert m.mape == pytest.approx(50.0)

    def test_zero_truth_excluded_and_counted(self):
        m = tn.error_metrics([1.0, 3.0], [0.0, 2.0])
        assert m.mape_excluded == 1
        assert m.mape == pytest.approx(50.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            tn.error_metrics([1.0], [1.0, 2.0])


class TestValueOfTime:
    def test_unit_conversion(self, truth_model):
        ds, _ = synthetic_obs(inc=0.5, full=1.0, flex=0.0)  # beta_vot = -0.55
        vot = tn.value_of_time(truth_model, ds)
        assert vot["0"][0] == pytest.approx(33.0)
        assert vot["1"][0] == pytest.approx(33.0)

    def test_zero_taste_zero_vot(self):
        ds, _ = synthetic_obs()
        flat = tn.FittedModel(utility=syn.utility_true(),
                              beta_mnl=np.array([-0.1, 0, 0, 0, 0, 0, 0, 0.0]))
        assert tn.value_of_time(flat, ds)["0"][0] == 0.0

    def test_self_comparison_mae_zero(self, truth_model, small_splits):
        te = small_splits[2]
        v = tn.value_of_time(truth_model, te)["0"]
        assert tn.error_metrics(v, v).mae == 0.0

    def test_requires_fixed_cost_convention(self, small_splits):
        spec = tn.UtilitySpec(("0", "1"), (
            tn.Term("1", choice.PARAM, "asc_1"),
            *choice.generic_terms(("0", "1"), choice.PARAM, "cost", attr="cost"),
            *choice.generic_terms(("0", "1"), choice.PARAM, "time", attr="time"),
        ))
        model = tn.FittedModel(utility=spec, beta_mnl=np.array([-0.1, -1.0, -0.3]))
        with pytest.raises(tn.IndicatorError, match="fixed"):
            tn.value_of_time(model, small_splits[2])

    def test_nonpositive_taste_means_nonnegative_vot(self, small_splits, small_tastenet):
        vot = tn.value_of_time(small_tastenet, small_splits[2])
        assert (vot["0"] >= 0).all() and (vot["1"] >= 0).all()
        assert np.isfinite(vot["0"]).all()


class TestPointElasticity:
    def test_formula(self):
        # E = (1 - P) * x * beta with P=0.5, x=10, beta=-0.1
        # V0 = -5 - 0.1*20 = -7 ; V1 = -6 - 0.1*10 = -7 -> P = 0.5
        ds, _ = synthetic_obs(inc=0.0, full=0.0, flex=0.0,
                              cost=(5.0, 6.0), time=(20.0, 10.0))
        truth = tn.FittedModel(utility=syn.utility_true(), beta_mnl=np.array(
            [0.0, -0.1, 0, 0, 0, 0, 0, 0.0]))
        p = truth.probabilities(ds)
        assert p[0, 1] == pytest.approx(0.5)
        e = tn.point_elasticity(truth, ds, "1", "time")
        assert e[0] == pytest.approx(-0.5)

    def test_captive_chooser_elasticity_zero(self, truth_model):
        ds, _ = synthetic_obs(cost=(40.0, 0.2), time=(90.0, 1.0))
        p = truth_model.probabilities(ds)
        assert p[0, 1] > 1 - 1e-12
        e = tn.point_elasticity(truth_model, ds, "1", "time")
        assert abs(e[0]) < 1e-9

    def test_analytic_matches_finite_difference(self, truth_model, small_splits):
        te = small_splits[2]
        e = tn.point_elasticity(truth_model, te, "1", "time")
        fe = indicators.fd_point_elasticity(truth_model, te, "1", "time")
        sized = np.abs(e) > 1e-6
        assert (np.abs(e - fe)[sized] / np.abs(e)[sized]).max() < 1e-4
        assert np.abs(e - fe)[~sized].max() < 1e-8

    def test_network_model_matches_finite_difference(self, small_tastenet, small_splits):
        te = small_splits[2]
        e = tn.point_elasticity(small_tastenet, te, "1", "time")
        fe = indicators.fd_point_elasticity(small_tastenet, te, "1", "time")
        sized = np.abs(e) > 1e-6
        assert (np.abs(e - fe)[sized] / np.abs(e)[sized]).max() < 1e-4

    def test_unknown_attribute(self, truth_model, small_splits):
        with pytest.raises(tn.IndicatorError):
            tn.point_elasticity(truth_model, small_splits[2], "1", "comfort")


class TestAggregateElasticity:
    def test_identical_individuals_degenerate(self, truth_model):
        ds, _ = synthetic_obs()
        n = 5
        cols = {c: np.repeat(ds.raw_column(c), n) for c in ds.schema.raw_columns()}
        rep = tn.Dataset(ds.schema, cols)
        agg = tn.aggregate_elasticity(truth_model, rep, "1", "time")
        point = tn.point_elasticity(truth_model, rep, "1", "time")[0]
        assert agg == pytest.approx(point, rel=1e-12)

    def test_two_person_hand_case(self):
        # P=(0.2, 0.8), E=(-1, -2) -> (0.2*-1 + 0.8*-2) / 1.0 = -1.8
        p = np.array([0.2, 0.8])
        e = np.array([-1.0, -2.0])
        assert float((p * e).sum() / p.sum()) == pytest.approx(-1.8)

    def test_convex_combination_bound(self, truth_model, small_splits):
        te = small_splits[2]
        agg = tn.aggregate_elasticity(truth_model, te, "1", "time")
        e = tn.point_elasticity(truth_model, te, "1", "time")
        assert e.min() - 1e-12 <= agg <= e.max() + 1e-12

    def test_grouped_by_characteristic(self, truth_model, small_splits):
        te = small_splits[2]
        groups = tn.aggregate_elasticity(truth_model, te, "1", "time", group_by="full")
        assert set(groups) == {0.0, 1.0}
        e = tn.point_elasticity(truth_model, te, "1", "time")
        for v in groups.values():
            assert e.min() <= v <= e.max()

    def test_empty_group_warns_and_omits(self, truth_model):
        schema = tn.FeatureSchema(
            characteristics=("inc", "full", "flex", "grp"),
            categorical={"grp": tn.CategoricalRule(levels=(0, 1, 2), reference=0)},
            alternatives=("0", "1"),
            attributes={"0": (("cost", "cost0"), ("time", "time0")),
                        "1": (("cost", "cost1"), ("time", "time1"))},
            choice_column="choice",
        )
        n = 6
        rng = np.random.default_rng(0)
        cols = {"inc": rng.uniform(0.2, 0.8, n), "full": np.ones(n), "flex": np.zeros(n),
                "grp": np.array([0, 0, 0, 1, 1, 1], dtype=float),
                "cost0": rng.uniform(1, 5, n), "time0": rng.uniform(5, 30, n),
                "cost1": rng.uniform(1, 5, n), "time1": rng.uniform(5, 30, n),
                "choice": np.zeros(n)}
        ds = tn.Dataset(schema, cols)
        with pytest.warns(UserWarning, match="grp=2"):
            groups = tn.aggregate_elasticity(truth_model, ds, "1", "time", group_by="grp")
        assert set(groups) == {0.0, 1.0}


class TestTasteRecovery:
    def test_exact_polynomial_recovered(self):
        z = tn.draw_characteristics(4000, seed=2)
        beta = tn.true_taste(z)
        coefs = tn.taste_recovery_regression(beta, z)
        np.testing.assert_allclose(coefs, tn.TrueTasteParams().taste_coefficients(),
                                   rtol=0, atol=1e-8)

    def test_constant_taste(self):
        z = tn.draw_characteristics(500, seed=3)
        coefs = tn.taste_recovery_regression(np.full(500, -0.42), z)
        assert coefs[0] == pytest.approx(-0.42, abs=1e-10)
        np.testing.assert_allclose(coefs[1:], 0.0, atol=1e-10)

    def test_rank_deficiency_names_columns(self):
        z = tn.draw_characteristics(500, seed=4)
        z[:, 2] = z[:, 1]  # flex duplicates full
        with pytest.raises(tn.RegressionError) as err:
            tn.taste_recovery_regression(np.ones(500), z)
        assert err.value.dependent_columns


class TestClassificationMetrics:
    def test_perfect_predictor(self):
        ds, _ = synthetic_obs(chosen=1)
        spec = tn.UtilitySpec(("0", "1"), (tn.Term("1", choice.PARAM, "asc"),))
        sharp = tn.FittedModel(utility=spec, beta_mnl=np.array([50.0]))
        m = tn.classification_metrics(sharp, ds)
        assert m["acc"] == 1.0 and m["f1_macro"] == 1.0

    def test_uniform_predictor_ties_break_low(self, small_splits):
        te = small_splits[2]
        n = len(te)
        flatds = tn.Dataset(te.schema, {
            "inc": te.raw_column("inc"), "full": te.raw_column("full"),
            "flex": te.raw_column("flex"),
            "cost0": np.full(n, 3.0), "time0": np.full(n, 10.0),
            "cost1": np.full(n, 3.0), "time1": np.full(n, 10.0),
            "choice": te.raw_column("choice"),
        })
        uniform = tn.FittedModel(utility=syn.utility_mnl_i(), beta_mnl=np.zeros(5))
        m = tn.classification_metrics(uniform, flatds)
        share0 = float((flatds.chosen == 0).mean())
        assert m["acc"] == pytest.approx(share0)  # always predicts alternative 0

    def test_acc_invariant_to_utility_shift(self, small_splits):
        te = small_splits[2]
        base = tn.FittedModel(utility=syn.utility_true(), beta_mnl=syn.truth_beta_mnl())
        shifted_beta = syn.truth_beta_mnl().copy()
        shifted = tn.FittedModel(utility=syn.utility_true(), beta_mnl=shifted_beta)
        # adding a constant to every alternative's utility: emulate by
        # translating utilities directly through the probability layer
        v = base.utilities(te)
        p1 = tn.probabilities(v, te.avail)
        p2 = tn.probabilities(v + 123.45, te.avail)
        assert (p1.argmax(axis=1) == p2.argmax(axis=1)).all()

    def test_macro_f1_definition(self):
        # predictions: [0, 0, 1]; chosen: [0, 1, 1]
        # class 0: tp=1 fp=1 fn=0 -> f1 = 2/3 ; class 1: tp=1 fp=0 fn=1 -> f1 = 2/3
        p = np.array([[0.9, 0.1], [0.8, 0.2], [0.1, 0.9]])
        pred = p.argmax(axis=1)
        chosen = np.array([0, 1, 1])
        f1s = []
        for j in (0, 1):
            tp = ((pred == j) & (chosen == j)).sum()
            fp = ((pred == j) & (chosen != j)).sum()
            fn = ((pred != j) & (chosen == j)).sum()
            f1s.append(2 * tp / (2 * tp + fp + fn))
        assert np.mean(f1s) == pytest.approx(2 / 3)


class TestActivationProbe:
    def probe_model(self, small_tastenet):
        return small_tastenet

    def test_dead_unit_stays_dead(self):
        spec = mlp.MlpSpec(input_dim=3, hidden_sizes=(4,), activations=("relu",),
                           transforms=("neg_relu",))
        params = mlp.init_params(spec, seed=1)
        params.weights[0][2, :] = 0.0
        params.biases[0][2] = 0.0
        params.weights[1][:, 2] = 0.0
        model = tn.FittedModel(utility=syn.utility_tastenet(), beta_mnl=np.array([-0.1]),
                               mlp_spec=spec, mlp_params=params)
        grid = {"inc": np.linspace(0, 1, 11).tolist(), "full": [0.0, 1.0], "flex": [0.0, 1.0]}
        names, points, acts = tn.activation_probe(model, grid)
        assert acts.shape == (44, 4)
        assert (acts[:, 2] == 0.0).all()

    def test_rectifier_activations_nonnegative(self, small_tastenet):
        grid = {"inc": [0.0, 0.3, 0.6, 1.0], "full": [0.0, 1.0], "flex": [0.0, 1.0]}
        _, _, acts = tn.activation_probe(small_tastenet, grid)
        assert (acts >= 0).all()

    def test_single_point_equals_forward_cache(self, small_tastenet):
        grid = {"inc": [0.5], "full": [1.0], "flex": [0.0]}
        _, points, acts = tn.activation_probe(small_tastenet, grid)
        direct = mlp.hidden_activations(small_tastenet.mlp_params,
                                        small_tastenet.mlp_spec,
                                        np.array([[0.5, 1.0, 0.0]]))
        np.testing.assert_array_equal(acts, direct)

    def test_linear_model_rejected(self):
        spec = mlp.MlpSpec(input_dim=3, hidden_sizes=(), activations=(),
                           transforms=("neg_relu",))
        model = tn.FittedModel(utility=syn.utility_tastenet(), beta_mnl=np.array([-0.1]),
                               mlp_spec=spec, mlp_params=mlp.init_params(spec, 0))
        with pytest.raises(tn.ProbeError):
            tn.activation_probe(model, {"inc": [0.5], "full": [0.0], "flex": [0.0]})


class TestWhatIfCurve:
    def test_monotone_against_worse_time(self, truth_model):
        ds, _ = synthetic_obs()
        rows = tn.what_if_curve(truth_model, ds, "1", "time", np.linspace(0.2, 20, 25))
        probs = [r["probability"] for r in rows]
        assert all(a >= b - 1e-12 for a, b in zip(probs, probs[1:]))

    def test_endpoints_match_direct_calls(self, truth_model):
        ds, _ = synthetic_obs()
        values = np.array([0.2, 20.0])
        rows = tn.what_if_curve(truth_model, ds, "1", "time", values)
        for row, value in zip(rows, values):
            cols = {c: ds.raw_column(c).copy() for c in ds.schema.raw_columns()}
            cols["time1"] = np.array([value])
            point = tn.Dataset(ds.schema, cols)
            p = truth_model.probabilities(point)[0, 1]
            assert row["probability"] == pytest.approx(p, rel=1e-12)

    def test_hand_evaluated_person(self, truth_model):
        # inc=0.5, full=1, flex=1: beta = -0.1-0.25-0.1+0.05-0.1+0.025+0.1 = -0.375
        # V0 = -2 - 0.375*20 = -9.5 ; V1 = -0.1 - 8 - 0.375*10 = -11.85
        ds, _ = synthetic_obs(inc=0.5, full=1.0, flex=1.0)
        assert tn.true_taste(np.array([0.5, 1.0, 1.0])) == pytest.approx(-0.375)
        rows = tn.what_if_curve(truth_model, ds, "1", "time", [10.0])
        expected = 1.0 / (1.0 + np.exp(-(-11.85 - (-9.5))))
        assert rows[0]["probability"] == pytest.approx(expected, rel=1e-10)
        assert rows[0]["probability"] == pytest.approx(0.0871, abs=2e-4)
