"""Post-estimation economics: tastes, values of time, elasticities, metrics.

Every utility term is linear in its attribute, so the coefficient an
attribute carries for one person is just the sum of that person's term
coefficients (network outputs, parametric values, or constants, each times
its characteristic product). Elasticities are therefore analytic:

    E = (1 - P_i) * x * beta(z)

with a central-finite-difference twin (:func:`fd_point_elasticity`) kept as
an independent cross-check.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from . import mlp
from .choice import FIXED, NET, PARAM
from .data import Dataset
from .errors import IndicatorError, ProbeError, RegressionError
from .model import FittedModel, RclModel, dataset_nll

TASTE_DESIGN = ((), ("inc",), ("full",), ("flex",),
                ("inc", "full"), ("inc", "flex"), ("full", "flex"))
TASTE_DESIGN_NAMES = ("const", "inc", "full", "flex", "inc_full", "inc_flex", "full_flex")


@dataclass(frozen=True)
class ErrorMetrics:
    """Root-mean-squared, mean-absolute, and mean-absolute-percentage errors."""

    rmse: float
    mae: float
    mape: float              # percent
    mape_excluded: int = 0   # entries with zero truth, excluded from MAPE

    def to_dict(self) -> dict:
        return {"rmse": self.rmse, "mae": self.mae, "mape": self.mape,
                "mape_excluded": self.mape_excluded}


def error_metrics(estimates, truth) -> ErrorMetrics:
    est = np.asarray(estimates, dtype=np.float64).ravel()
    tru = np.asarray(truth, dtype=np.float64).ravel()
    if est.shape != tru.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {tru.shape}")
    err = est - tru
    nonzero = tru != 0
    mape = float(np.abs(err[nonzero] / tru[nonzero]).mean() * 100) if nonzero.any() else 0.0
    return ErrorMetrics(
        rmse=float(np.sqrt((err ** 2).mean())),
        mae=float(np.abs(err).mean()),
        mape=mape,
        mape_excluded=int((~nonzero).sum()),
    )


def probability_matrix(model, dataset: Dataset) -> np.ndarray:
    if isinstance(model, RclModel):
        return model.simulated_probabilities(dataset)
    return model.probabilities(dataset)


def effective_coefficient(model, dataset: Dataset, alt: str, attr: str) -> np.ndarray:
    """Per-person coefficient carried by ``attr`` in alternative ``alt``."""
    coef = np.zeros(len(dataset))
    taste = None
    for term in model.utility.terms:
        if term.alt != alt or term.attr != attr:
            continue
        if term.coef_kind == NET:
            if taste is None:
                taste = model.taste_outputs(dataset.z)
            val = taste[:, term.coef_ref].copy()
        elif term.coef_kind == PARAM:
            val = np.full(len(dataset), model.beta_mnl[model.utility.param_index(term.coef_ref)])
        else:
            val = np.full(len(dataset), float(term.coef_ref))
        for zc in term.z_cols:
            val = val * dataset.characteristic(zc)
        coef += val
    if isinstance(model, RclModel) and attr == model.random_attr:
        coef += model.mean_design(dataset) @ model.mu
    return coef


def _attr_scale(dataset: Dataset, alt: str, attr: str) -> float:
    return dataset.schema.scale_of(dataset.schema.attr_column(alt, attr))


def _require_fixed_cost(model, dataset: Dataset, alt: str, cost_attr: str) -> None:
    fixed_total = 0.0
    for term in model.utility.terms:
        if term.alt != alt or term.attr != cost_attr:
            continue
        if term.coef_kind != FIXED or term.z_cols:
            raise IndicatorError(
                f"alternative {alt!r} has a non-fixed {cost_attr!r} coefficient; "
                "value of time requires the fixed-cost convention (-1), not a "
                "coefficient ratio")
        fixed_total += float(term.coef_ref)
    if fixed_total != -1.0:
        raise IndicatorError(
            f"alternative {alt!r} has {cost_attr!r} coefficient {fixed_total}, "
            "expected fixed -1 for reading values of time off the time coefficient")


def value_of_time(model, dataset: Dataset, time_attr: str = "time",
                  cost_attr: str = "cost") -> dict[str, np.ndarray]:
    """Per-person value of time in money per hour, per alternative.

    Requires the fixed-cost convention: every alternative carrying
    ``time_attr`` must price ``cost_attr`` with a fixed -1. The time and
    cost column scalings may differ; the ratio is applied so the result is
    money per raw hour.
    """
    out = {}
    for alt in model.utility.alternatives:
        roles = dataset.schema.attr_roles(alt)
        if time_attr not in roles:
            continue
        if cost_attr not in roles:
            raise IndicatorError(f"alternative {alt!r} has no {cost_attr!r} attribute")
        _require_fixed_cost(model, dataset, alt, cost_attr)
        beta = effective_coefficient(model, dataset, alt, time_attr)
        ratio = _attr_scale(dataset, alt, time_attr) / _attr_scale(dataset, alt, cost_attr)
        out[alt] = -beta * ratio * 60.0
    if not out:
        raise IndicatorError(f"no alternative carries attribute {time_attr!r}")
    return out


def point_elasticity(model, dataset: Dataset, alt: str, attr: str,
                     probabilities: np.ndarray | None = None) -> np.ndarray:
    """Analytic own elasticity of P(alt) w.r.t. the raw attribute value."""
    j = dataset.schema.alt_index(alt)
    p = probability_matrix(model, dataset) if probabilities is None else probabilities
    roles = dataset.schema.attr_roles(alt)
    if attr not in roles:
        raise IndicatorError(f"alternative {alt!r} has no attribute {attr!r}")
    x = dataset.x[alt][:, roles.index(attr)]  # scaled value
    beta = effective_coefficient(model, dataset, alt, attr)
    return (1.0 - p[:, j]) * x * beta


def fd_point_elasticity(model, dataset: Dataset, alt: str, attr: str,
                        rel_step: float = 1e-4) -> np.ndarray:
    """Central finite difference of log P w.r.t. log x (numeric cross-check)."""
    col = dataset.schema.attr_column(alt, attr)
    j = dataset.schema.alt_index(alt)

    def log_p(factor):
        raw = {c: dataset.raw_column(c) for c in dataset.schema.raw_columns()}
        raw[col] = raw[col] * factor
        bumped = Dataset(dataset.schema, raw, dataset.split_tag, validate=False)
        p = probability_matrix(model, bumped)
        return np.log(np.maximum(p[:, j], 1e-300))

    hi, lo = log_p(1.0 + rel_step), log_p(1.0 - rel_step)
    return (hi - lo) / (np.log1p(rel_step) - np.log1p(-rel_step))


def aggregate_elasticity(model, dataset: Dataset, alt: str, attr: str,
                         group_by: str | None = None):
    """Probability-weighted mean of point elasticities: sum(P*E)/sum(P).

    With ``group_by`` (a raw characteristic column) a per-group dict is
    returned; declared categorical levels absent from the data are omitted
    with a warning.
    """
    j = dataset.schema.alt_index(alt)
    p = probability_matrix(model, dataset)[:, j]
    e = point_elasticity(model, dataset, alt, attr)
    if group_by is None:
        return float((p * e).sum() / p.sum())
    values = dataset.raw_column(group_by)
    rule = dataset.schema.categorical.get(group_by)
    levels = rule.levels if rule is not None else np.unique(values)
    out = {}
    for lvl in levels:
        mask = values == lvl
        if not mask.any():
            warnings.warn(f"group {group_by}={lvl} is empty; omitted")
            continue
        out[float(lvl)] = float((p[mask] * e[mask]).sum() / p[mask].sum())
    return out


def taste_recovery_regression(beta_pred, characteristics) -> np.ndarray:
    """OLS of predicted tastes on {1, inc, full, flex} and their interactions.

    ``characteristics`` is (N, 3) in (inc, full, flex) order; the returned
    coefficients align with the generator's taste-coefficient order. Solved
    by normal equations with a pivoted dense solve; a rank-deficient design
    raises RegressionError naming the dependent columns.
    """
    z = np.atleast_2d(np.asarray(characteristics, dtype=np.float64))
    y = np.asarray(beta_pred, dtype=np.float64).ravel()
    if z.shape != (y.shape[0], 3):
        raise ValueError(f"characteristics must be (n, 3); got {z.shape} for {y.shape[0]} tastes")
    cols = {"inc": z[:, 0], "full": z[:, 1], "flex": z[:, 2]}
    design = np.column_stack([
        np.prod([cols[c] for c in term], axis=0) if term else np.ones(len(y))
        for term in TASTE_DESIGN
    ])
    gram = design.T @ design
    rank = int(np.linalg.matrix_rank(design))
    if rank < design.shape[1]:
        # column-pivoted QR: trailing pivots are the linearly dependent columns
        from scipy.linalg import qr

        _, pivots = qr(design, mode="r", pivoting=True)
        dependent = [TASTE_DESIGN_NAMES[p] for p in pivots[rank:]]
        raise RegressionError(
            f"taste design is rank deficient ({rank}/{design.shape[1]}); "
            f"dependent columns: {sorted(dependent)}", dependent_columns=dependent)
    return np.linalg.solve(gram, design.T @ y)


def classification_metrics(model, dataset: Dataset) -> dict:
    """NLL, accuracy (argmax, ties to the lowest index), and macro F1.

    F1 is macro-averaged one-vs-rest over alternatives; alternatives that
    appear in neither the choices nor the predictions are skipped so a
    perfect predictor scores 1 even when a class is absent.
    """
    p = probability_matrix(model, dataset)
    pred = p.argmax(axis=1)
    chosen = dataset.chosen
    acc = float((pred == chosen).mean())
    f1s = []
    for j in range(dataset.n_alts):
        tp = float(((pred == j) & (chosen == j)).sum())
        fp = float(((pred == j) & (chosen != j)).sum())
        fn = float(((pred != j) & (chosen == j)).sum())
        denom = 2 * tp + fp + fn
        if denom > 0:
            f1s.append(2 * tp / denom)
    f1 = float(np.mean(f1s)) if f1s else 0.0
    return {"nll": dataset_nll(model, dataset), "acc": acc, "f1_macro": f1}


def activation_probe(model: FittedModel, grid: dict[str, list]):
    """Hidden-unit activations over a characteristics grid.

    ``grid`` maps every network input (expanded characteristic name, in
    training order) to the values to sweep; the Cartesian product is
    evaluated. Returns (names, grid_matrix, activations) where
    ``activations`` is (n_points, H) for the last hidden layer.
    """
    if model.mlp_spec is None or model.mlp_spec.n_hidden_layers == 0:
        raise ProbeError("activation probe requires a network with at least one hidden layer")
    names = list(grid.keys())
    if len(names) != model.mlp_spec.input_dim:
        raise ProbeError(
            f"grid covers {len(names)} inputs; the network expects {model.mlp_spec.input_dim}")
    points = np.array(list(itertools.product(*(grid[n] for n in names))), dtype=np.float64)
    acts = mlp.hidden_activations(model.mlp_params, model.mlp_spec, points)
    return names, points, acts


def what_if_curve(model, dataset_template: Dataset, alt: str, attr: str, values):
    """Sweep one raw attribute of a single-row template observation.

    Returns a list of rows {value, probability, elasticity}: the choice
    probability of ``alt`` and its own-time/cost point elasticity at each
    swept raw value.
    """
    if len(dataset_template) != 1:
        raise ValueError("template dataset must contain exactly one observation")
    col = dataset_template.schema.attr_column(alt, attr)
    j = dataset_template.schema.alt_index(alt)
    values = np.asarray(values, dtype=np.float64)
    raw = {c: np.repeat(dataset_template.raw_column(c), len(values))
           for c in dataset_template.schema.raw_columns()}
    raw[col] = values
    sweep = Dataset(dataset_template.schema, raw, dataset_template.split_tag, validate=False)
    p = probability_matrix(model, sweep)[:, j]
    e = point_elasticity(model, sweep, alt, attr)
    return [{"value": float(v), "probability": float(pi), "elasticity": float(ei)}
            for v, pi, ei in zip(values, p, e)]


def summary_stats(values) -> dict:
    v = np.asarray(values, dtype=np.float64)
    qs = np.percentile(v, [5, 25, 50, 75, 95])
    return {"mean": float(v.mean()), "std": float(v.std()),
            "p5": float(qs[0]), "p25": float(qs[1]), "median": float(qs[2]),
            "p75": float(qs[3]), "p95": float(qs[4])}
