"""Fitted model containers, dataset-level evaluation, and serialization.

Two containers cover every estimator in the package:

* :class:`FittedModel` — a utility specification plus its coefficient
  values; the network part is optional, so plain MNL benchmarks are the
  degenerate case with no network.
* :class:`RclModel` — a random-coefficient logit: a base utility plus one
  normally distributed attribute coefficient whose mean is linear in
  characteristics. Evaluation simulates the mixture with fixed
  low-discrepancy draws, so repeated evaluations are byte-identical.

Model files are JSON with a format tag; floats round-trip exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, qmc

from . import choice, mlp
from .data import Dataset
from .errors import SpecError

MODEL_FORMAT = "tastenet-model/1"


@dataclass
class FittedModel:
    """A (possibly network-backed) utility model with estimated coefficients."""

    utility: choice.UtilitySpec
    beta_mnl: np.ndarray
    mlp_spec: mlp.MlpSpec | None = None
    mlp_params: mlp.MlpParams | None = None
    history: list = field(default_factory=list)
    best_epoch: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.beta_mnl = np.asarray(self.beta_mnl, dtype=np.float64)
        if self.beta_mnl.shape != (self.utility.n_params,):
            raise SpecError(
                f"beta_mnl has {self.beta_mnl.shape} values; utility declares "
                f"{self.utility.n_params} parametric coefficients")
        k = self.utility.n_net_outputs
        if k and (self.mlp_spec is None or self.mlp_params is None):
            raise SpecError("utility references network outputs but no network was provided")
        if self.mlp_spec is not None:
            if self.mlp_spec.n_outputs != k:
                raise SpecError("network output count does not match the utility spec")
            self.mlp_params.check_shapes(self.mlp_spec)

    @property
    def kind(self) -> str:
        return "tastenet" if self.mlp_spec is not None else "mnl"

    def taste_outputs(self, z: np.ndarray) -> np.ndarray:
        """Network-predicted taste coefficients, (N, K); K may be 0."""
        z2 = np.atleast_2d(z)
        if self.mlp_spec is None:
            return np.zeros((z2.shape[0], 0))
        out, _ = mlp.forward(self.mlp_params, self.mlp_spec, z2)
        return out

    def utilities(self, dataset: Dataset) -> np.ndarray:
        design = choice.compile_design(self.utility, dataset)
        return choice.utilities(design, self.taste_outputs(design.z), self.beta_mnl)

    def probabilities(self, dataset: Dataset) -> np.ndarray:
        return choice.probabilities(self.utilities(dataset), dataset.avail)

    def save(self, path) -> None:
        doc = {
            "format": MODEL_FORMAT,
            "kind": self.kind,
            "utility": choice.spec_to_dict(self.utility),
            "coefficients": {n: float(v) for n, v in
                             zip(self.utility.param_names, self.beta_mnl)},
            "mlp": None if self.mlp_spec is None else {
                "spec": mlp.spec_to_dict(self.mlp_spec),
                "params": mlp.params_to_dict(self.mlp_params),
            },
            "history": self.history,
            "best_epoch": self.best_epoch,
            "meta": self.meta,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")


@dataclass
class RclModel:
    """Random-coefficient logit: one normal taste coefficient, simulated MLE."""

    utility: choice.UtilitySpec        # base part (no network outputs)
    beta_mnl: np.ndarray
    random_attr: str
    mean_terms: tuple                  # tuple of z-column tuples; () = intercept
    mu: np.ndarray
    sigma: float
    n_draws: int = 200
    draw_seed: int = 0
    history: list = field(default_factory=list)
    best_epoch: int | None = None
    meta: dict = field(default_factory=dict)

    kind = "rcl"

    def __post_init__(self):
        self.beta_mnl = np.asarray(self.beta_mnl, dtype=np.float64)
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.mean_terms = tuple(tuple(t) for t in self.mean_terms)
        if self.mu.shape != (len(self.mean_terms),):
            raise SpecError("mu length does not match the mean term list")

    def mean_design(self, dataset: Dataset) -> np.ndarray:
        """(N, Q) design of the coefficient mean: products of characteristics."""
        cols = []
        for term in self.mean_terms:
            val = np.ones(len(dataset))
            for zc in term:
                val = val * dataset.characteristic(zc)
            cols.append(val)
        return np.column_stack(cols)

    def random_features(self, dataset: Dataset) -> np.ndarray:
        """(N, J) values the random coefficient multiplies (the attribute)."""
        feats = np.zeros((len(dataset), dataset.n_alts))
        for j, alt in enumerate(dataset.schema.alternatives):
            roles = dataset.schema.attr_roles(alt)
            if self.random_attr in roles:
                feats[:, j] = dataset.x[alt][:, roles.index(self.random_attr)]
        return feats

    def draws(self, n: int) -> np.ndarray:
        """(n, R) fixed scrambled-Halton standard normal draws."""
        h = qmc.Halton(d=1, scramble=True, seed=self.draw_seed).random(n * self.n_draws)
        return norm.ppf(h).reshape(n, self.n_draws)

    def simulated_probabilities(self, dataset: Dataset, average: bool = True):
        """Mixture choice probabilities, averaged over the fixed draws."""
        design = choice.compile_design(self.utility, dataset)
        v_base = choice.utilities(design, np.zeros((len(dataset), 0)), self.beta_mnl)
        feats = self.random_features(dataset)
        eps = self.draws(len(dataset))
        beta = self.mean_design(dataset) @ self.mu
        beta_r = beta[:, None] + self.sigma * eps              # (N, R)
        v = v_base[:, None, :] + beta_r[:, :, None] * feats[:, None, :]
        flat = v.reshape(-1, dataset.n_alts)
        avail = np.repeat(dataset.avail, self.n_draws, axis=0)
        p = choice.probabilities(flat, avail).reshape(v.shape)
        return p.mean(axis=1) if average else p

    def save(self, path) -> None:
        doc = {
            "format": MODEL_FORMAT,
            "kind": self.kind,
            "utility": choice.spec_to_dict(self.utility),
            "coefficients": {n: float(v) for n, v in
                             zip(self.utility.param_names, self.beta_mnl)},
            "random": {
                "attr": self.random_attr,
                "mean_terms": [list(t) for t in self.mean_terms],
                "mu": [float(v) for v in self.mu],
                "sigma": float(self.sigma),
                "n_draws": self.n_draws,
                "draw_seed": self.draw_seed,
            },
            "history": self.history,
            "best_epoch": self.best_epoch,
            "meta": self.meta,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")


def load_model(path):
    """Load a model file; returns FittedModel or RclModel by its kind tag."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise SpecError(f"unsupported model format {doc.get('format')!r}")
    uspec = choice.spec_from_dict(doc["utility"])
    beta = np.array([doc["coefficients"][n] for n in uspec.param_names], dtype=np.float64)
    common = dict(history=doc.get("history", []), best_epoch=doc.get("best_epoch"),
                  meta=doc.get("meta", {}))
    if doc["kind"] == "rcl":
        r = doc["random"]
        return RclModel(
            utility=uspec, beta_mnl=beta, random_attr=r["attr"],
            mean_terms=tuple(tuple(t) for t in r["mean_terms"]),
            mu=np.asarray(r["mu"], dtype=np.float64), sigma=float(r["sigma"]),
            n_draws=int(r["n_draws"]), draw_seed=int(r["draw_seed"]), **common)
    m = doc.get("mlp")
    return FittedModel(
        utility=uspec, beta_mnl=beta,
        mlp_spec=None if m is None else mlp.spec_from_dict(m["spec"]),
        mlp_params=None if m is None else mlp.params_from_dict(m["params"]),
        **common)


def chosen_probabilities(model, dataset: Dataset) -> np.ndarray:
    if isinstance(model, RclModel):
        p = model.simulated_probabilities(dataset)
    else:
        p = model.probabilities(dataset)
    return p[np.arange(len(dataset)), dataset.chosen]


def dataset_nll(model, dataset: Dataset, return_flags: bool = False):
    """Mean -log P(chosen). Probabilities below 1e-300 are floored and flagged."""
    pc = chosen_probabilities(model, dataset)
    flagged = np.flatnonzero(pc < 1e-300)
    nll = float(-np.log(np.maximum(pc, 1e-300)).mean())
    if return_flags:
        return nll, flagged
    return nll
