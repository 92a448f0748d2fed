"""Systematic utilities, choice probabilities, and log-likelihood.

A :class:`UtilitySpec` binds taste coefficients to attributes, term by term.
Each term contributes ``coef * attribute * prod(z_columns)`` to one
alternative's utility, where the coefficient is a network output, a
parametric coefficient, or a fixed constant. Attribute-free terms (constants
and characteristic interactions) use ``attr=None``. Every term is linear in
the attribute, which keeps elasticities analytic.

Compiling a spec against a dataset produces dense per-coefficient feature
stacks, so a batch's utilities are two einsums regardless of how ornate the
specification is:

    V = V_fixed + sum_k beta_tn[:, k] * F_net[:, k, :] + sum_p beta_mnl[p] * F_par[:, p, :]
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .data import Dataset, FeatureSchema, Observation
from .errors import DataError, SpecError

NET, PARAM, FIXED = "net", "param", "fixed"


@dataclass(frozen=True)
class Term:
    """One additive utility contribution for one alternative."""

    alt: str
    coef_kind: str                 # "net" | "param" | "fixed"
    coef_ref: object               # net: output index; param: name; fixed: value
    attr: str | None = None        # attribute role, or None for 1
    z_cols: tuple[str, ...] = ()   # expanded characteristic names multiplied in

    def __post_init__(self):
        object.__setattr__(self, "z_cols", tuple(self.z_cols))
        if self.coef_kind not in (NET, PARAM, FIXED):
            raise SpecError(f"unknown coefficient kind {self.coef_kind!r}")
        if self.coef_kind == NET and (not isinstance(self.coef_ref, int) or self.coef_ref < 0):
            raise SpecError("network coefficient reference must be a nonnegative output index")
        if self.coef_kind == PARAM and not isinstance(self.coef_ref, str):
            raise SpecError("parametric coefficient reference must be a name")
        if self.coef_kind == FIXED and not isinstance(self.coef_ref, (int, float)):
            raise SpecError("fixed coefficient reference must be a number")

    @property
    def is_constant(self) -> bool:
        return self.attr is None and not self.z_cols


@dataclass(frozen=True)
class UtilitySpec:
    """Declarative utility structure over a fixed set of alternatives.

    ``param_names`` fixes the order of the parametric coefficient vector.
    One alternative must act as the reference: it carries no constant term,
    anchoring the scale of the alternative-specific constants.
    """

    alternatives: tuple[str, ...]
    terms: tuple[Term, ...]

    def __post_init__(self):
        object.__setattr__(self, "alternatives", tuple(self.alternatives))
        object.__setattr__(self, "terms", tuple(self.terms))
        alts = set(self.alternatives)
        seen_net: set[tuple[str, int]] = set()
        with_const = set()
        for t in self.terms:
            if t.alt not in alts:
                raise SpecError(f"term references unknown alternative {t.alt!r}")
            if t.coef_kind == NET:
                key = (t.alt, t.coef_ref)
                if key in seen_net:
                    raise SpecError(
                        f"network output {t.coef_ref} bound twice for alternative {t.alt!r}")
                seen_net.add(key)
            if t.is_constant and t.coef_kind != FIXED:
                with_const.add(t.alt)
        if len(with_const) >= len(self.alternatives):
            raise SpecError("every alternative has a free constant; fix one to 0 as reference")

    @property
    def n_alts(self) -> int:
        return len(self.alternatives)

    @property
    def param_names(self) -> tuple[str, ...]:
        names: list[str] = []
        for t in self.terms:
            if t.coef_kind == PARAM and t.coef_ref not in names:
                names.append(t.coef_ref)
        return tuple(names)

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    @property
    def n_net_outputs(self) -> int:
        idx = [t.coef_ref for t in self.terms if t.coef_kind == NET]
        if not idx:
            return 0
        used = sorted(set(idx))
        if used != list(range(len(used))):
            raise SpecError(f"network output indices must be 0..K-1; got {used}")
        return len(used)

    def param_index(self, name: str) -> int:
        return self.param_names.index(name)


def generic_terms(alternatives, coef_kind, coef_ref, attr=None, z_cols=()):
    """The same term replicated across alternatives (a generic coefficient)."""
    return [Term(alt, coef_kind, coef_ref, attr, tuple(z_cols)) for alt in alternatives]


@dataclass
class Design:
    """A UtilitySpec compiled against a dataset: ready for batched evaluation."""

    z: np.ndarray          # (N, D) network inputs
    feat_net: np.ndarray   # (N, K, J) feature stack per network output
    feat_par: np.ndarray   # (N, P, J) feature stack per parametric coefficient
    v_fixed: np.ndarray    # (N, J) fixed-coefficient utility part
    avail: np.ndarray      # (N, J) uint8
    chosen: np.ndarray     # (N,) int64
    rows: np.ndarray       # (N,) original dataset row ids, for diagnostics

    def __len__(self) -> int:
        return self.z.shape[0]

    def take(self, idx: np.ndarray) -> "Design":
        return Design(*(a[idx] for a in
                        (self.z, self.feat_net, self.feat_par, self.v_fixed,
                         self.avail, self.chosen, self.rows)))


def _term_value(term: Term, dataset: Dataset) -> np.ndarray:
    """The term's data part: attribute * prod(z_cols), per observation."""
    schema = dataset.schema
    if term.attr is None:
        val = np.ones(len(dataset))
    else:
        roles = schema.attr_roles(term.alt)
        if term.attr not in roles:
            raise SpecError(f"alternative {term.alt!r} has no attribute {term.attr!r}")
        val = dataset.x[term.alt][:, roles.index(term.attr)].copy()
    for zc in term.z_cols:
        val = val * dataset.characteristic(zc)
    return val


def compile_design(spec: UtilitySpec, dataset: Dataset) -> Design:
    """Resolve every term against the dataset schema and stack the features."""
    if tuple(dataset.schema.alternatives) != spec.alternatives:
        raise SpecError(
            f"utility spec alternatives {spec.alternatives} do not match "
            f"dataset alternatives {dataset.schema.alternatives}")
    n, nj = len(dataset), spec.n_alts
    k, p = spec.n_net_outputs, spec.n_params
    feat_net = np.zeros((n, k, nj))
    feat_par = np.zeros((n, p, nj))
    v_fixed = np.zeros((n, nj))
    pindex = {name: i for i, name in enumerate(spec.param_names)}
    for term in spec.terms:
        j = spec.alternatives.index(term.alt)
        val = _term_value(term, dataset)
        if term.coef_kind == NET:
            feat_net[:, term.coef_ref, j] += val
        elif term.coef_kind == PARAM:
            feat_par[:, pindex[term.coef_ref], j] += val
        else:
            v_fixed[:, j] += float(term.coef_ref) * val
    return Design(
        z=np.ascontiguousarray(dataset.z),
        feat_net=feat_net,
        feat_par=feat_par,
        v_fixed=v_fixed,
        avail=np.ascontiguousarray(dataset.avail, dtype=np.uint8),
        chosen=np.ascontiguousarray(dataset.chosen, dtype=np.int64),
        rows=np.arange(n, dtype=np.int64),
    )


def utilities(design: Design, beta_tn: np.ndarray, beta_mnl: np.ndarray) -> np.ndarray:
    """(N, J) systematic utilities; unavailable entries are computed but unused."""
    v = design.v_fixed.copy()
    if design.feat_net.shape[1]:
        v += np.einsum("nk,nkj->nj", beta_tn, design.feat_net)
    if design.feat_par.shape[1]:
        v += np.einsum("p,npj->nj", beta_mnl, design.feat_par)
    return v


def coefficient_gradients(design: Design, d_v: np.ndarray):
    """Chain rule from dLoss/dV into the coefficient inputs.

    Returns (d_beta_tn (N, K), d_beta_mnl (P,)).
    """
    d_tn = np.einsum("nj,nkj->nk", d_v, design.feat_net) if design.feat_net.shape[1] \
        else np.zeros((len(design), 0))
    d_par = np.einsum("nj,npj->p", d_v, design.feat_par) if design.feat_par.shape[1] \
        else np.zeros(0)
    return d_tn, d_par


def systematic_utility(beta_tn, beta_mnl, obs: Observation, spec: UtilitySpec,
                       schema: FeatureSchema) -> np.ndarray:
    """Utilities for one observation; NaN marks unavailable alternatives."""
    beta_tn = np.atleast_1d(np.asarray(beta_tn, dtype=np.float64))
    beta_mnl = np.atleast_1d(np.asarray(beta_mnl, dtype=np.float64))
    v = np.full(spec.n_alts, np.nan)
    names = schema.characteristic_names()
    pindex = {name: i for i, name in enumerate(spec.param_names)}
    for j, alt in enumerate(spec.alternatives):
        if not obs.available[j]:
            continue
        if np.isnan(v[j]):
            v[j] = 0.0
        for term in spec.terms:
            if term.alt != alt:
                continue
            if term.attr is None:
                val = 1.0
            else:
                roles = schema.attr_roles(alt)
                if term.attr not in roles:
                    raise SpecError(f"alternative {alt!r} has no attribute {term.attr!r}")
                val = obs.x[alt][roles.index(term.attr)]
            for zc in term.z_cols:
                if zc not in names:
                    raise SpecError(f"unknown characteristic {zc!r} in term")
                val *= obs.z[names.index(zc)]
            if term.coef_kind == NET:
                if term.coef_ref >= beta_tn.shape[0]:
                    raise SpecError(f"network output index {term.coef_ref} out of range")
                coef = beta_tn[term.coef_ref]
            elif term.coef_kind == PARAM:
                if term.coef_ref not in pindex or pindex[term.coef_ref] >= beta_mnl.shape[0]:
                    raise SpecError(f"unresolved parametric coefficient {term.coef_ref!r}")
                coef = beta_mnl[pindex[term.coef_ref]]
            else:
                coef = float(term.coef_ref)
            v[j] += coef * val
    return v


def probabilities(utils: np.ndarray, available: np.ndarray) -> np.ndarray:
    """Availability-masked softmax; probabilities are exactly 0 when unavailable.

    Accepts one observation (1-d) or a batch (2-d). Raises DataError if an
    observation has no available alternative.
    """
    single = utils.ndim == 1
    v = np.atleast_2d(np.asarray(utils, dtype=np.float64))
    a = np.atleast_2d(np.asarray(available)).astype(np.uint8)
    if (a.sum(axis=1) == 0).any():
        raise DataError("observation with no available alternative")
    p = backend.kernels.masked_softmax(np.ascontiguousarray(v), np.ascontiguousarray(a))
    return p[0] if single else p


def chosen_logprob(utils: np.ndarray, available: np.ndarray, chosen: int) -> float:
    p = probabilities(utils, available)
    return float(np.log(max(p[chosen], 1e-300)))


# -- (de)serialization -----------------------------------------------------------


def term_to_dict(t: Term) -> dict:
    d: dict = {"alt": t.alt, "coef": {"kind": t.coef_kind}}
    if t.coef_kind == NET:
        d["coef"]["index"] = t.coef_ref
    elif t.coef_kind == PARAM:
        d["coef"]["name"] = t.coef_ref
    else:
        d["coef"]["value"] = t.coef_ref
    if t.attr is not None:
        d["attr"] = t.attr
    if t.z_cols:
        d["z"] = list(t.z_cols)
    return d


def term_from_dict(d: dict, alternatives) -> list[Term]:
    """One config term -> explicit terms; alt "*" replicates across alternatives."""
    coef = d.get("coef")
    if not isinstance(coef, dict) or "kind" not in coef:
        raise SpecError(f"term {d!r} needs a coef object with a kind")
    kind = coef["kind"]
    if kind == NET:
        ref = int(coef["index"])
    elif kind == PARAM:
        ref = str(coef["name"])
    elif kind == FIXED:
        ref = float(coef["value"])
    else:
        raise SpecError(f"unknown coefficient kind {kind!r}")
    attr = d.get("attr")
    z_cols = tuple(d.get("z", ()))
    alt = d.get("alt", "*")
    alts = list(alternatives) if alt == "*" else [alt]
    return [Term(a, kind, ref, attr, z_cols) for a in alts]


def spec_to_dict(spec: UtilitySpec) -> dict:
    return {
        "alternatives": list(spec.alternatives),
        "terms": [term_to_dict(t) for t in spec.terms],
    }


def spec_from_dict(d: dict) -> UtilitySpec:
    try:
        alts = tuple(d["alternatives"])
        terms: list[Term] = []
        for td in d["terms"]:
            terms.extend(term_from_dict(td, alts))
        return UtilitySpec(alternatives=alts, terms=tuple(terms))
    except KeyError as e:
        raise SpecError(f"utility config missing key {e.args[0]!r}") from None
