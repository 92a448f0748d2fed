"""Regularized maximum-likelihood estimation.

One mini-batch trainer covers the whole model family: the network part is
optional (plain MNL benchmarks are the zero-output case) and the
random-coefficient logit reuses the same loop with a simulated likelihood.

Optimization is adaptive moment estimation (bias-corrected first and second
moments) over shuffled mini-batches, dev-set early stopping with patience,
and several restarts from different random initializations; the restart with
the lowest dev NLL wins. Everything is deterministic given (data, config):
all randomness flows from ``TrainConfig.seed`` through spawned seed
sequences, and reruns reproduce the fitted model bit for bit on a given
kernel backend.

The regularization term is ``reg_strength * ||w||_p^p`` over network
parameters only; parametric utility coefficients are never penalized.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import norm, qmc

from . import backend, choice, mlp
from .data import Dataset
from .errors import SpecError, TrainingError
from .model import FittedModel, RclModel


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 500
    patience: int = 20
    reg_norm: int = 2
    reg_strength: float = 0.0
    seed: int = 0
    restarts: int = 5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    divergence_factor: float = 10.0
    divergence_epochs: int = 3
    coefficient_bound: float = 1e3

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1 or self.restarts < 1:
            raise ValueError("batch_size, max_epochs, patience, restarts must be >= 1")
        if self.reg_norm not in (1, 2):
            raise ValueError("reg_norm must be 1 or 2")
        if self.reg_strength < 0:
            raise ValueError("reg_strength must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate, "batch_size": self.batch_size,
            "max_epochs": self.max_epochs, "patience": self.patience,
            "reg_norm": self.reg_norm, "reg_strength": self.reg_strength,
            "seed": self.seed, "restarts": self.restarts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass(frozen=True)
class ModelSpec:
    """What to estimate: a utility structure plus an optional network."""

    utility: choice.UtilitySpec
    network: mlp.MlpSpec | None = None

    def __post_init__(self):
        k = self.utility.n_net_outputs
        if k == 0 and self.network is not None:
            raise SpecError("utility has no network outputs but a network was given")
        if k > 0:
            if self.network is None:
                raise SpecError("utility references network outputs; provide an MlpSpec")
            if self.network.n_outputs != k:
                raise SpecError(
                    f"network has {self.network.n_outputs} outputs, utility needs {k}")


class _Adam:
    """Bias-corrected adaptive moments over a flat list of arrays."""

    def __init__(self, arrays, cfg: TrainConfig):
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays]
        self.t = 0
        self.cfg = cfg

    def step(self, arrays, grads):
        c = self.cfg
        self.t += 1
        c1 = 1.0 - c.adam_beta1 ** self.t
        c2 = 1.0 - c.adam_beta2 ** self.t
        for a, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= c.adam_beta1
            m += (1.0 - c.adam_beta1) * g
            v *= c.adam_beta2
            v += (1.0 - c.adam_beta2) * (g * g)
            a -= c.learning_rate * (m / c1) / (np.sqrt(v / c2) + c.adam_eps)


def _penalty(arrays, cfg: TrainConfig) -> float:
    if cfg.reg_strength == 0.0 or not arrays:
        return 0.0
    if cfg.reg_norm == 1:
        return cfg.reg_strength * float(sum(np.abs(a).sum() for a in arrays))
    return cfg.reg_strength * float(sum((a * a).sum() for a in arrays))


def _penalty_grad(a: np.ndarray, cfg: TrainConfig) -> np.ndarray:
    if cfg.reg_strength == 0.0:
        return 0.0
    if cfg.reg_norm == 1:
        return cfg.reg_strength * np.sign(a)  # subgradient 0 at 0
    return 2.0 * cfg.reg_strength * a


def regularized_loss(mspec: ModelSpec, params: mlp.MlpParams | None, beta_mnl: np.ndarray,
                     batch: choice.Design, cfg: TrainConfig):
    """Mean batch NLL plus the network weight penalty, with exact gradients.

    Returns (loss, grads, d_beta_mnl) where ``grads`` is MlpParams-shaped
    (None for a pure parametric model).
    """
    n = len(batch)
    if n == 0:
        raise ValueError("batch is empty")
    if mspec.network is not None:
        beta_tn, cache = mlp.forward(params, mspec.network, batch.z)
        beta_tn = np.atleast_2d(beta_tn)
    else:
        beta_tn = np.zeros((n, 0))
    v = choice.utilities(batch, beta_tn, beta_mnl)
    p = backend.kernels.masked_softmax(np.ascontiguousarray(v), batch.avail)
    nll_sum, d_v, _ = backend.kernels.nll_grad(p, batch.chosen, 1.0 / n)
    if not np.isfinite(nll_sum):
        pc = p[np.arange(n), batch.chosen]
        bad = np.flatnonzero(~np.isfinite(pc))
        row = int(batch.rows[bad[0]]) if bad.size else int(batch.rows[0])
        raise TrainingError(f"non-finite loss; first offending dataset row: {row}")
    loss = nll_sum / n
    d_tn, d_par = choice.coefficient_gradients(batch, d_v)
    if mspec.network is not None:
        grads, _ = mlp.backward(params, mspec.network, cache, d_tn)
        loss += _penalty(params.arrays(), cfg)
        for a, g in zip(params.arrays(), grads.arrays()):
            g += _penalty_grad(a, cfg)
    else:
        grads = None
    return loss, grads, d_par


def _nll_acc(p: np.ndarray, chosen: np.ndarray) -> tuple[float, float]:
    rows = np.arange(p.shape[0])
    pc = p[rows, chosen]
    nll = float(-np.log(np.maximum(pc, 1e-300)).mean())
    acc = float((p.argmax(axis=1) == chosen).mean())  # argmax ties -> lowest index
    return nll, acc


def _evaluate(mspec: ModelSpec, params, beta_mnl, design: choice.Design):
    if mspec.network is not None:
        beta_tn, _ = mlp.forward(params, mspec.network, design.z)
        beta_tn = np.atleast_2d(beta_tn)
    else:
        beta_tn = np.zeros((len(design), 0))
    v = choice.utilities(design, beta_tn, beta_mnl)
    p = backend.kernels.masked_softmax(np.ascontiguousarray(v), design.avail)
    return _nll_acc(p, design.chosen)


def _check_guards(epoch, nll, initial_nll, streak, arrays, cfg: TrainConfig):
    """Divergence guards; returns the updated consecutive-breach streak."""
    if nll > cfg.divergence_factor * initial_nll:
        streak += 1
        if streak >= cfg.divergence_epochs:
            raise TrainingError(
                f"training diverged: epoch {epoch} NLL {nll:.4f} exceeded "
                f"{cfg.divergence_factor:g} x initial ({initial_nll:.4f}) for "
                f"{cfg.divergence_epochs} consecutive epochs")
    else:
        streak = 0
    worst = max((float(np.abs(a).max()) for a in arrays if a.size), default=0.0)
    if worst > cfg.coefficient_bound:
        raise TrainingError(
            f"training diverged: coefficient magnitude {worst:.3g} exceeded "
            f"{cfg.coefficient_bound:g} at epoch {epoch} (perfect separation or "
            "an unidentified coefficient)")
    return streak


def _run_single(mspec: ModelSpec, train_design: choice.Design, dev_design: choice.Design,
                cfg: TrainConfig, init_seed, shuffle_seed):
    n = len(train_design)
    params = mlp.init_params(mspec.network, init_seed) if mspec.network is not None else None
    beta_mnl = np.zeros(mspec.utility.n_params)
    arrays = (params.arrays() if params is not None else []) + [beta_mnl]
    adam = _Adam(arrays, cfg)
    shuffle_rng = np.random.default_rng(shuffle_seed)

    initial_nll, _ = _evaluate(mspec, params, beta_mnl, train_design)
    best = {"dev_nll": np.inf, "epoch": -1, "params": None, "beta": None}
    history = []
    streak = 0
    epochs_run = 0
    for epoch in range(cfg.max_epochs):
        epochs_run = epoch + 1
        order = shuffle_rng.permutation(n)
        shuffled = train_design.take(order)
        for start in range(0, n, cfg.batch_size):
            sl = slice(start, min(start + cfg.batch_size, n))
            _, grads, d_par = regularized_loss(mspec, params, beta_mnl,
                                               shuffled.take(sl), cfg)
            grad_arrays = (grads.arrays() if grads is not None else []) + [d_par]
            adam.step(arrays, grad_arrays)
        train_nll, train_acc = _evaluate(mspec, params, beta_mnl, train_design)
        dev_nll, dev_acc = _evaluate(mspec, params, beta_mnl, dev_design)
        history.append({"epoch": epoch, "train_nll": train_nll, "dev_nll": dev_nll})
        if dev_nll < best["dev_nll"]:
            best = {"dev_nll": dev_nll, "epoch": epoch,
                    "params": params.copy() if params is not None else None,
                    "beta": beta_mnl.copy(),
                    "train_nll": train_nll, "train_acc": train_acc, "dev_acc": dev_acc}
        streak = _check_guards(epoch, train_nll, initial_nll, streak, arrays, cfg)
        if epoch - best["epoch"] >= cfg.patience:
            break
    if best["epoch"] < 0:
        raise TrainingError("no finite dev NLL was ever recorded; training never converged")
    best["history"] = history
    best["epochs_run"] = epochs_run
    return best


def train(mspec: ModelSpec, train_data: Dataset, dev_data: Dataset,
          cfg: TrainConfig = TrainConfig()) -> FittedModel:
    """Estimate the model; keep the restart with the lowest dev NLL.

    The fitted model's ``meta["restarts"]`` lists every restart's final
    metrics, and ``history`` holds the winning run's per-epoch train/dev NLL.
    """
    train_design = choice.compile_design(mspec.utility, train_data)
    dev_design = choice.compile_design(mspec.utility, dev_data)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    winner, summaries = None, []
    for r, child in enumerate(children):
        init_ss, shuffle_ss = child.spawn(2)
        run = _run_single(mspec, train_design, dev_design, cfg, init_ss, shuffle_ss)
        summaries.append({
            "restart": r, "dev_nll": run["dev_nll"], "train_nll": run["train_nll"],
            "dev_acc": run["dev_acc"], "train_acc": run["train_acc"],
            "best_epoch": run["epoch"], "epochs_run": run["epochs_run"],
        })
        if winner is None or run["dev_nll"] < winner["dev_nll"]:
            winner = run
            winner["restart"] = r
    return FittedModel(
        utility=mspec.utility,
        beta_mnl=winner["beta"],
        mlp_spec=mspec.network,
        mlp_params=winner["params"],
        history=winner["history"],
        best_epoch=winner["epoch"],
        meta={
            "config": cfg.to_dict(),
            "backend": backend.name(),
            "restart": winner["restart"],
            "dev_nll": winner["dev_nll"],
            "restarts": summaries,
        },
    )


def estimate_mnl(uspec: choice.UtilitySpec, train_data: Dataset, dev_data: Dataset,
                 cfg: TrainConfig = TrainConfig()) -> FittedModel:
    """Plain parametric MNL: the zero-network special case of train()."""
    if uspec.n_net_outputs:
        raise SpecError("estimate_mnl requires a purely parametric utility spec")
    return train(ModelSpec(uspec, None), train_data, dev_data, cfg)


# -- random-coefficient logit -----------------------------------------------------


@dataclass(frozen=True)
class RclSpec:
    """One normally distributed attribute coefficient on top of a base utility.

    The coefficient's mean is linear in characteristic products
    (``mean_terms``; () is the intercept); its standard deviation is
    parameterized as exp(s) so positivity holds by construction. The
    likelihood is simulated with ``n_draws`` scrambled-Halton draws per
    observation, fixed before optimization (common random numbers).
    """

    base_utility: choice.UtilitySpec
    random_attr: str
    mean_terms: tuple = ((),)
    n_draws: int = 200
    draw_scheme: str = "halton"
    sigma_init: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "mean_terms", tuple(tuple(t) for t in self.mean_terms))
        if self.base_utility.n_net_outputs:
            raise SpecError("RCL base utility must be purely parametric")
        if self.n_draws < 1:
            raise SpecError("n_draws must be >= 1")
        if self.draw_scheme != "halton":
            raise SpecError(f"unknown draw scheme {self.draw_scheme!r}; only 'halton' is implemented")
        if not self.sigma_init > 0:
            raise SpecError("sigma_init must be positive")


def _mean_design(dataset: Dataset, mean_terms) -> np.ndarray:
    cols = []
    for term in mean_terms:
        val = np.ones(len(dataset))
        for zc in term:
            val = val * dataset.characteristic(zc)
        cols.append(val)
    return np.column_stack(cols)


def _random_features(dataset: Dataset, attr: str) -> np.ndarray:
    feats = np.zeros((len(dataset), dataset.n_alts))
    for j, alt in enumerate(dataset.schema.alternatives):
        roles = dataset.schema.attr_roles(alt)
        if attr in roles:
            feats[:, j] = dataset.x[alt][:, roles.index(attr)]
    return feats


def simulated_loss(design: choice.Design, feats, z_mu, eps, beta_mnl, mu, s_log):
    """Simulated NLL and gradients for one batch.

    The per-draw coefficient is ``beta_r = mu . z_mu + exp(s_log) * eps``;
    the likelihood is the draw-average of P(chosen), and gradients flow
    through every draw with weights proportional to its chosen-probability.
    """
    n, n_r = eps.shape
    nj = design.avail.shape[1]
    sigma = np.exp(s_log)
    v_base = choice.utilities(design, np.zeros((n, 0)), beta_mnl)
    beta_r = (z_mu @ mu)[:, None] + sigma * eps
    v = v_base[:, None, :] + beta_r[:, :, None] * feats[:, None, :]
    avail = np.repeat(design.avail, n_r, axis=0)
    p = backend.kernels.masked_softmax(
        np.ascontiguousarray(v.reshape(-1, nj)), np.ascontiguousarray(avail))
    p = p.reshape(n, n_r, nj)
    s_nr = p[np.arange(n)[:, None], np.arange(n_r)[None, :], design.chosen[:, None]]
    like = s_nr.mean(axis=1)
    if not np.all(np.isfinite(like)):
        row = int(design.rows[np.flatnonzero(~np.isfinite(like))[0]])
        raise TrainingError(f"non-finite simulated likelihood; dataset row {row}")
    nll = float(-np.log(np.maximum(like, 1e-300)).mean())
    w = s_nr / np.maximum(s_nr.sum(axis=1, keepdims=True), 1e-300)
    g = w[:, :, None] * p / n
    g[np.arange(n)[:, None], np.arange(n_r)[None, :], design.chosen[:, None]] -= w / n
    d_v_base = g.sum(axis=1)
    _, d_par = choice.coefficient_gradients(design, d_v_base)
    d_beta_r = (g * feats[:, None, :]).sum(axis=2)
    d_mu = z_mu.T @ d_beta_r.sum(axis=1)
    d_s = float((d_beta_r * eps).sum() * sigma)
    return nll, d_par, d_mu, d_s


def estimate_rcl(rcl: RclSpec, train_data: Dataset, dev_data: Dataset,
                 cfg: TrainConfig = TrainConfig()) -> RclModel:
    """Simulated maximum likelihood for the random-coefficient logit."""
    train_design = choice.compile_design(rcl.base_utility, train_data)
    dev_design = choice.compile_design(rcl.base_utility, dev_data)
    feats_tr = _random_features(train_data, rcl.random_attr)
    feats_dev = _random_features(dev_data, rcl.random_attr)
    z_tr = _mean_design(train_data, rcl.mean_terms)
    z_dev = _mean_design(dev_data, rcl.mean_terms)

    root = np.random.SeedSequence(cfg.seed)
    draw_seed = int(root.generate_state(1)[0] % (2**31))
    halton = qmc.Halton(d=1, scramble=True, seed=draw_seed)
    eps_tr = norm.ppf(halton.random(len(train_data) * rcl.n_draws)).reshape(-1, rcl.n_draws)
    dev_halton = qmc.Halton(d=1, scramble=True, seed=draw_seed + 1)
    eps_dev = norm.ppf(dev_halton.random(len(dev_data) * rcl.n_draws)).reshape(-1, rcl.n_draws)

    def dev_eval(beta_mnl, mu, s_log):
        nll, *_ = simulated_loss(dev_design, feats_dev, z_dev, eps_dev, beta_mnl, mu, s_log)
        return nll

    children = root.spawn(cfg.restarts)
    winner = None
    summaries = []
    n = len(train_data)
    for r, child in enumerate(children):
        shuffle_rng = np.random.default_rng(child)
        beta_mnl = np.zeros(rcl.base_utility.n_params)
        mu = np.zeros(len(rcl.mean_terms))
        s_log = np.array([np.log(rcl.sigma_init)])
        arrays = [beta_mnl, mu, s_log]
        adam = _Adam(arrays, cfg)
        initial_nll, *_ = simulated_loss(train_design, feats_tr, z_tr, eps_tr,
                                         beta_mnl, mu, float(s_log[0]))
        best = {"dev_nll": np.inf, "epoch": -1}
        history = []
        streak = 0
        epochs_run = 0
        for epoch in range(cfg.max_epochs):
            epochs_run = epoch + 1
            order = shuffle_rng.permutation(n)
            shuffled = train_design.take(order)
            f_s, z_s, e_s = feats_tr[order], z_tr[order], eps_tr[order]
            for start in range(0, n, cfg.batch_size):
                sl = slice(start, min(start + cfg.batch_size, n))
                _, d_par, d_mu, d_s = simulated_loss(
                    shuffled.take(sl), f_s[sl], z_s[sl], e_s[sl],
                    beta_mnl, mu, float(s_log[0]))
                adam.step(arrays, [d_par, d_mu, np.array([d_s])])
            train_nll, *_ = simulated_loss(train_design, feats_tr, z_tr, eps_tr,
                                           beta_mnl, mu, float(s_log[0]))
            dev_nll = dev_eval(beta_mnl, mu, float(s_log[0]))
            history.append({"epoch": epoch, "train_nll": train_nll, "dev_nll": dev_nll})
            if dev_nll < best["dev_nll"]:
                best = {"dev_nll": dev_nll, "epoch": epoch, "beta": beta_mnl.copy(),
                        "mu": mu.copy(), "s_log": float(s_log[0]), "train_nll": train_nll}
            streak = _check_guards(epoch, train_nll, initial_nll, streak, arrays, cfg)
            if epoch - best["epoch"] >= cfg.patience:
                break
        summaries.append({"restart": r, "dev_nll": best["dev_nll"],
                          "train_nll": best["train_nll"], "best_epoch": best["epoch"],
                          "epochs_run": epochs_run})
        if winner is None or best["dev_nll"] < winner["dev_nll"]:
            winner = best
            winner["history"] = history
            winner["restart"] = r
    return RclModel(
        utility=rcl.base_utility,
        beta_mnl=winner["beta"],
        random_attr=rcl.random_attr,
        mean_terms=rcl.mean_terms,
        mu=winner["mu"],
        sigma=float(np.exp(winner["s_log"])),
        n_draws=rcl.n_draws,
        draw_seed=draw_seed,
        history=winner["history"],
        best_epoch=winner["epoch"],
        meta={"config": cfg.to_dict(), "backend": backend.name(),
              "restart": winner["restart"], "dev_nll": winner["dev_nll"],
              "restarts": summaries},
    )


# -- hyperparameter grid search -----------------------------------------------------


@dataclass(frozen=True)
class SearchSpace:
    """Cartesian grid over single-hidden-layer architectures and penalties."""

    hidden_sizes: tuple = (7,)
    activations: tuple = ("relu",)
    transforms: tuple = ("neg_relu",)
    reg_norms: tuple = (2,)
    reg_strengths: tuple = (0.001,)

    def __post_init__(self):
        for name in ("hidden_sizes", "activations", "transforms", "reg_norms", "reg_strengths"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise ValueError(f"search space dimension {name} is empty")

    def configurations(self):
        return itertools.product(self.hidden_sizes, self.activations, self.transforms,
                                 self.reg_norms, self.reg_strengths)


def _grid_task(task):
    """One grid configuration; top-level so worker processes can unpickle it."""
    (hidden, act, tf, norm_p, lam), uspec, input_dim, train_data, dev_data, cfg = task
    hidden_sizes = (int(hidden),) if not isinstance(hidden, (tuple, list)) else tuple(hidden)
    net = mlp.MlpSpec(input_dim=input_dim, hidden_sizes=hidden_sizes,
                      activations=(act,) * len(hidden_sizes),
                      transforms=(tf,) * uspec.n_net_outputs)
    run_cfg = replace(cfg, reg_norm=int(norm_p), reg_strength=float(lam))
    base = {"hidden_size": hidden, "activation": act, "transform": tf,
            "reg_norm": int(norm_p), "reg_strength": float(lam)}
    try:
        model = train(ModelSpec(uspec, net), train_data, dev_data, run_cfg)
    except TrainingError as exc:
        row = {**base, "restart": None, "train_nll": None, "dev_nll": None,
               "train_acc": None, "dev_acc": None, "epochs_run": None, "error": str(exc)}
        return [row], None
    rows = [{**base, "restart": s["restart"], "train_nll": s["train_nll"],
             "dev_nll": s["dev_nll"], "train_acc": s["train_acc"],
             "dev_acc": s["dev_acc"], "epochs_run": s["epochs_run"], "error": None}
            for s in model.meta["restarts"]]
    return rows, model


def grid_search(space: SearchSpace, uspec: choice.UtilitySpec, input_dim: int,
                train_data: Dataset, dev_data: Dataset, cfg: TrainConfig = TrainConfig(),
                max_workers: int = 1):
    """Train every configuration in the grid; rank results by dev NLL.

    Returns (rows, best_model): one row per configuration x restart, with a
    non-null ``error`` column when a run failed (the search continues).
    Configurations are independent; ``max_workers > 1`` runs them in
    parallel processes without changing the results.
    """
    if uspec.n_net_outputs == 0:
        raise SpecError("grid search needs a utility spec with network outputs")
    tasks = [(c, uspec, input_dim, train_data, dev_data, cfg)
             for c in space.configurations()]
    if max_workers > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(_grid_task, tasks))
    else:
        results = [_grid_task(t) for t in tasks]
    rows, best_model, best_nll = [], None, np.inf
    for config_rows, model in results:
        rows.extend(config_rows)
        if model is not None and model.meta["dev_nll"] < best_nll:
            best_nll = model.meta["dev_nll"]
            best_model = model
    rows.sort(key=lambda r: np.inf if r["dev_nll"] is None else r["dev_nll"])
    return rows, best_model
