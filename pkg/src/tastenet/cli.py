"""Command-line interface: gen, train, eval, indicators, grid, probe.

Every command takes one JSON config file. Outputs land in
``<output_dir>/<12-hex config hash>/`` so a rerun with the same config
overwrites the same directory with identical bytes; a ``manifest.json``
records the sha256 of every written file. Failures print a machine-readable
error object to stdout and exit nonzero.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import data as datamod
from . import estimation, indicators, synthetic
from .errors import ConfigError, TasteNetError
from .model import RclModel, load_model


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return datamod._format_value(v)
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(v) for v in row) + "\n")


def _file_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _run_dir(cfg: dict, default: str = "runs") -> Path:
    out = Path(cfg.get("output_dir", default)) / cfgmod.config_hash(cfg)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(run_dir: Path, command: str, cfg: dict, written) -> None:
    manifest = {
        "command": command,
        "config": cfg,
        "outputs": {p.name: _file_hash(p) for p in written},
    }
    _write_json(run_dir / "manifest.json", manifest)
    print(str(run_dir))


def _require_seed(cfg: dict, command: str) -> int:
    if "seed" not in cfg:
        raise ConfigError(f"'{command}' is stochastic; the config must set a seed")
    return int(cfg["seed"])


# -- commands -----------------------------------------------------------------


def cmd_gen(cfg: dict) -> int:
    seed = _require_seed(cfg, "gen")
    gen_cfg = synthetic.GenConfig.from_dict({"seed": seed, **cfg.get("generator", {})})
    truth = synthetic.TrueTasteParams.from_dict(cfg.get("truth", {}))
    run_dir = _run_dir(cfg)
    splits = synthetic.generate_dataset(gen_cfg, truth)
    written = []
    for ds, name in zip(splits, ("train.csv", "dev.csv", "test.csv")):
        path = run_dir / name
        datamod.write_csv(ds, path)
        written.append(path)
    truth_path = run_dir / "truth.json"
    _write_json(truth_path, {"truth": truth.to_dict(), "generator": gen_cfg.to_dict()})
    written.append(truth_path)
    _finish(run_dir, "gen", cfg, written)
    return 0


def _train_config(cfg: dict, seed: int) -> estimation.TrainConfig:
    return estimation.TrainConfig(**{"seed": seed, **cfg.get("training", {})})


def cmd_train(cfg: dict, base_dir: Path) -> int:
    seed = _require_seed(cfg, "train")
    datasets = cfgmod.resolve_datasets(cfg.get("data", {}), base_dir)
    if "train" not in datasets or "dev" not in datasets:
        raise ConfigError("training needs 'train' and 'dev' datasets")
    model_cfg = cfg.get("model", {})
    kind = model_cfg.get("kind", "tastenet")
    uspec = cfgmod.utility_from_config(model_cfg)
    tcfg = _train_config(cfg, seed)
    train_ds, dev_ds = datasets["train"], datasets["dev"]

    if kind == "rcl":
        rcl_cfg = model_cfg.get("rcl", {})
        rcl = estimation.RclSpec(
            base_utility=uspec,
            random_attr=rcl_cfg.get("random_attr", "time"),
            mean_terms=tuple(tuple(t) for t in rcl_cfg.get("mean_terms", [[]])),
            n_draws=int(rcl_cfg.get("n_draws", 200)),
        )
        model = estimation.estimate_rcl(rcl, train_ds, dev_ds, tcfg)
    elif kind == "mnl":
        model = estimation.estimate_mnl(uspec, train_ds, dev_ds, tcfg)
    elif kind == "tastenet":
        input_dim = train_ds.z.shape[1]
        net = cfgmod.network_from_config(model_cfg.get("network", {}), input_dim,
                                         uspec.n_net_outputs)
        model = estimation.train(estimation.ModelSpec(uspec, net), train_ds, dev_ds, tcfg)
    else:
        raise ConfigError(f"unknown model kind {kind!r}; expected tastenet, mnl, or rcl")

    run_dir = _run_dir(cfg)
    model_path = run_dir / "model.json"
    model.save(model_path)
    hist_path = run_dir / "history.csv"
    _write_csv(hist_path, ("epoch", "train_nll", "dev_nll"),
               [(h["epoch"], h["train_nll"], h["dev_nll"]) for h in model.history])
    _finish(run_dir, "train", cfg, [model_path, hist_path])
    return 0


def _single_dataset(cfg: dict, base_dir: Path) -> datamod.Dataset:
    datasets = cfgmod.resolve_datasets(cfg.get("data", {}), base_dir)
    use = cfg.get("data", {}).get("use")
    if use is None:
        if len(datasets) == 1:
            return next(iter(datasets.values()))
        use = "test"
    if use not in datasets:
        raise ConfigError(f"dataset {use!r} not among loaded splits {sorted(datasets)}")
    return datasets[use]


def cmd_eval(cfg: dict, base_dir: Path) -> int:
    model_path = base_dir / cfg["model"]
    model = load_model(model_path)
    dataset = _single_dataset(cfg, base_dir)
    metrics = indicators.classification_metrics(model, dataset)
    run_dir = _run_dir(cfg)
    out = run_dir / "metrics.json"
    _write_json(out, {"metrics": metrics, "model": _file_hash(model_path),
                      "n_observations": len(dataset)})
    _finish(run_dir, "eval", cfg, [out])
    return 0


def cmd_indicators(cfg: dict, base_dir: Path) -> int:
    model_path = base_dir / cfg["model"]
    model = load_model(model_path)
    dataset = _single_dataset(cfg, base_dir)
    requests = cfg.get("requests", ["vot"])
    run_dir = _run_dir(cfg)
    written = []
    report: dict = {"requests": {}, "metadata": {
        "model_hash": _file_hash(model_path),
        "dataset_hash": dataset.content_hash(),
        "n_observations": len(dataset),
        "model_kind": getattr(model, "kind", "unknown"),
        "config": cfg,
    }}

    for req in requests:
        name = req if isinstance(req, str) else req["kind"]
        opts = {} if isinstance(req, str) else req
        if name == "vot":
            vot = indicators.value_of_time(model, dataset,
                                           time_attr=opts.get("time_attr", "time"),
                                           cost_attr=opts.get("cost_attr", "cost"))
            alts = sorted(vot)
            path = run_dir / "vot.csv"
            _write_csv(path, ["obs"] + [f"vot_{a}" for a in alts],
                       [(i, *(float(vot[a][i]) for a in alts)) for i in range(len(dataset))])
            written.append(path)
            report["requests"]["vot"] = {a: indicators.summary_stats(v) for a, v in vot.items()}
        elif name == "tastes":
            attr = opts.get("attr", "time")
            alts = [a for a in model.utility.alternatives
                    if attr in dataset.schema.attr_roles(a)]
            tastes = {a: indicators.effective_coefficient(model, dataset, a, attr)
                      for a in alts}
            path = run_dir / f"tastes_{attr}.csv"
            _write_csv(path, ["obs"] + [f"{attr}_{a}" for a in alts],
                       [(i, *(float(tastes[a][i]) for a in alts))
                        for i in range(len(dataset))])
            written.append(path)
            report["requests"][f"tastes_{attr}"] = {
                a: indicators.summary_stats(v) for a, v in tastes.items()}
        elif name == "elasticity":
            alt, attr = opts["alt"], opts["attr"]
            e = indicators.point_elasticity(model, dataset, alt, attr)
            path = run_dir / f"elasticity_{alt}_{attr}.csv"
            _write_csv(path, ("obs", "elasticity"), list(enumerate(map(float, e))))
            written.append(path)
            report["requests"][f"elasticity_{alt}_{attr}"] = indicators.summary_stats(e)
        elif name == "aggregate_elasticity":
            alt, attr = opts["alt"], opts["attr"]
            agg = indicators.aggregate_elasticity(model, dataset, alt, attr,
                                                  group_by=opts.get("group_by"))
            report["requests"][f"aggregate_elasticity_{alt}_{attr}"] = agg
        elif name == "taste_recovery":
            alt = opts.get("alt", dataset.schema.alternatives[0])
            beta = indicators.effective_coefficient(model, dataset, alt,
                                                    opts.get("attr", "time"))
            chars = np.column_stack([dataset.characteristic(c)
                                     for c in ("inc", "full", "flex")])
            coefs = indicators.taste_recovery_regression(beta, chars)
            report["requests"]["taste_recovery"] = dict(
                zip(indicators.TASTE_DESIGN_NAMES, map(float, coefs)))
        elif name == "what_if":
            template = _template_dataset(dataset.schema, opts["template"])
            values = _sweep_values(opts)
            rows = indicators.what_if_curve(model, template, opts["alt"], opts["attr"], values)
            path = run_dir / f"what_if_{opts['alt']}_{opts['attr']}.csv"
            _write_csv(path, ("value", "probability", "elasticity"),
                       [(r["value"], r["probability"], r["elasticity"]) for r in rows])
            written.append(path)
        else:
            raise ConfigError(f"unknown indicator request {name!r}")

    report_path = run_dir / "report.json"
    _write_json(report_path, report)
    written.append(report_path)
    _finish(run_dir, "indicators", cfg, written)
    return 0


def _template_dataset(schema, template: dict) -> datamod.Dataset:
    cols = {}
    for col in schema.raw_columns():
        if col == schema.choice_column:
            default = schema.choice_values[0] if schema.choice_values else 0
            cols[col] = np.array([float(template.get(col, default))])
        elif col in template:
            cols[col] = np.array([float(template[col])])
        elif col in schema.availability.values():
            cols[col] = np.array([1.0])
        else:
            raise ConfigError(f"what-if template is missing column {col!r}")
    return datamod.Dataset(schema, cols, validate=False)


def _sweep_values(opts: dict) -> np.ndarray:
    values = opts.get("values")
    if values is not None:
        return np.asarray(values, dtype=np.float64)
    try:
        return np.linspace(float(opts["start"]), float(opts["stop"]), int(opts["num"]))
    except KeyError as exc:
        raise ConfigError(f"what_if request needs 'values' or start/stop/num: {exc}") from None


def cmd_grid(cfg: dict, base_dir: Path, workers: int = 1) -> int:
    seed = _require_seed(cfg, "grid")
    datasets = cfgmod.resolve_datasets(cfg.get("data", {}), base_dir)
    if "train" not in datasets or "dev" not in datasets:
        raise ConfigError("grid search needs 'train' and 'dev' datasets")
    uspec = cfgmod.utility_from_config(cfg.get("model", {}))
    space_cfg = cfg.get("search", {})
    space = estimation.SearchSpace(
        hidden_sizes=tuple(space_cfg.get("hidden_sizes", (7,))),
        activations=tuple(space_cfg.get("activations", ("relu",))),
        transforms=tuple(space_cfg.get("transforms", ("neg_relu",))),
        reg_norms=tuple(space_cfg.get("reg_norms", (2,))),
        reg_strengths=tuple(space_cfg.get("reg_strengths", (0.001,))),
    )
    tcfg = _train_config(cfg, seed)
    rows, best = estimation.grid_search(space, uspec, datasets["train"].z.shape[1],
                                        datasets["train"], datasets["dev"], tcfg,
                                        max_workers=workers)
    run_dir = _run_dir(cfg)
    header = ("hidden_size", "activation", "transform", "reg_norm", "reg_strength",
              "restart", "train_nll", "dev_nll", "train_acc", "dev_acc",
              "epochs_run", "error")
    path = run_dir / "results.csv"
    _write_csv(path, header, [tuple(r[k] for k in header) for r in rows])
    written = [path]
    if best is not None:
        best_path = run_dir / "best_model.json"
        best.save(best_path)
        written.append(best_path)
    _finish(run_dir, "grid", cfg, written)
    return 0


def cmd_probe(cfg: dict, base_dir: Path) -> int:
    model = load_model(base_dir / cfg["model"])
    if isinstance(model, RclModel):
        raise ConfigError("activation probe applies to network models only")
    grid = cfg.get("grid", {}).get("columns")
    if not grid:
        raise ConfigError("probe config needs grid.columns: {input name: [values...]}")
    names, points, acts = indicators.activation_probe(model, grid)
    run_dir = _run_dir(cfg)
    path = run_dir / "activations.csv"
    header = list(names) + [f"unit_{h}" for h in range(acts.shape[1])]
    rows = [tuple(points[i]) + tuple(acts[i]) for i in range(points.shape[0])]
    _write_csv(path, header, rows)
    _finish(run_dir, "probe", cfg, [path])
    return 0


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tastenet",
        description="Neural-embedded multinomial logit: generate, estimate, evaluate.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("gen", "generate the synthetic experiment datasets"),
        ("train", "estimate a model (tastenet, mnl, or rcl)"),
        ("eval", "NLL / accuracy / F1 of a model file on a dataset"),
        ("indicators", "values of time, elasticities, taste recovery, what-if sweeps"),
        ("grid", "hyperparameter grid search ranked by dev NLL"),
        ("probe", "hidden-unit activations over a characteristics grid"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--output-dir", default=None, help="override the output directory")
        if name == "grid":
            p.add_argument("--workers", type=int, default=1,
                           help="parallel training processes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config)
        if not isinstance(cfg, dict):
            raise ConfigError("config root must be a JSON object")
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.output_dir is not None:
            cfg["output_dir"] = args.output_dir
        base_dir = Path(args.config).resolve().parent
        if args.command == "gen":
            return cmd_gen(cfg)
        if args.command == "train":
            return cmd_train(cfg, base_dir)
        if args.command == "eval":
            return cmd_eval(cfg, base_dir)
        if args.command == "indicators":
            return cmd_indicators(cfg, base_dir)
        if args.command == "grid":
            return cmd_grid(cfg, base_dir, workers=args.workers)
        if args.command == "probe":
            return cmd_probe(cfg, base_dir)
        raise ConfigError(f"unknown command {args.command!r}")
    except (TasteNetError, ValueError, OSError, KeyError) as exc:
        error = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(error, sort_keys=True))
        return 1


if __name__ == "__main__":
    sys.exit(main())
