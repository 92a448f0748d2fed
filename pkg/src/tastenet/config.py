"""Declarative run configuration: one JSON format shared by all commands.

A config file is a JSON object with command-specific sections (generator,
data, model, training, search, indicators, probe) plus a global seed and
output directory. Builtin names resolve the bundled experiment pieces so a
config can say ``"builtin_schema": "synthetic"`` instead of spelling the
schema out.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import choice, data, mlp, swissbench, synthetic
from .errors import ConfigError


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    """Stable 12-hex-digit digest of a config; names the output directory."""
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:12]


BUILTIN_SCHEMAS = {
    "synthetic": synthetic.synthetic_schema,
    "swissmetro": data.swissmetro_schema,
}

BUILTIN_UTILITIES = {
    "synthetic_true": synthetic.utility_true,
    "synthetic_mnl_i": synthetic.utility_mnl_i,
    "synthetic_mnl_ii": synthetic.utility_mnl_ii,
    "synthetic_tastenet": synthetic.utility_tastenet,
    "synthetic_rcl_base": synthetic.utility_rcl_base,
    "swissmetro_mnl_a": swissbench.utility_mnl_a,
    "swissmetro_mnl_b": swissbench.utility_mnl_b,
    "swissmetro_mnl_c": swissbench.utility_mnl_c,
    "swissmetro_tastenet": swissbench.utility_tastenet,
}

BUILTIN_NETWORKS = {
    "swissmetro_tastenet": swissbench.tastenet_network,
}


def schema_from_config(cfg: dict) -> data.FeatureSchema:
    if "builtin_schema" in cfg:
        name = cfg["builtin_schema"]
        if name not in BUILTIN_SCHEMAS:
            raise ConfigError(f"unknown builtin schema {name!r}; have {sorted(BUILTIN_SCHEMAS)}")
        return BUILTIN_SCHEMAS[name]()
    if "schema" in cfg:
        return data.schema_from_dict(cfg["schema"])
    raise ConfigError("data section needs either 'schema' or 'builtin_schema'")


def utility_from_config(cfg: dict) -> choice.UtilitySpec:
    if "builtin_utility" in cfg:
        name = cfg["builtin_utility"]
        if name not in BUILTIN_UTILITIES:
            raise ConfigError(f"unknown builtin utility {name!r}; have {sorted(BUILTIN_UTILITIES)}")
        return BUILTIN_UTILITIES[name]()
    if "utility" in cfg:
        return choice.spec_from_dict(cfg["utility"])
    raise ConfigError("model section needs either 'utility' or 'builtin_utility'")


def network_from_config(cfg: dict, input_dim: int, n_outputs: int) -> mlp.MlpSpec:
    if "builtin_network" in cfg:
        name = cfg["builtin_network"]
        if name not in BUILTIN_NETWORKS:
            raise ConfigError(f"unknown builtin network {name!r}; have {sorted(BUILTIN_NETWORKS)}")
        kwargs = {k: v for k, v in cfg.items() if k != "builtin_network"}
        return BUILTIN_NETWORKS[name](**kwargs)
    try:
        hidden = tuple(int(h) for h in cfg.get("hidden_sizes", ()))
        activations = tuple(cfg.get("activations", ("relu",) * len(hidden)))
        transforms = cfg.get("transforms")
        if transforms is None:
            raise ConfigError("network section needs 'transforms' (one per output)")
        if isinstance(transforms, str):
            transforms = (transforms,) * n_outputs
        return mlp.MlpSpec(input_dim=input_dim, hidden_sizes=hidden,
                           activations=activations, transforms=tuple(transforms))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad network section: {exc}") from None


def resolve_datasets(cfg: dict, base_dir: Path) -> dict[str, data.Dataset]:
    """Load the datasets a command needs.

    Four forms: inline generation (``generate``: generator settings, plus an
    optional ``truth`` override); explicit per-split CSV paths with a schema;
    a single CSV plus a ``split`` rule; or ``swissmetro`` pointing at the raw
    survey file (filtered and recoded on load), optionally with a ``split``
    rule.
    """
    if not isinstance(cfg, dict):
        raise ConfigError("data section must be an object")
    out: dict[str, data.Dataset] = {}
    if "generate" in cfg:
        gen_cfg = synthetic.GenConfig.from_dict(cfg["generate"])
        truth = synthetic.TrueTasteParams.from_dict(cfg.get("truth", {}))
        train, dev, test = synthetic.generate_dataset(gen_cfg, truth)
        return {"train": train, "dev": dev, "test": test}
    if "swissmetro" in cfg:
        path = base_dir / cfg["swissmetro"]
        if not path.exists():
            raise ConfigError(f"swissmetro file not found: {path}")
        full = data.load_swissmetro(path)
    elif "csv" in cfg:
        schema = schema_from_config(cfg)
        full = data.load_csv(base_dir / cfg["csv"], schema)
    else:
        schema = schema_from_config(cfg)
        for tag in ("train", "dev", "test"):
            if tag in cfg:
                out[tag] = data.load_csv(base_dir / cfg[tag], schema, split_tag=tag)
        if not out:
            raise ConfigError("data section names no dataset (train/dev/test, csv, or swissmetro)")
        return out
    split = cfg.get("split")
    if split is None:
        out["train"] = full
        return out
    try:
        fractions = tuple(split["fractions"])
        seed = int(split["seed"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"split rule needs 'fractions' and 'seed': {exc}") from None
    train, dev, test = data.split_dataset(full, fractions, seed)
    return {"train": train, "dev": dev, "test": test}
