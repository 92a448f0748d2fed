"""Feed-forward network mapping individual characteristics to taste coefficients.

The network is a plain multi-layer perceptron with per-layer hidden
activations and per-output transform functions. Transforms enforce sign
constraints exactly (not via penalties): a nonpositive-rectifier output can
never emit a positive taste, whatever the input.

Zero hidden layers is a valid configuration and means a single linear map
from characteristics to outputs (used by fully-interacted linear benchmarks).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import SpecError

ACTIVATIONS = {"relu": backend.ACT_RELU, "tanh": backend.ACT_TANH}

# transform name -> (code, short description)
TRANSFORMS = {
    "identity": backend.TF_IDENTITY,
    "neg_relu": backend.TF_NEG_RELU,  # -relu(-r): nonpositive
    "neg_exp": backend.TF_NEG_EXP,    # -exp(-r): strictly negative
    "relu": backend.TF_RELU,          # nonnegative
    "exp": backend.TF_EXP,            # strictly positive
}

PARAMS_FORMAT = "tastenet-mlp/1"


@dataclass(frozen=True)
class MlpSpec:
    """Architecture: input width, hidden sizes, activations, output transforms.

    ``activations`` has one entry per hidden layer; ``transforms`` one entry
    per output. ``len(hidden_sizes) == 0`` collapses the network to a single
    linear map followed by the output transforms.
    """

    input_dim: int
    hidden_sizes: tuple[int, ...]
    activations: tuple[str, ...]
    transforms: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        object.__setattr__(self, "activations", tuple(self.activations))
        object.__setattr__(self, "transforms", tuple(self.transforms))
        if self.input_dim < 1:
            raise SpecError("input_dim must be >= 1")
        if any(h < 1 for h in self.hidden_sizes):
            raise SpecError("hidden sizes must be positive")
        if len(self.activations) != len(self.hidden_sizes):
            raise SpecError("need one activation per hidden layer")
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise SpecError(f"unknown activation {a!r}; choose from {sorted(ACTIVATIONS)}")
        if not self.transforms:
            raise SpecError("need at least one output transform")
        for t in self.transforms:
            if t not in TRANSFORMS:
                raise SpecError(f"unknown transform {t!r}; choose from {sorted(TRANSFORMS)}")

    @property
    def n_outputs(self) -> int:
        return len(self.transforms)

    @property
    def n_hidden_layers(self) -> int:
        return len(self.hidden_sizes)

    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_out, fan_in) per layer, hidden layers then the output layer."""
        dims = []
        fan_in = self.input_dim
        for h in self.hidden_sizes:
            dims.append((h, fan_in))
            fan_in = h
        dims.append((self.n_outputs, fan_in))
        return dims

    def act_ids(self) -> np.ndarray:
        return np.array([ACTIVATIONS[a] for a in self.activations], dtype=np.int32)

    def tf_ids(self) -> np.ndarray:
        return np.array([TRANSFORMS[t] for t in self.transforms], dtype=np.int32)


@dataclass
class MlpParams:
    """Per-layer weight matrices (fan_out, fan_in) and bias vectors."""

    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self):
        """All parameter arrays, weights interleaved with biases, layer order."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def check_shapes(self, spec: MlpSpec) -> None:
        dims = spec.layer_dims()
        if len(self.weights) != len(dims) or len(self.biases) != len(dims):
            raise SpecError("parameter layer count does not match spec")
        for (w, b), (fo, fi) in zip(zip(self.weights, self.biases), dims):
            if w.shape != (fo, fi) or b.shape != (fo,):
                raise SpecError(f"parameter shape {w.shape}/{b.shape} does not match spec {(fo, fi)}")


def init_params(spec: MlpSpec, seed: int) -> MlpParams:
    """Glorot-uniform weights (+/- sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.default_rng(seed)
    params = MlpParams()
    for fan_out, fan_in in spec.layer_dims():
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params.weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        params.biases.append(np.zeros(fan_out))
    return params


def forward(params: MlpParams, spec: MlpSpec, z: np.ndarray):
    """Evaluate the network on a batch.

    Parameters
    ----------
    z : (N, input_dim) or (input_dim,) characteristics.

    Returns
    -------
    out : (N, n_outputs) taste coefficients (or (n_outputs,) for 1-d input).
    cache : opaque object to hand to :func:`backward`.
    """
    single = z.ndim == 1
    z2 = np.ascontiguousarray(np.atleast_2d(z), dtype=np.float64)
    out, cache = backend.kernels.mlp_forward(
        z2, params.weights, params.biases, spec.act_ids(), spec.tf_ids()
    )
    return (out[0] if single else out), cache


def backward(params: MlpParams, spec: MlpSpec, cache, d_out: np.ndarray):
    """Exact gradients for a cached forward pass.

    Returns (grads, d_z): ``grads`` is an MlpParams-shaped container of
    parameter gradients summed over the batch; ``d_z`` is the gradient with
    respect to the inputs. Rectifier subgradient at 0 is 0.
    """
    d_out2 = np.ascontiguousarray(np.atleast_2d(d_out), dtype=np.float64)
    if d_out2.shape[1] != spec.n_outputs:
        raise SpecError("upstream gradient width does not match the output count")
    d_w, d_b, d_z = backend.kernels.mlp_backward(
        params.weights, cache, spec.act_ids(), spec.tf_ids(), d_out2
    )
    return MlpParams(d_w, d_b), d_z


def hidden_activations(params: MlpParams, spec: MlpSpec, z: np.ndarray) -> np.ndarray:
    """Last hidden layer's activation values, (N, H). Requires >= 1 hidden layer."""
    if spec.n_hidden_layers == 0:
        raise SpecError("network has no hidden layer")
    _, (posts, _, _) = forward(params, spec, np.atleast_2d(z))
    return posts[-1]


def spec_to_dict(spec: MlpSpec) -> dict:
    return {
        "input_dim": spec.input_dim,
        "hidden_sizes": list(spec.hidden_sizes),
        "activations": list(spec.activations),
        "transforms": list(spec.transforms),
    }


def spec_from_dict(d: dict) -> MlpSpec:
    return MlpSpec(
        input_dim=int(d["input_dim"]),
        hidden_sizes=tuple(d["hidden_sizes"]),
        activations=tuple(d["activations"]),
        transforms=tuple(d["transforms"]),
    )


def params_to_dict(params: MlpParams) -> dict:
    """JSON-ready dict: row-major weight arrays plus a format tag."""
    return {
        "format": PARAMS_FORMAT,
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }


def params_from_dict(d: dict) -> MlpParams:
    if d.get("format") != PARAMS_FORMAT:
        raise SpecError(f"unsupported parameter format {d.get('format')!r}")
    return MlpParams(
        [np.asarray(w, dtype=np.float64) for w in d["weights"]],
        [np.asarray(b, dtype=np.float64) for b in d["biases"]],
    )


def save_params(params: MlpParams, spec: MlpSpec, path) -> None:
    doc = {"spec": spec_to_dict(spec), "params": params_to_dict(params)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def load_params(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return params_from_dict(doc["params"]), spec_from_dict(doc["spec"])
