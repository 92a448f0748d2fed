"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the three hot paths (MLP forward, MLP backward, masked softmax + loss
gradient) at training-typical batch shapes, then a full training epoch of
the reference synthetic experiment through each backend.

Run from the repository root:

    python benchmarks/bench_kernels.py
"""
import os
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from tastenet import backend

REPEAT = 2000


def bench(fn, repeat=REPEAT):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat * 1e6  # microseconds


def kernel_rows(kernels, batch=64, d=3, hidden=7, k=1, n_alts=2):
    rng = np.random.default_rng(0)
    z = rng.standard_normal((batch, d))
    ws = [rng.standard_normal((hidden, d)), rng.standard_normal((k, hidden))]
    bs = [rng.standard_normal(hidden), rng.standard_normal(k)]
    acts = np.array([0], dtype=np.int32)
    tfs = np.array([1] * k, dtype=np.int32)
    out, cache = kernels.mlp_forward(z, ws, bs, acts, tfs)
    d_out = rng.standard_normal(out.shape)
    v = rng.standard_normal((batch, n_alts)) * 3
    avail = np.ones((batch, n_alts), dtype=np.uint8)
    chosen = rng.integers(0, n_alts, batch).astype(np.int64)
    p = kernels.masked_softmax(v, avail)
    return [
        ("mlp_forward", bench(lambda: kernels.mlp_forward(z, ws, bs, acts, tfs))),
        ("mlp_backward", bench(lambda: kernels.mlp_backward(ws, cache, acts, tfs, d_out))),
        ("masked_softmax", bench(lambda: kernels.masked_softmax(v, avail))),
        ("nll_grad", bench(lambda: kernels.nll_grad(p, chosen, 1.0 / batch))),
    ]


def epoch_seconds():
    import tastenet as tn
    from tastenet import synthetic as syn

    tr, dv, _ = tn.generate_dataset(tn.GenConfig(n_train=10000, n_dev=2000, n_test=10))
    net = tn.MlpSpec(input_dim=3, hidden_sizes=(7,), activations=("relu",),
                     transforms=("neg_relu",))
    cfg = tn.TrainConfig(seed=1, restarts=1, max_epochs=3, patience=3,
                         reg_norm=2, reg_strength=0.001)
    t0 = time.perf_counter()
    tn.train(tn.ModelSpec(syn.utility_tastenet(), net), tr, dv, cfg)
    return (time.perf_counter() - t0) / 3


def main():
    backends = backend.available_backends()
    print(f"active backend: {backend.name()}  (available: {', '.join(backends)})\n")
    results = {name: dict(kernel_rows(mod)) for name, mod in backends.items()}
    names = list(next(iter(results.values())))
    header = f"{'kernel (batch=64, H=7)':<24}" + "".join(f"{b + ' (us)':>16}" for b in results)
    if len(results) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for k in names:
        row = f"{k:<24}" + "".join(f"{results[b][k]:>16.1f}" for b in results)
        if len(results) == 2:
            row += f"{results['python'][k] / results['compiled'][k]:>9.1f}x"
        print(row)

    print(f"\nfull training epoch (10k observations), {backend.name()} backend: "
          f"{epoch_seconds():.3f}s")
    if backend.name() == "compiled" and "TASTENET_KERNELS" not in os.environ:
        print("rerun with TASTENET_KERNELS=python for the fallback epoch time")


if __name__ == "__main__":
    main()
