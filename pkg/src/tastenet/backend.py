"""Kernel backend selection.

The hot numeric kernels (batched MLP forward/backward, masked softmax and
its loss gradient) exist twice: a compiled Cython extension
(``tastenet._kernels``) and a pure-numpy module (``tastenet._kernels_py``).
The compiled one is preferred when importable; set ``TASTENET_KERNELS`` to
``python`` or ``compiled`` to force a choice (``compiled`` raises if the
extension was never built).

Both backends are deterministic. Results agree to floating-point noise
(~1e-13 relative) but are not bit-identical across backends because matrix
products accumulate in different orders; bit-level reproducibility holds
within one backend.
"""
import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def _select():
    choice = os.environ.get("TASTENET_KERNELS", "auto").strip().lower()
    if choice in ("", "auto"):
        return _compiled if _compiled is not None else _kernels_py
    if choice in ("compiled", "cython", "c"):
        if _compiled is None:
            raise ImportError(
                "TASTENET_KERNELS=compiled but tastenet._kernels is not built; "
                "run 'python setup.py build_ext --inplace'"
            )
        return _compiled
    if choice in ("python", "numpy", "py"):
        return _kernels_py
    raise ValueError(f"unrecognized TASTENET_KERNELS value: {choice!r}")


kernels = _select()

ACT_RELU = _kernels_py.ACT_RELU
ACT_TANH = _kernels_py.ACT_TANH
TF_IDENTITY = _kernels_py.TF_IDENTITY
TF_NEG_RELU = _kernels_py.TF_NEG_RELU
TF_NEG_EXP = _kernels_py.TF_NEG_EXP
TF_RELU = _kernels_py.TF_RELU
TF_EXP = _kernels_py.TF_EXP


def name():
    """Name of the active backend: 'compiled' or 'python'."""
    return "compiled" if kernels is _compiled else "python"


def available_backends():
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out
