"""Pure-numpy kernels: batched MLP forward/backward and masked softmax loss.

This module is the reference implementation and the fallback backend when
the compiled extension (``tastenet._kernels``) is not built. Both modules
expose the same functions with the same semantics; ``tastenet.backend``
picks one at import time.

Conventions
-----------
* float64 everywhere; arrays C-contiguous.
* ``weights[l]`` has shape (fan_out, fan_in); ``biases[l]`` shape (fan_out,).
* Hidden activations: 0 = rectifier, 1 = hyperbolic tangent.
* Output transforms per output index: 0 identity, 1 nonpositive rectifier
  -relu(-r), 2 negative exponential -exp(-r), 3 nonnegative rectifier,
  4 exponential.
* Rectifier subgradient at exactly 0 is 0.
"""
import numpy as np

ACT_RELU = 0
ACT_TANH = 1

TF_IDENTITY = 0
TF_NEG_RELU = 1
TF_NEG_EXP = 2
TF_RELU = 3
TF_EXP = 4

LOG_FLOOR = 1e-300


def _activate(pre, act_id):
    if act_id == ACT_RELU:
        return np.maximum(pre, 0.0)
    return np.tanh(pre)


def mlp_forward(z, weights, biases, act_ids, tf_ids):
    """Batched forward pass.

    Parameters
    ----------
    z : (N, D) inputs.
    weights, biases : per-layer parameter lists (hidden layers then output).
    act_ids : activation code per hidden layer, length L.
    tf_ids : transform code per output, length K.

    Returns
    -------
    out : (N, K) transformed outputs.
    cache : (posts, pres, raw) sufficient for :func:`mlp_backward`.
    """
    posts = [z]
    pres = []
    a = z
    n_hidden = len(weights) - 1
    for layer in range(n_hidden):
        pre = a @ weights[layer].T + biases[layer]
        a = _activate(pre, act_ids[layer])
        pres.append(pre)
        posts.append(a)
    raw = a @ weights[-1].T + biases[-1]
    out = np.empty_like(raw)
    for k, tf in enumerate(tf_ids):
        r = raw[:, k]
        if tf == TF_IDENTITY:
            out[:, k] = r
        elif tf == TF_NEG_RELU:
            out[:, k] = np.minimum(r, 0.0)
        elif tf == TF_NEG_EXP:
            out[:, k] = -np.exp(-r)
        elif tf == TF_RELU:
            out[:, k] = np.maximum(r, 0.0)
        else:
            out[:, k] = np.exp(r)
    return out, (posts, pres, raw)


def mlp_backward(weights, cache, act_ids, tf_ids, d_out):
    """Backpropagate ``d_out`` (gradient w.r.t. transformed outputs).

    Returns (d_weights, d_biases, d_z) with exact analytic gradients.
    """
    posts, pres, raw = cache
    d_raw = np.empty_like(raw)
    for k, tf in enumerate(tf_ids):
        r = raw[:, k]
        g = d_out[:, k]
        if tf == TF_IDENTITY:
            d_raw[:, k] = g
        elif tf == TF_NEG_RELU:
            d_raw[:, k] = np.where(r < 0.0, g, 0.0)
        elif tf == TF_NEG_EXP:
            d_raw[:, k] = g * np.exp(-r)
        elif tf == TF_RELU:
            d_raw[:, k] = np.where(r > 0.0, g, 0.0)
        else:
            d_raw[:, k] = g * np.exp(r)

    d_weights = [None] * len(weights)
    d_biases = [None] * len(weights)
    d_weights[-1] = d_raw.T @ posts[-1]
    d_biases[-1] = d_raw.sum(axis=0)
    d_a = d_raw @ weights[-1]
    for layer in range(len(weights) - 2, -1, -1):
        if act_ids[layer] == ACT_RELU:
            d_pre = np.where(pres[layer] > 0.0, d_a, 0.0)
        else:
            d_pre = d_a * (1.0 - np.tanh(pres[layer]) ** 2)
        d_weights[layer] = d_pre.T @ posts[layer]
        d_biases[layer] = d_pre.sum(axis=0)
        d_a = d_pre @ weights[layer]
    return d_weights, d_biases, d_a


def masked_softmax(v, avail):
    """Softmax over available alternatives only; exact 0 elsewhere.

    ``avail`` is a (N, J) uint8 mask with at least one 1 per row (a dataset
    invariant enforced upstream). Max-subtraction over the available set
    keeps the exponentials in range.
    """
    masked_v = np.where(avail != 0, v, -np.inf)
    m = masked_v.max(axis=1, keepdims=True)
    e = np.exp(masked_v - m)  # exp(-inf) == 0 exactly for unavailable entries
    return e / e.sum(axis=1, keepdims=True)


def nll_grad(p, chosen, scale):
    """Negative log-likelihood of the chosen alternatives and its V-gradient.

    Returns (nll_sum, d_v, n_clamped): ``nll_sum`` is the summed
    -log P(chosen) with the log argument floored at 1e-300 (``n_clamped``
    counts floored rows); ``d_v = scale * (P - onehot(chosen))``.
    """
    n = p.shape[0]
    rows = np.arange(n)
    p_chosen = p[rows, chosen]
    clamped = p_chosen < LOG_FLOOR
    nll_sum = -np.log(np.maximum(p_chosen, LOG_FLOOR)).sum()
    d_v = p * scale
    d_v[rows, chosen] -= scale
    return nll_sum, d_v, int(clamped.sum())
