# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: batched MLP forward/backward and masked softmax loss.

Same contract as tastenet._kernels_py (the reference implementation); see
that module's docstring for conventions. Plain C loops, no BLAS, so the
reduction order is fixed and results are reproducible run to run.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, tanh

cnp.import_array()

ACT_RELU = 0
ACT_TANH = 1

TF_IDENTITY = 0
TF_NEG_RELU = 1
TF_NEG_EXP = 2
TF_RELU = 3
TF_EXP = 4

LOG_FLOOR = 1e-300


cdef void _dense(const double[:, ::1] a, const double[:, ::1] w, const double[::1] b,
                 double[:, ::1] out) noexcept nogil:
    # out = a @ w.T + b ; w is (fan_out, fan_in)
    cdef Py_ssize_t n = a.shape[0], fin = a.shape[1], fout = w.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(n):
        for j in range(fout):
            acc = b[j]
            for k in range(fin):
                acc += a[i, k] * w[j, k]
            out[i, j] = acc


def mlp_forward(z, weights, biases, act_ids, tf_ids):
    """Batched forward pass; returns (out, cache). See reference backend."""
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t n_hidden = len(weights) - 1
    cdef Py_ssize_t layer, i, j, k
    cdef int act, tf
    cdef double r

    posts = [np.ascontiguousarray(z, dtype=np.float64)]
    pres = []
    cdef const double[:, ::1] pre_src
    cdef double[:, ::1] a_mv, pre_mv
    a = posts[0]
    for layer in range(n_hidden):
        w = weights[layer]
        b = biases[layer]
        pre = np.empty((n, w.shape[0]), dtype=np.float64)
        _dense(a, w, b, pre)
        act = act_ids[layer]
        post = np.empty_like(pre)
        pre_mv = pre
        a_mv = post
        if act == ACT_RELU:
            for i in range(n):
                for j in range(pre_mv.shape[1]):
                    a_mv[i, j] = pre_mv[i, j] if pre_mv[i, j] > 0.0 else 0.0
        else:
            for i in range(n):
                for j in range(pre_mv.shape[1]):
                    a_mv[i, j] = tanh(pre_mv[i, j])
        pres.append(pre)
        posts.append(post)
        a = post

    w = weights[n_hidden]
    b = biases[n_hidden]
    raw = np.empty((n, w.shape[0]), dtype=np.float64)
    _dense(a, w, b, raw)
    out = np.empty_like(raw)
    cdef const double[:, ::1] raw_mv = raw
    cdef double[:, ::1] out_mv = out
    for k in range(raw_mv.shape[1]):
        tf = tf_ids[k]
        for i in range(n):
            r = raw_mv[i, k]
            if tf == TF_IDENTITY:
                out_mv[i, k] = r
            elif tf == TF_NEG_RELU:
                out_mv[i, k] = r if r < 0.0 else 0.0
            elif tf == TF_NEG_EXP:
                out_mv[i, k] = -exp(-r)
            elif tf == TF_RELU:
                out_mv[i, k] = r if r > 0.0 else 0.0
            else:
                out_mv[i, k] = exp(r)
    return out, (posts, pres, raw)


def mlp_backward(weights, cache, act_ids, tf_ids, d_out):
    """Backpropagate d_out; returns (d_weights, d_biases, d_z)."""
    posts, pres, raw = cache
    cdef Py_ssize_t n = raw.shape[0]
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t layer, i, j, k
    cdef int act, tf
    cdef double r, g

    d_raw = np.empty_like(raw)
    cdef const double[:, ::1] raw_mv = raw
    cdef const double[:, ::1] dout_mv = np.ascontiguousarray(d_out, dtype=np.float64)
    cdef double[:, ::1] draw_mv = d_raw
    for k in range(raw_mv.shape[1]):
        tf = tf_ids[k]
        for i in range(n):
            r = raw_mv[i, k]
            g = dout_mv[i, k]
            if tf == TF_IDENTITY:
                draw_mv[i, k] = g
            elif tf == TF_NEG_RELU:
                draw_mv[i, k] = g if r < 0.0 else 0.0
            elif tf == TF_NEG_EXP:
                draw_mv[i, k] = g * exp(-r)
            elif tf == TF_RELU:
                draw_mv[i, k] = g if r > 0.0 else 0.0
            else:
                draw_mv[i, k] = g * exp(r)

    d_weights = [None] * n_layers
    d_biases = [None] * n_layers

    cdef double[:, ::1] d_up
    cdef const double[:, ::1] post_mv, w_mv, pre_mv2
    cdef double[:, ::1] dw_mv, da_mv
    cdef double[::1] db_mv
    cdef double acc
    d_up_arr = d_raw
    for layer in range(n_layers - 1, -1, -1):
        w = weights[layer]
        post = posts[layer]
        dw = np.empty_like(w)
        db = np.empty(w.shape[0], dtype=np.float64)
        post_mv = post
        w_mv = w
        dw_mv = dw
        db_mv = db
        d_up = d_up_arr
        # dw = d_up.T @ post ; db = d_up.sum(0)
        for j in range(w_mv.shape[0]):
            acc = 0.0
            for i in range(n):
                acc += d_up[i, j]
            db_mv[j] = acc
            for k in range(w_mv.shape[1]):
                acc = 0.0
                for i in range(n):
                    acc += d_up[i, j] * post_mv[i, k]
                dw_mv[j, k] = acc
        d_weights[layer] = dw
        d_biases[layer] = db
        # downstream gradient d_a = d_up @ w, through the activation if hidden
        da = np.zeros((n, w.shape[1]), dtype=np.float64)
        da_mv = da
        for i in range(n):
            for j in range(w_mv.shape[0]):
                g = d_up[i, j]
                if g != 0.0:
                    for k in range(w_mv.shape[1]):
                        da_mv[i, k] += g * w_mv[j, k]
        if layer > 0:
            act = act_ids[layer - 1]
            pre_mv2 = pres[layer - 1]
            if act == ACT_RELU:
                for i in range(n):
                    for k in range(da_mv.shape[1]):
                        if pre_mv2[i, k] <= 0.0:
                            da_mv[i, k] = 0.0
            else:
                for i in range(n):
                    for k in range(da_mv.shape[1]):
                        g = tanh(pre_mv2[i, k])
                        da_mv[i, k] *= 1.0 - g * g
        d_up_arr = da
    return d_weights, d_biases, d_up_arr


def masked_softmax(v, avail):
    """Softmax over available alternatives; exact 0 where unavailable."""
    cdef const double[:, ::1] v_mv = np.ascontiguousarray(v, dtype=np.float64)
    cdef const cnp.uint8_t[:, ::1] a_mv = np.ascontiguousarray(avail, dtype=np.uint8)
    cdef Py_ssize_t n = v_mv.shape[0], nj = v_mv.shape[1]
    cdef Py_ssize_t i, j
    cdef double m, s
    p = np.empty((n, nj), dtype=np.float64)
    cdef double[:, ::1] p_mv = p
    for i in range(n):
        m = -1e308
        for j in range(nj):
            if a_mv[i, j] and v_mv[i, j] > m:
                m = v_mv[i, j]
        s = 0.0
        for j in range(nj):
            if a_mv[i, j]:
                p_mv[i, j] = exp(v_mv[i, j] - m)
                s += p_mv[i, j]
            else:
                p_mv[i, j] = 0.0
        for j in range(nj):
            p_mv[i, j] /= s
    return p


def nll_grad(p, chosen, scale):
    """Summed -log P(chosen) (floored at 1e-300) and scale*(P - onehot)."""
    cdef const double[:, ::1] p_mv = np.ascontiguousarray(p, dtype=np.float64)
    cdef const cnp.int64_t[::1] y_mv = np.ascontiguousarray(chosen, dtype=np.int64)
    cdef Py_ssize_t n = p_mv.shape[0], nj = p_mv.shape[1]
    cdef Py_ssize_t i, j
    cdef double s = scale, pc
    cdef double nll = 0.0
    cdef int n_clamped = 0
    dv = np.empty((n, nj), dtype=np.float64)
    cdef double[:, ::1] dv_mv = dv
    for i in range(n):
        pc = p_mv[i, y_mv[i]]
        if pc < LOG_FLOOR:
            pc = LOG_FLOOR
            n_clamped += 1
        nll -= log(pc)
        for j in range(nj):
            dv_mv[i, j] = p_mv[i, j] * s
        dv_mv[i, y_mv[i]] -= s
    return nll, dv, n_clamped
