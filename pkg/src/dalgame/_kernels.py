"""Compiled trajectory loop for affine fields ``v(w) = M w + c``.

This mirrors ``integrators.run_trajectory`` step for step; the generic path
in that module (numpy matrix-vector products) is the fallback used when
numba is disabled.
"""

import numpy as np

from ._accel import njit

EULER, NESTEROV, ADAM, RK2, RK4, EG, CO = range(7)
METHOD_CODES = {
    "euler": EULER, "nesterov": NESTEROV, "adam": ADAM, "rk2": RK2,
    "rk4": RK4, "eg": EG, "co": CO,
}
# terminal status codes
CONVERGED, MAX_ITERS, DIVERGED = 0, 1, 2


@njit
def _field(M, c, w, out):
    d = w.shape[0]
    for i in range(d):
        acc = c[i]
        for j in range(d):
            acc += M[i, j] * w[j]
        out[i] = acc


@njit
def _field_t(M, u, out):
    d = u.shape[0]
    for j in range(d):
        acc = 0.0
        for i in range(d):
            acc += M[i, j] * u[i]
        out[j] = acc


@njit
def _norm2(x):
    acc = 0.0
    for i in range(x.shape[0]):
        acc += x[i] * x[i]
    return np.sqrt(acc)


@njit
def _diverged(w, gn, threshold):
    if not np.isfinite(gn):
        return True
    for i in range(w.shape[0]):
        if not np.isfinite(w[i]) or abs(w[i]) > threshold:
            return True
    return False


@njit
def run_affine(M, c, w0, method, eta, p1, p2, p3, max_iters, stop_grad_norm,
               divergence_threshold, record_every):
    """Run one trajectory of the given method on ``v(w) = M w + c``.

    Method parameters: rk2 ``p1 = rk_alpha``; nesterov ``p1 = mu``; adam
    ``p1, p2, p3 = beta1, beta2, eps``; co ``p1 = gamma``.

    Returns ``(rec_iters, rec_w, rec_gn, n_rec, status, n_evals)``.
    """
    d = w0.shape[0]
    cap = max_iters // record_every + 2
    rec_iters = np.empty(cap, dtype=np.int64)
    rec_w = np.empty((cap, d))
    rec_gn = np.empty(cap)
    n_rec = 0

    w = w0.copy()
    v = np.empty(d)
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    tmp = np.empty(d)
    buf = np.zeros(d)
    m = np.zeros(d)
    s = np.zeros(d)
    n_evals = 0
    status = MAX_ITERS

    for it in range(max_iters + 1):
        _field(M, c, w, v)
        n_evals += 1
        gn = _norm2(v)
        stop = False
        if _diverged(w, gn, divergence_threshold):
            status = DIVERGED
            stop = True
        elif gn <= stop_grad_norm:
            status = CONVERGED
            stop = True
        elif it == max_iters:
            status = MAX_ITERS
            stop = True
        if stop or it % record_every == 0:
            rec_iters[n_rec] = it
            rec_w[n_rec, :] = w
            rec_gn[n_rec] = gn
            n_rec += 1
        if stop:
            break

        if method == EULER:
            for i in range(d):
                w[i] -= eta * v[i]
        elif method == RK2:
            a = p1
            for i in range(d):
                tmp[i] = w[i] - (eta / (2.0 * a)) * v[i]
            _field(M, c, tmp, k2)
            n_evals += 1
            for i in range(d):
                w[i] -= eta * ((1.0 - a) * v[i] + a * k2[i])
        elif method == RK4:
            for i in range(d):
                tmp[i] = w[i] - 0.5 * eta * v[i]
            _field(M, c, tmp, k1)
            for i in range(d):
                tmp[i] = w[i] - 0.5 * eta * k1[i]
            _field(M, c, tmp, k2)
            for i in range(d):
                tmp[i] = w[i] - eta * k2[i]
            _field(M, c, tmp, k3)
            n_evals += 3
            for i in range(d):
                w[i] -= (eta / 6.0) * (v[i] + 2.0 * k1[i] + 2.0 * k2[i] + k3[i])
        elif method == EG:
            for i in range(d):
                tmp[i] = w[i] - eta * v[i]
            _field(M, c, tmp, k1)
            n_evals += 1
            for i in range(d):
                w[i] -= eta * k1[i]
        elif method == CO:
            _field_t(M, v, k1)
            n_evals += 1
            for i in range(d):
                w[i] -= eta * v[i] + p1 * k1[i]
        elif method == NESTEROV:
            mu = p1
            for i in range(d):
                tmp[i] = w[i] + mu * buf[i]
            _field(M, c, tmp, k1)
            n_evals += 1
            for i in range(d):
                buf[i] = mu * buf[i] - eta * k1[i]
                w[i] += buf[i]
        elif method == ADAM:
            b1, b2, eps = p1, p2, p3
            t = it + 1
            c1 = 1.0 - b1 ** t
            c2 = 1.0 - b2 ** t
            for i in range(d):
                m[i] = b1 * m[i] + (1.0 - b1) * v[i]
                s[i] = b2 * s[i] + (1.0 - b2) * v[i] * v[i]
                w[i] -= eta * (m[i] / c1) / (np.sqrt(s[i] / c2) + eps)

    return rec_iters, rec_w, rec_gn, n_rec, status, n_evals
