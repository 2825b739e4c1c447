"""Compiled inner loops for recording and retrieval.

All dot products go through _dot, which uses a fixed four-way accumulator
order.  Recorders, their convergence checks, and the retrieval pre-activation
therefore produce bit-identical sums for the same weights and frames, which
lets margin properties be asserted with zero tolerance.  Kernels are compiled
nogil so independent trials can run on worker threads.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True, inline="always")
def _dot(w, a):
    m = w.shape[0]
    acc0 = 0.0
    acc1 = 0.0
    acc2 = 0.0
    acc3 = 0.0
    j = 0
    while j + 4 <= m:
        acc0 += w[j] * a[j]
        acc1 += w[j + 1] * a[j + 1]
        acc2 += w[j + 2] * a[j + 2]
        acc3 += w[j + 3] * a[j + 3]
        j += 4
    while j < m:
        acc0 += w[j] * a[j]
        j += 1
    return (acc0 + acc1) + (acc2 + acc3)


@njit(cache=True, nogil=True)
def preact(weights, conn, frame):
    """Pre-activation of every cell for one input frame."""
    n, m = weights.shape
    scratch = np.empty(m, dtype=np.float64)
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        for j in range(m):
            scratch[j] = frame[conn[i, j]]
        out[i] = _dot(weights[i], scratch)
    return out


@njit(cache=True, nogil=True)
def _gather_cell(frames, conn, i, a, y):
    """Fill one cell's transition inputs a[q] and targets y[q] (cyclic)."""
    q_count = frames.shape[0]
    m = conn.shape[1]
    for q in range(q_count):
        for j in range(m):
            a[q, j] = frames[q, conn[i, j]]
        y[q] = frames[(q + 1) % q_count, i]


@njit(cache=True, nogil=True)
def qp_row(a, y, margin, max_iters, tol, w, lam):
    """Min-norm weights under per-transition sign-margin constraints.

    Cyclic coordinate ascent on the dual variables lam: for each constraint,
    lam_q <- max(0, lam_q + (margin - y_q a_q.w)/M), with w maintained as
    sum_q lam_q y_q a_q (bipolar inputs make every ||a_q||^2 equal M).
    Stops once a full pass sees no violation above tol and no dual movement
    above tol; otherwise runs max_iters passes and leaves the best-effort
    iterate in w.  Returns (passes_used, residual_violation_count).
    """
    q_count, m = a.shape
    fm = float(m)
    passes = 0
    for _ in range(max_iters):
        passes += 1
        max_viol = 0.0
        max_move = 0.0
        for q in range(q_count):
            h = _dot(w, a[q])
            v = margin - y[q] * h
            if v > max_viol:
                max_viol = v
            lam_new = lam[q] + v / fm
            if lam_new < 0.0:
                lam_new = 0.0
            d = lam_new - lam[q]
            if d != 0.0:
                lam[q] = lam_new
                c = d * y[q]
                for j in range(m):
                    w[j] += c * a[q, j]
            move = abs(d) * fm
            if move > max_move:
                max_move = move
        if max_viol <= tol and max_move <= tol:
            break
    violations = 0
    for q in range(q_count):
        if y[q] * _dot(w, a[q]) < margin - tol:
            violations += 1
    return passes, violations


@njit(cache=True, nogil=True)
def agd_row(a, y, eta, max_epochs, eps_stop, w):
    """Delta-rule regression of each transition's pre-activation onto +-1.

    Sweeps transitions in order, updating w by -eta * error * input after
    each one.  Converged once a full sweep keeps every error below eps_stop
    and a no-update verification sweep confirms it.  Returns
    (epochs_used, converged).
    """
    q_count, m = a.shape
    epochs = 0
    for _ in range(max_epochs):
        epochs += 1
        max_err = 0.0
        for q in range(q_count):
            e = _dot(w, a[q]) - y[q]
            ae = abs(e)
            if ae > max_err:
                max_err = ae
            c = eta * e
            for j in range(m):
                w[j] -= c * a[q, j]
        if max_err < eps_stop:
            ok = True
            for q in range(q_count):
                if abs(_dot(w, a[q]) - y[q]) >= eps_stop:
                    ok = False
                    break
            if ok:
                return epochs, True
    return epochs, False


@njit(cache=True, nogil=True)
def agd_row_violations(a, y, eps_stop, w):
    q_count = a.shape[0]
    violations = 0
    for q in range(q_count):
        if abs(_dot(w, a[q]) - y[q]) >= eps_stop:
            violations += 1
    return violations


@njit(cache=True, nogil=True)
def dgd_row(a, y, eta, d_margin, max_epochs, w):
    """Perceptron-style training with a margin-shifted sign comparator.

    The prediction sgn(w.a_q - D*y_q) (sgn(0) = +1) is compared with the
    target; a mismatch moves w by 2*eta toward the target direction.  An
    epoch with no update means every transition satisfies y*(w.a) >= D, so
    that epoch doubles as the convergence proof.  Returns
    (epochs_used, converged).
    """
    q_count, m = a.shape
    epochs = 0
    for _ in range(max_epochs):
        epochs += 1
        updates = 0
        for q in range(q_count):
            h = _dot(w, a[q])
            arg = h - d_margin * y[q]
            s = 1.0 if arg >= 0.0 else -1.0
            e = s - y[q]
            if e != 0.0:
                updates += 1
                c = eta * e
                for j in range(m):
                    w[j] -= c * a[q, j]
        if updates == 0:
            return epochs, True
    return epochs, False


@njit(cache=True, nogil=True)
def dgd_row_violations(a, y, d_margin, w):
    q_count = a.shape[0]
    violations = 0
    for q in range(q_count):
        if y[q] * _dot(w, a[q]) < d_margin:
            violations += 1
    return violations


@njit(cache=True, nogil=True)
def qp_all(frames, conn, margin, max_iters, tol):
    n, m = conn.shape
    q_count = frames.shape[0]
    weights = np.zeros((n, m), dtype=np.float64)
    passes = np.zeros(n, dtype=np.int64)
    violations = np.zeros(n, dtype=np.int64)
    a = np.empty((q_count, m), dtype=np.float64)
    y = np.empty(q_count, dtype=np.float64)
    lam = np.empty(q_count, dtype=np.float64)
    for i in range(n):
        _gather_cell(frames, conn, i, a, y)
        lam[:] = 0.0
        p, v = qp_row(a, y, margin, max_iters, tol, weights[i], lam)
        passes[i] = p
        violations[i] = v
    return weights, passes, violations


@njit(cache=True, nogil=True)
def agd_all(frames, conn, eta, max_epochs, eps_stop):
    n, m = conn.shape
    q_count = frames.shape[0]
    weights = np.zeros((n, m), dtype=np.float64)
    epochs = np.zeros(n, dtype=np.int64)
    violations = np.zeros(n, dtype=np.int64)
    a = np.empty((q_count, m), dtype=np.float64)
    y = np.empty(q_count, dtype=np.float64)
    for i in range(n):
        _gather_cell(frames, conn, i, a, y)
        ep, ok = agd_row(a, y, eta, max_epochs, eps_stop, weights[i])
        epochs[i] = ep
        if not ok:
            violations[i] = agd_row_violations(a, y, eps_stop, weights[i])
    return weights, epochs, violations


@njit(cache=True, nogil=True)
def dgd_all(frames, conn, eta, d_margin, max_epochs):
    n, m = conn.shape
    q_count = frames.shape[0]
    weights = np.zeros((n, m), dtype=np.float64)
    epochs = np.zeros(n, dtype=np.int64)
    violations = np.zeros(n, dtype=np.int64)
    a = np.empty((q_count, m), dtype=np.float64)
    y = np.empty(q_count, dtype=np.float64)
    for i in range(n):
        _gather_cell(frames, conn, i, a, y)
        ep, ok = dgd_row(a, y, eta, d_margin, max_epochs, weights[i])
        epochs[i] = ep
        if not ok:
            violations[i] = dgd_row_violations(a, y, d_margin, weights[i])
    return weights, epochs, violations


def warm_up() -> None:
    """Compile every kernel on a tiny instance (results discarded)."""
    frames = np.array([[1, -1, 1, -1], [-1, 1, 1, -1]], dtype=np.int8)
    conn = np.array([[1, 2], [0, 3], [3, 0], [2, 1]], dtype=np.int32)
    preact(np.zeros((4, 2)), conn, frames[0])
    qp_all(frames, conn, 1.0, 3, 1e-8)
    agd_all(frames, conn, 1e-3, 3, 0.1)
    dgd_all(frames, conn, 0.01, 1.0, 3)
