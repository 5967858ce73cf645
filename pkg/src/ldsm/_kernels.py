"""Hot inner-loop kernels, numba-compiled when available.

Each kernel exists twice: a ``*_nb`` variant compiled with ``numba.njit`` and a
``*_py`` variant written against plain numpy. The public names bind to the
numba variants unless numba is missing or ``LDSM_NO_NUMBA=1`` is set, in which
case the numpy fallbacks are used. ``benchmarks/bench_kernels.py`` times one
backend against the other.
"""

from __future__ import annotations

import math
import os

import numpy as np

NUMBA_DISABLED = os.environ.get("LDSM_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


# ---------------------------------------------------------------------------
# state recurrence: buf holds noise on entry and the generated states on exit


def rollout_steps_py(a, x, buf):
    for k in range(buf.shape[0]):
        np.add(a @ x, buf[k], out=buf[k])
        x[:] = buf[k]


def _rollout_steps(a, x, buf):
    n = a.shape[0]
    tmp = np.empty(n)
    for k in range(buf.shape[0]):
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += a[i, j] * x[j]
            tmp[i] = acc + buf[k, i]
        for i in range(n):
            x[i] = tmp[i]
            buf[k, i] = tmp[i]


# ---------------------------------------------------------------------------
# cyclic Jacobi eigensolver; a is overwritten, v accumulates rotations


def jacobi_eigh_py(a, v, off_tol, max_sweeps):
    n = a.shape[0]
    for sweep in range(max_sweeps):
        off = math.sqrt(max((a * a).sum() - (np.diagonal(a) ** 2).sum(), 0.0))
        if off <= off_tol:
            return sweep
        skip = off_tol / (2.0 * n)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < skip:
                    continue
                phi = 0.5 * math.atan2(2.0 * apq, a[q, q] - a[p, p])
                c = math.cos(phi)
                s = math.sin(phi)
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return -1


def _jacobi_eigh(a, v, off_tol, max_sweeps):
    n = a.shape[0]
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        off = math.sqrt(2.0 * off)
        if off <= off_tol:
            return sweep
        skip = off_tol / (2.0 * n)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < skip:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                phi = 0.5 * math.atan2(2.0 * apq, aqq - app)
                c = math.cos(phi)
                s = math.sin(phi)
                a[p, p] = c * c * app + s * s * aqq - 2.0 * s * c * apq
                a[q, q] = s * s * app + c * c * aqq + 2.0 * s * c * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    if i == p or i == q:
                        continue
                    aip = a[i, p]
                    aiq = a[i, q]
                    a[i, p] = c * aip - s * aiq
                    a[p, i] = a[i, p]
                    a[i, q] = s * aip + c * aiq
                    a[q, i] = a[i, q]
                for i in range(n):
                    vip = v[i, p]
                    viq = v[i, q]
                    v[i, p] = c * vip - s * viq
                    v[i, q] = s * vip + c * viq
    return -1


# ---------------------------------------------------------------------------
# Cholesky factorization; returns the failing pivot index or -1 on success


def cholesky_py(a, lower, pivot_tol):
    n = a.shape[0]
    for j in range(n):
        d = a[j, j] - lower[j, :j] @ lower[j, :j]
        if not np.isfinite(d) or d <= pivot_tol:
            return j
        d = math.sqrt(d)
        lower[j, j] = d
        if j + 1 < n:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / d
    return -1


def _cholesky(a, lower, pivot_tol):
    n = a.shape[0]
    for j in range(n):
        acc = a[j, j]
        for k in range(j):
            acc -= lower[j, k] * lower[j, k]
        if not np.isfinite(acc) or acc <= pivot_tol:
            return j
        d = math.sqrt(acc)
        lower[j, j] = d
        for i in range(j + 1, n):
            acc2 = a[i, j]
            for k in range(j):
                acc2 -= lower[i, k] * lower[j, k]
            lower[i, j] = acc2 / d
    return -1


# ---------------------------------------------------------------------------
# lasso coordinate descent restricted to an active coordinate set
#
# G must be symmetric (rows double as columns for cache-friendly access).
# Solves, over the coordinates listed in idx with the rest pinned at zero,
#   min_w  (y_sq - 2 w.target + w.G w) / (2 n_samples) + lam * |w|_1
# qa[t] must equal sum_u G[idx[t], idx[u]] w[idx[u]] on entry and is kept
# consistent. The penalized objective after each full sweep is written to
# obj_out. Returns the sweep count used; the count comes back negated when
# further sweeping cannot help: either no coordinate moved beyond machine
# precision, or the objective has stopped improving at float resolution.


def cd_active_py(gram, target, lam_n, w, idx, qa, max_sweeps, tol_dw, y_sq, inv_2n, lam, obj_out):
    size = idx.shape[0]
    if size == 0:
        return 0
    plateau = 0
    for sweep in range(max_sweeps):
        max_dw = 0.0
        w_max = 0.0
        for t in range(size):
            j = idx[t]
            gjj = gram[j, j]
            if gjj <= 0.0:
                w[j] = 0.0
                continue
            z = target[j] - qa[t] + gjj * w[j]
            if z > lam_n:
                wn = (z - lam_n) / gjj
            elif z < -lam_n:
                wn = (z + lam_n) / gjj
            else:
                wn = 0.0
            d = wn - w[j]
            if d != 0.0:
                qa += d * gram[j, idx]
                w[j] = wn
            max_dw = max(max_dw, abs(d))
            w_max = max(w_max, abs(wn))
        wa = w[idx]
        obj_out[sweep] = inv_2n * (y_sq - 2.0 * (wa @ target[idx]) + wa @ qa) + lam * np.abs(wa).sum()
        scale = w_max if w_max > 0.0 else 1.0
        if max_dw <= 8e-16 * scale:
            return -(sweep + 1)
        if sweep > 0 and abs(obj_out[sweep] - obj_out[sweep - 1]) <= 4e-16 * (abs(obj_out[sweep]) + 1e-300):
            plateau += 1
            if plateau >= 2:
                return -(sweep + 1)
        else:
            plateau = 0
        if max_dw <= tol_dw * scale:
            return sweep + 1
    return max_sweeps


def _cd_active(gram, target, lam_n, w, idx, qa, max_sweeps, tol_dw, y_sq, inv_2n, lam, obj_out):
    size = idx.shape[0]
    if size == 0:
        return 0
    plateau = 0
    for sweep in range(max_sweeps):
        max_dw = 0.0
        w_max = 0.0
        for t in range(size):
            j = idx[t]
            gjj = gram[j, j]
            if gjj <= 0.0:
                w[j] = 0.0
                continue
            z = target[j] - qa[t] + gjj * w[j]
            if z > lam_n:
                wn = (z - lam_n) / gjj
            elif z < -lam_n:
                wn = (z + lam_n) / gjj
            else:
                wn = 0.0
            d = wn - w[j]
            if d != 0.0:
                for u in range(size):
                    qa[u] += d * gram[j, idx[u]]
                w[j] = wn
            ad = abs(d)
            if ad > max_dw:
                max_dw = ad
            aw = abs(wn)
            if aw > w_max:
                w_max = aw
        quad = 0.0
        lin = 0.0
        l1 = 0.0
        for t in range(size):
            j = idx[t]
            quad += w[j] * qa[t]
            lin += w[j] * target[j]
            l1 += abs(w[j])
        obj_out[sweep] = inv_2n * (y_sq - 2.0 * lin + quad) + lam * l1
        scale = w_max if w_max > 0.0 else 1.0
        if max_dw <= 8e-16 * scale:
            return -(sweep + 1)
        if sweep > 0 and abs(obj_out[sweep] - obj_out[sweep - 1]) <= 4e-16 * (abs(obj_out[sweep]) + 1e-300):
            plateau += 1
            if plateau >= 2:
                return -(sweep + 1)
        else:
            plateau = 0
        if max_dw <= tol_dw * scale:
            return sweep + 1
    return max_sweeps


if HAVE_NUMBA:
    rollout_steps_nb = numba.njit(cache=True, fastmath=True)(_rollout_steps)
    jacobi_eigh_nb = numba.njit(cache=True)(_jacobi_eigh)
    cholesky_nb = numba.njit(cache=True)(_cholesky)
    cd_active_nb = numba.njit(cache=True)(_cd_active)
else:  # pragma: no cover
    rollout_steps_nb = None
    jacobi_eigh_nb = None
    cholesky_nb = None
    cd_active_nb = None

if USE_NUMBA:
    rollout_steps = rollout_steps_nb
    jacobi_eigh = jacobi_eigh_nb
    cholesky = cholesky_nb
    cd_active = cd_active_nb
else:
    rollout_steps = rollout_steps_py
    jacobi_eigh = jacobi_eigh_py
    cholesky = cholesky_py
    cd_active = cd_active_py
