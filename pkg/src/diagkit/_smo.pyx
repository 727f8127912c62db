# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled SMO solver; mirrors ``_smo_py.smo_solve`` operation for operation."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

cdef double TAU = 1e-12


def smo_solve(K, y, double C, double tol, long max_iter):
    """Return ``(alpha, grad, n_iter, converged)``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] Ka = np.ascontiguousarray(K, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] ya = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = ya.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] alpha_a = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] G_a = -np.ones(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] Kd_a = np.ascontiguousarray(np.diagonal(Ka))
    cdef double[:, ::1] Km = Ka
    cdef double[::1] ym = ya
    cdef double[::1] alpha = alpha_a
    cdef double[::1] G = G_a
    cdef double[::1] Kd = Kd_a
    cdef long it = 0
    cdef bint converged = False
    cdef Py_ssize_t i, j, t
    cdef double v, gmax, gmin, b, a, obj, best
    cdef double ai_old, aj_old, ai, aj, yi, yj, Qij, quad, delta, diff, total, dai, daj
    cdef bint any_up, any_low, up, low

    with nogil:
        while True:
            any_up = False
            any_low = False
            gmax = -INFINITY
            gmin = INFINITY
            i = 0
            for t in range(n):
                v = -ym[t] * G[t]
                up = (ym[t] > 0 and alpha[t] < C) or (ym[t] < 0 and alpha[t] > 0)
                low = (ym[t] > 0 and alpha[t] > 0) or (ym[t] < 0 and alpha[t] < C)
                if up:
                    if not any_up or v > gmax:
                        gmax = v
                        i = t
                    any_up = True
                if low:
                    if v < gmin:
                        gmin = v
                    any_low = True
            if not any_up or not any_low:
                converged = True
                break
            if gmax - gmin < tol:
                converged = True
                break
            if it >= max_iter:
                break
            j = 0
            best = INFINITY
            for t in range(n):
                low = (ym[t] > 0 and alpha[t] > 0) or (ym[t] < 0 and alpha[t] < C)
                if not low:
                    continue
                v = -ym[t] * G[t]
                b = gmax - v
                if not b > 0:
                    continue
                a = Kd[i] + Kd[t] - 2.0 * Km[i, t]
                if not a > 0:
                    a = TAU
                obj = -(b * b) / a
                if obj < best:
                    best = obj
                    j = t

            ai_old = alpha[i]
            aj_old = alpha[j]
            yi = ym[i]
            yj = ym[j]
            Qij = yi * yj * Km[i, j]
            if yi != yj:
                quad = Kd[i] + Kd[j] + 2.0 * Qij
                if quad <= 0:
                    quad = TAU
                delta = (-G[i] - G[j]) / quad
                diff = ai_old - aj_old
                ai = ai_old + delta
                aj = aj_old + delta
                if diff > 0:
                    if aj < 0:
                        aj = 0.0
                        ai = diff
                else:
                    if ai < 0:
                        ai = 0.0
                        aj = -diff
                if diff > 0:
                    if ai > C:
                        ai = C
                        aj = C - diff
                else:
                    if aj > C:
                        aj = C
                        ai = C + diff
            else:
                quad = Kd[i] + Kd[j] - 2.0 * Qij
                if quad <= 0:
                    quad = TAU
                delta = (G[i] - G[j]) / quad
                total = ai_old + aj_old
                ai = ai_old - delta
                aj = aj_old + delta
                if total > C:
                    if ai > C:
                        ai = C
                        aj = total - C
                else:
                    if aj < 0:
                        aj = 0.0
                        ai = total
                if total > C:
                    if aj > C:
                        aj = C
                        ai = total - C
                else:
                    if ai < 0:
                        ai = 0.0
                        aj = total
            alpha[i] = ai
            alpha[j] = aj
            dai = ai - ai_old
            daj = aj - aj_old
            for t in range(n):
                G[t] += yi * ym[t] * Km[i, t] * dai + yj * ym[t] * Km[j, t] * daj
            it += 1

    return alpha_a, G_a, it, bool(converged)
