"""Pure-Python SMO solver (fallback for the compiled ``_smo`` extension).

Solves  min 0.5 a'Qa - e'a  s.t.  y'a = 0, 0 <= a <= C  with Q = yy' * K.
Working pairs are picked by the maximal violating index plus second-order
gain for its partner. Arithmetic is ordered exactly as in ``_smo.pyx`` so the
two backends return identical iterates.
"""
import numpy as np

TAU = 1e-12


def smo_solve(K, y, C, tol, max_iter):
    """Return ``(alpha, grad, n_iter, converged)``."""
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = y.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    Kd = np.ascontiguousarray(np.diagonal(K))
    it = 0
    converged = False
    while True:
        v = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            break
        vu = np.where(up, v, -np.inf)
        i = int(np.argmax(vu))
        gmax = vu[i]
        gmin = np.min(np.where(low, v, np.inf))
        if gmax - gmin < tol:
            converged = True
            break
        if it >= max_iter:
            break
        b = gmax - v
        a = Kd[i] + Kd - 2.0 * K[i]
        a = np.where(a > 0, a, TAU)
        obj = -(b * b) / a
        cand = low & (b > 0)
        j = int(np.argmin(np.where(cand, obj, np.inf)))

        ai_old, aj_old = alpha[i], alpha[j]
        yi, yj = y[i], y[j]
        Qij = yi * yj * K[i, j]
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
        Qi = yi * y * K[i]
        Qj = yj * y * K[j]
        G += Qi * dai + Qj * daj
        it += 1
    return alpha, G, it, converged
