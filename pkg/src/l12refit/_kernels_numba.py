"""numba versions of the kernels in ``_kernels_numpy``; same signatures."""
import math

import numpy as np
from numba import njit

LS, HO, HD, QO, QD, SD = range(6)


@njit(cache=True)
def gradient(x):
    h, w, c = x.shape
    g = np.zeros((h, w, 2 * c))
    for i in range(h):
        for j in range(w):
            for k in range(c):
                if j + 1 < w:
                    g[i, j, 2 * k] = x[i, j + 1, k] - x[i, j, k]
                if i + 1 < h:
                    g[i, j, 2 * k + 1] = x[i + 1, j, k] - x[i, j, k]
    return g


@njit(cache=True)
def gradient_adjoint(g):
    h, w, c2 = g.shape
    c = c2 // 2
    out = np.zeros((h, w, c))
    for i in range(h):
        for j in range(w):
            for k in range(c):
                acc = 0.0
                if j + 1 < w:
                    acc -= g[i, j, 2 * k]
                if j > 0:
                    acc += g[i, j - 1, 2 * k]
                if i + 1 < h:
                    acc -= g[i, j, 2 * k + 1]
                if i > 0:
                    acc += g[i - 1, j, 2 * k + 1]
                out[i, j, k] = acc
    return out


@njit(cache=True)
def ball_dual_update(z, gv, sigma, lam):
    m, b = z.shape
    nu = np.empty((m, b))
    z_new = np.empty((m, b))
    nrm = np.empty(m)
    for i in range(m):
        s = 0.0
        for j in range(b):
            t = z[i, j] + sigma * gv[i, j]
            nu[i, j] = t
            s += t * t
        n = math.sqrt(s)
        nrm[i] = n
        f = lam / max(lam, n)
        for j in range(b):
            z_new[i, j] = nu[i, j] * f
    return z_new, nu, nrm


@njit(cache=True)
def psi_blocks(nu, nrm, lam, sigma, mask):
    m, b = nu.shape
    out = np.zeros((m, b))
    for i in range(m):
        if mask[i]:
            f = (nrm[i] - lam) / (sigma * nrm[i])
            for j in range(b):
                out[i, j] = f * nu[i, j]
    return out


@njit(cache=True)
def prox_conj_blocks(code, z0, ref, mask, lam, sigma):
    m, b = z0.shape
    out = z0.copy()
    e = np.empty(b)
    for i in range(m):
        if not mask[i]:
            continue
        rn = 0.0
        for j in range(b):
            rn += ref[i, j] * ref[i, j]
        rn = math.sqrt(rn)
        a = 0.0
        for j in range(b):
            e[j] = ref[i, j] / rn if rn > 0 else 0.0
            a += z0[i, j] * e[j]
        if code == LS:
            for j in range(b):
                out[i, j] = 0.0
        elif code == HO:
            for j in range(b):
                out[i, j] = z0[i, j] - a * e[j]
        elif code == HD:
            ap = max(a, 0.0)
            for j in range(b):
                out[i, j] = z0[i, j] - ap * e[j]
        elif code == QO:
            s = lam / (lam + sigma * rn)
            for j in range(b):
                out[i, j] = s * (z0[i, j] - a * e[j])
        elif code == QD:
            s = lam / (lam + sigma * rn)
            ap = max(a, 0.0)
            for j in range(b):
                out[i, j] = s * (z0[i, j] - ap * e[j])
        else:
            wn = 0.0
            for j in range(b):
                t = z0[i, j] + lam * e[j]
                wn += t * t
            f = lam / max(lam, math.sqrt(wn))
            for j in range(b):
                out[i, j] = f * (z0[i, j] + lam * e[j]) - lam * e[j]
    return out
