"""Pure-numpy kernels. Reference path, and the fallback when numba is off."""
import numpy as np

LS, HO, HD, QO, QD, SD = range(6)


def gradient(x):
    """Forward differences of an (h, w, c) image, zero on the last column/row.

    Output is (h, w, 2c) with channels interleaved as (dx_0, dy_0, dx_1, ...).
    """
    h, w, c = x.shape
    g = np.zeros((h, w, 2 * c))
    g[:, :-1, 0::2] = x[:, 1:, :] - x[:, :-1, :]
    g[:-1, :, 1::2] = x[1:, :, :] - x[:-1, :, :]
    return g


def gradient_adjoint(g):
    """Exact transpose of :func:`gradient` (negative divergence)."""
    h, w, c2 = g.shape
    gx = g[:, :, 0::2]
    gy = g[:, :, 1::2]
    out = np.zeros((h, w, c2 // 2))
    out[:, :-1, :] -= gx[:, :-1, :]
    out[:, 1:, :] += gx[:, :-1, :]
    out[:-1, :, :] -= gy[:-1, :, :]
    out[1:, :, :] += gy[:-1, :, :]
    return out


def ball_dual_update(z, gv, sigma, lam):
    nu = z + sigma * gv
    nrm = np.sqrt(np.einsum("ij,ij->i", nu, nu))
    z_new = nu * (lam / np.maximum(lam, nrm))[:, None]
    return z_new, nu, nrm


def psi_blocks(nu, nrm, lam, sigma, mask):
    scale = np.zeros_like(nrm)
    scale[mask] = (nrm[mask] - lam) / (sigma * nrm[mask])
    return nu * scale[:, None]


def prox_conj_blocks(code, z0, ref, mask, lam, sigma):
    rn = np.sqrt(np.einsum("ij,ij->i", ref, ref))
    live = mask & (rn > 0)
    e = np.zeros_like(ref)
    e[live] = ref[live] / rn[live, None]
    a = np.einsum("ij,ij->i", z0, e)
    if code == LS:
        res = np.zeros_like(z0)
    elif code == HO:
        res = z0 - a[:, None] * e
    elif code == HD:
        res = z0 - np.maximum(a, 0.0)[:, None] * e
    elif code == QO:
        s = lam / (lam + sigma * rn)
        res = s[:, None] * (z0 - a[:, None] * e)
    elif code == QD:
        s = lam / (lam + sigma * rn)
        res = s[:, None] * (z0 - np.maximum(a, 0.0)[:, None] * e)
    elif code == SD:
        w = z0 + lam * e
        wn = np.sqrt(np.einsum("ij,ij->i", w, w))
        res = lam * (w / np.maximum(lam, wn)[:, None] - e)
    else:
        raise ValueError(f"unknown penalty code {code}")
    return np.where(mask[:, None], res, z0)
