"""Refitting block penalties, their conjugates and conjugate proxes.

Every penalty ``phi(z, zhat)`` compares a refitted block ``z`` with a
reference block ``zhat`` (the biased solution's block). The solvers consume
``prox_{sigma phi*}`` in closed form; :func:`brute_force_prox` recomputes it
numerically through the Moreau decomposition and is only used for checking.

Kinds:

``ls``  no penalty (plain least squares on the co-support)
``ho``  hard orientation constraint
``hd``  hard direction constraint
``qo``  quadratic orientation penalty
``qd``  quadratic direction penalty
``sd``  soft direction penalty ``lam * ||z|| * (1 - cos(z, zhat))``
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import optimize

from . import kernels
from .blocks import SupportSet
from .errors import BudgetExceeded, DimensionMismatch, ZeroReference

# supported reference blocks below this norm are rejected
ZERO_REFERENCE = 1e-12
# relative slack used when testing set membership for indicator penalties
MEMBERSHIP_TOL = 1e-12


class Penalty(str, Enum):
    LS = "ls"
    HO = "ho"
    HD = "hd"
    QO = "qo"
    QD = "qd"
    SD = "sd"

    @property
    def code(self) -> int:
        return _CODES[self]

    @property
    def finite(self) -> bool:
        """True for penalties that never take the value +inf."""
        return self in (Penalty.LS, Penalty.QO, Penalty.QD, Penalty.SD)


_CODES = {Penalty.LS: kernels.LS, Penalty.HO: kernels.HO, Penalty.HD: kernels.HD,
          Penalty.QO: kernels.QO, Penalty.QD: kernels.QD, Penalty.SD: kernels.SD}


@dataclass(frozen=True)
class BlockPenalty:
    kind: Penalty
    lam: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Penalty(self.kind))
        if self.kind is not Penalty.LS and not self.lam > 0:
            raise ValueError(f"penalty weight must be positive, got {self.lam}")

    @classmethod
    def relaxed_hd(cls, gamma: float) -> "BlockPenalty":
        """Soft-direction penalty with a large weight, acting as a relaxed HD.

        Only supported blocks are penalized, unlike a Bregman term over all blocks.
        """
        return cls(Penalty.SD, gamma)

    def value(self, z, zhat) -> float:
        return penalty_value(self, z, zhat)

    def conjugate(self, z, zhat) -> float:
        return conjugate_value(self, z, zhat)

    def prox_conjugate(self, sigma, zhat, z0) -> np.ndarray:
        return prox_conjugate(self, sigma, zhat, z0)


def as_penalty(kind, lam: float | None = None) -> BlockPenalty:
    if isinstance(kind, BlockPenalty):
        return kind if lam is None else BlockPenalty(kind.kind, lam)
    return BlockPenalty(Penalty(str(kind).lower() if not isinstance(kind, Penalty) else kind),
                        1.0 if lam is None else lam)


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64).ravel()


def _unit(zhat) -> tuple[np.ndarray, float]:
    zhat = _vec(zhat)
    nh = float(np.linalg.norm(zhat))
    if nh <= ZERO_REFERENCE:
        raise ZeroReference(f"reference block norm {nh:g} is zero")
    return zhat / nh, nh


def penalty_value(kind, z, zhat, lam: float | None = None) -> float:
    """``phi(z, zhat)``; ``+inf`` outside the domain of the hard penalties."""
    pen = as_penalty(kind, lam)
    z = _vec(z)
    e, nh = _unit(zhat)
    if z.shape != e.shape:
        raise DimensionMismatch(f"block sizes differ: {z.shape} vs {e.shape}")
    nz = float(np.linalg.norm(z))
    alpha = float(np.dot(z, e))
    perp = float(np.linalg.norm(z - alpha * e))
    k, lam = pen.kind, pen.lam
    if k is Penalty.LS:
        return 0.0
    if k is Penalty.HO:
        return 0.0 if perp <= MEMBERSHIP_TOL * nz else math.inf
    if k is Penalty.HD:
        return 0.0 if perp <= MEMBERSHIP_TOL * nz and alpha >= 0 else math.inf
    if k is Penalty.QO:
        return 0.5 * lam * perp ** 2 / nh
    if k is Penalty.QD:
        if alpha >= 0:
            return 0.5 * lam * perp ** 2 / nh
        return 0.5 * lam * nz ** 2 / nh
    # SD: ||z|| - <z, e> is the local Bregman divergence of the norm
    return lam * max(nz - alpha, 0.0)


def conjugate_value(kind, z, zhat, lam: float | None = None) -> float:
    """Convex conjugate of ``phi(., zhat)`` evaluated at ``z``."""
    pen = as_penalty(kind, lam)
    z = _vec(z)
    e, nh = _unit(zhat)
    k, lam = pen.kind, pen.lam
    nz = float(np.linalg.norm(z))
    alpha = float(np.dot(z, e))
    slack = MEMBERSHIP_TOL * max(nz, 1.0)
    if k is Penalty.LS:
        return 0.0 if nz <= slack else math.inf
    if k is Penalty.HO:
        return 0.0 if abs(alpha) <= slack else math.inf
    if k is Penalty.HD:
        return 0.0 if alpha <= slack else math.inf
    if k is Penalty.QO:
        return nh * nz ** 2 / (2 * lam) if abs(alpha) <= slack else math.inf
    if k is Penalty.QD:
        return nh * nz ** 2 / (2 * lam) if alpha <= slack else math.inf
    return 0.0 if np.linalg.norm(z + lam * e) <= lam + slack else math.inf


def prox_conjugate(kind, sigma: float, zhat, z0, lam: float | None = None) -> np.ndarray:
    """Closed-form ``argmin_z 1/2 ||z - z0||^2 + sigma * phi*(z, zhat)``."""
    pen = as_penalty(kind, lam)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    z0 = _vec(z0)
    _unit(zhat)
    zhat = _vec(zhat)
    if z0.shape != zhat.shape:
        raise DimensionMismatch(f"block sizes differ: {z0.shape} vs {zhat.shape}")
    out = kernels.prox_conj_blocks(pen.kind.code, z0[None, :].copy(), zhat[None, :].copy(),
                                   np.ones(1, dtype=np.bool_), float(pen.lam), float(sigma))
    return out[0]


def prox_conjugate_blocks(kind, sigma, zhat, z0, lam: float | None = None) -> np.ndarray:
    """Row-wise :func:`prox_conjugate` for ``(k, b)`` arrays."""
    pen = as_penalty(kind, lam)
    z0 = np.ascontiguousarray(z0, dtype=np.float64)
    zhat = np.ascontiguousarray(zhat, dtype=np.float64)
    mask = np.ones(z0.shape[0], dtype=np.bool_)
    return prox_omega_conjugate(pen, pen.lam, sigma, z0, zhat, mask)


def prox_omega_conjugate(kind, lam, sigma, z0, zhat, supp) -> np.ndarray:
    """Blockwise prox of ``sigma * omega*``: penalty prox on ``supp``, identity off it.

    ``supp`` may be a :class:`SupportSet` or a boolean mask over blocks.
    """
    pen = as_penalty(kind, lam)
    z0 = np.ascontiguousarray(getattr(z0, "data", z0), dtype=np.float64)
    zhat = np.ascontiguousarray(getattr(zhat, "data", zhat), dtype=np.float64)
    if z0.shape != zhat.shape:
        raise DimensionMismatch(f"block arrays differ: {z0.shape} vs {zhat.shape}")
    mask = supp.mask() if isinstance(supp, SupportSet) else np.asarray(supp, dtype=np.bool_)
    if mask.shape != (z0.shape[0],):
        raise DimensionMismatch("support does not match the number of blocks")
    rn = np.sqrt(np.einsum("ij,ij->i", zhat, zhat))
    bad = mask & (rn <= ZERO_REFERENCE)
    if np.any(bad):
        raise ZeroReference(f"supported block {int(np.flatnonzero(bad)[0])} has a zero reference")
    return kernels.prox_conj_blocks(pen.kind.code, z0, zhat, np.ascontiguousarray(mask),
                                    float(pen.lam), float(sigma))


# ---------------------------------------------------------------------------
# Numerical oracle. Nothing below shares code with the closed forms above.

def _sd_objective(z, w, c, e):
    nz = np.linalg.norm(z)
    f = 0.5 * np.dot(z - w, z - w) + c * (nz - np.dot(e, z))
    g = z - w + c * (z / nz - e)
    return f, g


def _sd_hessian(z, w, c, e):
    nz = np.linalg.norm(z)
    b = z.size
    return np.eye(b) + c * (np.eye(b) - np.outer(z, z) / nz ** 2) / nz


def primal_prox(kind, t: float, zhat, w, lam: float | None = None, tol: float = 1e-12) -> np.ndarray:
    """Numerically computed ``argmin_z 1/2 ||z - w||^2 + t * phi(z, zhat)``.

    Indicator penalties are handled by projections (least squares on the span,
    nonnegative least squares on the ray); finite penalties by solving their
    optimality conditions (linear systems per smooth piece, or trust-region
    Newton for the soft direction penalty after checking whether zero is optimal).
    """
    pen = as_penalty(kind, lam)
    w = _vec(w)
    zhat = _vec(zhat)
    nh = float(np.linalg.norm(zhat))
    if nh <= ZERO_REFERENCE:
        raise ZeroReference("zero reference block")
    b = w.size
    k, lam = pen.kind, pen.lam
    if k is Penalty.LS:
        return w.copy()
    if k is Penalty.HO:
        coef, *_ = np.linalg.lstsq(zhat[:, None], w, rcond=None)
        return zhat * coef[0]
    if k is Penalty.HD:
        coef, _ = optimize.nnls(zhat[:, None], w)
        return zhat * coef[0]
    c = t * lam / nh
    if k in (Penalty.QO, Penalty.QD):
        orth = np.eye(b) - np.outer(zhat, zhat) / nh ** 2
        cand = [np.linalg.solve(np.eye(b) + c * orth, w)]
        if k is Penalty.QD:
            cand = [z for z in cand if np.dot(z, zhat) >= 0]
            zb = w / (1.0 + c)
            if np.dot(zb, zhat) <= 0:
                cand.append(zb)

            def obj(z):
                a = np.dot(z, zhat) / nh
                quad = np.dot(z, orth @ z) + (a * a if a < 0 else 0.0)
                return 0.5 * np.dot(z - w, z - w) + 0.5 * c * quad
            return min(cand, key=obj)
        return cand[0]
    # SD: t * lam * (||z|| - <z, e>); zero is optimal iff w lies in the
    # subdifferential at 0, i.e. ||w + c' e|| <= c' with c' = t * lam
    e = zhat / nh
    cs = t * lam
    if np.linalg.norm(w + cs * e) <= cs:
        return np.zeros(b)
    x0 = w + cs * e
    res = optimize.minimize(_sd_objective, x0, args=(w, cs, e), jac=True,
                            hess=_sd_hessian, method="trust-exact",
                            options={"gtol": tol * max(1.0, np.linalg.norm(w), cs)})
    z = res.x
    _, g = _sd_objective(z, w, cs, e)
    if not np.all(np.isfinite(z)) or np.linalg.norm(g) > 1e-8 * max(1.0, np.linalg.norm(w), cs):
        raise BudgetExceeded(f"soft-direction prox did not converge: |grad|={np.linalg.norm(g):g}")
    return z


def brute_force_prox(kind, sigma: float, zhat, z0, lam: float | None = None) -> np.ndarray:
    """Oracle for ``prox_{sigma phi*}(z0)`` via Moreau's decomposition.

    ``prox_{sigma phi*}(z0) = z0 - sigma * prox_{phi / sigma}(z0 / sigma)`` with
    the primal prox computed by :func:`primal_prox`.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    z0 = _vec(z0)
    return z0 - sigma * primal_prox(kind, 1.0 / sigma, zhat, z0 / sigma, lam=lam)


def moreau_residual(kind, sigma, zhat, z0, lam: float | None = None) -> float:
    """``||prox_{sigma phi*}(z0) + sigma prox_{phi/sigma}(z0/sigma) - z0||``."""
    z0 = _vec(z0)
    dual = prox_conjugate(kind, sigma, zhat, z0, lam=lam)
    primal = primal_prox(kind, 1.0 / sigma, zhat, z0 / sigma, lam=lam)
    return float(np.linalg.norm(dual + sigma * primal - z0))
