"""Primal-dual solvers for the biased l12 problem and its refittings.

All solvers run the same first-order primal-dual iteration:

* dual step on ``z + sigma * Gamma v`` (projection onto the radius-``lam``
  ball for the biased problem, prox of the refitting conjugate otherwise),
* primal step through the resolvent ``(Id + tau Phi^T Phi)^-1``,
* extrapolation ``v = x_new + theta (x_new - x)``.

:func:`joint_solve` runs the biased and refitted iterations in lockstep and
detects the support from the biased dual variable at every iteration.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .blocks import SupportSet
from .errors import DimensionMismatch, NotInSupport, StepSizeViolation
from .operators import AnalysisOperator, ForwardOperator, as_image
from .penalties import BlockPenalty, as_penalty

log = logging.getLogger(__name__)

POSTERIOR_SUPPORT_TOL = 1e-6


@dataclass
class PrimalDualParams:
    lam: float
    tau: float = 0.25
    sigma: float = 1.0 / 6.0
    theta: float = 1.0
    iterations: int = 1000
    tol: Optional[float] = None  # early stop on convergence_residual

    def validate(self, gamma_op: AnalysisOperator | None = None):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not (self.tau > 0 and self.sigma > 0):
            raise StepSizeViolation("tau and sigma must be positive")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if gamma_op is not None:
            bound = self.tau * self.sigma * gamma_op.step_norm_sq()
            if bound >= 1.0:
                raise StepSizeViolation(
                    f"tau*sigma*||Gamma^T Gamma|| = {bound:.4g} >= 1")


@dataclass
class PrimalDualState:
    """Iterate triple ``(x, z, v)`` of one primal-dual column."""

    x: np.ndarray
    z: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, shape, m, b) -> "PrimalDualState":
        x = np.zeros(shape)
        return cls(x, np.zeros((m, b)), x.copy())


BiasedState = RefitState = PrimalDualState


@dataclass
class IterationInfo:
    """Passed to solver callbacks after every iteration."""

    k: int
    biased: PrimalDualState
    nu_norms: np.ndarray
    support: Optional[np.ndarray] = None
    refit: Optional[PrimalDualState] = None
    residual: Optional[float] = None


@dataclass
class BiasedResult:
    xhat: np.ndarray
    zhat: np.ndarray
    vhat: np.ndarray
    iterations: int
    history: list = field(default_factory=list)


@dataclass
class JointResult:
    xhat: np.ndarray
    xtilde: np.ndarray
    zhat: np.ndarray
    ztilde: np.ndarray
    support: SupportSet
    reference: np.ndarray
    iterations: int
    history: list = field(default_factory=list)


@dataclass
class RefitResult:
    xtilde: np.ndarray
    ztilde: np.ndarray
    support: SupportSet
    reference: np.ndarray
    iterations: int


def convergence_residual(prev: PrimalDualState, nxt: PrimalDualState) -> float:
    """Relative primal change plus relative dual change between two states."""
    dx = np.linalg.norm(nxt.x - prev.x) / max(1.0, np.linalg.norm(prev.x))
    dz = np.linalg.norm(nxt.z - prev.z) / max(1.0, np.linalg.norm(prev.z))
    return float(dx + dz)


def _detect(nrm, lam, rule):
    if rule == "strict":
        return nrm > lam
    if rule == "extended":
        return nrm >= lam
    raise ValueError(f"support rule must be 'strict' or 'extended', got {rule!r}")


class _Diagnostics:
    """Optional CSV trace: ``iteration,residual,support_size``."""

    def __init__(self, stream):
        self.stream = stream
        self.rows = []
        if stream is not None:
            stream.write("iteration,residual,support_size\n")

    def record(self, k, residual, support_size):
        self.rows.append((k, residual, support_size))
        if self.stream is not None:
            self.stream.write(f"{k},{residual:.6e},{support_size}\n")


def _primal_step(phi_op, tau, theta, state, rhs, gamma_op, z_new):
    x_new = phi_op.resolvent(tau, state.x + tau * (rhs - gamma_op.adjoint(z_new)))
    v_new = x_new + theta * (x_new - state.x)
    return PrimalDualState(x_new, z_new, v_new)


def _prepare(phi_op, gamma_op, y, params, offset):
    params.validate(gamma_op)
    y = as_image(y)
    rhs = phi_op.adjoint(y)
    if rhs.shape != gamma_op.shape:
        raise DimensionMismatch(f"Phi^T y has shape {rhs.shape}, Gamma expects {gamma_op.shape}")
    if offset is not None:
        rhs = rhs + as_image(offset)
    return rhs


def solve_biased(phi_op: ForwardOperator, gamma_op: AnalysisOperator, y, params: PrimalDualParams,
                 *, offset=None, callback: Callable | None = None, diagnostics=None) -> BiasedResult:
    """Solve ``min_x 1/2 ||Phi x - y||^2 - <offset, x> + lam ||Gamma x||_{1,2}``.

    ``offset`` defaults to zero (the plain biased problem); iterative Bregman
    passes the previous subgradient through it.
    """
    rhs = _prepare(phi_op, gamma_op, y, params, offset)
    lam, sigma, tau, theta = params.lam, params.sigma, params.tau, params.theta
    st = PrimalDualState.zeros(gamma_op.shape, gamma_op.m, gamma_op.b)
    diag = _Diagnostics(diagnostics)
    track = callback is not None or diagnostics is not None or params.tol is not None
    k = 0
    for k in range(1, params.iterations + 1):
        gv = gamma_op.apply(st.v)
        z_new, _, nrm = kernels.ball_dual_update(st.z, gv, sigma, lam)
        nxt = _primal_step(phi_op, tau, theta, st, rhs, gamma_op, z_new)
        res = convergence_residual(st, nxt) if track else None
        st = nxt
        if track:
            diag.record(k, res, int(np.count_nonzero(nrm > lam)))
            if callback is not None:
                callback(IterationInfo(k, st, nrm, residual=res))
            if params.tol is not None and res < params.tol:
                break
    return BiasedResult(st.x, st.z, st.v, k, diag.rows)


def psi_estimate(zhat, vhat, gamma_op: AnalysisOperator, sigma: float, lam: float,
                 supp) -> np.ndarray:
    """Online estimate of ``Gamma xhat`` from the biased dual/extrapolated iterates.

    Returns an ``(m, b)`` array that is zero off ``supp``. Every supported
    block must satisfy ``||nu_i|| > lam`` with ``nu = zhat + sigma Gamma vhat``.
    """
    zhat = np.asarray(getattr(zhat, "data", zhat), dtype=np.float64)
    nu = zhat + sigma * gamma_op.apply(vhat)
    nrm = np.sqrt(np.einsum("ij,ij->i", nu, nu))
    mask = supp.mask() if isinstance(supp, SupportSet) else np.asarray(supp, dtype=bool)
    off = mask & ~(nrm > lam)
    if np.any(off):
        raise NotInSupport(f"block {int(np.flatnonzero(off)[0])} has ||nu|| <= lam")
    return kernels.psi_blocks(nu, nrm, lam, sigma, np.ascontiguousarray(mask))


def _refit_penalty(penalty, params) -> BlockPenalty:
    if isinstance(penalty, BlockPenalty):
        return penalty
    return as_penalty(penalty, params.lam)


def joint_solve(phi_op: ForwardOperator, gamma_op: AnalysisOperator, y, params: PrimalDualParams,
                penalty, support_rule: str = "strict", *, callback: Callable | None = None,
                diagnostics=None) -> JointResult:
    """Biased solve and refitting run side by side.

    At iteration ``k`` the support is ``{i : ||nu_i|| > lam}`` (or ``>=`` for
    the extended rule) with ``nu = zhat^k + sigma Gamma vhat^k``, and the
    refitting reference blocks are the psi estimates on that support.
    A string ``penalty`` uses ``params.lam`` as its weight.
    """
    pen = _refit_penalty(penalty, params)
    _detect(np.zeros(1), 1.0, support_rule)
    rhs = _prepare(phi_op, gamma_op, y, params, None)
    lam, sigma, tau, theta = params.lam, params.sigma, params.tau, params.theta
    code, wgt = pen.kind.code, float(pen.lam)
    bia = PrimalDualState.zeros(gamma_op.shape, gamma_op.m, gamma_op.b)
    ref_st = PrimalDualState.zeros(gamma_op.shape, gamma_op.m, gamma_op.b)
    diag = _Diagnostics(diagnostics)
    track = callback is not None or diagnostics is not None or params.tol is not None
    supp = np.zeros(gamma_op.m, dtype=bool)
    ref = np.zeros((gamma_op.m, gamma_op.b))
    k = 0
    for k in range(1, params.iterations + 1):
        z_new, nu, nrm = kernels.ball_dual_update(bia.z, gamma_op.apply(bia.v), sigma, lam)
        supp = _detect(nrm, lam, support_rule)
        ref = kernels.psi_blocks(nu, nrm, lam, sigma, supp)
        zt0 = ref_st.z + sigma * gamma_op.apply(ref_st.v)
        zt_new = kernels.prox_conj_blocks(code, zt0, ref, supp, wgt, sigma)
        bia_next = _primal_step(phi_op, tau, theta, bia, rhs, gamma_op, z_new)
        ref_next = _primal_step(phi_op, tau, theta, ref_st, rhs, gamma_op, zt_new)
        res = None
        if track:
            res = convergence_residual(bia, bia_next) + convergence_residual(ref_st, ref_next)
        bia, ref_st = bia_next, ref_next
        if track:
            diag.record(k, res, int(np.count_nonzero(supp)))
            if callback is not None:
                callback(IterationInfo(k, bia, nrm, supp, ref_st, res))
            if params.tol is not None and res < params.tol:
                break
    return JointResult(bia.x, ref_st.x, bia.z, ref_st.z, SupportSet.from_mask(supp), ref, k,
                       diag.rows)


def posterior_support(zhat, lam: float, tol: float = POSTERIOR_SUPPORT_TOL) -> np.ndarray:
    """Blocks whose converged dual saturates: ``||zhat_i|| >= lam (1 - tol)``."""
    zhat = np.asarray(getattr(zhat, "data", zhat), dtype=np.float64)
    return np.sqrt(np.einsum("ij,ij->i", zhat, zhat)) >= lam * (1.0 - tol)


def posterior_refit(phi_op: ForwardOperator, gamma_op: AnalysisOperator, y,
                    params: PrimalDualParams, penalty, xhat, zhat, vhat=None, *,
                    reference: str = "psi", support_tol: float = POSTERIOR_SUPPORT_TOL,
                    callback: Callable | None = None) -> RefitResult:
    """Refit after a completed biased solve, with support and references frozen.

    The support is read once from the saturated dual blocks. With
    ``reference="psi"`` the reference blocks are the psi estimates at
    ``(zhat, vhat)`` (``vhat`` defaults to ``xhat``); supported blocks whose
    estimate vanishes are dropped. ``reference="gradient"`` uses ``Gamma xhat``
    and drops supported blocks where it is zero.

    An empty support yields the least-squares fit under ``Gamma x = 0``.
    """
    pen = _refit_penalty(penalty, params)
    rhs = _prepare(phi_op, gamma_op, y, params, None)
    lam, sigma, tau, theta = params.lam, params.sigma, params.tau, params.theta
    xhat = as_image(xhat)
    zhat = np.asarray(getattr(zhat, "data", zhat), dtype=np.float64)
    supp = posterior_support(zhat, lam, support_tol)
    if reference == "psi":
        nu = zhat + sigma * gamma_op.apply(xhat if vhat is None else vhat)
        nrm = np.sqrt(np.einsum("ij,ij->i", nu, nu))
        supp &= nrm > lam
        ref = kernels.psi_blocks(nu, nrm, lam, sigma, supp)
    elif reference == "gradient":
        ref = gamma_op.apply(xhat)
        supp &= np.sqrt(np.einsum("ij,ij->i", ref, ref)) > 0
        ref = np.where(supp[:, None], ref, 0.0)
    else:
        raise ValueError(f"reference must be 'psi' or 'gradient', got {reference!r}")
    supp = np.ascontiguousarray(supp)
    code, wgt = pen.kind.code, float(pen.lam)
    st = PrimalDualState.zeros(gamma_op.shape, gamma_op.m, gamma_op.b)
    k = 0
    for k in range(1, params.iterations + 1):
        z0 = st.z + sigma * gamma_op.apply(st.v)
        z_new = kernels.prox_conj_blocks(code, z0, ref, supp, wgt, sigma)
        nxt = _primal_step(phi_op, tau, theta, st, rhs, gamma_op, z_new)
        res = convergence_residual(st, nxt) if params.tol is not None or callback else None
        st = nxt
        if callback is not None:
            callback(k, st, res)
        if params.tol is not None and res < params.tol:
            break
    return RefitResult(st.x, st.z, SupportSet.from_mask(supp), ref, k)


def iterative_bregman(phi_op: ForwardOperator, gamma_op: AnalysisOperator, y,
                      params: PrimalDualParams, steps: int) -> list:
    """Bregman iterations with fixed ``lam``; returns the ``steps`` successive solutions.

    Step ``l + 1`` adds ``<Gamma^T zhat_l, x>`` to the objective, where
    ``zhat_l`` is the converged dual of step ``l`` (so ``Gamma^T zhat_l / lam``
    is the subgradient). The first step is the biased solution.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    out = []
    offset = None
    for step in range(steps):
        res = solve_biased(phi_op, gamma_op, y, params, offset=offset)
        out.append(res.xhat)
        offset = gamma_op.adjoint(res.zhat)
        log.debug("bregman step %d done after %d iterations", step + 1, res.iterations)
    return out
