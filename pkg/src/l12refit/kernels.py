"""Backend selection for the hot per-iteration kernels.

numba is used when importable unless ``L12REFIT_DISABLE_NUMBA`` is set to a
non-empty value other than ``0``; otherwise the pure-numpy kernels run.
Both paths compute the same thing and are checked against each other.
"""
import os

from . import _kernels_numpy

LS, HO, HD, QO, QD, SD = _kernels_numpy.LS, _kernels_numpy.HO, _kernels_numpy.HD, \
    _kernels_numpy.QO, _kernels_numpy.QD, _kernels_numpy.SD


def _numba_requested() -> bool:
    flag = os.environ.get("L12REFIT_DISABLE_NUMBA", "")
    return flag in ("", "0")


_impl = _kernels_numpy
BACKEND = "numpy"
if _numba_requested():
    try:
        from . import _kernels_numba as _impl  # noqa: F811
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _impl = _kernels_numpy

gradient = _impl.gradient
gradient_adjoint = _impl.gradient_adjoint
ball_dual_update = _impl.ball_dual_update
psi_blocks = _impl.psi_blocks
prox_conj_blocks = _impl.prox_conj_blocks

__all__ = ["BACKEND", "gradient", "gradient_adjoint", "ball_dual_update",
           "psi_blocks", "prox_conj_blocks", "LS", "HO", "HD", "QO", "QD", "SD"]
