"""Analysis operators (image -> blocks) and forward operators (image -> image).

Images are float64 arrays of shape ``(h, w, c)``. Analysis outputs are
``(m, b)`` block arrays, see :mod:`l12refit.blocks`.
"""
from __future__ import annotations

import math

import numpy as np

from . import kernels
from .errors import DimensionMismatch


def as_image(x) -> np.ndarray:
    """Promote ``(h, w)`` to ``(h, w, 1)`` and cast to float64."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise DimensionMismatch(f"expected an (h, w, c) image, got shape {arr.shape}")
    return arr


def image_shape(shape) -> tuple:
    shape = tuple(int(s) for s in shape)
    if len(shape) == 2:
        shape += (1,)
    if len(shape) != 3 or min(shape) < 1:
        raise ValueError(f"invalid image shape {shape}")
    return shape


def _check_image(x, shape) -> np.ndarray:
    x = as_image(x)
    if x.shape != tuple(shape):
        raise DimensionMismatch(f"image shape {x.shape} does not match operator shape {tuple(shape)}")
    return x


class AnalysisOperator:
    """Linear map from an image to ``m`` blocks of size ``b``."""

    kind = "abstract"

    def __init__(self, shape):
        self.shape = image_shape(shape)
        self._norm_sq = None

    @property
    def n(self) -> int:
        h, w, c = self.shape
        return h * w * c

    def _check_blocks(self, z) -> np.ndarray:
        z = np.asarray(getattr(z, "data", z), dtype=np.float64)
        if z.ndim == 1 and self.b == 1:
            z = z[:, None]
        if z.shape != (self.m, self.b):
            raise DimensionMismatch(f"block shape {z.shape} does not match ({self.m}, {self.b})")
        return z

    def apply(self, x) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, z) -> np.ndarray:
        raise NotImplementedError

    def norm_sq_estimate(self, iters: int = 100, seed: int = 0) -> float:
        """Power-iteration lower estimate of ``||Gamma^T Gamma||``.

        The Rayleigh quotient of a PSD operator is non-decreasing along power
        iterations, so more ``iters`` never lowers the estimate.
        """
        if iters < 1:
            raise ValueError("iters must be >= 1")
        v = np.random.default_rng(seed).standard_normal(self.shape)
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(iters):
            gv = self.apply(v)
            est = max(est, float(np.vdot(gv, gv)))
            u = self.adjoint(gv)
            nu = np.linalg.norm(u)
            if nu == 0.0:
                break
            v = u / nu
        return est

    def step_norm_sq(self) -> float:
        """Cached norm estimate used for the step-size check."""
        if self._norm_sq is None:
            self._norm_sq = self.norm_sq_estimate(iters=200)
        return self._norm_sq

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.shape}, m={self.m}, b={self.b})"


class Gradient(AnalysisOperator):
    """Per-pixel stacked forward differences of every channel.

    Block ``i`` (pixel in row-major order) is ``(dx_0, dy_0, dx_1, dy_1, ...)``,
    so an RGB image gives ``b = 6`` and a grayscale one ``b = 2``.
    Neumann boundary: differences across the last column/row are zero.
    """

    def __init__(self, shape):
        super().__init__(shape)
        h, w, c = self.shape
        self.kind = "color_gradient" if c > 1 else "scalar_gradient"
        self.m = h * w
        self.b = 2 * c

    def apply(self, x):
        x = _check_image(x, self.shape)
        return kernels.gradient(np.ascontiguousarray(x)).reshape(self.m, self.b)

    def adjoint(self, z):
        z = self._check_blocks(z)
        h, w, _ = self.shape
        return kernels.gradient_adjoint(np.ascontiguousarray(z).reshape(h, w, self.b))


class AnisotropicTV(AnalysisOperator):
    """Horizontal then vertical differences of a grayscale image as scalar blocks."""

    kind = "anisotropic_tv"

    def __init__(self, shape):
        super().__init__(shape)
        h, w, c = self.shape
        if c != 1:
            raise DimensionMismatch("anisotropic TV is defined for single-channel images")
        self.m = 2 * h * w
        self.b = 1

    def apply(self, x):
        x = _check_image(x, self.shape)
        g = kernels.gradient(np.ascontiguousarray(x))
        return np.concatenate([g[:, :, 0].ravel(), g[:, :, 1].ravel()])[:, None]

    def adjoint(self, z):
        z = self._check_blocks(z)
        h, w, _ = self.shape
        n = h * w
        g = np.empty((h, w, 2))
        g[:, :, 0] = z[:n, 0].reshape(h, w)
        g[:, :, 1] = z[n:, 0].reshape(h, w)
        return kernels.gradient_adjoint(g)


class IdentityAnalysis(AnalysisOperator):
    kind = "identity"

    def __init__(self, shape):
        super().__init__(shape)
        self.m = self.n
        self.b = 1

    def apply(self, x):
        return _check_image(x, self.shape).reshape(self.m, 1).copy()

    def adjoint(self, z):
        return self._check_blocks(z).reshape(self.shape).copy()


ANALYSIS_KINDS = {
    "color_gradient": Gradient,
    "scalar_gradient": Gradient,
    "anisotropic_tv": AnisotropicTV,
    "identity": IdentityAnalysis,
}


def analysis_operator(kind: str, shape) -> AnalysisOperator:
    try:
        cls = ANALYSIS_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown analysis operator {kind!r}") from None
    op = cls(shape)
    if kind == "color_gradient" and op.shape[2] != 3:
        raise DimensionMismatch("color_gradient expects a 3-channel image")
    if kind == "scalar_gradient" and op.shape[2] != 1:
        raise DimensionMismatch("scalar_gradient expects a 1-channel image")
    return op


def analysis_apply(op: AnalysisOperator, x) -> np.ndarray:
    return op.apply(x)


def analysis_adjoint(op: AnalysisOperator, z) -> np.ndarray:
    return op.adjoint(z)


def operator_norm_sq_estimate(op: AnalysisOperator, iters: int = 100) -> float:
    return op.norm_sq_estimate(iters)


class ForwardOperator:
    """Linear degradation ``Phi`` acting channel-wise on ``(h, w, c)`` images."""

    kind = "abstract"

    def apply(self, x) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, y) -> np.ndarray:
        raise NotImplementedError

    def resolvent(self, tau: float, r) -> np.ndarray:
        """Solve ``(Id + tau Phi^T Phi) x = r``."""
        raise NotImplementedError


class IdentityForward(ForwardOperator):
    kind = "identity"

    def __init__(self, shape=None):
        self.shape = None if shape is None else image_shape(shape)

    def _check(self, x):
        x = as_image(x)
        if self.shape is not None and x.shape != self.shape:
            raise DimensionMismatch(f"image shape {x.shape} does not match {self.shape}")
        return x

    def apply(self, x):
        return self._check(x).copy()

    def adjoint(self, y):
        return self._check(y).copy()

    def resolvent(self, tau, r):
        if tau <= 0:
            raise ValueError("tau must be positive")
        return self._check(r) / (1.0 + tau)


class Convolution(ForwardOperator):
    """Periodic 2D convolution with a fixed kernel, applied per channel.

    The kernel origin sits at ``(kh // 2, kw // 2)``.
    """

    kind = "convolution"

    def __init__(self, kernel, shape):
        kernel = np.asarray(kernel, dtype=np.float64)
        if kernel.ndim == 1:
            kernel = kernel[None, :]
        if kernel.ndim != 2 or kernel.size == 0 or not np.all(np.isfinite(kernel)):
            raise ValueError("kernel must be a finite, nonempty 2D array")
        self.shape = image_shape(shape)
        h, w, _ = self.shape
        kh, kw = kernel.shape
        if kh > h or kw > w:
            raise DimensionMismatch(f"kernel {kernel.shape} larger than image {(h, w)}")
        self.kernel = kernel
        pad = np.zeros((h, w))
        pad[:kh, :kw] = kernel
        pad = np.roll(pad, (-(kh // 2), -(kw // 2)), axis=(0, 1))
        self._kf = np.fft.rfft2(pad)[:, :, None]
        self._kf_abs2 = np.abs(self._kf) ** 2

    def _filter(self, x, fr):
        h, w, _ = self.shape
        return np.fft.irfft2(np.fft.rfft2(x, axes=(0, 1)) * fr, s=(h, w), axes=(0, 1))

    def _check(self, x):
        return _check_image(x, self.shape)

    def apply(self, x):
        return self._filter(self._check(x), self._kf)

    def adjoint(self, y):
        return self._filter(self._check(y), np.conj(self._kf))

    def resolvent(self, tau, r):
        if tau <= 0:
            raise ValueError("tau must be positive")
        return self._filter(self._check(r), 1.0 / (1.0 + tau * self._kf_abs2))


def forward_apply(op: ForwardOperator, x) -> np.ndarray:
    return op.apply(x)


def forward_adjoint(op: ForwardOperator, y) -> np.ndarray:
    return op.adjoint(y)


def resolvent_apply(op: ForwardOperator, tau: float, r) -> np.ndarray:
    return op.resolvent(tau, r)


def motion_blur_kernel(length: int = 9, angle: float = 45.0) -> np.ndarray:
    """Normalized line kernel of ``length`` pixels at ``angle`` degrees.

    Samples along the segment are splatted bilinearly onto a square grid.
    ``length == 1`` gives the delta kernel.
    """
    if length < 1:
        raise ValueError("blur length must be >= 1")
    if not math.isfinite(angle):
        raise ValueError("blur angle must be finite")
    size = length if length % 2 == 1 else length + 1
    k = np.zeros((size, size))
    c = size // 2
    theta = math.radians(angle)
    dx, dy = math.cos(theta), -math.sin(theta)
    half = (length - 1) / 2.0
    for t in np.linspace(-half, half, 8 * length + 1):
        r, q = c + t * dy, c + t * dx
        r0, q0 = int(math.floor(r)), int(math.floor(q))
        fr, fq = r - r0, q - q0
        for rr, qq, wgt in ((r0, q0, (1 - fr) * (1 - fq)), (r0 + 1, q0, fr * (1 - fq)),
                            (r0, q0 + 1, (1 - fr) * fq), (r0 + 1, q0 + 1, fr * fq)):
            if wgt > 0 and 0 <= rr < size and 0 <= qq < size:
                k[rr, qq] += wgt
    return k / k.sum()
