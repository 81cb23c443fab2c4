"""Block vectors and the per-block geometry used by penalties and solvers.

A block vector is stored as a dense ``(m, b)`` float64 array, row ``i`` being
block ``z_i``. Functions accept either a :class:`BlockVector` or a raw array.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSubgradient, ZeroVector

# below this a norm is treated as exactly zero
ZERO_NORM = 1e-300
SUBGRADIENT_SLACK = 1e-9


@dataclass(frozen=True)
class BlockVector:
    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"block data must be (m, b) with m, b >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("block data must be finite")
        object.__setattr__(self, "data", arr)

    @classmethod
    def zeros(cls, m: int, b: int) -> "BlockVector":
        return cls(np.zeros((m, b)))

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def b(self) -> int:
        return self.data.shape[1]

    def block_norms(self) -> np.ndarray:
        return block_norms(self.data)

    def block_norm(self, i: int) -> float:
        return float(np.linalg.norm(self.data[i]))

    def l12_norm(self) -> float:
        return l12_norm(self.data)


@dataclass(frozen=True)
class SupportSet:
    """Sorted, duplicate-free block indices in ``[0, m)``."""

    indices: np.ndarray
    m: int

    def __post_init__(self):
        idx = np.unique(np.asarray(self.indices, dtype=np.int64))
        if idx.size and (idx[0] < 0 or idx[-1] >= self.m):
            raise ValueError(f"support indices must lie in [0, {self.m})")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "SupportSet":
        mask = np.asarray(mask, dtype=bool)
        return cls(np.flatnonzero(mask), mask.size)

    @classmethod
    def full(cls, m: int) -> "SupportSet":
        return cls(np.arange(m), m)

    @classmethod
    def empty(cls, m: int) -> "SupportSet":
        return cls(np.zeros(0, dtype=np.int64), m)

    def mask(self) -> np.ndarray:
        out = np.zeros(self.m, dtype=bool)
        out[self.indices] = True
        return out

    def __len__(self) -> int:
        return int(self.indices.size)

    def __contains__(self, i) -> bool:
        pos = np.searchsorted(self.indices, i)
        return bool(pos < self.indices.size and self.indices[pos] == i)

    def __iter__(self):
        return iter(self.indices.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, SupportSet):
            return NotImplemented
        return self.m == other.m and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash((self.m, self.indices.tobytes()))


def _as_blocks(z) -> np.ndarray:
    if isinstance(z, BlockVector):
        return z.data
    arr = np.asarray(z, dtype=np.float64)
    return arr[:, None] if arr.ndim == 1 else arr


def block_norms(z) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", _as_blocks(z), _as_blocks(z)))


def l12_norm(z) -> float:
    """Sum over blocks of the Euclidean block norm."""
    return float(np.sum(block_norms(z)))


def cosine(z, zhat) -> float:
    z = np.asarray(z, dtype=np.float64).ravel()
    zhat = np.asarray(zhat, dtype=np.float64).ravel()
    nz, nh = np.linalg.norm(z), np.linalg.norm(zhat)
    if nz <= ZERO_NORM or nh <= ZERO_NORM:
        raise ZeroVector("cosine is undefined for a zero vector")
    return float(np.clip(np.dot(z / nz, zhat / nh), -1.0, 1.0))


def project_span(z, zhat) -> np.ndarray:
    """Orthogonal projection of ``z`` onto the line spanned by ``zhat``."""
    z = np.asarray(z, dtype=np.float64).ravel()
    zhat = np.asarray(zhat, dtype=np.float64).ravel()
    nh = np.linalg.norm(zhat)
    if nh <= ZERO_NORM:
        raise ZeroVector("cannot project onto the span of a zero vector")
    e = zhat / nh
    return np.dot(z, e) * e


def bregman_local(z, zhat_unit) -> float:
    """Bregman divergence of the Euclidean norm: ``||z|| - <u, z>``.

    ``zhat_unit`` must be a subgradient of the norm, i.e. have norm at most 1.
    """
    z = np.asarray(z, dtype=np.float64).ravel()
    u = np.asarray(zhat_unit, dtype=np.float64).ravel()
    if np.linalg.norm(u) > 1.0 + SUBGRADIENT_SLACK:
        raise InvalidSubgradient(f"subgradient norm {np.linalg.norm(u)} exceeds 1")
    # clamp rounding noise; the exact value is nonnegative
    return max(float(np.linalg.norm(z) - np.dot(u, z)), 0.0)


def bregman_global(z, zhat_units) -> float:
    """Sum of :func:`bregman_local` over all blocks."""
    z = _as_blocks(z)
    u = _as_blocks(zhat_units)
    if z.shape != u.shape:
        raise ValueError(f"shape mismatch {z.shape} vs {u.shape}")
    unorm = block_norms(u)
    if np.any(unorm > 1.0 + SUBGRADIENT_SLACK):
        raise InvalidSubgradient(f"subgradient block norm {unorm.max()} exceeds 1")
    local = np.maximum(block_norms(z) - np.einsum("ij,ij->i", u, z), 0.0)
    return float(np.sum(local))


def support_of(z, tol: float = 0.0) -> SupportSet:
    """Blocks whose Euclidean norm exceeds ``tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return SupportSet.from_mask(block_norms(z) > tol)
