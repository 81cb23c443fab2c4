"""Randomized comparison of the closed-form conjugate proxes with the oracle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .penalties import Penalty, brute_force_prox, moreau_residual, prox_conjugate

TOLERANCE = 1e-5


@dataclass
class ProxCheckReport:
    penalty: Penalty
    b: int
    trials: int
    max_oracle_error: float
    max_moreau_residual: float | None  # None for indicator penalties

    @property
    def max_error(self) -> float:
        return max(self.max_oracle_error, self.max_moreau_residual or 0.0)

    @property
    def passed(self) -> bool:
        return self.max_error <= TOLERANCE


def random_instances(trials: int, b: int, seed: int):
    """Yield ``(lam, sigma, zhat, z0)`` with lam, sigma uniform on [0.1, 10]."""
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        lam = rng.uniform(0.1, 10.0)
        sigma = rng.uniform(0.1, 10.0)
        zhat = rng.standard_normal(b) * rng.uniform(0.1, 10.0)
        z0 = rng.standard_normal(b) * rng.uniform(0.1, 20.0)
        yield lam, sigma, zhat, z0


def prox_check(kind, trials: int = 1000, b: int = 2, seed: int = 0) -> ProxCheckReport:
    if not 1 <= b <= 6:
        raise ValueError("block size must lie in [1, 6]")
    kind = Penalty(kind)
    worst = 0.0
    worst_moreau = 0.0 if kind.finite else None
    for lam, sigma, zhat, z0 in random_instances(trials, b, seed):
        closed = prox_conjugate(kind, sigma, zhat, z0, lam=lam)
        oracle = brute_force_prox(kind, sigma, zhat, z0, lam=lam)
        worst = max(worst, float(np.max(np.abs(closed - oracle))))
        if worst_moreau is not None:
            worst_moreau = max(worst_moreau, moreau_residual(kind, sigma, zhat, z0, lam=lam))
    return ProxCheckReport(kind, b, trials, worst, worst_moreau)
