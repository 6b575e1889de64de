"""Dual update functions and the projection onto the non-negative orthant.

All updates take the gap vector ``g = B U - D`` already computed by the
caller, so one sparse product per iteration is shared between the update,
the restart test and the metrics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .exceptions import DimensionMismatch

__all__ = [
    "UpdateKind",
    "Uzawa",
    "PenaltySplit",
    "RegularizedUzawa",
    "project_nonneg",
    "uzawa_update",
    "penalty_update",
    "regularized_uzawa_update",
    "uzawa_upper_bound",
    "make_update",
]


def project_nonneg(x):
    """Component-wise ``max(0, x)``."""
    return np.maximum(np.asarray(x, dtype=float), 0.0)


def _check(lam, gap):
    if lam.shape != gap.shape:
        raise DimensionMismatch(f"multiplier {lam.shape} and gap {gap.shape} differ")


def uzawa_update(lam, gap, rho):
    """Unprojected Uzawa step ``lam + rho * (B U - D)``."""
    lam = np.asarray(lam, dtype=float)
    gap = np.asarray(gap, dtype=float)
    _check(lam, gap)
    return lam + rho * gap


def penalty_update(gap, k_n):
    """Penalty-split step ``k_N * (B U - D)``; the previous multiplier is ignored."""
    return k_n * np.asarray(gap, dtype=float)


def regularized_uzawa_update(lam, gap, rho, k_n):
    """Uzawa step on the saddle system regularized by ``-(1/k_N) Id``.

    ``lam + rho * (B U - lam / k_N - D)``; with ``rho = k_N`` this is the
    penalty-split update.
    """
    lam = np.asarray(lam, dtype=float)
    gap = np.asarray(gap, dtype=float)
    _check(lam, gap)
    return lam + rho * (gap - lam / k_n)


@dataclass(frozen=True)
class UpdateKind:
    """Base class for the dual update ``G(lam, U)``."""

    def __call__(self, lam, gap):
        raise NotImplementedError

    @property
    def parameter(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Uzawa(UpdateKind):
    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")

    def __call__(self, lam, gap):
        return lam + self.rho * gap

    @property
    def parameter(self):
        return self.rho


@dataclass(frozen=True)
class PenaltySplit(UpdateKind):
    k_n: float

    def __post_init__(self):
        if not self.k_n > 0:
            raise ValueError(f"k_N must be positive, got {self.k_n}")

    def __call__(self, lam, gap):
        return self.k_n * gap

    @property
    def parameter(self):
        return self.k_n


@dataclass(frozen=True)
class RegularizedUzawa(UpdateKind):
    rho: float
    k_n: float

    def __post_init__(self):
        if not (self.rho > 0 and self.k_n > 0):
            raise ValueError("rho and k_N must be positive")

    def __call__(self, lam, gap):
        return lam + self.rho * (gap - lam / self.k_n)

    @property
    def parameter(self):
        return self.rho


def make_update(name, value, k_n=None):
    """Build an update from its configuration name (``uzawa``, ``penalty`` or
    ``regularized_uzawa``, the last one needing `k_n`)."""
    name = name.lower()
    if name == "uzawa":
        return Uzawa(float(value))
    if name in ("penalty", "penalty_split"):
        return PenaltySplit(float(value))
    if name in ("regularized_uzawa", "regularized"):
        if k_n is None:
            raise ValueError("regularized_uzawa needs k_n")
        return RegularizedUzawa(float(value), float(k_n))
    raise ValueError(f"unknown update {name!r}")


def uzawa_upper_bound(K, B=None, use_unit_B_norm=True, f=None, seed=linalg.DEFAULT_SEED):
    """Sufficient upper bound ``2 mu_min(K) / ||B||_2`` for the Uzawa parameter.

    With `use_unit_B_norm` (the default) the norm of ``B`` is taken as 1.
    """
    mu = linalg.min_eigenvalue_estimate(K, f=f, seed=seed)
    if use_unit_B_norm:
        norm = 1.0
    else:
        if B is None:
            raise ValueError("B is required when use_unit_B_norm is False")
        norm = linalg.spectral_norm_estimate(B, seed=seed)
    return 2.0 * mu / norm
