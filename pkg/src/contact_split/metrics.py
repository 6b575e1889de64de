"""Accuracy and convergence measures, and the Hertz analytic reference."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple

import numpy as np

from .exceptions import InsufficientTrace, ZeroReference

__all__ = [
    "AccuracyReport",
    "HertzSolution",
    "effective_gap",
    "complementarity_measure",
    "relative_error",
    "convergence_order",
    "local_orders",
    "hertz_analytic",
    "effective_modulus",
    "accuracy_report",
]

FLAT_STEP = 1e-3


def effective_gap(gap, lam_prev):
    """Largest ``|B U - D|`` over pairs active at the start of the iteration
    (``lam_prev > 0``); zero when no pair is active."""
    gap = np.asarray(gap, dtype=float)
    active = np.asarray(lam_prev) > 0.0
    if not active.any():
        return 0.0
    return float(np.abs(gap[active]).max())


def complementarity_measure(lam, gap):
    lam = np.asarray(lam, dtype=float)
    if lam.size == 0:
        return 0.0
    return float(np.abs(lam * np.asarray(gap, dtype=float)).max())


def relative_error(q_ref, q):
    """``||q_ref - q|| / ||q_ref||``."""
    q_ref = np.asarray(q_ref, dtype=float)
    ref = np.linalg.norm(q_ref)
    if ref == 0.0:
        raise ZeroReference("reference quantity has zero norm")
    return float(np.linalg.norm(q_ref - np.asarray(q, dtype=float)) / ref)


def local_orders(trace, decreasing_only=False):
    """Local order indicators ``ln(r[i+1]/r[i]) / ln(r[i]/r[i-1])``.

    Flat steps (``|ln(r[i]/r[i-1])| < 1e-3``) and non-finite values are
    dropped.  With `decreasing_only`, only indicators of monotone triples
    ``r[i-1] > r[i] > r[i+1]`` are kept.
    """
    r = np.asarray(trace, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.diff(np.log(r))
        num, den = step[1:], step[:-1]
        p = num / den
    keep = np.isfinite(p) & (np.abs(den) >= FLAT_STEP)
    if decreasing_only:
        keep &= (num < 0) & (den < 0)
    return p[keep]


def convergence_order(trace):
    """Representative convergence order of a residual trace.

    Median of the local indicators of the monotone-decreasing triples in the
    final half of the trace, flat steps excluded.
    """
    r = np.asarray(trace, dtype=float)
    r = r[np.isfinite(r) & (r > 0)]
    if r.size < 3:
        raise InsufficientTrace(f"need at least 3 positive residuals, got {r.size}")
    tail = r[r.size // 2:] if r.size >= 6 else r
    p = local_orders(tail, decreasing_only=True)
    if p.size == 0:
        raise InsufficientTrace("no usable decreasing (non-flat) steps in the final half of the trace")
    return float(np.median(p))


def effective_modulus(E1, nu1, E2, nu2):
    return 1.0 / ((1.0 - nu1 ** 2) / E1 + (1.0 - nu2 ** 2) / E2)


class HertzSolution(NamedTuple):
    a: float
    p_max: float
    pressure: Callable


def hertz_analytic(F, R, E1, nu1, E2, nu2):
    """Hertz sphere-on-plane solution for resultant `F` and radius `R`.

    Returns the contact radius, the peak pressure and the pressure profile
    ``p(r) = p_max sqrt(1 - (r/a)^2)`` (zero outside the contact area).
    """
    if not (F > 0 and R > 0):
        raise ValueError("F and R must be positive")
    e_star = effective_modulus(E1, nu1, E2, nu2)
    a = (3.0 * F * R / (4.0 * e_star)) ** (1.0 / 3.0)
    p_max = 3.0 * F / (2.0 * math.pi * a * a)

    def pressure(r):
        s = np.clip(1.0 - (np.asarray(r, dtype=float) / a) ** 2, 0.0, None)
        return p_max * np.sqrt(s)

    return HertzSolution(a, p_max, pressure)


@dataclass
class AccuracyReport:
    effective_gap_max: float
    complementarity_max: float
    e_force: float
    e_disp: float
    convergence_order_p: float

    def to_text(self):
        return "".join(f"{k} = {v!r}\n" for k, v in asdict(self).items())

    def csv_header(self):
        return ",".join(asdict(self))

    def csv_row(self):
        return ",".join(repr(v) for v in asdict(self).values())


def accuracy_report(problem, report, U_ref=None, lam_ref=None):
    """Summarize a solve against an optional reference solution."""
    gap = problem.gap(report.U)
    e_force = e_disp = math.nan
    if lam_ref is not None:
        f_ref = problem.contact_forces(lam_ref)
        f = problem.contact_forces(report.lam)
        e_force = relative_error(f_ref, f) if np.linalg.norm(f_ref) > 0 else float(np.linalg.norm(f))
    if U_ref is not None:
        e_disp = relative_error(U_ref, report.U) if np.linalg.norm(U_ref) > 0 else float(np.linalg.norm(report.U))
    try:
        p = convergence_order(report.trace["r"])
    except InsufficientTrace:
        p = math.nan
    return AccuracyReport(
        effective_gap_max=effective_gap(gap, report.lam),
        complementarity_max=complementarity_measure(report.lam, gap),
        e_force=e_force,
        e_disp=e_disp,
        convergence_order_p=p,
    )
