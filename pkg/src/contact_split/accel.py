"""One-step acceleration operators for the dual fixed-point iteration.

Each step maps the current update ``lam_hat`` (and a small history held in
:class:`AccelState`) to an extrapolated multiplier.  The caller projects the
result and then records the projected value with :meth:`AccelState.commit`,
so ``lam_prev`` always holds the iterate actually used by the solve step.

Schemes
-------
``fista_ar``      Nesterov momentum with gradient-based adaptive restart.
``anderson1``     one-history Anderson mixing (alternate secant).
``anderson1_ar``  ``anderson1`` guarded by the same restart test.
``cs``            Crossed-Secant, i.e. dynamic Aitken relaxation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SCHEMES",
    "PLACEMENTS",
    "RESTART_RULES",
    "AccelState",
    "default_placement",
    "restart_test",
    "fista_ar_step",
    "anderson1_step",
    "anderson1_ar_step",
    "crossed_secant_step",
    "barzilai_borwein_step",
    "plain_step",
    "accelerate",
]

SCHEMES = ("none", "fista_ar", "anderson1", "anderson1_ar", "cs")
# "before_after": project the update before and after acceleration (accelerate F = Pi o G)
# "after_only":   accelerate G itself and project only the result
PLACEMENTS = ("before_after", "after_only")
MINIT_ACCEL = 2
SECANT_EPS = 1e-300
# "as_written": accelerate when gap . (lam_hat - lam_hat_prev) <= 0
# "ascent":     accelerate when gap . (lam_hat - lam_hat_prev) >= 0, i.e. the
#               gradient restart test stated for dual ascent with gap = B U - D
RESTART_RULES = ("as_written", "ascent")

_ALIASES = {
    "": "none",
    "fista": "fista_ar",
    "fista+ar": "fista_ar",
    "anderson": "anderson1",
    "anderson-1": "anderson1",
    "anderson1+ar": "anderson1_ar",
    "anderson-1+ar": "anderson1_ar",
    "crossed_secant": "cs",
    "crossed-secant": "cs",
}


def canonical_scheme(name):
    name = (name or "none").lower()
    name = _ALIASES.get(name, name)
    if name not in SCHEMES:
        raise ValueError(f"unknown acceleration scheme {name!r}; expected one of {SCHEMES}")
    return name


def default_placement(scheme):
    """Recommended projection placement: Crossed-Secant accelerates the smooth
    update, the momentum schemes accelerate the projected one."""
    return "after_only" if canonical_scheme(scheme) == "cs" else "before_after"


@dataclass(frozen=True)
class AccelState:
    """History needed by the one-step schemes after iteration ``iteration``.

    ``delta_prev`` is the fixed-point residual ``lam_hat_prev - lam_prev2``;
    it is refreshed at every iteration, including restarts and iterations run
    before acceleration starts.
    """

    lam_hat_prev: np.ndarray
    lam_prev: np.ndarray
    lam_prev2: np.ndarray
    delta_prev: np.ndarray
    tau_prev: float = 1.0
    iteration: int = 0
    beta: float = 0.0
    accelerated: bool = False

    @classmethod
    def start(cls, lam0):
        lam0 = np.asarray(lam0, dtype=float)
        return cls(lam_hat_prev=lam0, lam_prev=lam0, lam_prev2=lam0,
                   delta_prev=np.zeros_like(lam0), tau_prev=1.0, iteration=0)

    def commit(self, lam):
        """Replace the stored current iterate by its projected value."""
        return AccelState(self.lam_hat_prev, lam, self.lam_prev2, self.delta_prev, self.tau_prev,
                          self.iteration, self.beta, self.accelerated)


def _advance(state, lam_hat, lam, delta, tau, beta, accelerated):
    return AccelState(lam_hat_prev=lam_hat, lam_prev=lam, lam_prev2=state.lam_prev,
                      delta_prev=delta, tau_prev=tau, iteration=state.iteration + 1,
                      beta=beta, accelerated=accelerated)


def restart_test(gap, lam_hat, lam_hat_prev, rule="as_written"):
    """True when the accelerated branch should be taken.

    With ``rule="as_written"`` the test is
    ``(B U - D) . (lam_hat - lam_hat_prev) <= 0``; ``rule="ascent"`` flips the
    inequality so momentum is kept while the update moves along the gap.
    """
    dot = float(np.dot(gap, lam_hat - lam_hat_prev))
    if rule == "as_written":
        return dot <= 0.0
    if rule == "ascent":
        return dot >= 0.0
    raise ValueError(f"unknown restart rule {rule!r}; expected one of {RESTART_RULES}")


def plain_step(state, lam_hat):
    """Unaccelerated update that still maintains the residual history."""
    delta = lam_hat - state.lam_prev
    return lam_hat, _advance(state, lam_hat, lam_hat, delta, state.tau_prev, 0.0, False)


def fista_ar_step(state, lam_hat, gap, rule="as_written"):
    if restart_test(gap, lam_hat, state.lam_hat_prev, rule):
        tau = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * state.tau_prev ** 2))
        beta = (state.tau_prev - 1.0) / tau
        lam = lam_hat + beta * (lam_hat - state.lam_hat_prev)
        accelerated = True
    else:
        tau, beta, lam, accelerated = 1.0, 0.0, lam_hat, False
    delta = lam_hat - state.lam_prev
    return lam, _advance(state, lam_hat, lam, delta, tau, beta, accelerated)


def _anderson_beta(delta, delta_prev):
    diff = delta - delta_prev
    denom = float(np.dot(diff, diff))
    if math.sqrt(denom) < SECANT_EPS:
        return None
    return float(np.dot(-diff, delta)) / denom


def anderson1_step(state, lam_hat):
    delta = lam_hat - state.lam_prev
    beta = _anderson_beta(delta, state.delta_prev)
    if beta is None:
        return lam_hat, _advance(state, lam_hat, lam_hat, delta, state.tau_prev, 0.0, False)
    lam = lam_hat + beta * (lam_hat - state.lam_hat_prev)
    return lam, _advance(state, lam_hat, lam, delta, state.tau_prev, beta, True)


def anderson1_ar_step(state, lam_hat, gap, rule="as_written"):
    if restart_test(gap, lam_hat, state.lam_hat_prev, rule):
        return anderson1_step(state, lam_hat)
    return plain_step(state, lam_hat)


def crossed_secant_step(state, lam_hat):
    """Crossed-Secant step; ``beta`` in the returned state, ``omega = 1 - beta``.

    The update is evaluated as the relaxation
    ``lam = lam_prev + omega * delta`` with
    ``omega = (lam_prev2 - lam_prev) . (delta - delta_prev) / ||delta - delta_prev||^2``,
    which equals ``lam_hat - beta * delta`` for
    ``beta = (lam_hat - lam_hat_prev) . (delta - delta_prev) / ||delta - delta_prev||^2``
    but avoids cancelling two large terms when ``delta`` dwarfs ``lam``.
    """
    delta = lam_hat - state.lam_prev
    diff = delta - state.delta_prev
    denom = float(np.dot(diff, diff))
    if math.sqrt(denom) < SECANT_EPS:
        return lam_hat, _advance(state, lam_hat, lam_hat, delta, state.tau_prev, 0.0, False)
    omega = float(np.dot(state.lam_prev2 - state.lam_prev, diff)) / denom
    lam = state.lam_prev + omega * delta
    return lam, _advance(state, lam_hat, lam, delta, state.tau_prev, 1.0 - omega, True)


def barzilai_borwein_step(lam_prev, lam_prev2, g, g_prev, rho=None):
    """Barzilai-Borwein iterate ``lam_prev - alpha * g`` for the generalized
    gradient ``g = B U - D``, with
    ``alpha = (lam_prev - lam_prev2) . (g - g_prev) / ||g - g_prev||^2``.

    A degenerate secant (``g == g_prev``) falls back to a plain gradient step
    of size `rho` (or no step when `rho` is None).
    """
    y = np.asarray(g, dtype=float) - np.asarray(g_prev, dtype=float)
    denom = float(np.dot(y, y))
    if math.sqrt(denom) < SECANT_EPS:
        return lam_prev + (rho * g if rho is not None else 0.0)
    alpha = float(np.dot(lam_prev - lam_prev2, y)) / denom
    return lam_prev - alpha * g


def accelerate(scheme, state, lam_hat, gap, rule="as_written"):
    """Dispatch one acceleration step by scheme name; `rule` selects the
    restart test of the guarded schemes."""
    if scheme == "cs":
        return crossed_secant_step(state, lam_hat)
    if scheme == "fista_ar":
        return fista_ar_step(state, lam_hat, gap, rule)
    if scheme == "anderson1":
        return anderson1_step(state, lam_hat)
    if scheme == "anderson1_ar":
        return anderson1_ar_step(state, lam_hat, gap, rule)
    return plain_step(state, lam_hat)
