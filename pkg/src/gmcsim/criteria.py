"""Closed-form threshold algebra for moment exponents and the uniform-convergence condition."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import GmcError


def s_exponent(alpha1, gamma, p):
    """Moment-decay exponent ``s_{alpha1, gamma}(p)``.

    ``(alpha1 - gamma^2 p / 2)(p - 1)`` for ``1 <= p <= 2`` and the minimum
    of that and ``(alpha1 - gamma^2) p / 2`` for ``p > 2``.
    """
    if not p >= 1:
        raise GmcError("invalid-p", f"p must be at least 1, got {p}")
    a = (alpha1 - gamma * gamma * p / 2) * (p - 1)
    if p <= 2:
        return a
    return min((alpha1 - gamma * gamma) * p / 2, a)


def _need_gamma(gamma):
    if gamma == 0:
        raise GmcError("gamma-zero", "gamma must be positive")
    if gamma < 0:
        raise GmcError("parameter-out-of-range", "gamma must be positive")


def m_value(alpha1, gamma):
    """``m(alpha1, gamma) = (alpha1 / gamma - gamma / 2)^2 / 2``."""
    _need_gamma(gamma)
    return 0.5 * (alpha1 / gamma - gamma / 2) ** 2


def _radicand(lam, k, gamma):
    r = 4 * k * k * gamma * gamma + 2 * k * (1 - gamma * gamma) * lam
    if r < 0:
        raise GmcError("negative-radicand", f"4k^2 g^2 + 2k(1 - g^2) lambda = {r} < 0")
    return r


def n_value(lam, k, gamma):
    """``n(lambda, k, gamma)``; tends to ``k / lambda`` as ``gamma -> 0``."""
    if not lam > 0 or k < 1 or gamma < 0:
        raise GmcError("parameter-out-of-range", "need lambda > 0, k >= 1, gamma >= 0")
    g2 = gamma * gamma
    return ((4 * k * k - lam * k) / lam**2) * g2 + (2 * k / lam**2) * gamma * math.sqrt(_radicand(lam, k, gamma)) + k / lam


def p_star(alpha1, gamma):
    """Maximiser ``alpha1 / gamma^2 + 1/2`` of ``s_exponent`` in ``p``."""
    _need_gamma(gamma)
    return alpha1 / gamma**2 + 0.5


def q_star(lam, k, gamma):
    """Minimiser of ``(g^2 q^2 + (1 - g^2) q) / (lambda q - 2k)`` over ``q > 2k / lambda``."""
    _need_gamma(gamma)
    if not lam > 0:
        raise GmcError("parameter-out-of-range", "lambda must be positive")
    r = 4 * k * k + 2 * k * (1 / gamma**2 - 1) * lam
    if r < 0:
        raise GmcError("negative-radicand", f"radicand {r} < 0")
    return (2 * k + math.sqrt(r)) / lam


@dataclass(frozen=True)
class ThresholdInput:
    alpha1: float
    alpha2: float
    alpha2prime: float
    k: int
    gamma: float

    def __post_init__(self):
        if not self.alpha1 > 0:
            raise GmcError("parameter-out-of-range", "alpha1 must be positive")
        if self.alpha2 < 0 or self.alpha2prime < 0:
            raise GmcError("parameter-out-of-range", "alpha2 and alpha2prime must be nonnegative")
        if int(self.k) != self.k or self.k < 1:
            raise GmcError("parameter-out-of-range", "k must be a positive integer")
        _need_gamma(self.gamma)
        if not self.lam > 0:
            raise GmcError("parameter-out-of-range", "lambda = min(alpha2, 2 alpha2prime) must be positive")
        if not self.k > self.lam / 2:
            raise GmcError("parameter-out-of-range", "k must exceed lambda / 2")

    @property
    def lam(self):
        return min(self.alpha2, 2 * self.alpha2prime)


class MCond(NamedTuple):
    margin: float
    holds: bool


def check_mcond(inp: ThresholdInput) -> MCond:
    """``(m - n, m > n)`` for the given exponents."""
    margin = m_value(inp.alpha1, inp.gamma) - n_value(inp.lam, inp.k, inp.gamma)
    return MCond(margin, margin > 0)


def critical_gamma(lam, k, alpha1, tol=1e-13, grid=4000):
    """Smallest ``gamma`` in ``(0, sqrt(2 alpha1))`` where ``m = n``.

    The margin ``m - n`` is positive near zero and negative at the right
    end (where ``m`` vanishes), so the first sign change on a grid is
    refined by bisection.
    """
    if not lam > 0 or not k > lam / 2 or not alpha1 > 0:
        raise GmcError("parameter-out-of-range", "need lambda > 0, k > lambda / 2, alpha1 > 0")
    top = math.sqrt(2 * alpha1)

    def f(g):
        return m_value(alpha1, g) - n_value(lam, k, g)

    gs = np.linspace(0, top, grid + 1)[1:]
    vals = np.array([f(g) for g in gs])
    flips = np.nonzero((vals[:-1] > 0) & (vals[1:] <= 0))[0]
    if vals[0] <= 0 or flips.size == 0:
        raise GmcError("no-root", "margin m - n does not change sign")
    lo, hi = gs[flips[0]], gs[flips[0] + 1]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gamma_star_polynomial(g):
    """``33 g^8 + 344 g^6 - 488 g^4 - 160 g^2 + 16`` (case lambda=1, k=2, alpha1=1)."""
    g2 = g * g
    return (((33 * g2 + 344) * g2 - 488) * g2 - 160) * g2 + 16


def threshold_report(inp: ThresholdInput):
    """Everything derivable from one :class:`ThresholdInput`, as a dict."""
    mc = check_mcond(inp)
    out = {
        "alpha1": inp.alpha1, "alpha2": inp.alpha2, "alpha2prime": inp.alpha2prime, "k": inp.k,
        "gamma": inp.gamma, "lambda": inp.lam,
        "m": m_value(inp.alpha1, inp.gamma), "n": n_value(inp.lam, inp.k, inp.gamma),
        "p_star": p_star(inp.alpha1, inp.gamma), "q_star": q_star(inp.lam, inp.k, inp.gamma),
        "s_at_p_star": s_exponent(inp.alpha1, inp.gamma, p_star(inp.alpha1, inp.gamma)),
        "margin": mc.margin, "mcond": bool(mc.holds),
    }
    try:
        out["critical_gamma"] = critical_gamma(inp.lam, inp.k, inp.alpha1)
    except GmcError:
        out["critical_gamma"] = None
    return out
