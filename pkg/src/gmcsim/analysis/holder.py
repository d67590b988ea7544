"""Holder exponent of a parameterised family from sup-increments per dyadic scale."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import GmcError

MIN_PAIRS = 30


def line_distance(a, b):
    """Metric on ``(theta, u)`` pairs: ``|du| + min(|dtheta|, pi - |dtheta|)``."""
    dt = np.abs(a[..., 0] - b[..., 0]) % np.pi
    return np.abs(a[..., 1] - b[..., 1]) + np.minimum(dt, np.pi - dt)



@dataclass(frozen=True)
class HolderReport:
    scales: list
    sup_increments: list
    pair_counts: list
    beta_hat: float
    residual: float
    degenerate: bool = False

    def to_dict(self):
        return {"scales": self.scales, "sup_increments": self.sup_increments, "pair_counts": self.pair_counts,
                "beta_hat": self.beta_hat, "residual": self.residual, "degenerate": self.degenerate}


def holder_exponent(params, values, metric=None, min_scales=3, min_pairs=MIN_PAIRS):
    """Regress ``log2`` of the largest increment in each dyadic distance band.

    Pairs with ``2^{-j-1} < d <= 2^{-j}`` form band ``j``; bands with fewer
    than ``min_pairs`` pairs are dropped.  ``beta_hat`` is the slope of
    ``log2 sup|Y_s - Y_t|`` against ``log2 2^{-j}``.  A family with no
    variation is reported as degenerate with ``beta_hat = inf``.

    Parameters
    ----------
    params : array_like
        Parameters, shape ``(K,)`` or ``(K, dim)``.
    values : array_like, shape (K,)
    metric : callable, optional
        ``metric(a, b)`` on broadcast parameter arrays; defaults to the
        absolute difference (summed over coordinates).
    """
    P = np.asarray(params, dtype=float)
    Y = np.asarray(values, dtype=float)
    if P.shape[0] != Y.size:
        raise GmcError("fit-failed", "parameters and values differ in length")
    if P.ndim == 1:
        P = P[:, None]
    metric = metric or (lambda a, b: np.abs(a - b).sum(axis=-1))
    K = Y.size
    i, j = np.triu_indices(K, 1)
    bands = {}
    for s in range(0, i.size, 1_000_000):
        a, b = i[s:s + 1_000_000], j[s:s + 1_000_000]
        d = metric(P[a], P[b])
        inc = np.abs(Y[a] - Y[b])
        ok = d > 0
        band = np.floor(-np.log2(d[ok]) + 1e-12).astype(int)
        for bj in np.unique(band):
            sel = band == bj
            cnt, mx = bands.get(bj, (0, 0.0))
            bands[bj] = (cnt + int(sel.sum()), max(mx, float(inc[ok][sel].max())))
    keep = sorted(bj for bj, (c, _) in bands.items() if c >= min_pairs)
    if len(keep) < min_scales:
        raise GmcError("fit-failed", f"only {len(keep)} dyadic bands with at least {min_pairs} pairs")
    scales = [2.0**-bj for bj in keep]
    sups = [bands[bj][1] for bj in keep]
    counts = [bands[bj][0] for bj in keep]
    if max(sups) == 0:
        return HolderReport(scales, sups, counts, math.inf, 0.0, True)
    if min(sups) <= 0:
        raise GmcError("fit-failed", "zero increment at some scale")
    x = np.log2(scales)
    y = np.log2(sups)
    coef = np.polyfit(x, y, 1)
    res = float(np.sqrt(np.mean((np.polyval(coef, x) - y) ** 2)))
    return HolderReport(scales, sups, counts, float(coef[0]), res)
