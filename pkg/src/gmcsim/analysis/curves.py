"""Quantum length of curves and the multifractal interval."""

from __future__ import annotations

import math

import numpy as np

from ..domain import Curve, Domain, log_conformal_radius
from ..errors import BudgetError, GmcError
from ..gff.exact import sample_values
from ..gff.nodes import NodeSet, build_covariance
from ..gmc import EXACT_BUDGET, _reweight
from ..measures import curve_atoms
from ..rng import check_seed


def quantum_length(curve: Curve, gamma, t_grid, h, seed, domain: Domain | None = None, level=6,
                   reps=1, M=64, budget=EXACT_BUDGET):
    """GMC mass ``L(t)`` of the prefixes ``curve([a, t])``.

    One field is sampled jointly over the atoms of the whole curve.  The
    mass of each cell is spread uniformly along it, so ``L`` is a strictly
    increasing piecewise-linear function with ``L(a) = 0``.

    Returns
    -------
    ndarray, shape (reps, len(t_grid))
    """
    domain = domain or Domain.disk()
    check_seed(seed)
    curve.check_inside(domain)
    a, b = curve.interval
    t = np.asarray(t_grid, dtype=float)
    if np.any(t < a - 1e-12) or np.any(t > b + 1e-12):
        raise GmcError("parameter-out-of-range", "t grid leaves the curve interval")
    atoms = curve_atoms(curve, b, h)
    if gamma == 0:
        w = np.tile(atoms.weights, (reps, 1))
    else:
        if len(atoms) > budget:
            raise BudgetError("ladder-too-large", f"{len(atoms)} atoms exceed the budget {budget}")
        nodes = NodeSet(atoms.points, np.full(len(atoms), 2.0**-level), domain)
        vals = sample_values(build_covariance(nodes, M), reps, seed)
        w = _reweight(atoms.weights[None, :], vals, level, gamma)
    # cell k covers [a + k h, a + k h + len_k]
    lo = a + np.concatenate([[0.0], np.cumsum(atoms.weights)[:-1]])
    frac = np.clip((t[:, None] - lo[None, :]) / atoms.weights[None, :], 0.0, 1.0)
    return w @ frac.T


def mean_length_oracle(curve: Curve, gamma, domain: Domain, t=None, n=4096):
    """``int R(x, D)^{gamma^2/2} ds`` along ``curve([a, t])`` (midpoint rule)."""
    a, b = curve.interval
    t = b if t is None else t
    s = a + (np.arange(n) + 0.5) * (t - a) / n
    r = np.exp(gamma**2 / 2 * log_conformal_radius(domain, curve.point_at(s)))
    return float(r.sum() * (t - a) / n)


def multifractal_interval(gamma):
    """``((sqrt2 - gamma/sqrt2)^2, (sqrt2 + gamma/sqrt2)^2)``."""
    if gamma < 0:
        raise GmcError("parameter-out-of-range", "gamma must be nonnegative")
    r = math.sqrt(2)
    return ((r - gamma / r) ** 2, (r + gamma / r) ** 2)
