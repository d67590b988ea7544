"""GMC approximants, total masses, coupled level ladders and decay reports.

At level ``n`` the approximant reweights every atom as

    w_i = base_i * 2^{-n gamma^2 / 2} * exp(gamma * Gamma(rho_{x_i, 2^-n})).

Two backends produce the circle averages.  The exact backend samples all
``(atom, radius)`` pairs jointly from their covariance and is limited to a
few thousand nodes.  The lattice backend (:class:`GridLadder`) samples one
lattice field per replicate and takes circle averages of it at every
radius, which scales to the fine levels the decay and dimension checks
need.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .criteria import s_exponent
from .domain import Domain, as_complex
from .errors import BudgetError, GmcError
from .gff.exact import FieldSample, sample_values
from .gff.grid import Lattice, LatticeAverager, calibrate_lattice, circle_average_on_grid, sample_lattice
from .gff.nodes import NodeSet, build_covariance
from .measures import AtomList

EXACT_BUDGET = 8000


@dataclass(frozen=True, eq=False)
class GmcApproximant:
    """Reweighted atoms of one level; ``base`` keeps the original measure."""

    level: int
    gamma: float
    atoms: AtomList
    base: AtomList
    source: dict = field(default_factory=dict)

    @property
    def weights(self):
        return self.atoms.weights

    @property
    def points(self):
        return self.atoms.points


def _reweight(base_w, values, n, gamma):
    if gamma == 0:
        return base_w.copy()
    return base_w * 2.0 ** (-n * gamma * gamma / 2) * np.exp(gamma * values)


def gmc_weight(atoms: AtomList, field: FieldSample, n, gamma):
    """Level-``n`` approximant of ``atoms`` under the circle averages in ``field``.

    The field must hold a node ``(x_i, 2^-n)`` for every atom (any order);
    a field without a node table must match the atoms one to one.
    """
    if gamma < 0:
        raise GmcError("parameter-out-of-range", "gamma must be nonnegative")
    if field.nodes is not None:
        idx = field.nodes.index_of(atoms.points, 2.0**-n)
        vals = np.asarray(field.values)[idx]
    else:
        vals = np.asarray(field.values)
        if vals.size != len(atoms):
            raise GmcError("node-mismatch", "field length differs from atom count")
    w = _reweight(atoms.weights, vals, n, gamma)
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise GmcError("nonfinite-mass", "GMC weights overflowed")
    src = {"seed": field.seed, "replicate": field.replicate_index}
    return GmcApproximant(n, gamma, AtomList(atoms.points, w, dict(atoms.provenance)), atoms, src)


def total_mass(approx: GmcApproximant):
    return float(np.sum(approx.weights))


# ------------------------------------------------------------------ ladders

@dataclass(frozen=True, eq=False)
class MassLadder:
    """Total masses ``Y[r, j]`` of replicate ``r`` at level ``levels[j]``."""

    levels: np.ndarray
    Y: np.ndarray
    gamma: float
    seed: int
    tag: object = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        lv = np.asarray(self.levels, dtype=int)
        if Y.shape[1] != lv.size:
            raise GmcError("bad-ladder", "mass matrix does not match the level list")
        if np.any(~(Y > 0)):
            raise GmcError("bad-ladder", "masses must be positive")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "levels", lv)

    @property
    def reps(self):
        return self.Y.shape[0]

    def header(self):
        return {"seed": self.seed, "gamma": self.gamma, "levels": self.levels.tolist(),
                "tag": self.tag, "provenance": self.provenance}

    def to_csv(self):
        lines = ["# " + json.dumps(self.header(), sort_keys=True, default=str), "replicate,level,mass"]
        for r in range(self.reps):
            for j, n in enumerate(self.levels):
                lines.append(f"{r},{n},{self.Y[r, j]:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text):
        lines = text.splitlines()
        head = json.loads(lines[0][2:])
        rows = np.array([s.split(",") for s in lines[2:] if s], dtype=float)
        levels = np.array(head["levels"], dtype=int)
        Y = rows[:, 2].reshape(-1, levels.size)
        return cls(levels, Y, head["gamma"], head["seed"], head.get("tag"), head.get("provenance", {}))


def _check_levels(n0, n1):
    if not 1 <= n0 <= n1:
        raise GmcError("parameter-out-of-range", f"levels must satisfy 1 <= n0 <= n1, got {n0}..{n1}")
    return np.arange(n0, n1 + 1)


def mass_ladder(atoms: AtomList, domain: Domain, gamma, n0, n1, reps, seed, M=64, budget=EXACT_BUDGET, jobs=1):
    """Coupled total masses on the exact backend.

    All pairs ``(atom, 2^-n)`` for ``n0 <= n <= n1`` form one node set and
    are sampled jointly, so each replicate's row is one approximating
    sequence.
    """
    levels = _check_levels(n0, n1)
    prov = {"backend": "exact", "measure": atoms.provenance, "M": M}
    base = atoms.weights
    if gamma == 0:
        Y = np.full((reps, levels.size), np.sum(base))
        return MassLadder(levels, Y, 0.0, seed, None, prov)
    size = levels.size * len(atoms)
    if size > budget:
        raise BudgetError("ladder-too-large", f"{size} nodes exceed the exact-backend budget {budget}")
    nodes = NodeSet.ladder(domain, atoms.points, 2.0**-levels)
    cov = build_covariance(nodes, M)
    vals = sample_values(cov, reps, seed, jobs=jobs).reshape(reps, levels.size, len(atoms))
    Y = np.empty((reps, levels.size))
    for j, n in enumerate(levels):
        Y[:, j] = _reweight(base[None, :], vals[:, j, :], n, gamma).sum(axis=1)
    prov["jitter"] = cov.jitter
    return MassLadder(levels, Y, float(gamma), seed, None, prov)


class GridLadder:
    """Lattice backend for coupled circle averages at dyadic radii.

    Parameters
    ----------
    domain : Domain
    cells : int
        Lattice resolution (cells across the disk, interior nodes per side
        of the square).
    levels : sequence of int
        Radii ``2^-n`` that will be used.
    M : int
        Nodes per circle.

    Each radius gets its own calibration factor, fixed by the exact
    quadratic form ``w^T A^{-1} w`` of the centre circle average so that
    its variance equals ``-log eps + log R``; this removes the lattice bias
    of small circles from the level means.
    """

    def __init__(self, domain: Domain, cells, levels, M=64):
        self.domain = domain
        self.lattice = Lattice.for_domain(domain, cells)
        self.levels = np.asarray(levels, dtype=int)
        self.radii = 2.0 ** -self.levels.astype(float)
        if self.radii.min() < 2 * self.lattice.h - 1e-12:
            raise GmcError("parameter-out-of-range", "finest radius must be at least two lattice spacings")
        self.M = M
        self.factors = np.array([calibrate_lattice(self.lattice, e, M=M, method="exact") for e in self.radii])
        self._averager = None

    @property
    def h(self):
        return self.lattice.h

    @property
    def averager(self):
        if self._averager is None:
            self._averager = LatticeAverager(self.lattice, self.radii, self.M)
        return self._averager

    def node_atoms(self):
        """Area atoms at the lattice nodes (weight ``h**2``)."""
        pts = self.lattice.points
        return AtomList(pts, np.full(pts.size, self.h**2), {"measure": "lebesgue", "h": self.h, "lattice": True})

    def field(self, seed, replicate):
        return sample_lattice(self.lattice, seed, replicate, calibration=1.0)

    def node_values(self, field):
        """Calibrated circle averages ``(levels, nodes)`` at the lattice nodes."""
        a = self.averager(field.raw)
        return a[:, self.lattice.mask] * self.factors[:, None]

    def point_values(self, field, points, j):
        """Calibrated circle average of radius index ``j`` at arbitrary points."""
        z = np.asarray(as_complex(points))
        if z.size == 0:
            return np.empty(0)
        return self.factors[j] * circle_average_on_grid(field, z, self.radii[j], self.M) / field.calibration

    def masses(self, seed, replicate, gamma):
        """Total area masses of one replicate at every level."""
        f = self.field(seed, replicate)
        vals = self.node_values(f)
        w = self.h**2
        return np.array([np.sum(_reweight(np.full(vals.shape[1], w), v, n, gamma)) for v, n in zip(vals, self.levels)])


def grid_mass_ladder(domain: Domain, cells, gamma, n0, n1, reps, seed, M=64, jobs=1, ladder=None):
    """Coupled total area masses on the lattice backend."""
    levels = _check_levels(n0, n1)
    gl = ladder or GridLadder(domain, cells, levels, M)
    prov = {"backend": "lattice", "cells": cells, "h": gl.h, "M": M, "factors": gl.factors.tolist(),
            "measure": {"measure": "lebesgue", "h": gl.h}}
    if gamma == 0:
        Y = np.full((reps, levels.size), gl.h**2 * gl.lattice.size)
        return MassLadder(levels, Y, 0.0, seed, None, prov)

    def work(r):
        return gl.masses(seed, r, gamma)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            rows = list(ex.map(work, range(reps)))
    else:
        rows = [work(r) for r in range(reps)]
    return MassLadder(levels, np.array(rows), float(gamma), seed, None, prov)


# ------------------------------------------------------------------ report

@dataclass(frozen=True)
class ConvergenceReport:
    p: float
    levels: list
    moments: list
    slope_hat: float
    bound: float
    slack: float
    passed: bool
    degenerate: bool = False

    def to_dict(self):
        return {"p": self.p, "levels": self.levels, "moments": self.moments, "slope_hat": self.slope_hat,
                "bound": self.bound, "threshold": -self.bound + self.slack, "slack": self.slack,
                "pass": self.passed, "degenerate": self.degenerate}


def convergence_report(ladder: MassLadder, p, alpha1, slack=0.3, min_levels=4, min_reps=100):
    """Fit ``log2 E|Y_{n+1} - Y_n|^p`` against ``n``.

    Passes when the slope is at most ``-s(p) + slack``.  At ``gamma = 0``
    all increments vanish and the report is a flagged degenerate pass.
    """
    if p < 1:
        raise GmcError("invalid-p", f"p must be at least 1, got {p}")
    if ladder.levels.size < min_levels or ladder.reps < min_reps:
        raise GmcError("fit-failed", f"need at least {min_levels} levels and {min_reps} replicates")
    inc = np.abs(np.diff(ladder.Y, axis=1)) ** p
    mom = inc.mean(axis=0)
    lv = ladder.levels[:-1]
    bound = 0.0 if ladder.gamma == 0 else s_exponent(alpha1, ladder.gamma, p)
    if np.all(mom == 0):
        return ConvergenceReport(p, lv.tolist(), mom.tolist(), -math.inf, bound, slack, True, True)
    if np.any(mom <= 0):
        raise GmcError("fit-failed", "some increments vanish identically")
    slope = float(np.polyfit(lv, np.log2(mom), 1)[0])
    return ConvergenceReport(p, lv.tolist(), mom.tolist(), slope, bound, slack, bool(slope <= -bound + slack))
