"""Slice masses of planar GMC along chords: the projection densities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..domain import Domain, Line, support_interval
from ..errors import GmcError
from ..gmc import GridLadder, _reweight
from ..measures import chord_atoms


@dataclass(frozen=True, eq=False)
class ProjectionField:
    """``Y[i, j]`` is the GMC mass of the chord ``(theta[i], u[j])``."""

    theta: np.ndarray
    u: np.ndarray
    Y: np.ndarray
    support: np.ndarray
    gamma: float
    level: int | None = None
    planar_mass: float | None = None

    def integrated(self):
        """Trapezoid integral of each row over ``u``."""
        return np.trapezoid(self.Y, self.u, axis=1) if hasattr(np, "trapezoid") else np.trapz(self.Y, self.u, axis=1)

    def fubini_errors(self):
        """Relative gap between each integrated row and the planar mass."""
        if self.planar_mass is None:
            raise GmcError("fit-failed", "no planar mass recorded")
        return np.abs(self.integrated() - self.planar_mass) / self.planar_mass

    def rows(self):
        for i, t in enumerate(self.theta):
            for j, u in enumerate(self.u):
                yield float(t), float(u), float(self.Y[i, j])


def chord_atom_table(domain: Domain, theta, u, h):
    """Concatenated chord atoms of a ``(theta, u)`` grid plus per-chord offsets."""
    pts, wts, counts = [], [], []
    for t in theta:
        for v in u:
            try:
                a = chord_atoms(domain, Line(t, v), h)
            except GmcError as exc:
                if exc.code != "no-intersection":
                    raise
                a = None
            n = 0 if a is None else len(a)
            counts.append(n)
            if n:
                pts.append(a.points)
                wts.append(a.weights)
    pts = np.concatenate(pts) if pts else np.empty(0, complex)
    wts = np.concatenate(wts) if wts else np.empty(0)
    return pts, wts, np.array(counts)


def _segment_sums(vals, counts):
    out = np.zeros(counts.size)
    nz = counts > 0
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    if vals.size:
        out[nz] = np.add.reduceat(vals, starts[nz])
    return out


def projection_field(domain: Domain, gamma, theta_grid, u_grid, h, seed=0, level=5, cells=512,
                     replicate=0, ladder: GridLadder | None = None, M=64):
    """Chord masses of one coupled lattice field at level ``level``.

    Every chord atom and every lattice node is weighted by the same field
    sample, so ``planar_mass`` (the area GMC mass over lattice nodes) can be
    compared with the ``u``-integral of each row.  At ``gamma = 0`` no
    field is drawn and ``Y`` is the chord length.
    """
    theta = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    u = np.atleast_1d(np.asarray(u_grid, dtype=float))
    if theta.size == 0 or u.size == 0:
        raise GmcError("parameter-out-of-range", "parameter grids must be nonempty")
    if gamma < 0:
        raise GmcError("parameter-out-of-range", "gamma must be nonnegative")
    sup = np.array([support_interval(domain, t) for t in theta])
    pts, wts, counts = chord_atom_table(domain, theta, u, h)
    if gamma == 0:
        Y = _segment_sums(wts, counts).reshape(theta.size, u.size)
        return ProjectionField(theta, u, Y, sup, 0.0, None, domain.area)
    gl = ladder or GridLadder(domain, cells, [level], M)
    hit = np.nonzero(gl.levels == level)[0]
    if hit.size == 0:
        raise GmcError("parameter-out-of-range", f"level {level} is not on the lattice ladder")
    j = int(hit[0])
    f = gl.field(seed, replicate)
    vals = _reweight(wts, gl.point_values(f, pts, j), level, gamma)
    Y = _segment_sums(vals, counts).reshape(theta.size, u.size)
    node_vals = gl.node_values(f)[j]
    planar = float(np.sum(_reweight(np.full(node_vals.size, gl.h**2), node_vals, level, gamma)))
    return ProjectionField(theta, u, Y, sup, float(gamma), level, planar)
