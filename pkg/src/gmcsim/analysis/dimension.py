"""Local dimension of GMC approximants at size-biased points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..domain import Domain
from ..errors import GmcError
from ..gmc import GmcApproximant
from ..measures import ball_masses
from ..rng import replicate_rng

STREAM = 3


@dataclass(frozen=True, eq=False)
class DimensionReport:
    slopes: np.ndarray
    points: np.ndarray
    radii: np.ndarray
    hist_edges: np.ndarray
    hist_mass: np.ndarray
    mean: float
    median: float
    target: float | None

    def to_dict(self):
        return {"mean": self.mean, "median": self.median, "target": self.target,
                "count": int(self.slopes.size), "radii": self.radii.tolist(),
                "hist_edges": self.hist_edges.tolist(), "hist_mass": self.hist_mass.tolist()}


def _slopes(logr, logm):
    x = logr - logr.mean()
    return (logm - logm.mean(axis=1, keepdims=True)) @ x / (x @ x)


def local_dimension(approx: GmcApproximant, radii, sample_points=200, seed=0, replicate=0,
                    alpha=2.0, collar=0.0, domain: Domain | None = None, mesh=None):
    """Per-point regression slopes of ``log nu(B(x, r))`` on ``log r``.

    Points are drawn from the atoms with probability proportional to their
    weight (size-biased).  With ``collar > 0`` only atoms at least that far
    from the boundary of ``domain`` are eligible.

    Parameters
    ----------
    radii : sequence of float
        Ball radii, each within ``[2 * mesh, 1/4]``.
    alpha : float
        Dimension of the base measure; the report's target is
        ``alpha - gamma^2 / 2``.
    """
    radii = np.sort(np.asarray(radii, dtype=float))
    if radii.size < 2:
        raise GmcError("fit-failed", "need at least two radii")
    mesh = mesh if mesh is not None else approx.base.provenance.get("h")
    if mesh is not None and radii[0] < 2 * mesh - 1e-12:
        raise GmcError("parameter-out-of-range", f"radii must be at least twice the mesh {mesh}")
    if radii[-1] > 0.25 + 1e-12:
        raise GmcError("parameter-out-of-range", "radii must not exceed 1/4")
    w = approx.weights
    eligible = np.ones(w.size, bool)
    if collar > 0:
        if domain is None:
            raise GmcError("parameter-out-of-range", "a collar needs the domain")
        eligible = domain.boundary_distance(approx.points) >= collar
    if not eligible.any():
        raise GmcError("fit-failed", "no atoms outside the collar")
    p = np.where(eligible, w, 0.0)
    rng = replicate_rng(seed, replicate, STREAM)
    idx = rng.choice(w.size, size=sample_points, p=p / p.sum())
    pts = approx.points[idx]
    bm = ball_masses(approx.atoms, pts, radii)
    if np.any(bm <= 0):
        raise GmcError("fit-failed", "empty ball")
    s = _slopes(np.log(radii), np.log(bm))
    if not np.all(np.isfinite(s)):
        raise GmcError("fit-failed", "non-finite slope")
    mass, edges = np.histogram(s, bins=20)
    target = None if alpha is None else alpha - approx.gamma**2 / 2
    return DimensionReport(s, pts, radii, edges, mass / mass.sum(), float(s.mean()), float(np.median(s)), target)
