"""Base measures reduced to finite atom lists.

Every measure the package handles (area on the domain, length on a chord
or a curve prefix, self-similar IFS measures) is represented by an
:class:`AtomList`: points with positive weights.  GMC reweighting acts on
atoms only.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .domain import Curve, Domain, Line, as_complex, chord_of
from .errors import BudgetError, GmcError

IFS_BUDGET = 10**7


@dataclass(frozen=True, eq=False)
class AtomList:
    """Weighted points.  ``points`` are complex; ``provenance`` describes the source."""

    points: np.ndarray
    weights: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(as_complex(self.points) if np.size(self.points) else np.empty(0, complex)))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if z.shape != w.shape:
            raise GmcError("bad-atoms", "points and weights differ in length")
        if np.any(~(w > 0)) or not np.all(np.isfinite(w)):
            raise GmcError("bad-atoms", "weights must be positive and finite")
        object.__setattr__(self, "points", z)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.points.size

    @property
    def total_mass(self):
        return float(math.fsum(self.weights))

    def check_in(self, domain: Domain):
        if not np.all(domain.contains(self.points, closed=True)):
            raise GmcError("point-outside-domain", "atoms must lie in the closed domain")
        return self

    def subset(self, mask):
        return AtomList(self.points[mask], self.weights[mask], dict(self.provenance))

    # ---- serialisation
    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["x", "y", "weight"])
        for z, w in zip(self.points, self.weights):
            wr.writerow([f"{z.real:.17g}", f"{z.imag:.17g}", f"{w:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, provenance=None):
        rows = list(csv.reader(io.StringIO(text)))[1:]
        a = np.array(rows, dtype=float).reshape(-1, 3)
        return cls(a[:, 0] + 1j * a[:, 1], a[:, 2], provenance or {})

    def to_jsonl(self):
        lines = [json.dumps({"provenance": self.provenance, "total_mass": self.total_mass, "count": len(self)})]
        lines += [json.dumps([float(z.real), float(z.imag), float(w)]) for z, w in zip(self.points, self.weights)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text):
        lines = text.strip().splitlines()
        head = json.loads(lines[0])
        a = np.array([json.loads(s) for s in lines[1:]], dtype=float).reshape(-1, 3)
        return cls(a[:, 0] + 1j * a[:, 1], a[:, 2], head.get("provenance", {}))


def empty_atoms(provenance=None):
    return AtomList(np.empty(0, complex), np.empty(0), provenance or {})


# ----------------------------------------------------------------- area

def lebesgue_atoms(domain: Domain, h):
    """Cell-centre atoms of weight ``h**2`` on the grid anchored at the bounding box.

    Cells whose centre is strictly interior are kept, so the total mass
    approaches the area with an error of order ``h * perimeter``.
    """
    if not 0 < h <= 0.5 * domain.scale:
        raise GmcError("parameter-out-of-range", f"mesh size must lie in (0, {0.5 * domain.scale}], got {h}")
    x0, x1, y0, y1 = domain.bbox()
    nx = int(round((x1 - x0) / h))
    if abs(nx * h - (x1 - x0)) > 1e-9 * domain.scale:
        nx = int(math.ceil((x1 - x0) / h))
    xs = x0 + (np.arange(nx) + 0.5) * h
    ys = y0 + (np.arange(nx) + 0.5) * h
    z = (xs[None, :] + 1j * ys[:, None]).ravel()
    z = z[domain.contains(z)]
    return AtomList(z, np.full(z.size, h * h), {"measure": "lebesgue", "h": h, "domain": domain.kind})


# --------------------------------------------------------------- chords

def _segment_cells(length, h, anchor):
    # cells [anchor + k h - h/2, anchor + k h + h/2] clipped to [0, length]
    if length <= 0:
        return np.empty(0), np.empty(0)
    kmin = math.floor((0 - anchor) / h + 0.5)
    kmax = math.ceil((length - anchor) / h - 0.5)
    k = np.arange(kmin, kmax + 1)
    lo = np.clip(anchor + (k - 0.5) * h, 0, length)
    hi = np.clip(anchor + (k + 0.5) * h, 0, length)
    keep = hi - lo > 1e-14 * max(length, 1.0)
    lo, hi = lo[keep], hi[keep]
    return 0.5 * (lo + hi), hi - lo


def chord_atoms(domain: Domain, line: Line, h, anchor=None):
    """Length measure on ``line`` intersected with ``D``.

    Cells of length ``h`` are laid out from the chord midpoint (or from the
    point of the line nearest ``anchor``), truncated at the endpoints; each
    atom sits at the centre of its (possibly truncated) cell and carries its
    length, so the total mass is the chord length.
    """
    if not h > 0:
        raise GmcError("parameter-out-of-range", "mesh size must be positive")
    ch = chord_of(domain, line)
    prov = {"measure": "chord", "theta": line.theta, "u": line.u, "h": h}
    if ch.length <= 0:
        return empty_atoms(prov)
    p, q = ch.endpoints
    e = (q - p) / ch.length
    if anchor is None:
        a = 0.5 * ch.length
    else:
        a = ((complex(as_complex(anchor)) - p) * np.conj(e)).real
    s, w = _segment_cells(ch.length, h, a)
    return AtomList(p + s * e, w, prov)


# --------------------------------------------------------------- curves

def curve_atoms(curve: Curve, t, h):
    """Arc-length measure on the prefix ``curve([a, t])``.

    Cells of length ``h`` start at ``a``, so prefixes are nested: the atoms
    for ``t`` are those for ``t' > t`` up to the last, truncated, cell.
    """
    a, b = curve.interval
    if not a - 1e-12 <= t <= b + 1e-12:
        raise GmcError("parameter-out-of-range", f"t={t} outside [{a}, {b}]")
    if not h > 0:
        raise GmcError("parameter-out-of-range", "mesh size must be positive")
    length = min(max(t - a, 0.0), b - a)
    prov = {"measure": "curve", "kind": curve.kind, "t": float(t), "h": h}
    if length <= 0:
        return empty_atoms(prov)
    s, w = _segment_cells(length, h, 0.5 * h)
    return AtomList(curve.point_at(a + s), w, prov)


# ------------------------------------------------------------------ IFS

@dataclass(frozen=True)
class IfsSpec:
    """Similitudes ``g_i(z) = r_i e^{i angle_i} z + x_i`` with probabilities ``p``."""

    ratios: tuple
    angles: tuple
    translations: tuple
    probs: tuple
    depth: int

    def __post_init__(self):
        r = np.asarray(self.ratios, dtype=float)
        m = r.size
        if m < 2:
            raise GmcError("bad-ifs", "an IFS needs at least two maps")
        for name in ("angles", "translations", "probs"):
            if len(getattr(self, name)) != m:
                raise GmcError("bad-ifs", f"{name} must have {m} entries")
        p = np.asarray(self.probs, dtype=float)
        if np.any(r <= 0) or np.any(r >= 1):
            raise GmcError("bad-ifs", "contraction ratios must lie in (0, 1)")
        if np.any(p <= 0) or abs(p.sum() - 1) > 1e-12:
            raise GmcError("bad-ifs", "probabilities must be positive and sum to one")
        if self.depth < 0:
            raise GmcError("bad-ifs", "depth must be nonnegative")
        object.__setattr__(self, "translations", tuple(complex(as_complex(x)) for x in self.translations))
        object.__setattr__(self, "ratios", tuple(float(v) for v in r))
        object.__setattr__(self, "angles", tuple(float(v) for v in self.angles))
        object.__setattr__(self, "probs", tuple(float(v) for v in p))

    @property
    def m(self):
        return len(self.ratios)

    @property
    def multipliers(self):
        return np.array(self.ratios) * np.exp(1j * np.array(self.angles))

    def check_domain(self, domain: Domain):
        """Each map must send the bounding box of ``D`` into the closed domain."""
        x0, x1, y0, y1 = domain.bbox()
        box = np.array([x0 + 1j * y0, x1 + 1j * y0, x1 + 1j * y1, x0 + 1j * y1])
        img = self.multipliers[:, None] * box[None, :] + np.array(self.translations)[:, None]
        if not np.all(domain.contains(img, closed=True)):
            raise GmcError("bad-ifs", "a map sends the bounding box outside the domain")
        return self

    def overlaps(self, domain: Domain):
        """Heuristic: True if two depth-one images of the bounding box intersect."""
        x0, x1, y0, y1 = domain.bbox()
        box = np.array([x0 + 1j * y0, x1 + 1j * y0, x1 + 1j * y1, x0 + 1j * y1])
        img = self.multipliers[:, None] * box[None, :] + np.array(self.translations)[:, None]
        lo = np.stack([img.real.min(1), img.imag.min(1)], 1)
        hi = np.stack([img.real.max(1), img.imag.max(1)], 1)
        for i in range(self.m):
            for j in range(i + 1, self.m):
                if np.all(lo[i] < hi[j]) and np.all(lo[j] < hi[i]):
                    return True
        return False


def ifs_atoms(spec: IfsSpec, domain: Domain | None = None):
    """Images of the domain centre under all depth-``d`` words, weighted by ``prod p``.

    The atom for word ``i_1 ... i_d`` is ``g_{i_1} o ... o g_{i_d}(x_0)``;
    it lies within ``r_max^d diam(D)`` of the coding-map image.
    """
    domain = domain or Domain.square()
    spec.check_domain(domain)
    if spec.m ** spec.depth > IFS_BUDGET:
        raise BudgetError("ifs-too-deep", f"{spec.m}^{spec.depth} atoms exceed the budget {IFS_BUDGET}")
    mult = spec.multipliers
    tr = np.array(spec.translations)
    p = np.array(spec.probs)
    z = np.array([domain.center])
    w = np.array([1.0])
    for _ in range(spec.depth):
        # the newly applied map is the outermost one, i.e. the first letter
        z = (mult[None, :] * z[:, None] + tr[None, :]).ravel()
        w = (w[:, None] * p[None, :]).ravel()
    # reorder so that the first letter varies slowest
    if spec.depth:
        shape = (spec.m,) * spec.depth
        order = np.arange(z.size).reshape(shape).transpose(range(spec.depth - 1, -1, -1)).ravel()
        z, w = z[order], w[order]
    err = max(spec.ratios) ** spec.depth * domain.diameter
    return AtomList(z, w, {"measure": "ifs", "depth": spec.depth, "m": spec.m, "position_error": err})


def growth_exponent(spec: IfsSpec):
    """``min_i log p_i / log r_i``."""
    return float(min(math.log(p) / math.log(r) for p, r in zip(spec.probs, spec.ratios)))


# ----------------------------------------------------------- diagnostics

def ball_masses(atoms: AtomList, centers, radii):
    """Atom mass in closed balls: array ``(len(centers), len(radii))``."""
    pts = np.stack([atoms.points.real, atoms.points.imag], 1)
    tree = cKDTree(pts)
    c = np.atleast_1d(as_complex(centers))
    cxy = np.stack([c.real, c.imag], 1)
    out = np.empty((c.size, len(radii)))
    for j, r in enumerate(radii):
        nb = tree.query_ball_point(cxy, r, return_sorted=False)
        out[:, j] = [atoms.weights[i].sum() for i in nb]
    return out


def estimate_A1(atoms: AtomList, radii, max_centers=2000):
    """Fit ``max_x nu(B(x, r)) ~ C1 r^alpha1``; returns ``(C1_hat, alpha1_hat)``.

    Centres are the atoms themselves, thinned to ``max_centers`` evenly
    spaced ones (the heaviest atoms are always kept).
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2 or len(atoms) < 10:
        raise GmcError("fit-failed", "need at least two radii and ten atoms")
    n = len(atoms)
    idx = np.unique(np.concatenate([np.linspace(0, n - 1, min(n, max_centers)).astype(int),
                                    np.argsort(atoms.weights)[-50:]]))
    mx = ball_masses(atoms, atoms.points[idx], radii).max(axis=0)
    if np.any(mx <= 0) or np.unique(radii).size < 2:
        raise GmcError("fit-failed", "degenerate ball masses")
    slope, icpt = np.polyfit(np.log(radii), np.log(mx), 1)
    if not np.isfinite(slope):
        raise GmcError("fit-failed", "non-finite slope")
    return float(math.exp(icpt)), float(slope)


# -------------------------------------------------------------- families

FAMILY_KINDS = ("chords", "curve-prefix", "ifs-path")
_DEFAULT_META = {
    "chords": {"alpha1": 1.0, "alpha2": 1.0, "alpha2prime": 0.5},
    "curve-prefix": {"alpha1": 1.0, "alpha2": 1.0, "alpha2prime": 1.0},
    "ifs-path": {"alpha1": None, "alpha2": 1.0, "alpha2prime": None},
}


@dataclass(frozen=True)
class FamilySpec:
    """A parameterised family ``t -> nu_t`` on a parameter grid.

    ``grid`` is an array of parameters: ``(theta, u)`` pairs for chords,
    prefix ends ``t`` for curves, path times ``t`` for IFS paths (whose
    translations move as ``x_i + t v_i``).  The Holder metadata default to
    the analytic values of the built-in families.
    """

    kind: str
    grid: np.ndarray
    alpha1: float | None = None
    alpha2: float | None = None
    alpha2prime: float | None = None
    k: int = 2
    C2: float = 1.0
    curve: Curve | None = None
    ifs: IfsSpec | None = None
    velocities: tuple = ()

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise GmcError("bad-family", f"kind must be one of {FAMILY_KINDS}")
        g = np.asarray(self.grid, dtype=float)
        if g.size == 0:
            raise GmcError("bad-family", "parameter grid is empty")
        object.__setattr__(self, "grid", g)
        for key, val in _DEFAULT_META[self.kind].items():
            if getattr(self, key) is None and val is not None:
                object.__setattr__(self, key, val)
        if self.kind == "ifs-path" and self.alpha1 is None and self.ifs is not None:
            object.__setattr__(self, "alpha1", growth_exponent(self.ifs))
        for key in ("alpha1", "alpha2", "C2"):
            v = getattr(self, key)
            if v is not None and not v > 0:
                raise GmcError("bad-family", f"{key} must be positive")
        if self.k < 1:
            raise GmcError("bad-family", "k must be at least 1")

    def atoms(self, t, domain: Domain, h=None):
        """Atom list of ``nu_t``."""
        if self.kind == "chords":
            theta, u = t
            return chord_atoms(domain, Line(theta, u), h)
        if self.kind == "curve-prefix":
            return curve_atoms(self.curve, float(t), h)
        tr = tuple(x + float(t) * complex(as_complex(v)) for x, v in zip(self.ifs.translations, self.velocities))
        spec = IfsSpec(self.ifs.ratios, self.ifs.angles, tr, self.ifs.probs, self.ifs.depth)
        return ifs_atoms(spec, domain)
