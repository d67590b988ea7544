"""Planar domain geometry.

Green functions, conformal radii, clipped circles, chords of convex bodies
and the metric on the space of lines.  Two domain kinds are supported, a
disk and an axis-aligned square, each given by a translation ``offset`` and
a positive ``scale`` applied to the unit model (the unit disk centred at the
origin, or ``[0, 1]^2``).

Points are accepted either as arrays whose last axis has length 2 or as
complex numbers; internally everything is complex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GmcError

DISK = "unit-disk"
SQUARE = "unit-square"
KINDS = (DISK, SQUARE)

BOUNDARY_TOL = 1e-10

# Jacobi theta_1 with nome exp(-pi): zeros on the lattice pi*Z + i*pi*Z.
# Six terms suffice: for |Im u| <= pi the seventh is below 1e-20.
_Q = math.exp(-math.pi)
_TN = np.arange(6)
_TC = 2.0 * (-1.0) ** _TN * _Q ** ((_TN + 0.5) ** 2)
_TK = 2 * _TN + 1
_THETA1_PRIME0 = float(np.sum(_TC * _TK))


def as_complex(points):
    """Convert ``(..., 2)`` real arrays (or complex input) to complex."""
    a = np.asarray(points)
    if np.iscomplexobj(a):
        return a.astype(complex)
    a = a.astype(float)
    if a.ndim == 0 or a.shape[-1] != 2:
        raise GmcError("bad-point", f"expected trailing axis of length 2, got shape {a.shape}")
    return a[..., 0] + 1j * a[..., 1]


def as_points(z):
    """Inverse of :func:`as_complex`."""
    z = np.asarray(z)
    return np.stack([z.real, z.imag], axis=-1)


def _theta1(u):
    # sum c_n sin((2n+1) u) with the sines built from powers of e^{iu}
    u = np.asarray(u, dtype=complex)
    e = np.exp(1j * u)
    e2, inv = e * e, 1 / e
    inv2 = inv * inv
    acc = np.zeros(u.shape, complex)
    p, m = e, inv
    for c in _TC:
        acc += c * (p - m)
        p = p * e2
        m = m * inv2
    return acc / 2j


def _theta1_over_u(u):
    # theta_1(u)/u, regular at u = 0; Taylor terms avoid cancellation near 0
    u = np.asarray(u, dtype=complex)
    small = np.abs(u) < 1e-3
    out = np.empty(u.shape, complex)
    us = u[small]
    if us.size:
        x = np.multiply.outer(us, _TK) ** 2
        out[small] = (1 - x / 6 * (1 - x / 20 * (1 - x / 42))) @ (_TC * _TK)
    ub = u[~small]
    out[~small] = _theta1(ub) / ub
    return out


@dataclass(frozen=True)
class Domain:
    """A disk or square, obtained from the unit model by ``offset + scale * z``.

    ``green_method`` selects how :func:`green_function` is evaluated on the
    square: ``"theta"`` (closed form through Jacobi theta functions, exact
    to rounding) or ``"series"`` (double sine series truncated at
    ``series_terms`` per axis).
    """

    kind: str = DISK
    offset: tuple = (0.0, 0.0)
    scale: float = 1.0
    green_method: str = "theta"
    series_terms: int = 128
    _c: complex = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GmcError("bad-domain", f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.scale > 0:
            raise GmcError("bad-domain", "scale must be positive")
        if self.green_method not in ("theta", "series"):
            raise GmcError("bad-domain", f"unknown green_method {self.green_method!r}")
        off = tuple(float(v) for v in self.offset)
        object.__setattr__(self, "offset", off)
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "_c", complex(off[0], off[1]))

    @classmethod
    def disk(cls, center=(0.0, 0.0), radius=1.0):
        return cls(DISK, tuple(center), radius)

    @classmethod
    def square(cls, corner=(0.0, 0.0), side=1.0, **kw):
        return cls(SQUARE, tuple(corner), side, **kw)

    @property
    def tol(self):
        return BOUNDARY_TOL * self.scale

    @property
    def center(self):
        if self.kind == DISK:
            return self._c
        return self._c + 0.5 * self.scale * (1 + 1j)

    @property
    def diameter(self):
        return 2 * self.scale if self.kind == DISK else math.sqrt(2) * self.scale

    @property
    def area(self):
        return math.pi * self.scale**2 if self.kind == DISK else self.scale**2

    def bbox(self):
        """``(xmin, xmax, ymin, ymax)`` of the closed domain."""
        if self.kind == DISK:
            x, y, s = self.offset[0], self.offset[1], self.scale
            return (x - s, x + s, y - s, y + s)
        x, y, s = self.offset[0], self.offset[1], self.scale
        return (x, x + s, y, y + s)

    def vertices(self):
        if self.kind != SQUARE:
            raise GmcError("bad-domain", "only the square has vertices")
        return self._c + self.scale * np.array([0, 1, 1 + 1j, 1j])

    def to_unit(self, z):
        return (np.asarray(z) - self._c) / self.scale

    def from_unit(self, w):
        return self._c + self.scale * np.asarray(w)

    def boundary_distance(self, z):
        """Signed distance to the boundary, positive inside."""
        w = self.to_unit(as_complex(z) if not np.iscomplexobj(z) else z)
        if self.kind == DISK:
            d = 1.0 - np.abs(w)
        else:
            d = np.minimum(np.minimum(w.real, 1 - w.real), np.minimum(w.imag, 1 - w.imag))
        return d * self.scale

    def contains(self, z, closed=False):
        d = self.boundary_distance(z)
        return d >= -self.tol if closed else d > self.tol

    def require_interior(self, z):
        if not np.all(self.contains(z)):
            raise GmcError("point-outside-domain", "point is not strictly inside the domain")


# ---------------------------------------------------------------- Green

def _square_harmonic_unit(z, w):
    # G(z, w) + log|z - w| on [0,1]^2 via images on the lattice 2Z + 2iZ
    a = np.pi / 2
    return (
        -np.log(np.abs(_theta1_over_u(a * (z - w))))
        - math.log(a)
        - np.log(np.abs(_theta1(a * (z + w))))
        + np.log(np.abs(_theta1(a * (z - np.conj(w)))))
        + np.log(np.abs(_theta1(a * (z + np.conj(w)))))
    )


def _square_green_series(z, w, terms):
    j = np.arange(1, terms + 1)
    shape = np.broadcast(z, w).shape
    z, w = (np.broadcast_to(v, shape).ravel() for v in (z, w))
    a = np.sin(np.pi * np.multiply.outer(z.real, j)) * np.sin(np.pi * np.multiply.outer(w.real, j))
    b = np.sin(np.pi * np.multiply.outer(z.imag, j)) * np.sin(np.pi * np.multiply.outer(w.imag, j))
    kern = 1.0 / (j[:, None] ** 2 + j[None, :] ** 2)
    return (8.0 / np.pi * np.einsum("...j,jk,...k->...", a, kern, b)).reshape(shape)


def harmonic_part(domain: Domain, x, y):
    """Regular part ``G_D(x, y) + log|x - y|``; on the diagonal this is ``log R(x, D)``.

    Vectorised over broadcastable complex (or ``(..., 2)``) inputs.  No
    interior check is made, so callers must pass interior points.
    """
    z = domain.to_unit(x if np.iscomplexobj(x) else as_complex(x))
    w = domain.to_unit(y if np.iscomplexobj(y) else as_complex(y))
    if domain.kind == DISK:
        h = np.log(np.abs(1.0 - z * np.conj(w)))
    else:
        h = _square_harmonic_unit(z, w)
    return h + math.log(domain.scale)


def _green(domain, x, y):
    d = np.abs(x - y)
    if domain.kind == SQUARE and domain.green_method == "series":
        z, w = domain.to_unit(x), domain.to_unit(y)
        return _square_green_series(z, w, domain.series_terms)
    return harmonic_part(domain, x, y) - np.log(d)


def green_function(domain: Domain, x, y):
    """Dirichlet Green function normalised as ``-log|x - y| + O(1)``.

    Parameters
    ----------
    domain : Domain
    x, y : array_like
        Points (last axis 2) or complex numbers; broadcast against each other.

    Returns
    -------
    float or ndarray
    """
    zx = as_complex(x)
    zy = as_complex(y)
    domain.require_interior(zx)
    domain.require_interior(zy)
    if np.any(np.abs(zx - zy) == 0):
        raise GmcError("green-singularity", "Green function is singular on the diagonal")
    g = _green(domain, zx, zy)
    return float(g) if np.ndim(g) == 0 else g


def conformal_radius(domain: Domain, x):
    """Conformal radius ``R(x, D)``, satisfying ``dist <= R <= 4 dist``."""
    z = as_complex(x)
    domain.require_interior(z)
    w = domain.to_unit(z)
    if domain.kind == DISK:
        r = 1.0 - np.abs(w) ** 2
    else:
        r = np.exp(_square_harmonic_unit(w, w))
    r = r * domain.scale
    return float(np.real(r)) if np.ndim(r) == 0 else np.real(r)


def log_conformal_radius(domain: Domain, x):
    z = as_complex(x)
    domain.require_interior(z)
    return np.real(harmonic_part(domain, z, z))


# --------------------------------------------------------------- circles

def circle_nodes(domain: Domain, x, eps, M=64, phase=0.0):
    """Quadrature nodes of the unit-mass uniform measure on ``{y in D : |x-y| = eps}``.

    ``M`` equally spaced nodes are placed on the full circle (starting at
    angle ``phase``); those outside ``D`` are dropped and the remaining
    weights renormalised to sum to one.

    Returns
    -------
    points : ndarray of complex, shape (k,)
    weights : ndarray, shape (k,)
    """
    z = complex(as_complex(x))
    if not eps > 0:
        raise GmcError("bad-radius", "radius must be positive")
    if M < 4:
        raise GmcError("bad-quadrature", "M must be at least 4")
    ang = phase + 2 * np.pi * np.arange(M) / M
    pts = z + eps * np.exp(1j * ang)
    keep = domain.contains(pts)
    pts = pts[keep]
    if pts.size == 0:
        raise GmcError("empty-circle", f"circle of radius {eps} about {z} misses the domain")
    w = np.full(pts.size, 1.0 / pts.size)
    return pts, w


def circle_arcs(domain: Domain, x, eps):
    """Angular intervals of the circle ``|y - x| = eps`` lying inside ``D``.

    Returns an ``(k, 2)`` array of ``[start, end]`` angles with
    ``end > start``; a full circle gives ``[[0, 2 pi]]``.
    """
    z = complex(as_complex(x))
    w = complex(domain.to_unit(z))
    r = eps / domain.scale
    cuts = [0.0, 2 * np.pi]
    if domain.kind == DISK:
        a = abs(w)
        c = (1.0 - a * a - r * r) / (2 * a * r) if a > 0 else 2.0
        if -1 < c < 1:
            h = np.arccos(c)
            cuts += [np.angle(w) + h, np.angle(w) - h]
    else:
        for edge in (0.0, 1.0):
            v = (edge - w.real) / r
            if -1 < v < 1:
                cuts += [np.arccos(v), -np.arccos(v)]
            v = (edge - w.imag) / r
            if -1 < v < 1:
                cuts += [np.arcsin(v), np.pi - np.arcsin(v)]
    cuts = np.mod(cuts[2:], 2 * np.pi).tolist() + cuts[:2]
    cuts = np.unique(cuts)
    # between cuts an arc lies wholly inside or wholly outside, except at
    # tangencies where it only touches the boundary; closed probes survive both
    probe = cuts[:-1, None] + np.diff(cuts)[:, None] * np.array([0.25, 0.5, 0.75])
    keep = np.sum(domain.contains(z + eps * np.exp(1j * probe), closed=True), axis=1) >= 2
    arcs = np.stack([cuts[:-1][keep], cuts[1:][keep]], axis=1)
    if arcs.size == 0:
        raise GmcError("empty-circle", f"circle of radius {eps} about {z} misses the domain")
    merged = [list(arcs[0])]
    for a, b in arcs[1:]:
        if a <= merged[-1][1] + 1e-15:
            merged[-1][1] = b
        else:
            merged.append([a, b])
    two_pi = 2 * np.pi
    if len(merged) == 1 and merged[0][1] - merged[0][0] >= two_pi - 1e-15:
        # whole circle, possibly touching the boundary: start at the point
        # nearest to it so that panel grading sits at the tangency
        if domain.kind == DISK:
            start = np.angle(w) if w != 0 else 0.0
        else:
            gaps = [1 - w.real, 1 - w.imag, w.real, w.imag]
            start = 0.5 * np.pi * int(np.argmin(gaps))
        return np.array([[start, start + two_pi]])
    if len(merged) > 1 and merged[0][0] == 0.0 and merged[-1][1] == two_pi:
        # rejoin the arc split at angle 0
        last = merged.pop()
        merged[0] = [last[0], merged[0][1] + two_pi]
    return np.array(merged)


def circle_inside(domain: Domain, x, eps):
    """True where the closed circle of radius ``eps`` about ``x`` lies in ``D``."""
    return domain.boundary_distance(x if np.iscomplexobj(x) else as_complex(x)) > np.asarray(eps) + domain.tol


# ----------------------------------------------------------------- lines

@dataclass(frozen=True)
class Line:
    """The line ``{u e^{i(theta + pi/2)} + v e^{i theta}}``.

    ``theta`` is reduced to ``[0, pi)``; since turning the direction by
    ``pi`` flips the normal, ``u`` changes sign whenever an odd multiple of
    ``pi`` is removed.
    """

    theta: float
    u: float

    def __post_init__(self):
        k = math.floor(self.theta / math.pi)
        th = self.theta - k * math.pi
        if th >= math.pi:
            th, k = 0.0, k + 1
        u = -self.u if k % 2 else self.u
        object.__setattr__(self, "theta", float(th))
        object.__setattr__(self, "u", float(u))

    @property
    def direction(self):
        return complex(math.cos(self.theta), math.sin(self.theta))

    @property
    def normal(self):
        return complex(-math.sin(self.theta), math.cos(self.theta))

    @property
    def foot(self):
        return self.u * self.normal


@dataclass(frozen=True)
class Chord:
    line: Line
    endpoints: tuple
    length: float

    @property
    def midpoint(self):
        return 0.5 * (self.endpoints[0] + self.endpoints[1])


def line_metric(l: Line, l2: Line) -> float:
    """``|u - u'| + min(|theta - theta'|, pi - |theta - theta'|)``."""
    dt = abs(l.theta - l2.theta)
    return abs(l.u - l2.u) + min(dt, math.pi - dt)


def support_interval(domain: Domain, theta):
    """Range ``(u_minus, u_plus)`` of displacements whose line meets the closed domain."""
    n = complex(-math.sin(theta), math.cos(theta))
    if domain.kind == DISK:
        c = domain.center
        m = c.real * n.real + c.imag * n.imag
        return (m - domain.scale, m + domain.scale)
    v = domain.vertices()
    proj = v.real * n.real + v.imag * n.imag
    return (float(proj.min()), float(proj.max()))


def chord_of(domain: Domain, line: Line) -> Chord:
    """Intersection of ``line`` with the closed domain.

    A tangent line gives a chord of length zero; a line missing the domain
    raises ``no-intersection``.
    """
    e, p0 = line.direction, line.foot
    tol = domain.tol
    if domain.kind == DISK:
        c = domain.center
        t0 = ((c - p0) * np.conj(e)).real
        foot = p0 + t0 * e
        delta = abs(c - foot)
        if delta > domain.scale + tol:
            raise GmcError("no-intersection", "line misses the domain")
        half = math.sqrt(max(domain.scale**2 - delta**2, 0.0))
        ends = (foot - half * e, foot + half * e)
    else:
        x0, x1, y0, y1 = domain.bbox()
        lo, hi = -math.inf, math.inf
        for p, d, a, b in ((p0.real, e.real, x0, x1), (p0.imag, e.imag, y0, y1)):
            if abs(d) < 1e-15:
                if p < a - tol or p > b + tol:
                    raise GmcError("no-intersection", "line misses the domain")
                continue
            ta, tb = sorted(((a - p) / d, (b - p) / d))
            lo, hi = max(lo, ta), min(hi, tb)
        if lo > hi + tol:
            raise GmcError("no-intersection", "line misses the domain")
        hi = max(hi, lo)
        ends = (p0 + lo * e, p0 + hi * e)
    return Chord(line, ends, float(abs(ends[1] - ends[0])))


def chord_length(domain: Domain, theta, u):
    """Vectorised chord length ``L(l_(theta,u))``, zero for lines missing ``D``."""
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(u, dtype=float)
    if domain.kind == DISK:
        c = domain.center
        m = c.real * -np.sin(theta) + c.imag * np.cos(theta)
        d2 = domain.scale**2 - (u - m) ** 2
        return 2.0 * np.sqrt(np.clip(d2, 0.0, None))
    out = np.empty(np.broadcast(theta, u).shape)
    for idx, (t, v) in enumerate(zip(*(a.ravel() for a in np.broadcast_arrays(theta, u)))):
        try:
            out.flat[idx] = chord_of(domain, Line(t, v)).length
        except GmcError:
            out.flat[idx] = 0.0
    return out


# ---------------------------------------------------------------- curves

@dataclass(frozen=True)
class Curve:
    """Arc-length parameterised curve on ``[a, a + length]``.

    Build with :meth:`segment`, :meth:`arc` or :meth:`polyline`.
    """

    kind: str
    params: tuple
    a: float = 0.0

    @classmethod
    def segment(cls, p0, p1, a=0.0):
        return cls("segment", (complex(as_complex(p0)), complex(as_complex(p1))), float(a))

    @classmethod
    def arc(cls, center, radius, start_angle, sweep, a=0.0):
        if not radius > 0:
            raise GmcError("bad-curve", "arc radius must be positive")
        return cls("arc", (complex(as_complex(center)), float(radius), float(start_angle), float(sweep)), float(a))

    @classmethod
    def polyline(cls, nodes, a=0.0):
        z = as_complex(nodes)
        if z.ndim != 1 or z.size < 2:
            raise GmcError("bad-curve", "polyline needs at least two nodes")
        return cls("polyline", tuple(complex(v) for v in z), float(a))

    @property
    def length(self):
        if self.kind == "segment":
            return abs(self.params[1] - self.params[0])
        if self.kind == "arc":
            return self.params[1] * abs(self.params[3])
        z = np.array(self.params)
        return float(np.abs(np.diff(z)).sum())

    @property
    def interval(self):
        return (self.a, self.a + self.length)

    def point_at(self, t):
        """Curve points at parameters ``t`` (complex array)."""
        s = np.asarray(t, dtype=float) - self.a
        if self.kind == "segment":
            p0, p1 = self.params
            L = abs(p1 - p0)
            return p0 + (p1 - p0) * (s / L)
        if self.kind == "arc":
            c, r, a0, sw = self.params
            return c + r * np.exp(1j * (a0 + np.sign(sw) * s / r))
        z = np.array(self.params)
        cum = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(z)))])
        k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(z) - 2)
        seg = cum[k + 1] - cum[k]
        return z[k] + (z[k + 1] - z[k]) * ((s - cum[k]) / seg)

    def check_inside(self, domain: Domain, samples=257):
        pts = self.point_at(np.linspace(self.a, self.a + self.length, samples))
        if self.kind == "polyline":
            pts = np.concatenate([pts, np.array(self.params)])
        if not np.all(domain.contains(pts, closed=True)):
            raise GmcError("point-outside-domain", "curve leaves the closed domain")
