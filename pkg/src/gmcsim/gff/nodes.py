"""Circle-average node sets and their exact covariance.

The covariance of two circle averages is the double average of the Green
function over the two (clipped, renormalised) circles.  Writing
``G(z, w) = -log|z - w| + H(z, w)`` with ``H`` harmonic in each variable,
a full circle inside ``D`` can be averaged in closed form:

* the average of ``-log|z - w|`` over ``w`` on a circle of radius ``d``
  about ``y`` is ``-log max(|z - y|, d)``;
* the average of ``H`` is its value at the centre.

Pairs of full circles therefore reduce to one smooth one-dimensional
integral (only when the circles cross).  A clipped circle is integrated on
its exact inside arcs with Gauss-Legendre panels graded towards the arc
ends, where the regular part has a logarithmic singularity; the diagonal
term of a clipped node treats ``-log|z - w|`` through its Fourier series on
the circle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.special

from ..domain import Domain, as_complex, circle_arcs, circle_inside, circle_nodes, harmonic_part
from ..errors import GmcError

DEFAULT_M = 64
JITTER_START = 1e-12
JITTER_MAX_REL = 1e-6

_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)
# graded panel edges on [0, 1], refined towards 0
_PANELS = np.concatenate([[0.0], 2.0 ** -np.arange(16, -1, -1)])
FOURIER_TERMS = 20000


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Ordered circle-average nodes ``(center, radius)`` in a domain."""

    centers: np.ndarray
    radii: np.ndarray
    domain: Domain
    _index: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        c = np.atleast_1d(as_complex(self.centers)).ravel()
        r = np.broadcast_to(np.asarray(self.radii, dtype=float), c.shape).copy()
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)
        if np.any(r <= 0):
            raise GmcError("bad-radius", "node radii must be positive")
        self.domain.require_interior(c)
        keys = np.stack([c.real, c.imag, r], axis=1)
        if len(np.unique(keys, axis=0)) != len(c):
            raise GmcError("duplicate-node", "node set contains duplicate (center, radius) pairs")
        full = self.full
        for k in np.nonzero(~full)[0]:
            circle_nodes(self.domain, c[k], r[k], DEFAULT_M)

    def __len__(self):
        return self.centers.size

    @property
    def full(self):
        """Mask of nodes whose whole circle lies inside the domain."""
        return circle_inside(self.domain, self.centers, self.radii)

    @classmethod
    def ladder(cls, domain, points, radii):
        """All ``(point, radius)`` pairs, radius-major (one block per radius)."""
        z = np.atleast_1d(as_complex(points)).ravel()
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        return cls(np.tile(z, radii.size), np.repeat(radii, z.size), domain)

    def index_of(self, centers, radius):
        """Positions of ``(center, radius)`` nodes; ``node-mismatch`` if any is absent."""
        if self._index is None:
            idx = {(a, b, c): k for k, (a, b, c) in enumerate(zip(self.centers.real, self.centers.imag, self.radii))}
            object.__setattr__(self, "_index", idx)
        z = np.atleast_1d(as_complex(centers)).ravel()
        rr = np.broadcast_to(np.asarray(radius, dtype=float), z.shape)
        try:
            return np.array([self._index[(a, b, c)] for a, b, c in zip(z.real, z.imag, rr)], dtype=int)
        except KeyError as exc:
            raise GmcError("node-mismatch", f"no node for {exc.args[0]}") from None


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Covariance of a node set with the diagonal jitter needed to factor it."""

    matrix: np.ndarray
    jitter: float
    factor: np.ndarray
    nodes: NodeSet | None = None

    @property
    def size(self):
        return self.matrix.shape[0]


def log_double_average(r, e, d):
    """Mean of ``log|z - w|`` for ``z``, ``w`` uniform on two full circles.

    Circles of radii ``e`` and ``d`` with centres ``r`` apart.  Closed form
    ``log max(r, e, d)`` unless the circles cross, in which case a graded
    Gauss-Legendre rule handles the remaining smooth integral.
    """
    shape = np.broadcast(r, e, d).shape
    r, e, d = (np.array(a, dtype=float).ravel() for a in np.broadcast_arrays(r, e, d))
    out = np.log(np.maximum(np.maximum(r, e), d))
    cross = (r < e + d) & (r > np.abs(e - d))
    if np.any(cross):
        rc, ec, dc = r[cross], e[cross], d[cross]
        cphi = (ec**2 + rc**2 - dc**2) / (2 * ec * rc)
        phi = np.arccos(np.clip(cphi, -1.0, 1.0))
        span = np.pi - phi
        lo = _PANELS[:-1]
        hi = _PANELS[1:]
        # nodes: (pairs, panels, gl)
        tloc = lo[:, None] + (hi - lo)[:, None] * (_GL_X + 1) / 2
        wloc = (hi - lo)[:, None] * _GL_W / 2
        t = phi[:, None, None] + span[:, None, None] * tloc[None]
        f = 0.5 * np.log(ec[:, None, None] ** 2 + rc[:, None, None] ** 2 - 2 * ec[:, None, None] * rc[:, None, None] * np.cos(t))
        integral = span * np.einsum("pkg,kg->p", f, wloc)
        out[cross] = (phi * np.log(dc) + integral) / np.pi
    return out.reshape(shape) if shape else float(out[0])


def _full_full(domain, ca, ra, cb, rb):
    return -log_double_average(np.abs(ca - cb), ra, rb) + np.real(harmonic_part(domain, ca, cb))


def _graded_rule(M):
    # panel edges on [0, 1] refined geometrically towards both ends
    levels = max(3, int(np.log2(M)) + 2)
    half = 0.5 * 2.0 ** -np.arange(levels - 1, -1, -1)
    edges = np.concatenate([[0.0], half, 1.0 - half[::-1][1:], [1.0]])
    lo, hi = edges[:-1], edges[1:]
    x = (lo[:, None] + (hi - lo)[:, None] * (_GL_X8 + 1) / 2).ravel()
    w = ((hi - lo)[:, None] * _GL_W8 / 2).ravel()
    return x, w


_GL_X8, _GL_W8 = np.polynomial.legendre.leggauss(8)


def arc_quadrature(domain, center, radius, M=DEFAULT_M):
    """Nodes and weights of the unit-mass uniform measure on the inside arcs.

    Returns
    -------
    points : complex ndarray
    weights : ndarray summing to one
    arcs : ``(k, 2)`` angle intervals
    """
    arcs = circle_arcs(domain, center, radius)
    x, w = _graded_rule(M)
    span = arcs[:, 1] - arcs[:, 0]
    ang = (arcs[:, :1] + span[:, None] * x).ravel()
    wt = (span[:, None] * w).ravel() / span.sum()
    pts = complex(as_complex(center)) + radius * np.exp(1j * ang)
    inside = domain.contains(pts)
    return pts[inside], wt[inside] / wt[inside].sum(), arcs


# Pairs at least SEPARATION * (ra + rb) apart see a kernel that is smooth on
# both circles at scale >= 2 (ra + rb); Gauss panels of at most pi/2 then give
# the pair covariance to about 1e-12 with far fewer nodes.
SEPARATION = 3.0
_COARSE_SPAN = np.pi / 2


def _separated(ca, ra, cb, rb):
    return np.abs(ca - cb) >= SEPARATION * (ra + rb)


def coarse_quadrature(domain, center, radius):
    """Uniform arc measure on panels of at most ``pi / 2`` with 8 Gauss nodes each."""
    arcs = circle_arcs(domain, center, radius)
    ang, wt = [], []
    for a0, a1 in arcs:
        k = max(1, int(np.ceil((a1 - a0) / _COARSE_SPAN - 1e-12)))
        edges = np.linspace(a0, a1, k + 1)
        lo, hi = edges[:-1, None], edges[1:, None]
        ang.append((lo + (hi - lo) * (_GL_X8 + 1) / 2).ravel())
        wt.append(((hi - lo) * _GL_W8 / 2).ravel())
    ang, wt = np.concatenate(ang), np.concatenate(wt)
    return complex(as_complex(center)) + radius * np.exp(1j * ang), wt / wt.sum()


def _coarse_block(domain, pa, wa, Pb, Wb):
    # pa, wa: one coarse rule; Pb, Wb: stacked (n, Q) rules padded with zero weights
    d = pa[:, None, None] - Pb[None]
    g = -np.log(np.abs(d)) + np.real(harmonic_part(domain, pa[:, None, None], Pb[None]))
    return np.einsum("i,ijk,jk->j", wa, g, Wb)


def _fourier_self(arcs, K=FOURIER_TERMS):
    # double average of -log|2 sin((t - s)/2)| for t, s uniform on the arcs
    k = np.arange(1, K + 1)
    tot = (arcs[:, 1] - arcs[:, 0]).sum()
    mu = (np.exp(1j * np.outer(k, arcs[:, 1])) - np.exp(1j * np.outer(k, arcs[:, 0]))).sum(axis=1)
    mu = mu / (1j * k * tot)
    return float(np.sum(np.abs(mu) ** 2 / k))


def _clipped_self(domain, center, radius, M):
    pts, w, arcs = arc_quadrature(domain, center, radius, M)
    reg = w @ np.real(harmonic_part(domain, pts[:, None], pts[None, :])) @ w
    return -np.log(radius) + _fourier_self(arcs) + reg


def _clipped_full(domain, pts, w, cb, rb):
    # pts, w: quadrature of a clipped circle; (cb, rb): full circles (vector)
    dist = np.abs(pts[:, None] - cb[None, :])
    g = -np.log(np.maximum(dist, rb[None, :])) + np.real(harmonic_part(domain, pts[:, None], cb[None, :]))
    return w @ g


def _arc_log_mean(z, b, d, arcs):
    """Mean of ``log|z - b - d e^{i phi}|`` over ``phi`` uniform on ``arcs``.

    Closed form through the dilogarithm: with ``rho e^{i psi} = z - b`` and
    ``q = min(rho, d) / max(rho, d)`` each arc contributes
    ``span * log max(rho, d) - Im[Li2(q e^{i(end - psi)}) - Li2(q e^{i(start - psi)})]``.
    """
    u = np.asarray(z) - b
    rho = np.abs(u)
    psi = np.angle(u)
    big = np.maximum(rho, d)
    q = np.minimum(rho, d) / big
    tot = np.zeros(u.shape)
    for a0, a1 in arcs:
        li1 = scipy.special.spence(1 - q * np.exp(1j * (a1 - psi)))
        li0 = scipy.special.spence(1 - q * np.exp(1j * (a0 - psi)))
        tot += (a1 - a0) * np.log(big) - (li1.imag - li0.imag)
    return tot / float(np.sum(arcs[:, 1] - arcs[:, 0]))


def _clipped_pair(domain, qa, qb, cb, rb):
    # qa, qb: arc quadratures (points, weights, arcs); the singular part is
    # integrated exactly over circle b so nearly coincident arcs stay accurate
    pa, wa, _ = qa
    pb, wb, arcs_b = qb
    sing = -wa @ _arc_log_mean(pa, cb, rb, arcs_b)
    return sing + wa @ np.real(harmonic_part(domain, pa[:, None], pb[None, :])) @ wb


def cov_circle_avg(domain: Domain, node_a, node_b, M=DEFAULT_M):
    """Covariance ``E[Gamma(rho_a) Gamma(rho_b)]`` of two circle averages.

    Parameters
    ----------
    node_a, node_b : tuple
        ``(center, radius)`` pairs; centres as 2-vectors or complex.
    M : int
        Quadrature order; sets the panel grading on clipped circles.

    For a full circle the diagonal value is ``-log eps + log R(x, D)``.
    """
    ca, ra = complex(as_complex(node_a[0])), float(node_a[1])
    cb, rb = complex(as_complex(node_b[0])), float(node_b[1])
    domain.require_interior(np.array([ca, cb]))
    fa, fb = bool(circle_inside(domain, ca, ra)), bool(circle_inside(domain, cb, rb))
    if fa and fb:
        return float(_full_full(domain, ca, ra, cb, rb))
    if fa:
        (ca, ra, fa), (cb, rb, fb) = (cb, rb, fb), (ca, ra, fa)
    if _separated(ca, ra, cb, rb):
        pa, wa = coarse_quadrature(domain, ca, ra)
        if fb:
            return float(_clipped_full(domain, pa, wa, np.array([cb]), np.array([rb]))[0])
        pb, wb = coarse_quadrature(domain, cb, rb)
        return float(_coarse_block(domain, pa, wa, pb[None], wb[None])[0])
    if fb:
        pa, wa, _ = arc_quadrature(domain, ca, ra, M)
        return float(_clipped_full(domain, pa, wa, np.array([cb]), np.array([rb]))[0])
    if ca == cb and ra == rb:
        return float(_clipped_self(domain, ca, ra, M))
    return float(_clipped_pair(domain, arc_quadrature(domain, ca, ra, M), arc_quadrature(domain, cb, rb, M), cb, rb))


def covariance_matrix(nodes: NodeSet, M=DEFAULT_M, chunk=250_000):
    """Dense covariance matrix of a node set (no jitter)."""
    dom = nodes.domain
    c, r = nodes.centers, nodes.radii
    n = len(nodes)
    full = nodes.full
    C = np.empty((n, n))

    fi = np.nonzero(full)[0]
    if fi.size:
        iu, ju = np.triu_indices(fi.size)
        for s in range(0, iu.size, chunk):
            a, b = fi[iu[s:s + chunk]], fi[ju[s:s + chunk]]
            v = _full_full(dom, c[a], r[a], c[b], r[b])
            C[a, b] = v
            C[b, a] = v

    ci = np.nonzero(~full)[0]
    if ci.size:
        quad = {k: arc_quadrature(dom, c[k], r[k], M) for k in ci}
        coarse = [coarse_quadrature(dom, c[k], r[k]) for k in ci]
        Q = max(len(p) for p, _ in coarse)
        # padded coarse rules; padding sits at the centre with zero weight
        CP = np.repeat(c[ci][:, None], Q, axis=1)
        CW = np.zeros((ci.size, Q))
        for i, (p, w) in enumerate(coarse):
            CP[i, :p.size] = p
            CW[i, :w.size] = w
        for i, k in enumerate(ci):
            if fi.size:
                sep = _separated(c[k], r[k], c[fi], r[fi])
                v = np.empty(fi.size)
                if sep.any():
                    v[sep] = _clipped_full(dom, *coarse[i], c[fi][sep], r[fi][sep])
                if (~sep).any():
                    v[~sep] = _clipped_full(dom, *quad[k][:2], c[fi][~sep], r[fi][~sep])
                C[k, fi] = v
                C[fi, k] = v
        for ia, k in enumerate(ci):
            C[k, k] = _clipped_self(dom, c[k], r[k], M)
            rest = np.arange(ia + 1, ci.size)
            if rest.size == 0:
                continue
            ls = ci[rest]
            sep = _separated(c[k], r[k], c[ls], r[ls])
            if sep.any():
                v = _coarse_block(dom, *coarse[ia], CP[rest[sep]], CW[rest[sep]])
                C[k, ls[sep]] = v
                C[ls[sep], k] = v
            for l in ls[~sep]:
                v = _clipped_pair(dom, quad[k], quad[l], c[l], r[l])
                C[k, l] = v
                C[l, k] = v
    return C


def build_covariance(nodes: NodeSet, M=DEFAULT_M, jitter_start=JITTER_START):
    """Covariance matrix plus lower Cholesky factor.

    Diagonal jitter starts at ``jitter_start`` and grows tenfold until the
    factorisation succeeds; beyond ``1e-6 * max(diag)`` the matrix is
    rejected with ``covariance-not-psd``.
    """
    C = covariance_matrix(nodes, M)
    jit = 0.0
    limit = JITTER_MAX_REL * float(np.max(np.diag(C)))
    trial = jitter_start
    while True:
        try:
            L = scipy.linalg.cholesky(C + jit * np.eye(len(C)) if jit else C, lower=True, check_finite=False)
            break
        except np.linalg.LinAlgError:
            if trial > limit:
                raise GmcError("covariance-not-psd", f"factorisation failed with jitter up to {jit:.3g}") from None
            jit = trial
            trial *= 10
    return CovarianceMatrix(C, jit, L, nodes)


def covariance_from_matrix(matrix, jitter_start=JITTER_START):
    """Wrap an explicit covariance matrix (for tests and custom fields)."""
    C = np.asarray(matrix, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or not np.allclose(C, C.T, atol=1e-12):
        raise GmcError("bad-covariance", "covariance must be a symmetric square matrix")
    limit = JITTER_MAX_REL * float(np.max(np.diag(C)))
    jit, trial = 0.0, jitter_start
    while True:
        try:
            L = np.linalg.cholesky(C + jit * np.eye(len(C)))
            return CovarianceMatrix(C, jit, L, None)
        except np.linalg.LinAlgError:
            if trial > limit:
                raise GmcError("covariance-not-psd", "factorisation failed") from None
            jit, trial = trial, trial * 10
