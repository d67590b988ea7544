"""Lattice surrogate of the free field.

A :class:`Lattice` is a square grid of spacing ``h`` whose nodes inside the
domain carry the field; all other nodes are held at zero (Dirichlet).  The
raw field has covariance ``A^{-1}`` where ``A`` is the five-point Laplacian
(``4`` on the diagonal, ``-1`` between neighbours).  For the square this is
synthesised in the sine eigenbasis; for the disk a sparse factorisation of
``A`` is solved against edge noise ``b = D^T xi`` (so ``Cov(b) = A``).

Since ``A^{-1}`` approximates ``G / (2 pi)``, the field is multiplied by a
calibration factor near ``sqrt(2 pi)``; :func:`calibrate_grid` fixes it by
matching the variance of a circle average to ``-log eps + log R``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..domain import DISK, SQUARE, Domain, as_complex, circle_inside, log_conformal_radius
from ..errors import GmcError
from ..rng import check_seed, replicate_rng

STREAM = 1
DEFAULT_CALIBRATION = math.sqrt(2 * math.pi)
MIN_N = 16

# factors set by calibrate_grid(..., store=True), keyed by (domain, shape, h)
_STORE: dict = {}


class Lattice:
    """Grid nodes ``origin + h (ix + i iy)``; ``mask`` marks nodes inside the domain.

    Use :meth:`square` (``N`` interior nodes per side, boundary nodes at the
    edges) or :meth:`disk` (``n`` cells across the diameter, nodes at cell
    centres) rather than the constructor.
    """

    def __init__(self, domain: Domain, h, origin, shape, mask):
        self.domain = domain
        self.h = float(h)
        self.origin = complex(origin)
        self.shape = tuple(shape)
        self.mask = np.asarray(mask, dtype=bool)
        self._lu = None

    @classmethod
    def square(cls, N, domain=None):
        domain = domain or Domain.square()
        if domain.kind != SQUARE:
            raise GmcError("bad-domain", "square lattice needs a square domain")
        if N < MIN_N:
            raise GmcError("bad-grid", f"grid size must be at least {MIN_N}")
        h = domain.scale / (N + 1)
        return cls(domain, h, domain.from_unit(0) + h * (1 + 1j), (N, N), np.ones((N, N), bool))

    @classmethod
    def disk(cls, n, domain=None):
        domain = domain or Domain.disk()
        if domain.kind != DISK:
            raise GmcError("bad-domain", "disk lattice needs a disk domain")
        if n < MIN_N:
            raise GmcError("bad-grid", f"grid size must be at least {MIN_N}")
        h = 2 * domain.scale / n
        origin = domain.center - domain.scale * (1 + 1j) + 0.5 * h * (1 + 1j)
        ix = np.arange(n)
        z = origin + h * (ix[None, :] + 1j * ix[:, None])
        return cls(domain, h, origin, (n, n), domain.contains(z))

    @classmethod
    def for_domain(cls, domain: Domain, n):
        """Square lattice with ``n`` interior nodes or disk lattice with ``n`` cells."""
        return cls.square(n, domain) if domain.kind == SQUARE else cls.disk(n, domain)

    @property
    def spectral(self):
        return self.domain.kind == SQUARE and bool(self.mask.all())

    @property
    def key(self):
        return (self.domain, self.shape, self.h)

    @cached_property
    def grid_points(self):
        ny, nx = self.shape
        return self.origin + self.h * (np.arange(nx)[None, :] + 1j * np.arange(ny)[:, None])

    @property
    def points(self):
        """Complex positions of the inside nodes, row-major."""
        return self.grid_points[self.mask]

    @property
    def size(self):
        return int(self.mask.sum())

    @cached_property
    def _eig(self):
        ny, nx = self.shape
        ly = 4 * np.sin(np.pi * np.arange(1, ny + 1) / (2 * (ny + 1))) ** 2
        lx = 4 * np.sin(np.pi * np.arange(1, nx + 1) / (2 * (nx + 1))) ** 2
        return ly[:, None] + lx[None, :]

    @cached_property
    def laplacian(self):
        """Five-point Dirichlet Laplacian on the inside nodes (sparse CSC)."""
        ny, nx = self.shape
        idx = -np.ones(self.shape, dtype=np.int64)
        idx[self.mask] = np.arange(self.size)
        rows, cols = [], []
        for a, b in ((idx[:, :-1], idx[:, 1:]), (idx[:-1, :], idx[1:, :])):
            ok = (a >= 0) & (b >= 0)
            rows += [a[ok], b[ok]]
            cols += [b[ok], a[ok]]
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        off = sp.csc_matrix((-np.ones(r.size), (r, c)), shape=(self.size, self.size))
        return (off + 4 * sp.identity(self.size, format="csc")).tocsc()

    def _factor(self):
        if self._lu is None:
            self._lu = spla.splu(self.laplacian, permc_spec="MMD_AT_PLUS_A")
        return self._lu

    def green_apply(self, v):
        """``A^{-1} v`` for a grid array ``v`` (values off the mask ignored)."""
        v = np.where(self.mask, v, 0.0)
        if self.spectral:
            c = scipy.fft.dstn(v, type=1, norm="ortho")
            return scipy.fft.idstn(c / self._eig, type=1, norm="ortho")
        out = np.zeros(self.shape)
        out[self.mask] = self._factor().solve(v[self.mask])
        return out

    def raw_sample(self, rng):
        """One raw field (covariance ``A^{-1}``) as a grid array."""
        ny, nx = self.shape
        if self.spectral:
            xi = rng.standard_normal(self.shape)
            return scipy.fft.idstn(xi / np.sqrt(self._eig), type=1, norm="ortho")
        xh = rng.standard_normal((ny, nx + 1))
        xv = rng.standard_normal((ny + 1, nx))
        b = xh[:, 1:] - xh[:, :-1] + xv[1:, :] - xv[:-1, :]
        out = np.zeros(self.shape)
        out[self.mask] = self._factor().solve(b[self.mask])
        return out

    def frac_index(self, z):
        z = (np.asarray(z) - self.origin) / self.h
        return z.real, z.imag


@dataclass(frozen=True, eq=False)
class GridField:
    """Calibrated lattice field.  ``values`` already include ``calibration``.

    ``fill`` is the value assumed beyond the stored array; it is zero for
    sampled fields and may be set for injected test fields.
    """

    values: np.ndarray
    calibration: float
    lattice: Lattice
    seed: int | None = None
    replicate: int = 0
    fill: float = 0.0

    def __post_init__(self):
        if self.values.shape != self.lattice.shape:
            raise GmcError("bad-grid", "field shape does not match the lattice")
        if not np.all(np.isfinite(self.values)):
            raise GmcError("bad-grid", "field has non-finite values")

    @property
    def N(self):
        return self.values.shape[0]

    @property
    def raw(self):
        return self.values / self.calibration


def stored_calibration(lattice: Lattice):
    return _STORE.get(lattice.key, DEFAULT_CALIBRATION)


def sample_lattice(lattice: Lattice, seed, replicate=0, calibration=None):
    seed = check_seed(seed)
    c = stored_calibration(lattice) if calibration is None else float(calibration)
    raw = lattice.raw_sample(replicate_rng(seed, replicate, STREAM))
    return GridField(c * raw, c, lattice, seed, replicate)


def sample_grid(N, seed, replicate=0, calibration=None, domain=None):
    """Zero-boundary field on the ``N x N`` interior nodes of the square.

    The calibration factor defaults to the one stored by the last
    :func:`calibrate_grid` call for this lattice, else ``sqrt(2 pi)``.
    """
    return sample_lattice(Lattice.square(N, domain), seed, replicate, calibration)


# ------------------------------------------------------------ interpolation

def bilinear(values, lattice: Lattice, z, fill=0.0):
    """Bilinear interpolation of a grid array at complex points ``z``."""
    ny, nx = lattice.shape
    padded = np.pad(values, 1, constant_values=fill)
    fx, fy = lattice.frac_index(z)
    x0 = np.floor(fx)
    y0 = np.floor(fy)
    tx = fx - x0
    ty = fy - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    xa = np.clip(x0, -1, nx) + 1
    xb = np.clip(x0 + 1, -1, nx) + 1
    ya = np.clip(y0, -1, ny) + 1
    yb = np.clip(y0 + 1, -1, ny) + 1
    return ((1 - ty) * ((1 - tx) * padded[ya, xa] + tx * padded[ya, xb])
            + ty * ((1 - tx) * padded[yb, xa] + tx * padded[yb, xb]))


def _ring(M):
    return np.exp(2j * np.pi * np.arange(M) / M)


def circle_average_on_grid(field: GridField, x, eps, M=64):
    """Average of the bilinearly interpolated field over clipped circles.

    ``x`` may hold many centres (complex or ``(..., 2)``); nodes outside the
    domain are dropped and the rest weighted equally, as in
    :func:`gmcsim.domain.circle_nodes`.
    """
    if not eps > 0:
        raise GmcError("bad-radius", "radius must be positive")
    z = np.asarray(as_complex(x))
    shape = z.shape
    z = z.ravel()
    out = np.empty(z.size)
    ring = eps * _ring(M)
    for s in range(0, z.size, 8192):
        pts = z[s:s + 8192, None] + ring[None, :]
        keep = field.lattice.domain.contains(pts)
        cnt = keep.sum(axis=1)
        if np.any(cnt == 0):
            raise GmcError("empty-circle", f"circle of radius {eps} misses the domain")
        vals = bilinear(field.values, field.lattice, pts, field.fill)
        out[s:s + 8192] = np.where(keep, vals, 0.0).sum(axis=1) / cnt
    return out.reshape(shape) if shape else float(out[0])


def _splat(lattice: Lattice, pts, wts):
    # adjoint of bilinear(): spread weights onto the grid
    ny, nx = lattice.shape
    out = np.zeros((ny + 2, nx + 2))
    fx, fy = lattice.frac_index(pts)
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    tx = fx - x0
    ty = fy - y0
    for dx, dy, w in ((0, 0, (1 - tx) * (1 - ty)), (1, 0, tx * (1 - ty)), (0, 1, (1 - tx) * ty), (1, 1, tx * ty)):
        xi = np.clip(x0 + dx, -1, nx) + 1
        yi = np.clip(y0 + dy, -1, ny) + 1
        np.add.at(out, (yi, xi), wts * w)
    return out[1:-1, 1:-1]


def circle_weights(lattice: Lattice, x, eps, M=64):
    """Grid array ``w`` with ``circle_average_on_grid(f, x, eps) = sum(w * f)``."""
    z = complex(as_complex(x))
    pts = z + eps * _ring(M)
    keep = lattice.domain.contains(pts)
    if not keep.any():
        raise GmcError("empty-circle", f"circle of radius {eps} about {z} misses the domain")
    return _splat(lattice, pts[keep], np.full(keep.sum(), 1.0 / keep.sum()))


def raw_circle_variance(lattice: Lattice, x, eps, M=64):
    """Exact variance of the raw lattice circle average, ``w^T A^{-1} w``."""
    w = circle_weights(lattice, x, eps, M)
    return float(np.sum(w * lattice.green_apply(w)))


def target_variance(domain: Domain, x, eps):
    return -math.log(eps) + float(log_conformal_radius(domain, x))


def calibrate_lattice(lattice: Lattice, eps, n_reps=2000, seed=0, M=64, method="empirical", x=None, store=False):
    """Calibration factor for ``lattice``; see :func:`calibrate_grid`."""
    x = lattice.domain.center if x is None else complex(as_complex(x))
    target = target_variance(lattice.domain, x, eps)
    if method == "exact":
        var = raw_circle_variance(lattice, x, eps, M)
    elif method == "empirical":
        seed = check_seed(seed)
        w = circle_weights(lattice, x, eps, M)
        vals = np.array([np.sum(w * lattice.raw_sample(replicate_rng(seed, i, STREAM))) for i in range(n_reps)])
        var = float(np.mean(vals**2))  # the field is centred
    else:
        raise GmcError("bad-method", f"unknown calibration method {method!r}")
    if not (var > 0 and np.isfinite(var)) or not target > 0:
        raise GmcError("calibration-failed", f"variance estimate {var!r} against target {target!r}")
    c = math.sqrt(target / var)
    if store:
        _STORE[lattice.key] = c
    return c


def calibrate_grid(N, eps, n_reps=2000, seed=0, M=64, method="empirical", store=True, domain=None):
    """Factor matching the centre circle-average variance to ``-log eps + log R``.

    Parameters
    ----------
    N : int
        Interior nodes per side of the square lattice.
    eps : float
        Circle radius, in ``[4/N, 1/4]`` relative to the side.
    n_reps : int
        Replicates for the empirical variance (``method="empirical"``).
    method : {"empirical", "exact"}
        ``"exact"`` evaluates the quadratic form ``w^T A^{-1} w`` instead of
        sampling.
    store : bool
        Keep the factor for later :func:`sample_grid` calls on this lattice.
    """
    lat = Lattice.square(N, domain)
    rel = eps / lat.domain.scale
    if not 4.0 / N - 1e-12 <= rel <= 0.25 + 1e-12:
        raise GmcError("parameter-out-of-range", f"eps must lie in [4/N, 1/4], got {eps}")
    return calibrate_lattice(lat, eps, n_reps, seed, M, method, store=store)


# --------------------------------------------------- lattice circle averages

class LatticeAverager:
    """Circle averages at every lattice node for a fixed set of radii.

    Full circles are computed for all nodes at once by FFT correlation with
    a bilinearly splatted ring, which equals :func:`circle_average_on_grid`
    exactly.  For circles leaving the domain the dropped nodes are removed
    through a precomputed sparse correction and the sum renormalised by the
    number of kept nodes.
    """

    def __init__(self, lattice: Lattice, radii, M=64):
        self.lattice = lattice
        self.radii = np.atleast_1d(np.asarray(radii, dtype=float))
        self.M = M
        ny, nx = lattice.shape
        K = int(np.ceil(self.radii.max() / lattice.h)) + 2
        self.K = K
        self.fshape = (scipy.fft.next_fast_len(ny + K), scipy.fft.next_fast_len(nx + K, real=True))
        self._kernels = [self._kernel(e) for e in self.radii]
        self._clip = [self._clipped(e) for e in self.radii]

    def _kernel(self, eps):
        h = self.lattice.h
        off = eps * _ring(self.M) / h
        ox, oy = off.real, off.imag
        x0 = np.floor(ox).astype(int)
        y0 = np.floor(oy).astype(int)
        tx, ty = ox - x0, oy - y0
        ker = np.zeros(self.fshape)
        # correlation avg[p] = sum_o k[o] f[p + o] is convolution with k[-o]
        for dx, dy, w in ((0, 0, (1 - tx) * (1 - ty)), (1, 0, tx * (1 - ty)), (0, 1, (1 - tx) * ty), (1, 1, tx * ty)):
            np.add.at(ker, (-(y0 + dy) % self.fshape[0], -(x0 + dx) % self.fshape[1]), w / self.M)
        return scipy.fft.rfft2(ker)

    def _clipped(self, eps):
        lat = self.lattice
        gp = lat.grid_points
        part = lat.mask & ~circle_inside(lat.domain, gp, eps)
        rows = np.flatnonzero(part)
        if rows.size == 0:
            return rows, None, None
        ring = eps * _ring(self.M)
        ny, nx = lat.shape
        cnt = np.empty(rows.size)
        data, ri, ci = [], [], []
        flat = gp.ravel()
        for s in range(0, rows.size, 4096):
            r = rows[s:s + 4096]
            pts = flat[r][:, None] + ring[None, :]
            keep = lat.domain.contains(pts)
            cnt[s:s + 4096] = keep.sum(axis=1)
            k, j = np.nonzero(~keep)
            if k.size == 0:
                continue
            fx, fy = lat.frac_index(pts[k, j])
            x0 = np.floor(fx).astype(np.int64)
            y0 = np.floor(fy).astype(np.int64)
            tx, ty = fx - x0, fy - y0
            for dx, dy, w in ((0, 0, (1 - tx) * (1 - ty)), (1, 0, tx * (1 - ty)), (0, 1, (1 - tx) * ty), (1, 1, tx * ty)):
                xi, yi = x0 + dx, y0 + dy
                ok = (xi >= 0) & (xi < nx) & (yi >= 0) & (yi < ny) & (w != 0)
                ok[ok] = lat.mask[yi[ok], xi[ok]]
                data.append(w[ok] / self.M)
                ri.append(s + k[ok])
                ci.append(yi[ok] * nx + xi[ok])
        if np.any(cnt == 0):
            raise GmcError("empty-circle", f"a circle of radius {eps} about a lattice node misses the domain")
        corr = sp.csr_matrix((np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))), shape=(rows.size, ny * nx))
        return rows, corr, self.M / cnt

    def __call__(self, values):
        """``(len(radii), ny, nx)`` array of circle averages (zero off the mask)."""
        ny, nx = self.lattice.shape
        F = scipy.fft.rfft2(values, s=self.fshape)
        out = np.empty((self.radii.size, ny, nx))
        flat_vals = values.ravel()
        for i, ker in enumerate(self._kernels):
            a = scipy.fft.irfft2(F * ker, s=self.fshape)[:ny, :nx]
            rows, corr, scale = self._clip[i]
            if rows.size:
                a = a.copy()
                af = a.reshape(-1)
                af[rows] = (af[rows] - corr @ flat_vals) * scale
            out[i] = np.where(self.lattice.mask, a, 0.0)
        return out
