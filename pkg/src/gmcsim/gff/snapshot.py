"""Binary snapshots of field samples.

Layout (little endian)::

    magic      8s   b"GMCFLD1\\0"
    version    u32
    kind       u32  0 = FieldSample, 1 = GridField
    rows, cols u32  node count and 1, or grid shape
    seed       u64
    replicate  u64
    calibration f64 (1.0 for FieldSample)
    domain     u32 kind code, f64 offset x, f64 offset y, f64 scale
    lattice    f64 h, f64 origin x, f64 origin y (zeros for FieldSample)
    digest     32s  sha256 of the run configuration
    flags      u32  bit 0: node table follows the values
    data       rows*cols f64, then optionally 3*rows f64 (x, y, radius)
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from ..domain import KINDS, Domain
from ..errors import GmcError
from .exact import FieldSample
from .grid import GridField, Lattice
from .nodes import NodeSet

MAGIC = b"GMCFLD1\0"
VERSION = 1
_HEAD = struct.Struct("<8sIIIIQQd I ddd ddd 32s I".replace(" ", ""))


def config_digest(config_bytes) -> bytes:
    if isinstance(config_bytes, str):
        config_bytes = config_bytes.encode()
    return hashlib.sha256(config_bytes or b"").digest()


def _pack(kind, rows, cols, seed, rep, cal, dom, lat_geom, digest, flags):
    return _HEAD.pack(MAGIC, VERSION, kind, rows, cols, seed or 0, rep, cal,
                      KINDS.index(dom.kind), dom.offset[0], dom.offset[1], dom.scale,
                      *lat_geom, digest, flags)


def save_snapshot(path, sample, config_bytes=b""):
    """Write a :class:`FieldSample` or :class:`GridField` to ``path``."""
    digest = config_digest(config_bytes)
    if isinstance(sample, GridField):
        lat = sample.lattice
        ny, nx = lat.shape
        head = _pack(1, ny, nx, sample.seed, sample.replicate, sample.calibration, lat.domain,
                     (lat.h, lat.origin.real, lat.origin.imag), digest, 0)
        body = [np.ascontiguousarray(sample.values, dtype="<f8").tobytes()]
    elif isinstance(sample, FieldSample):
        nodes = sample.nodes
        dom = nodes.domain if nodes is not None else Domain()
        head = _pack(0, len(sample.values), 1, sample.seed, sample.replicate_index, 1.0, dom,
                     (0.0, 0.0, 0.0), digest, int(nodes is not None))
        body = [np.asarray(sample.values, dtype="<f8").tobytes()]
        if nodes is not None:
            tab = np.stack([nodes.centers.real, nodes.centers.imag, nodes.radii], axis=1)
            body.append(tab.astype("<f8").tobytes())
    else:
        raise GmcError("bad-snapshot", f"cannot store {type(sample).__name__}")
    with open(path, "wb") as fh:
        fh.write(head)
        for b in body:
            fh.write(b)


def load_snapshot(path):
    """Inverse of :func:`save_snapshot`; returns ``(sample, digest)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEAD.size or raw[:8] != MAGIC:
        raise GmcError("bad-snapshot", "not a field snapshot")
    (_, ver, kind, rows, cols, seed, rep, cal, dk, ox, oy, sc, h, gx, gy, digest, flags) = _HEAD.unpack_from(raw)
    if ver != VERSION:
        raise GmcError("bad-snapshot", f"unsupported snapshot version {ver}")
    dom = Domain(KINDS[dk], (ox, oy), sc)
    n = rows * cols
    data = np.frombuffer(raw, dtype="<f8", count=n, offset=_HEAD.size).astype(float)
    if kind == 1:
        lat = Lattice.for_domain(dom, rows)
        if not np.isclose(lat.h, h) or lat.shape != (rows, cols):
            raise GmcError("bad-snapshot", "lattice geometry does not match")
        return GridField(data.reshape(rows, cols), cal, lat, seed, rep), digest
    nodes = None
    if flags & 1:
        tab = np.frombuffer(raw, dtype="<f8", count=3 * rows, offset=_HEAD.size + 8 * n).reshape(rows, 3)
        nodes = NodeSet(tab[:, 0] + 1j * tab[:, 1], tab[:, 2].copy(), dom)
    return FieldSample(data, seed, rep, nodes), digest
