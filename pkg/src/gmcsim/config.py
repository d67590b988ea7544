"""Run configuration: a YAML mapping validated into :class:`RunConfig`."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import yaml

from .domain import KINDS, Domain
from .errors import GmcError
from .rng import U64

DEFAULT_TOLERANCES = {
    "slack": 0.3,            # moment-decay slope slack
    "p": 1.5,                # moment order for the decay report
    "dimension_band": 0.15,  # |mean slope - target|
    "fubini": 0.02,          # relative gap of integrated slices
    "exact": 1e-12,          # gamma = 0 identities
    "fourier_min_beta": 0.1,
    "fourier_control": 0.2,
    "holder_fraction": 0.95,
    "se_multiple": 3.0,
    "calibration": 0.05,
}


def _err(name, msg):
    return GmcError("bad-config", f"{name}: {msg}")


def _num(d, name, default=None, kind=float, lo=None, hi=None, lo_open=False, hi_open=False):
    v = d.get(name, default)
    if v is None:
        raise _err(name, "missing")
    try:
        v = kind(v)
    except (TypeError, ValueError):
        raise _err(name, f"expected {kind.__name__}, got {v!r}") from None
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise _err(name, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and (v > hi or (hi_open and v == hi)):
        raise _err(name, f"must be {'<' if hi_open else '<='} {hi}, got {v}")
    return v


@dataclass(frozen=True)
class RunConfig:
    """Validated settings shared by all subcommands.

    Sections specific to one subcommand (``dimension``, ``project``, ...)
    are kept as plain mappings in ``sections``.
    """

    domain: Domain
    measure: dict
    gamma: float
    n0: int
    n1: int
    replicates: int
    M: int
    seed: int | None
    out: str
    backend: str
    cells: int
    tolerances: dict
    sections: dict = field(default_factory=dict)
    raw: bytes = b""

    @property
    def digest(self):
        return hashlib.sha256(self.raw).hexdigest()

    def section(self, name):
        return dict(self.sections.get(name) or {})


def parse_domain(d):
    if d is None:
        return Domain()
    if not isinstance(d, dict):
        raise _err("domain", "expected a mapping")
    kind = d.get("kind", "unit-disk")
    if kind not in KINDS:
        raise _err("domain.kind", f"must be one of {KINDS}, got {kind!r}")
    off = d.get("offset", [0.0, 0.0])
    if not isinstance(off, (list, tuple)) or len(off) != 2:
        raise _err("domain.offset", "expected two numbers")
    scale = _num(d, "scale", 1.0, lo=0, lo_open=True)
    try:
        return Domain(kind, tuple(float(v) for v in off), scale,
                      d.get("green_method", "theta"), int(d.get("series_terms", 128)))
    except GmcError as exc:
        raise _err("domain", exc.message) from None


def load_config(text=None, overrides=None):
    """Parse YAML text (or ``None`` for defaults) and apply CLI overrides."""
    raw = (text or "").encode() if isinstance(text, str) else (text or b"")
    try:
        data = yaml.safe_load(raw) if raw else {}
    except yaml.YAMLError as exc:
        raise GmcError("bad-config", f"config is not valid YAML: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise GmcError("bad-config", "config must be a mapping")
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    known = {"domain", "measure", "gamma", "levels", "replicates", "M", "seed", "out", "backend",
             "lattice", "tolerances"}
    dom = parse_domain(data.get("domain"))
    gamma = _num(data, "gamma", 0.0, lo=0, hi=2, hi_open=True)
    levels = data.get("levels", [3, 6])
    if not isinstance(levels, (list, tuple)) or len(levels) != 2:
        raise _err("levels", "expected [n0, n1]")
    n0, n1 = (int(v) for v in levels)
    if not 1 <= n0 <= n1:
        raise _err("levels", f"need 1 <= n0 <= n1, got {levels}")
    reps = _num(data, "replicates", 1, int, lo=1)
    M = _num(data, "M", 64, int, lo=8)
    seed = data.get("seed")
    if seed is not None:
        seed = _num(data, "seed", kind=int, lo=0, hi=U64 - 1)
    backend = data.get("backend", "exact")
    if backend not in ("exact", "lattice"):
        raise _err("backend", f"must be 'exact' or 'lattice', got {backend!r}")
    lat = data.get("lattice") or {}
    if not isinstance(lat, dict):
        raise _err("lattice", "expected a mapping")
    cells = _num(lat, "cells", 256, int, lo=16)
    measure = data.get("measure") or {"kind": "lebesgue"}
    if not isinstance(measure, dict) or "kind" not in measure:
        raise _err("measure", "expected a mapping with a 'kind'")
    if measure["kind"] not in ("lebesgue", "chord", "curve", "ifs"):
        raise _err("measure.kind", f"unknown measure {measure['kind']!r}")
    tol = dict(DEFAULT_TOLERANCES)
    extra = data.get("tolerances") or {}
    if not isinstance(extra, dict):
        raise _err("tolerances", "expected a mapping")
    for k, v in extra.items():
        if k not in tol:
            raise _err(f"tolerances.{k}", "unknown tolerance")
        tol[k] = _num(extra, k)
    sections = {k: v for k, v in data.items() if k not in known}
    for k, v in sections.items():
        if v is not None and not isinstance(v, dict):
            raise _err(k, "expected a mapping")
    return RunConfig(dom, measure, gamma, n0, n1, reps, M, seed, str(data.get("out", ".")), backend, cells,
                     tol, sections, raw)
