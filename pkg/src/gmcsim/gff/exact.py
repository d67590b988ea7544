"""Exact sampling of circle averages from their covariance matrix."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import GmcError
from ..rng import check_seed, replicate_rng
from .nodes import CovarianceMatrix, NodeSet

STREAM = 0
CHUNK = 64


@dataclass(frozen=True, eq=False)
class FieldSample:
    """One replicate of the circle averages, aligned with ``nodes``."""

    values: np.ndarray
    seed: int
    replicate_index: int
    nodes: NodeSet | None = None

    def __post_init__(self):
        if self.nodes is not None and len(self.values) != len(self.nodes):
            raise GmcError("node-mismatch", "sample length differs from node count")


def _normals(n, seed, start, stop):
    return np.stack([replicate_rng(seed, i, STREAM).standard_normal(n) for i in range(start, stop)])


def sample_values(cov: CovarianceMatrix, n_reps, seed, start=0, jobs=1):
    """``(n_reps, n)`` array of replicates ``start, ..., start + n_reps - 1``.

    Replicate ``i`` depends only on ``(seed, i)``; work is split into fixed
    chunks so the result does not depend on ``jobs``.
    """
    seed = check_seed(seed)
    if n_reps < 0:
        raise GmcError("bad-reps", "replicate count must be nonnegative")
    L = cov.factor
    n = L.shape[0]
    bounds = [(s, min(s + CHUNK, start + n_reps)) for s in range(start, start + n_reps, CHUNK)]

    def work(b):
        return _normals(n, seed, *b) @ L.T

    if jobs > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(jobs) as ex:
            parts = list(ex.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    return np.concatenate(parts) if parts else np.empty((0, n))


def sample_exact(cov: CovarianceMatrix, n_reps, seed, start=0, jobs=1):
    """List of :class:`FieldSample` drawn through the triangular factor."""
    vals = sample_values(cov, n_reps, seed, start, jobs)
    return [FieldSample(v, int(seed), start + i, cov.nodes) for i, v in enumerate(vals)]
