"""Decay of the Fourier transform of weighted atoms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.special

from ..errors import GmcError


@dataclass(frozen=True)
class FourierReport:
    directions: list
    freqs: list
    beta_hat: list
    pooled_beta: float
    envelope: dict

    def to_dict(self):
        return {"directions": self.directions, "beta_hat": self.beta_hat, "pooled_beta": self.pooled_beta}


def transform(points, weights, xi, chunk=2_000_000):
    """``|sum_j w_j exp(-i xi . x_j)|`` for complex frequencies ``xi``."""
    xi = np.atleast_1d(xi)
    out = np.empty(xi.size, dtype=complex)
    step = max(1, chunk // max(points.size, 1))
    for s in range(0, xi.size, step):
        ph = np.outer(xi[s:s + step].real, points.real) + np.outer(xi[s:s + step].imag, points.imag)
        out[s:s + step] = np.exp(-1j * ph) @ weights
    return np.abs(out)


def envelope_fit(freqs, amps, bins):
    """Slope of ``log`` of the per-bin maximum against ``log`` of the bin's frequency."""
    freqs = np.asarray(freqs)
    edges = np.geomspace(freqs[0], freqs[-1] * (1 + 1e-12), bins + 1)
    kx, ky = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (freqs >= lo) & (freqs < hi)
        if sel.any():
            k = int(np.argmax(np.where(sel, amps, -np.inf)))
            if amps[k] > 0:
                kx.append(np.log(freqs[k]))
                ky.append(np.log(amps[k]))
    if len(kx) < 3:
        raise GmcError("fit-failed", "too few frequency bins with positive amplitude")
    return float(-np.polyfit(kx, ky, 1)[0]), np.array(kx), np.array(ky)


def fourier_decay(points, weights, directions, freq_range=(2 * np.pi, 64 * np.pi), n_freqs=256, bins=8):
    """Envelope decay exponent of ``|mu_hat(k e_phi)|`` per direction and pooled.

    Parameters
    ----------
    points, weights : arrays
        Atoms of the measure (complex points).
    directions : sequence of float
        Angles ``phi`` of the frequency rays.
    freq_range : (float, float)
        Smallest and largest ``|xi|``; the smallest must be at least ``2 pi``.
    """
    lo, hi = freq_range
    if lo < 2 * np.pi - 1e-9 or hi <= lo:
        raise GmcError("parameter-out-of-range", "frequencies must start at 2 pi or above")
    k = np.geomspace(lo, hi, n_freqs)
    betas, env, allx, ally = [], {}, [], []
    for phi in directions:
        amps = transform(np.asarray(points), np.asarray(weights), k * np.exp(1j * phi))
        b, kx, ky = envelope_fit(k, amps, bins)
        betas.append(b)
        env[float(phi)] = (kx.tolist(), ky.tolist())
        allx.append(kx)
        ally.append(ky)
    pooled = float(-np.polyfit(np.concatenate(allx), np.concatenate(ally), 1)[0])
    return FourierReport([float(p) for p in directions], k.tolist(), betas, pooled, env)


def disk_transform(k, radius=1.0):
    """``|FT|`` of the indicator of a disk: ``2 pi R J1(k R) / k``."""
    k = np.asarray(k, dtype=float)
    return np.abs(2 * np.pi * radius * scipy.special.j1(k * radius) / k)
