"""Littlewood-Paley blocks, Besov norms, Bernstein ratios and the
delocalised-convolution integral.

Frequencies are integer wavenumbers ``m`` on the torus; the physical
(angular) frequency of ``exp(2 pi i m.x)`` is ``2 pi |m|``.  Block ``k``
lives on ``2^(k-1) <= |m| <= 2^(k+1)`` (``k >= 1``) and block 0 on ``|m| <= 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import ScalarField, lp_norm
from .seminorm import cutoff

__all__ = [
    "DyadicPartition",
    "MollifierL",
    "lp_blocks",
    "besov_norm",
    "bernstein_check",
    "delocalized_conv_integral",
]


def _radial_wavenumber(grid):
    return np.sqrt(np.sum(grid.wavenumbers() ** 2, axis=0))


@dataclass(frozen=True)
class DyadicPartition:
    """``Psi_k(m) = beta(|m| / 2^k) - beta(|m| / 2^(k-1))`` with ``beta`` the C^2
    cutoff (1 on [0, 1], 0 beyond 2); ``Psi_0 = beta``.  The sum telescopes to
    ``beta(|m| / 2^K_max)``, which is 1 on every resolvable wavenumber once
    ``2^K_max`` exceeds the largest lattice ``|m|``."""

    K_max: int

    @classmethod
    def for_grid(cls, grid):
        top = math.sqrt(grid.d) * grid.n / 2
        return cls(max(1, math.ceil(math.log2(top))))

    def multiplier(self, k, m):
        m = np.asarray(m, dtype=float)
        if k == 0:
            return cutoff(m)
        return cutoff(m / 2.0**k) - cutoff(m / 2.0 ** (k - 1))

    def multipliers(self, grid):
        m = _radial_wavenumber(grid)
        return [self.multiplier(k, m) for k in range(self.K_max + 1)]


def lp_blocks(u, part=None):
    """The block fields ``U_k = Psi_k * u`` by Fourier multiplication."""
    part = part or DyadicPartition.for_grid(u.grid)
    uh = np.fft.fftn(u.values)
    return [u.with_values(np.fft.ifftn(uh * psi).real) for psi in part.multipliers(u.grid)]


def _lq(seq, q):
    seq = np.asarray(seq, dtype=float)
    if math.isinf(q):
        return float(seq.max(initial=0.0))
    return float(np.sum(seq**q) ** (1.0 / q))


def besov_norm(u, s, p, q, part=None):
    """``|| (2^(s k) ||U_k||_{L^p})_k ||_{l^q}``."""
    if p < 1 or q < 1:
        raise ValueError("p and q must be >= 1")
    blocks = lp_blocks(u, part)
    return _lq([2.0 ** (s * k) * lp_norm(b, p) for k, b in enumerate(blocks)], q)


def _grad(values, grid):
    """Forward-difference gradient magnitude (Euclidean over axes)."""
    g = [(np.roll(values, -1, axis=k) - values) / grid.dx for k in range(grid.d)]
    return np.sqrt(sum(x * x for x in g))


def _inv_grad(values, grid):
    """``|grad (-Lap)^-1 U|`` spectrally; the dual order -1 quantity."""
    uh = np.fft.fftn(values)
    m = grid.wavenumbers()
    m2 = np.sum(m**2, axis=0)
    m2[(0,) * grid.d] = 1.0
    comps = [np.fft.ifftn(1j * 2 * math.pi * m[k] * uh / (4 * math.pi**2 * m2)).real for k in range(grid.d)]
    return np.sqrt(sum(c * c for c in comps))


def bernstein_check(block, k, alpha, p):
    """Ratio ``||U_k||_{W^(alpha,p)} / (2^(k alpha) ||U_k||_{L^p})``.

    For ``p = 2`` the homogeneous Fourier weight ``(2 pi |m|)^alpha`` is used.
    For other ``p`` only ``alpha = +-1`` is supported: forward differences for
    ``+1`` and ``|grad (-Lap)^-1 U|`` for ``-1``.  A block supported at
    ``|m| = 2^k`` gives ``2 pi`` at ``alpha = 1``.
    """
    grid = block.grid
    base = lp_norm(block, p)
    if base == 0.0:
        return {"k": k, "alpha": alpha, "p": p, "ratio": 0.0}
    if p == 2:
        uh = np.fft.fftn(block.values) / grid.size
        xi = 2 * math.pi * _radial_wavenumber(grid)
        nz = xi > 0
        top = math.sqrt(float(np.sum(xi[nz] ** (2 * alpha) * np.abs(uh[nz]) ** 2)))
    elif alpha == 1:
        top = lp_norm(block.with_values(_grad(block.values, grid)), p)
    elif alpha == -1:
        top = lp_norm(block.with_values(_inv_grad(block.values, grid)), p)
    else:
        raise ValueError("general p supports alpha in {-1, 1} only")
    return {"k": k, "alpha": alpha, "p": p, "ratio": top / (2.0 ** (k * alpha) * base)}


def _sinc4(x):
    return np.sinc(x) ** 4


@dataclass(frozen=True)
class MollifierL:
    """``L = B - 2^d B(2 .)`` with ``B`` the tensor cubic B-spline on ``[-1, 1]^d``.

    ``B`` has unit mass, so ``int L = 0``; it is C^2 and compactly supported,
    hence in ``W^(s,1)`` for every ``s < 1``.  Its Fourier transform is
    explicit, so ``L_r * u`` is an exact multiplier on the torus.
    """

    s: float = 0.5
    support: float = 1.0

    def profile(self, x, d=1):
        """Real-space values; the last axis of ``x`` holds coordinates when ``d > 1``."""
        x = np.asarray(x, dtype=float)
        comps = [x] if d == 1 else [x[..., k] for k in range(d)]
        big = np.prod([_bspline(2.0 * c) * 2.0 for c in comps], axis=0)
        small = np.prod([_bspline(4.0 * c) * 4.0 for c in comps], axis=0)
        return big - small

    def hat(self, xi):
        """Fourier transform at ordinary frequencies ``xi`` of shape ``(d, ...)``."""
        xi = np.asarray(xi, dtype=float)
        return np.prod(_sinc4(xi / 2.0), axis=0) - np.prod(_sinc4(xi / 4.0), axis=0)

    def convolve(self, u, r):
        m = u.grid.wavenumbers()
        return u.with_values(np.fft.ifftn(np.fft.fftn(u.values) * self.hat(r * m)).real)


def _bspline(t):
    """Cardinal cubic B-spline on ``[-2, 2]`` with unit mass."""
    t = np.abs(t)
    return np.where(t < 1, 2 / 3 - t**2 + t**3 / 2, np.where(t < 2, (2 - t) ** 3 / 6, 0.0))


def delocalized_conv_integral(u, L, h0, p):
    """``int_{h0}^1 ||L_r * u||_{L^p} dr / r`` by the midpoint rule in ``log r``
    on octaves ``[h0 2^m, h0 2^(m+1)] subset [h0, 1]``."""
    if h0 < u.grid.dx * (1 - 1e-12):
        raise ValueError("below resolution")
    if h0 > 0.5:
        raise ValueError(f"h0 must be <= 1/2, got {h0}")
    octaves = int(math.floor(math.log2(1.0 / h0) + 1e-9))
    total = 0.0
    for m in range(octaves):
        r = h0 * 2.0 ** (m + 0.5)
        total += math.log(2.0) * lp_norm(L.convolve(u, r), p)
    return total
