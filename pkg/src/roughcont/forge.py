"""Synthetic rough fields and the Poisson (chemotaxis) coupling.

Random fields come from a counter-based generator keyed by ``(seed, purpose)``
so every field is reproducible on its own, whatever else was generated first.
A field is synthesised once on a reference lattice of ``n_ref`` cells and
then sampled at the nodes of coarser grids, so a refinement sweep sees the
same trigonometric polynomial at every resolution.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from .besov import DyadicPartition, besov_norm, lp_blocks
from .grid import GridSpec, ScalarField, VectorField, discrete_w1p, lp_norm

__all__ = [
    "make_rng",
    "RoughFieldSpec",
    "spectral_field",
    "spectral_scalar",
    "block_spectrum_field",
    "smooth_bump",
    "poisson_coupling",
    "field_norm_report",
]


def make_rng(seed, purpose):
    """Philox stream for ``(seed, purpose)``."""
    key = zlib.crc32(str(purpose).encode())
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), key])))


@dataclass(frozen=True)
class RoughFieldSpec:
    """Random-phase field with coefficient decay ``|m|^-beta``.

    ``normalize`` fixes the overall size before ``amplitude`` is applied:
    ``"rms"`` makes the root-mean-square of ``|a|`` equal to 1, ``"max"``
    makes ``max |a|`` equal to 1.  ``mean`` is added afterwards (per component
    for vector fields).  ``n_ref`` (default: the target grid) is the lattice
    the field is synthesised on.
    """

    beta: float
    seed: int = 0
    divfree: bool = False
    amplitude: float = 1.0
    mean: float | tuple = 0.0
    normalize: str = "rms"
    n_ref: int | None = None
    purpose: str = "velocity"
    target_norms: dict | None = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.normalize not in ("rms", "max"):
            raise ValueError(f"normalize must be 'rms' or 'max', got {self.normalize!r}")


def _synth(spec, d, ncomp, n_ref):
    rng = make_rng(spec.seed, spec.purpose)
    shape = (n_ref,) * d
    noise = rng.standard_normal((ncomp,) + shape)
    m = GridSpec(d, n_ref, 1.0).wavenumbers()
    mag = np.sqrt(np.sum(m**2, axis=0))
    amp = np.zeros_like(mag)
    amp[mag > 0] = mag[mag > 0] ** (-spec.beta)
    # the Nyquist row has no Hermitian partner for i*m, so projections break there
    amp[_nyquist(m, n_ref)] = 0.0
    axes = tuple(range(1, d + 1))
    coef = np.fft.fftn(noise, axes=axes) * amp
    if spec.divfree and ncomp == d:
        safe = np.where(mag > 0, mag, 1.0) ** 2
        dot = np.sum(m * coef, axis=0)
        coef = coef - m * dot / safe
    vals = np.fft.ifftn(coef, axes=axes).real
    if spec.normalize == "rms":
        scale = math.sqrt(float(np.mean(np.sum(vals**2, axis=0))))
    else:
        scale = float(np.max(np.sqrt(np.sum(vals**2, axis=0))))
    if scale > 0:
        vals = vals / scale
    return vals * spec.amplitude


def _nyquist(m, n):
    return np.any(np.abs(m) == n // 2, axis=0)


def _restrict(vals, n_ref, n, d):
    if n_ref % n:
        raise ValueError(f"grid n={n} does not divide the reference n={n_ref}")
    s = n_ref // n
    return vals[(slice(None),) + (slice(None, None, s),) * d]


def _n_ref(spec, grid):
    n_ref = spec.n_ref or grid.n
    if n_ref < grid.n:
        raise ValueError(f"reference lattice n={n_ref} coarser than the grid n={grid.n}")
    return n_ref


def spectral_field(spec, grid):
    """A :class:`VectorField` drawn from ``spec`` and sampled on ``grid``."""
    if spec.divfree and grid.d == 1:
        if spec.amplitude != 0:
            raise ValueError("1D divergence-free fields are constant")
        mean = np.broadcast_to(np.asarray(spec.mean, dtype=float), (1,))
        return VectorField.constant(grid, mean)
    n_ref = _n_ref(spec, grid)
    vals = _restrict(_synth(spec, grid.d, grid.d, n_ref), n_ref, grid.n, grid.d)
    mean = np.broadcast_to(np.asarray(spec.mean, dtype=float), (grid.d,))
    vals = vals + mean.reshape((grid.d,) + (1,) * grid.d)
    return VectorField(grid, vals)


def spectral_scalar(spec, grid):
    """A :class:`ScalarField` drawn from ``spec`` (``divfree`` is ignored)."""
    n_ref = _n_ref(spec, grid)
    vals = _restrict(_synth(spec, grid.d, 1, n_ref), n_ref, grid.n, grid.d)[0]
    return ScalarField(grid, vals + float(np.asarray(spec.mean)))


def block_spectrum_field(grid, seed, weight, purpose="block-field"):
    """White noise whose Littlewood-Paley blocks are rescaled so that
    ``||U_k||_{L^2} = weight(k)`` for ``k >= 1``; block 0 is removed."""
    rng = make_rng(seed, purpose)
    u = ScalarField(grid, rng.standard_normal(grid.shape))
    part = DyadicPartition.for_grid(grid)
    # rescale on dyadic shells |m| in [2^(k-1), 2^k) so blocks stay disjoint-ish
    m = np.sqrt(np.sum(grid.wavenumbers() ** 2, axis=0))
    uh = np.fft.fftn(u.values)
    out = np.zeros_like(uh)
    for k in range(1, part.K_max + 1):
        shell = (m >= 2.0 ** (k - 1)) & (m < 2.0**k)
        if not shell.any():
            continue
        piece = np.where(shell, uh, 0.0)
        nrm = math.sqrt(float(np.sum(np.abs(piece) ** 2))) / grid.size
        if nrm > 0:
            out += piece * (weight(k) / nrm)
    return ScalarField(grid, np.fft.ifftn(out).real)


def smooth_bump(grid, centre=0.5, width=0.15, height=1.0, base=0.0):
    """Periodised Gaussian bump; smooth initial data."""
    x = grid.coords()
    r2 = 0.0
    for k in range(grid.d):
        dxk = (x[k] - centre + 0.5) % 1.0 - 0.5
        r2 = r2 + dxk**2
    return ScalarField(grid, base + height * np.exp(-r2 / (2 * width**2)))


def poisson_coupling(u, g=None):
    """``a = grad c`` with ``-Lap c = g(u) - mean g(u)``, spectrally.

    Nyquist modes of the source are dropped so that ``a`` is real and its
    spectral divergence is exactly the filtered source."""
    grid = u.grid
    gv = np.asarray(u.values if g is None else g(u.values), dtype=float)
    rhs = gv - gv.mean()
    m = grid.wavenumbers()
    m2 = np.sum(m**2, axis=0)
    safe = np.where(m2 > 0, m2, 1.0)
    keep = (m2 > 0) & ~_nyquist(m, grid.n)
    ch = np.where(keep, np.fft.fftn(rhs) / (4 * math.pi**2 * safe), 0.0)
    comps = [np.fft.ifftn(2j * math.pi * m[k] * ch).real for k in range(grid.d)]
    return VectorField(grid, np.stack(comps))


def field_norm_report(a, p=2.0, q=2.0):
    """Norm summary of a velocity field."""
    from .commutator import centered_divergence, gradient_components

    comps = [besov_norm(c, 0.0, p, q) for c in gradient_components(a)]
    return {
        "lp": lp_norm(a, p),
        "w1p": discrete_w1p(a, p),
        "besov_grad": math.sqrt(sum(c * c for c in comps)),
        "div_max": float(np.max(np.abs(centered_divergence(a).values))),
    }
