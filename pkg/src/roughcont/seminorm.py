"""Log-scale kernel ``K_h`` and the semi-norms built from it.

``K_h(x) = phi(|x|) / (|x| + h)^d`` with ``phi`` a radial C^2 cutoff equal to 1
on ``B(0,1)`` and vanishing outside ``B(0,2)``.  On the unit torus the
support of ``K_h`` wraps around, so every lattice sum uses the periodised
table ``Kper[r] = sum_m K_h((r + n m) dx)``; see :mod:`roughcont.kernels` for
how pair sums reduce to ``sum_r Kper[r] * profile[r]``.

Conventions: the weight is ``|log h|^(-theta)`` and the supremum runs over the
dyadic ladder ``dx^alpha <= h <= 1/2``; differences enter with power ``p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .grid import GridSpec, ScalarField, lp_norm
from .kernels import correlate, diff_profile

__all__ = [
    "cutoff",
    "cutoff_prime",
    "kernel_eval",
    "grad_kernel_eval",
    "kernel_mass",
    "LogKernel",
    "SemiNormParams",
    "dyadic_ladder",
    "discrete_seminorm",
    "seminorm_ladder",
    "continuous_seminorm",
    "fourier_equiv_check",
    "mollify",
    "mollification_check",
]


def _smootherstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def cutoff(r):
    """``phi(r)``: 1 on ``[0, 1]``, C^2 descent on ``[1, 2]``, 0 beyond."""
    r = np.asarray(r, dtype=float)
    return np.where(r <= 1.0, 1.0, 1.0 - _smootherstep(r - 1.0))


def cutoff_prime(r):
    r = np.asarray(r, dtype=float)
    t = np.clip(r - 1.0, 0.0, 1.0)
    return np.where((r > 1.0) & (r < 2.0), -30.0 * t**2 * (1.0 - t) ** 2, 0.0)


def _radius(x, d):
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        return np.abs(x)
    return np.sqrt(np.sum(x**2, axis=-1))


def kernel_eval(x, h, d=1):
    """``K_h(x)``.  In 1D ``x`` may be a plain array of offsets; otherwise the
    last axis of ``x`` holds the ``d`` coordinates."""
    r = _radius(x, d)
    return cutoff(r) / (r + h) ** d


def grad_kernel_eval(x, h, d=1):
    """Exact gradient of ``K_h``; shape of ``x`` as in :func:`kernel_eval`.

    ``grad K_h(x) = (x/|x|) [phi'(|x|) / (|x| + h)^d - d phi(|x|) / (|x| + h)^(d+1)]``
    and 0 at ``x = 0``.  Odd in ``x``.
    """
    x = np.asarray(x, dtype=float)
    r = _radius(x, d)
    radial = cutoff_prime(r) / (r + h) ** d - d * cutoff(r) / (r + h) ** (d + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(r > 0, radial / np.where(r > 0, r, 1.0), 0.0)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        return scale * x
    return scale[..., None] * x


@lru_cache(maxsize=256)
def kernel_mass(h, d=1):
    """``int K_h`` over ``B(0, 2)`` by adaptive quadrature in the radius."""
    if not 0 < h <= 0.5:
        raise ValueError(f"h must lie in (0, 1/2], got {h}")
    if d == 1:
        fn = lambda r: 2.0 * cutoff(r) / (r + h)
    elif d == 2:
        fn = lambda r: 2.0 * math.pi * r * cutoff(r) / (r + h) ** 2
    else:
        raise ValueError("d must be 1 or 2")
    inner, _ = integrate.quad(fn, 0.0, 1.0, points=[h] if h < 1 else None, limit=200)
    outer, _ = integrate.quad(fn, 1.0, 2.0, limit=200)
    return inner + outer


def _offset_grid(n, d):
    o = np.arange(-2 * n, 2 * n) / n
    mesh = np.meshgrid(*([o] * d), indexing="ij")
    return np.stack(mesh, axis=-1) if d > 1 else mesh[0]


def _fold(raw, n, d):
    """Sum a table on offsets ``[-2n, 2n)^d`` into ``[0, n)^d`` modulo ``n``."""
    lead = raw.shape[: raw.ndim - d]
    shape = lead + sum(((4, n) for _ in range(d)), ())
    blocks = raw.reshape(shape)
    axes = tuple(len(lead) + 2 * k for k in range(d))
    folded = blocks.sum(axis=axes)
    # offsets start at -2n == 0 (mod n), so block positions already match r
    return folded


@lru_cache(maxsize=512)
def _periodic_table(kind, h, d, n):
    x = _offset_grid(n, d)
    if kind == "K":
        raw = kernel_eval(x, h, d)
    elif kind == "gradK":
        g = grad_kernel_eval(x, h, d)
        raw = g[None] if d == 1 else np.moveaxis(g, -1, 0)
    elif kind == "absgradK":
        g = grad_kernel_eval(x, h, d)
        raw = np.abs(g) if d == 1 else np.sqrt(np.sum(g**2, axis=-1))
    else:
        raise ValueError(kind)
    out = _fold(raw, n, d)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=256)
def _cell_pair_table(h, d, n, nodes=6):
    """``W[r] = int_{C_i} int_{C_{i-r}} K_h(x - y) dx dy`` periodised."""
    dx = 1.0 / n
    gl_t, gl_w = np.polynomial.legendre.leggauss(nodes)
    # tent weight on [-dx, 0] and [0, dx]
    t = np.concatenate([(gl_t - 1.0) * dx / 2.0, (gl_t + 1.0) * dx / 2.0])
    w = np.concatenate([gl_w, gl_w]) * dx / 2.0 * (dx - np.abs(np.concatenate([(gl_t - 1.0), (gl_t + 1.0)]) * dx / 2.0))
    x = _offset_grid(n, d)
    raw = np.zeros(x.shape[: x.ndim - (d > 1)])
    if d == 1:
        for tk, wk in zip(t, w):
            raw += wk * kernel_eval(x + tk, h, 1)
    else:
        for t0, w0 in zip(t, w):
            for t1, w1 in zip(t, w):
                raw += w0 * w1 * kernel_eval(x + np.array([t0, t1]), h, 2)
    out = _fold(raw, n, d)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class LogKernel:
    """``K_h`` bound to a grid.

    ``table`` is the raw lattice table ``K_h(o dx)`` for offsets
    ``o in [-2n, 2n]^d`` (centre at index ``2n``); ``periodic`` is its fold
    onto the torus.
    """

    h: float
    grid: GridSpec

    def __post_init__(self):
        if not 0 < self.h <= 0.5:
            raise ValueError(f"h must lie in (0, 1/2], got {self.h}")

    def __call__(self, x):
        return kernel_eval(x, self.h, self.grid.d)

    def grad(self, x):
        return grad_kernel_eval(x, self.h, self.grid.d)

    @property
    def table(self):
        n, d = self.grid.n, self.grid.d
        o = np.arange(-2 * n, 2 * n + 1) / n
        mesh = np.meshgrid(*([o] * d), indexing="ij")
        x = np.stack(mesh, axis=-1) if d > 1 else mesh[0]
        return kernel_eval(x, self.h, d)

    @property
    def periodic(self):
        return _periodic_table("K", float(self.h), self.grid.d, self.grid.n)

    @property
    def periodic_grad(self):
        return _periodic_table("gradK", float(self.h), self.grid.d, self.grid.n)

    @property
    def periodic_abs_grad(self):
        return _periodic_table("absgradK", float(self.h), self.grid.d, self.grid.n)

    def mass(self):
        return kernel_mass(float(self.h), self.grid.d)

    def lattice_mass(self):
        """``dx^d sum_r Kper[r]``: the discrete counterpart of :meth:`mass`."""
        return float(self.grid.cell_volume * np.sum(self.periodic))


def dyadic_ladder(h_min, h_max=0.5):
    """Dyadic scales ``2^-m`` with ``h_min <= 2^-m <= h_max``, decreasing."""
    out = []
    m = max(1, math.ceil(-math.log2(h_max) - 1e-12))
    while 2.0**-m >= h_min * (1 - 1e-12):
        out.append(2.0**-m)
        m += 1
    return out


@dataclass(frozen=True)
class SemiNormParams:
    """Parameters of the discrete semi-norm ``||u||_{alpha,p,theta}``.

    ``h_set`` may pin the ladder explicitly; by default it is the dyadic
    ladder between ``dx^alpha`` and 1/2.
    """

    alpha: float = 0.5
    p: float = 1.0
    theta: float = 0.5
    h_set: tuple | None = None

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not 0 <= self.theta <= 1:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")

    def ladder(self, grid):
        floor = grid.dx**self.alpha
        if self.h_set is None:
            hs = dyadic_ladder(floor)
        else:
            hs = sorted((float(h) for h in self.h_set), reverse=True)
            bad = [h for h in hs if not floor * (1 - 1e-12) <= h <= 0.5]
            if bad:
                raise ValueError(f"ladder points {bad} outside [{floor:.3g}, 1/2]")
        if not hs:
            raise ValueError(f"empty h ladder: dx^alpha = {floor:.3g} exceeds 1/2")
        return hs


def _log_weight(h, theta):
    return abs(math.log(h)) ** (-theta)


def _ladder_values(grid, profile, hs, theta, p, weights="lattice"):
    vals = []
    for h in hs:
        if weights == "lattice":
            s = grid.cell_volume**2 * float(np.sum(_periodic_table("K", float(h), grid.d, grid.n) * profile))
        else:
            s = float(np.sum(_cell_pair_table(float(h), grid.d, grid.n) * profile))
        vals.append((max(s, 0.0) * _log_weight(h, theta)) ** (1.0 / p))
    return vals


def seminorm_ladder(u, params, profile=None):
    """Per-scale records ``{"h", "value"}`` plus the supremum, as a JSON-ready dict."""
    hs = params.ladder(u.grid)
    if profile is None:
        profile = diff_profile(u.values, params.p)
    vals = _ladder_values(u.grid, profile, hs, params.theta, params.p)
    return {"ladder": [{"h": h, "value": v} for h, v in zip(hs, vals)], "sup": max(vals)}


def discrete_seminorm(u, params, profile=None):
    """``sup_h (|log h|^-theta dx^{2d} sum_{i,j} K^h_{i-j} |u_i - u_j|^p)^(1/p)``."""
    return seminorm_ladder(u, params, profile)["sup"]


def continuous_seminorm(u, p, theta, ladder=None):
    """The double integral for the piecewise-constant extension of ``u``.

    Cell pairs are integrated exactly in the tent variable with Gauss-Legendre
    nodes on each half; supremum over ``ladder`` (default: dyadic down to dx).
    """
    hs = dyadic_ladder(u.grid.dx) if ladder is None else list(ladder)
    profile = diff_profile(u.values, p)
    return max(_ladder_values(u.grid, profile, hs, theta, p, weights="cell"))


def fourier_equiv_check(u, theta=0.5, ladder=None):
    """Both sides of the p = 2 Fourier characterisation.

    ``lhs = sup_h |log h|^-theta S(h) + ||u||^2`` with ``S`` the lattice double
    sum at p = 2, and ``rhs = ||u||^2 + sup_h |log h|^-theta
    sum_{m != 0} |log(1/|xi_m| + h)| |u_hat_m|^2`` with ``xi_m = 2 pi m`` and
    Parseval-normalised coefficients.  Same dyadic ladder on both sides.
    """
    grid = u.grid
    hs = dyadic_ladder(grid.dx) if ladder is None else list(ladder)
    l2sq = lp_norm(u, 2) ** 2
    profile = diff_profile(u.values, 2)
    lhs_terms = [grid.cell_volume**2 * float(np.sum(_periodic_table("K", float(h), grid.d, grid.n) * profile))
                 * _log_weight(h, theta) for h in hs]
    coef = np.abs(np.fft.fftn(u.values)) ** 2 / grid.size**2
    xi = 2.0 * math.pi * np.sqrt(np.sum(grid.wavenumbers() ** 2, axis=0))
    nz = xi > 0
    rhs_terms = []
    for h in hs:
        wt = np.abs(np.log(1.0 / xi[nz] + h))
        rhs_terms.append(float(np.sum(wt * coef[nz])) * _log_weight(h, theta))
    lhs = max(lhs_terms) + l2sq
    rhs = max(rhs_terms) + l2sq
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else 1.0, "l2sq": l2sq}


def mollify(u, h):
    """``Kbar_h * u`` with the lattice kernel normalised to unit discrete mass."""
    K = _periodic_table("K", float(h), u.grid.d, u.grid.n)
    conv = correlate(u.values, K)  # K is even, so correlation is convolution
    return u.with_values(conv / float(np.sum(K)))


def mollification_check(u, theta, ladder=None):
    """Per-scale ratio ``||u - Kbar_h*u||_{l^1} / (|log h|^(theta-1) ||u||_{1,theta})``.

    The semi-norm uses the same ladder (default: dyadic down to dx).
    """
    grid = u.grid
    hs = dyadic_ladder(grid.dx) if ladder is None else list(ladder)
    profile = diff_profile(u.values, 1)
    sn = max(_ladder_values(grid, profile, hs, theta, 1))
    rows = []
    for h in hs:
        err = lp_norm(u.with_values(u.values - mollify(u, h).values), 1)
        bound = abs(math.log(h)) ** (theta - 1.0) * sn
        rows.append({"h": h, "error": err, "scale": bound, "ratio": err / bound if bound > 0 else 0.0})
    return rows
