"""Kruzkov functions and the quantified commutator.

``commutator_lhs`` is the lattice version of
``int int grad K_h(x - y) . (a(x) - a(y)) |g(x) - g(y)|^2 dx dy``; the
no-cancellation control replaces ``grad K_h . (a(x) - a(y))`` by
``|grad K_h| |a(x) - a(y)|``.  Both reduce to profile sums (see
:mod:`roughcont.kernels`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .besov import besov_norm
from .grid import FluxLaw, ScalarField, VectorField, conjugate_exponent, lp_norm
from .kernels import commutator_profile, commutator_profile_fft, control_at_offsets, diff_profile
from .scheme import discrete_commutator
from .seminorm import _periodic_table

__all__ = [
    "KruzkovPair",
    "CommutatorReport",
    "level_set_check",
    "commutator_lhs",
    "commutator_control",
    "sampled_control",
    "commutator_rhs",
    "commutator_sweep",
    "scaling_regression",
    "discrete_commutator",
    "level_set_commutator",
    "centered_divergence",
    "gradient_components",
]


def _sign(x):
    return np.sign(x)  # sign(0) = 0


@dataclass(frozen=True)
class KruzkovPair:
    """``F``, ``G`` and ``Gbar`` built from a flux law."""

    flux: FluxLaw

    def F(self, xi, zeta):
        xi, zeta = np.asarray(xi, dtype=float), np.asarray(zeta, dtype=float)
        return (self.flux.f(xi) - self.flux.f(zeta)) * _sign(xi - zeta)

    def G(self, xi, zeta):
        xi, zeta = np.asarray(xi, dtype=float), np.asarray(zeta, dtype=float)
        return self.flux.f(xi) * _sign(xi - zeta) - self.F(xi, zeta)

    def Gbar(self, xi, zeta):
        xi, zeta = np.asarray(xi, dtype=float), np.asarray(zeta, dtype=float)
        return 0.5 * (self.flux.f(xi) + self.flux.f(zeta)) * _sign(xi - zeta)


def _integrate_fprime(flux, lo, hi):
    """``int_lo^hi f'`` by 3-point Gauss-Legendre on pieces split at the kinks
    (exact for piecewise-quadratic ``f'``)."""
    if hi <= lo:
        return 0.0
    cuts = [lo] + [k for k in flux.kinks if lo < k < hi] + [hi]
    t, w = np.polynomial.legendre.leggauss(3)
    total = 0.0
    for x0, x1 in zip(cuts[:-1], cuts[1:]):
        xs = 0.5 * (x1 - x0) * t + 0.5 * (x1 + x0)
        total += 0.5 * (x1 - x0) * float(np.dot(w, flux.fprime(xs)))
    return total


def level_set_check(flux, u, pairs=None, samples=64, seed=0):
    """Compare ``F(u_i, u_j)`` with ``int_0^inf f'(xi) |k_i(xi) - k_j(xi)|^2 dxi``
    where ``k(x, xi) = 1[0 <= xi <= u(x)]``.

    The integrand is ``f'`` between ``min(u_i, u_j)`` and ``max(u_i, u_j)``
    and zero elsewhere, integrated exactly piece by piece.
    """
    vals = u.values.ravel()
    if np.any(vals < 0):
        raise ValueError("level-set representation needs u >= 0")
    if pairs is None:
        rng = np.random.default_rng(seed)
        pairs = rng.integers(0, vals.size, size=(samples, 2))
    kp = KruzkovPair(flux)
    worst = 0.0
    rows = []
    for i, j in pairs:
        lhs = float(kp.F(vals[i], vals[j]))
        rhs = _integrate_fprime(flux, min(vals[i], vals[j]), max(vals[i], vals[j]))
        scale = max(abs(lhs), abs(rhs), flux.lip * abs(vals[i] - vals[j]), 1e-300)
        err = abs(lhs - rhs) / scale
        worst = max(worst, err)
        rows.append((int(i), int(j), lhs, rhs))
    return {"max_rel_error": worst, "pairs": rows}


def _as_vector(a):
    return a.values if isinstance(a, VectorField) else a.values[None]


def commutator_lhs(a, g, h, profile=None):
    """``dx^{2d} sum_{i,j} grad K_h(x_i - x_j) . (a_i - a_j) |g_i - g_j|^2``."""
    grid = g.grid
    R = commutator_profile_fft(_as_vector(a), g.values) if profile is None else profile
    G = _periodic_table("gradK", float(h), grid.d, grid.n)
    return grid.cell_volume**2 * float(np.sum(G * R))


def commutator_control(a, g, h, profile=None):
    """The no-cancellation control ``dx^{2d} sum |grad K_h| |a_i - a_j| |g_i - g_j|^2``."""
    grid = g.grid
    Q = commutator_profile(_as_vector(a), g.values)[1] if profile is None else profile
    G = _periodic_table("absgradK", float(h), grid.d, grid.n)
    return grid.cell_volume**2 * float(np.sum(G * Q))


def _offset_strata(n, d, exact_radius):
    """Minimum-image offsets grouped into the exact core ``|z|_inf <= exact_radius``
    and dyadic shells beyond it."""
    ax = np.arange(n)
    ax = np.where(ax < n // 2, ax, ax - n)
    z = np.stack(np.meshgrid(*([ax] * d), indexing="ij")).reshape(d, -1)
    rad = np.max(np.abs(z), axis=0)
    strata = [np.flatnonzero(rad <= exact_radius)]
    lo = exact_radius
    while lo < n // 2:
        strata.append(np.flatnonzero((rad > lo) & (rad <= 2 * lo)))
        lo *= 2
    return z, strata


def sampled_control(a, g, ladder, exact_radius=4, per_shell=48, seed=0):
    """No-cancellation control on a whole ladder from a stratified offset sample.

    The per-offset sums ``S(z) = sum_i |a_i - a_{i-z}| |g_i - g_{i-z}|^2`` do not
    depend on ``h``; they are computed exactly for short offsets and for
    ``per_shell`` random offsets of each dyadic shell further out (weighted by
    the shell size).  Shells with at most ``per_shell`` offsets are summed
    completely, so small grids give the exact control.
    """
    grid = g.grid
    n, d = grid.n, grid.d
    av, gv = _as_vector(a), g.values
    z, strata = _offset_strata(n, d, exact_radius)
    rng = np.random.default_rng(seed)
    picks, weights = [], []
    for k, idx in enumerate(strata):
        if k == 0 or idx.size <= per_shell:
            picks.append(idx)
            weights.append(np.ones(idx.size))
        else:
            picks.append(rng.choice(idx, per_shell, replace=False))
            weights.append(np.full(per_shell, idx.size / per_shell))
    picks, weights = np.concatenate(picks), np.concatenate(weights)
    S = control_at_offsets(av, gv, z[:, picks].T)
    flat = tuple(np.mod(z[:, picks], n))
    out = []
    for h in ladder:
        T = _periodic_table("absgradK", float(h), d, n)
        out.append(grid.cell_volume**2 * float(np.sum(weights * T[flat] * S)))
    return out


def gradient_components(a):
    """Forward-difference ``d_l a_k`` as a list of scalar fields."""
    grid = a.grid
    vals = _as_vector(a)
    return [ScalarField(grid, (np.roll(vals[k], -1, axis=l) - vals[k]) / grid.dx)
            for k in range(vals.shape[0]) for l in range(grid.d)]


def centered_divergence(a):
    grid = a.grid
    vals = _as_vector(a)
    div = sum((np.roll(vals[k], -1, axis=k) - np.roll(vals[k], 1, axis=k)) / (2 * grid.dx)
              for k in range(grid.d))
    return ScalarField(grid, div)


def commutator_rhs(a, g, h, p=2.0, q=2.0):
    """The two right-hand brackets without their constant.

    ``grad_term = ||grad a||_{B^0_{p,q}} |log h|^(1 - 1/q) ||g||^2_{L^{2p*}}``
    where the Besov norm of the gradient is the Euclidean combination of the
    component norms; ``div_term = ||div a||_inf dx^{2d} sum K_h |g_i - g_j|^2``.
    """
    grid = g.grid
    comps = [besov_norm(c, 0.0, p, q) for c in gradient_components(a)]
    bgrad = math.sqrt(sum(c * c for c in comps))
    ps = conjugate_exponent(p)
    gnorm = lp_norm(g, 2 * ps)
    qexp = 1.0 if math.isinf(q) else 1.0 - 1.0 / q
    grad_term = bgrad * abs(math.log(h)) ** qexp * gnorm**2
    divmax = float(np.max(np.abs(centered_divergence(a).values)))
    K = _periodic_table("K", float(h), grid.d, grid.n)
    div_term = divmax * grid.cell_volume**2 * float(np.sum(K * diff_profile(g.values, 2)))
    return grad_term, div_term


@dataclass
class CommutatorReport:
    records: list = field(default_factory=list)
    slope: float = math.nan
    slope_stderr: float = math.nan
    control_slope: float = math.nan
    control_stderr: float = math.nan

    def to_dict(self):
        return {"records": self.records, "slope": self.slope, "slope_stderr": self.slope_stderr,
                "control_slope": self.control_slope, "control_stderr": self.control_stderr}


def commutator_sweep(a, g, ladder, p=2.0, q=2.0, control=True, rhs=True, sample=None):
    """Per-scale records ``{h, lhs, control, rhs_grad_term, rhs_div_term}``.

    ``sample`` (a dict of :func:`sampled_control` options) switches the control
    to the stratified estimate; otherwise it is the exact quadratic sum.
    """
    R = commutator_profile_fft(_as_vector(a), g.values)
    Q = None
    if control and sample is not None:
        ctl = sampled_control(a, g, ladder, **sample)
    elif control:
        Q = commutator_profile(_as_vector(a), g.values)[1]
    recs = []
    for t, h in enumerate(ladder):
        rec = {"h": float(h), "lhs": commutator_lhs(a, g, h, profile=R)}
        if control:
            rec["control"] = ctl[t] if Q is None else commutator_control(a, g, h, profile=Q)
        if rhs:
            rec["rhs_grad_term"], rec["rhs_div_term"] = commutator_rhs(a, g, h, p, q)
        recs.append(rec)
    return recs


def _fit(x, y):
    res = stats.linregress(x, y)
    return float(res.slope), float(res.stderr)


def scaling_regression(a, g, ladder, control=True):
    """Least-squares slopes of ``log |lhs|`` and ``log control`` against ``log |log h|``."""
    ladder = list(ladder)
    if len(ladder) < 4:
        raise ValueError("scaling regression needs at least 4 ladder points")
    recs = commutator_sweep(a, g, ladder, control=control, rhs=False)
    x = np.log(np.abs(np.log(ladder)))
    rep = CommutatorReport(recs)
    rep.slope, rep.slope_stderr = _fit(x, np.log(np.abs([r["lhs"] for r in recs])))
    if control:
        rep.control_slope, rep.control_stderr = _fit(x, np.log([r["control"] for r in recs]))
    return rep


def level_set_commutator(a, u, flux, h):
    """``dx^{-2d} int f'(xi) commutator_lhs(a, k(., xi), h) dxi`` with ``k`` the
    level-set indicator of ``u``.

    The indicator is constant in ``xi`` between consecutive sorted values of
    ``u`` so the integral is a finite sum.  For ``u`` with ``f' >= 0`` this is
    the continuum counterpart of :func:`discrete_commutator` with the opposite
    sign: ``K(x - e_k dx) - K(x) ~ -dx d_k K``.
    """
    vals = np.unique(u.values)
    if vals.min() < 0:
        raise ValueError("level-set representation needs u >= 0")
    levels = np.concatenate([[0.0], vals]) if vals[0] > 0 else vals
    total = 0.0
    for lo, hi in zip(levels[:-1], levels[1:]):
        kappa = u.with_values((u.values > lo).astype(float))
        w = float(flux.f(np.array(hi)) - flux.f(np.array(lo)))
        if w:
            total += w * commutator_lhs(a, kappa, h)
    return total / u.grid.cell_volume**2
