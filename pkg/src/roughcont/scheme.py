"""Explicit conservative schemes ``u_i^{n+1} = sum_m b_{i,m}(a_m, u_m)`` with

    b_{i,m}(a, u) = u [i = m] + lam sum_k (F^k_{i + e_k - m}(a, u) - F^k_{i - m}(a, u)),

``lam = dt/dx``, and the per-node fluxes normalised by ``sum_j F^k_j = a_k f(u)``.

With this orientation the update solves ``d_t u = div(a f(u))``: information
travels with velocity ``-a``.  Callers that think in terms of
``d_t u + div(v f(u)) = 0`` pass ``a = -v``.

Vectorised form: with ``F^k_o`` evaluated at every node,

    u^{n+1} - u^n = lam sum_k sum_o [roll(F^k_o, o - e_k) - roll(F^k_o, o)]

where ``roll(x, o)[i] = x[i - o]``.  The increment is returned separately so
the discrete divergence can be formed without cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .grid import FluxLaw, ScalarField, VectorField, lp_norm, conjugate_exponent
from .kernels import diff_profile, kruzkov_profile
from .seminorm import _periodic_table, _log_weight

__all__ = [
    "SchemeDef",
    "StepReport",
    "CFLError",
    "LedgerError",
    "upwind",
    "lax_friedrichs",
    "centered",
    "scheme_by_name",
    "flux_terms",
    "assemble_b",
    "increment",
    "step",
    "discrete_divergence",
    "closed_form_divergence",
    "check_monotone",
    "check_normalization",
    "check_moment",
    "monotone_margins",
    "kruzkov_ledger",
    "discrete_commutator",
]


class CFLError(ValueError):
    """Raised when a step would break monotonicity; ``value`` is ``max |a_k f'| dt/dx``."""

    def __init__(self, msg, value):
        super().__init__(msg)
        self.value = value


class LedgerError(AssertionError):
    pass


def _unit(k, d):
    e = [0] * d
    e[k] = 1
    return tuple(e)


# A flux family maps (a, u, flux, lam) -> {axis: {offset: values}}.  ``a`` has
# the component axis first and broadcasts against ``u``.
FluxFamily = Callable[[np.ndarray, np.ndarray, FluxLaw, float], dict]


@dataclass(frozen=True)
class SchemeDef:
    """A member of the scheme class.

    ``family`` evaluates the per-node fluxes; ``kind`` selects closed-form
    margins for the built-ins (``"custom"`` falls back to probing).
    ``ftilde`` defaults to ``flux.f``.
    """

    name: str
    flux: FluxLaw
    family: FluxFamily
    kind: str = "custom"
    nu: float = 0.0
    gamma: float = 1.0
    cfl: float | None = None
    radius: int = 1
    ftilde: Callable | None = None

    def f_tilde(self, u):
        return (self.ftilde or self.flux.f)(u)

    def fluxes(self, a, u, lam):
        return self.family(np.asarray(a, dtype=float), np.asarray(u, dtype=float), self.flux, lam)


def _upwind_family(a, u, flux, lam):
    d = a.shape[0]
    fu = flux.f(u)
    out = {}
    for k in range(d):
        ak = a[k]
        out[k] = {(0,) * d: np.where(ak >= 0, ak, 0.0) * fu,
                  _unit(k, d): np.where(ak < 0, ak, 0.0) * fu}
    return out


def _lf_family(nu):
    def family(a, u, flux, lam):
        d = a.shape[0]
        fu = flux.f(u)
        visc = (nu / lam) * u
        out = {}
        for k in range(d):
            half = 0.5 * a[k] * fu
            out[k] = {(0,) * d: half + visc, _unit(k, d): half - visc}
        return out

    return family


def upwind(flux, cfl=0.5):
    """Donor-cell fluxes: ``F_0 = a_k f(u)`` where ``a_k >= 0``, ``F_{e_k} = a_k f(u)`` otherwise.

    Monotone when ``f' >= 0`` on the state range and
    ``lam max_i sum_k |a_{i,k}| f' <= 1/2``.
    """
    return SchemeDef("upwind", flux, _upwind_family, kind="upwind", cfl=cfl)


def lax_friedrichs(flux, nu=0.25, d=1):
    """``F_0, F_{e_k} = a_k f(u)/2 +- (nu/lam) u``.  Monotone when
    ``lam |a_k f'| / 2 <= nu <= 1/(4d)``."""
    if not 0 <= nu <= 0.25:
        raise ValueError(f"viscosity must lie in [0, 1/4], got {nu}")
    return SchemeDef("lax-friedrichs", flux, _lf_family(nu), kind="lax-friedrichs", nu=nu, cfl=2 * nu)


def centered(flux):
    """Lax-Friedrichs without viscosity: consistent and conservative but not monotone."""
    return SchemeDef("centered", flux, _lf_family(0.0), kind="centered", nu=0.0, cfl=0.0)


def scheme_by_name(name, flux, **params):
    if name == "upwind":
        return upwind(flux, **params)
    if name in ("lax-friedrichs", "lf"):
        return lax_friedrichs(flux, **params)
    if name == "centered":
        return centered(flux)
    raise ValueError(f"unknown scheme {name!r}")


def _lam(grid):
    return grid.dt / grid.dx


def _roll(x, shift, d):
    if not any(shift):
        return x
    return np.roll(x, shift, axis=tuple(range(x.ndim - d, x.ndim)))


def _apply(fl, d, lam, weight=None):
    """``lam sum_k sum_o [roll(w F_o, o - e_k) - roll(w F_o, o)]``; the lattice
    occupies the last ``d`` axes."""
    out = 0.0
    for k, terms in fl.items():
        e = _unit(k, d)
        for o, F in terms.items():
            if weight is not None:
                F = weight * F
            sh = tuple(oi - ei for oi, ei in zip(o, e))
            out = out + _roll(F, sh, d) - _roll(F, o, d)
    return lam * out


def flux_terms(scheme, a, u):
    """Per-node fluxes ``F^k_o(a_m, u_m)`` as arrays over the lattice."""
    return scheme.fluxes(a.values, u.values, _lam(u.grid))


def increment(scheme, a, u):
    """``u^{n+1} - u^n`` as an array."""
    g = u.grid
    inc = _apply(flux_terms(scheme, a, u), g.d, _lam(g))
    return np.broadcast_to(inc, g.shape) if np.ndim(inc) == 0 else inc


def assemble_b(scheme, a, u, i, m):
    """One coefficient ``b_{i,m}(a_m, u_m)`` with periodic index arithmetic."""
    g = u.grid
    i, m = tuple(np.atleast_1d(i)), tuple(np.atleast_1d(m))
    lam = _lam(g)
    am = a.values[(slice(None),) + m]
    um = u.values[m]
    fl = scheme.fluxes(am, um, lam)
    o = tuple((ii - mm) % g.n for ii, mm in zip(i, m))
    val = um if not any(o) else 0.0

    def lookup(terms, off):
        for key, F in terms.items():
            if tuple(kk % g.n for kk in key) == off:
                return float(F)
        return 0.0

    for k, terms in fl.items():
        e = _unit(k, g.d)
        plus = tuple((oi + ei) % g.n for oi, ei in zip(o, e))
        val += lam * (lookup(terms, plus) - lookup(terms, o))
    return float(val)


@dataclass
class StepReport:
    mass_in: float
    mass_out: float
    dmax: float
    margins: dict = field(default_factory=dict)
    entropy_ledger: list | None = None

    @property
    def mass_defect(self):
        return self.mass_out - self.mass_in


def _state_range(u):
    lo, hi = float(np.min(u)), float(np.max(u))
    return lo, hi


def monotone_margins(scheme, a, u):
    """Closed-form monotonicity margins for the built-ins, probed otherwise.

    Returns ``{"diag", "off", "cfl_value"}``: both margins must be >= 0, and
    ``cfl_value = lam max |a_k f'|``.
    """
    g = u.grid
    lam = _lam(g)
    lo, hi = _state_range(u.values)
    fmin, fmax = scheme.flux.fprime_range(lo, hi)
    fabs = max(abs(fmin), abs(fmax))
    amag = np.abs(a.values)
    cfl_value = lam * float(amag.max(initial=0.0)) * fabs
    if scheme.kind == "upwind":
        diag = 0.5 - lam * float(np.sum(amag, axis=0).max(initial=0.0)) * max(fmax, 0.0)
        off = lam * float(amag.max(initial=0.0)) * min(fmin, 0.0)
    elif scheme.kind in ("lax-friedrichs", "centered"):
        diag = 0.5 - 2 * g.d * scheme.nu
        off = scheme.nu - 0.5 * cfl_value
    else:
        amin = a.values.reshape(g.d, -1).min(axis=1)
        amax = a.values.reshape(g.d, -1).max(axis=1)
        rep = check_monotone(scheme, list(zip(amin, amax)), (lo, hi), g.ratio)
        diag, off = rep["diag_margin"], rep["off_margin"]
    return {"diag": diag, "off": off, "cfl_value": cfl_value}


def step(scheme, a, u, check=True, ledger=None):
    """Advance one time step.

    ``check`` refuses non-monotone configurations with :class:`CFLError`;
    negative-control runs pass ``check=False``.  ``ledger`` (an h ladder)
    attaches the discrete entropy ledger to the report.
    """
    if a.grid.shape != u.grid.shape:
        raise ValueError("a and u live on different grids")
    margins = {}
    if check:
        margins = monotone_margins(scheme, a, u)
        if margins["diag"] < -1e-12 or margins["off"] < -1e-12:
            raise CFLError(f"monotonicity lost: dt/dx max|a f'| = {margins['cfl_value']:.6g} "
                           f"(margins {margins['diag']:.3g}, {margins['off']:.3g})", margins["cfl_value"])
    inc = increment(scheme, a, u)
    new = u.values + inc
    if not np.all(np.isfinite(new)):
        raise FloatingPointError("non-finite state after step")
    u1 = u.with_values(new)
    D = _divergence_values(scheme, a)
    rep = StepReport(float(np.sum(u.values)), float(np.sum(new)), float(np.abs(D).max(initial=0.0)), margins)
    if ledger is not None:
        rep.entropy_ledger = kruzkov_ledger(scheme, a, u, u1, ledger)
    return u1, rep


def _divergence_values(scheme, a, U=None):
    g = a.grid
    if U is None:
        U = scheme.flux.probe_states()[0]
    ft = float(scheme.f_tilde(np.array(U)))
    uc = np.full(g.shape, float(U))
    inc = _apply(scheme.fluxes(a.values, uc, _lam(g)), g.d, _lam(g))
    return np.broadcast_to(inc, g.shape) / (g.dt * ft)


def discrete_divergence(scheme, a, probes=None, tol=1e-10):
    """``D_i`` from ``sum_j b_{i,j}(a_j, U) = U + dt D_i ftilde(U)``.

    Probes at least three constants and raises if the result depends on ``U``.
    Returns ``(D, ftilde, report)``.
    """
    probes = probes or scheme.flux.probe_states()
    if len(probes) < 3:
        raise ValueError("need at least three probe states")
    Ds = [_divergence_values(scheme, a, U) for U in probes]
    scale = max(float(np.abs(a.values).max(initial=0.0)) / a.grid.dx, 1e-300)
    resid = max(float(np.abs(D - Ds[0]).max(initial=0.0)) for D in Ds[1:]) / scale
    if resid > tol:
        raise ValueError(f"scheme violates divcondition (relative U-dependence {resid:.3g})")
    xs = np.linspace(scheme.flux.u_min, scheme.flux.u_max, 513)
    ft = scheme.f_tilde(xs)
    w1inf_ft = float(np.max(np.abs(ft)) + np.max(np.abs(np.diff(ft) / np.diff(xs))))
    w1inf_f = float(np.max(np.abs(scheme.flux.f(xs))) + scheme.flux.lip)
    report = {"residual": resid, "ftilde_ratio": w1inf_ft / w1inf_f if w1inf_f > 0 else 0.0}
    return ScalarField(a.grid, Ds[0]), scheme.f_tilde, report


def closed_form_divergence(scheme, a):
    """Hand-telescoped ``D`` for the built-in families."""
    g = a.grid
    D = np.zeros(g.shape)
    for k in range(g.d):
        ak = a.values[k]
        if scheme.kind == "upwind":
            ap, am = np.where(ak >= 0, ak, 0.0), np.where(ak < 0, ak, 0.0)
            D += (np.roll(ap, -1, axis=k) - ap + am - np.roll(am, 1, axis=k)) / g.dx
        elif scheme.kind in ("lax-friedrichs", "centered"):
            D += (np.roll(ak, -1, axis=k) - np.roll(ak, 1, axis=k)) / (2 * g.dx)
        else:
            raise ValueError("closed form known for built-in schemes only")
    return ScalarField(g, D)


def check_normalization(scheme, a_samples, u_samples, lam=0.25):
    """Worst relative residual of ``sum_j F^k_j(a, u) = a_k f(u)`` on the samples."""
    a = np.asarray(a_samples, dtype=float)  # (d, S)
    u = np.asarray(u_samples, dtype=float)  # (S,)
    fl = scheme.fluxes(a, u, lam)
    fu = scheme.flux.f(u)
    worst = 0.0
    for k, terms in fl.items():
        total = sum(terms.values())
        target = a[k] * fu
        scale = np.maximum(np.abs(target), np.abs(a[k]) * scheme.flux.lip * np.maximum(np.abs(u), 1.0))
        scale = np.where(scale > 0, scale, 1.0)
        worst = max(worst, float(np.max(np.abs(total - target) / scale)))
    return worst


def _b_offsets(scheme, a, u, lam):
    """``{o: b(o; a, u)}`` with ``o = i - m``; ``a`` and ``u`` may be arrays."""
    fl = scheme.fluxes(a, u, lam)
    d = a.shape[0]
    out = {(0,) * d: np.array(u, dtype=float)}
    for k, terms in fl.items():
        e = _unit(k, d)
        for o, F in terms.items():
            # F^k_o enters b(o - e_k) with + and b(o) with -
            om = tuple(oi - ei for oi, ei in zip(o, e))
            out[om] = out.get(om, 0.0) + lam * F
            out[o] = out.get(o, 0.0) - lam * F
    return out


def check_monotone(scheme, a_range, u_range, ratio, samples=9, eps=1e-6):
    """Probe ``d/du b(o; a, u) >= 0`` and ``d/du (b(0; a, u) - u/2) >= 0``.

    ``a_range`` is one ``(lo, hi)`` pair per axis and ``ratio = dt/dx``.
    Returns the worst margins, a pass flag and the largest admissible ratio
    (found by bisection on the same sample set).
    """
    a_range = [tuple(map(float, r)) for r in a_range]
    d = len(a_range)
    axes = [np.linspace(lo, hi, samples) for lo, hi in a_range]
    lo, hi = map(float, u_range)
    us = np.linspace(lo, hi, samples)
    kinks = [k for k in scheme.flux.kinks if lo < k < hi]
    us = np.unique(np.concatenate([us, np.array(kinks) - 10 * eps, np.array(kinks) + 10 * eps]))
    mesh = np.meshgrid(*axes, us, indexing="ij")
    A = np.stack([m.ravel() for m in mesh[:d]])
    U = mesh[d].ravel()

    def margins(lam):
        bp = _b_offsets(scheme, A, U + eps, lam)
        bm = _b_offsets(scheme, A, U - eps, lam)
        diag, off = math.inf, math.inf
        zero = (0,) * d
        for o in bp:
            der = (np.asarray(bp[o]) - np.asarray(bm[o])) / (2 * eps)
            if o == zero:
                diag = min(diag, float(np.min(der)) - 0.5)
                off = min(off, float(np.min(der)))
            else:
                off = min(off, float(np.min(der)))
        return diag, off

    diag, off = margins(ratio)
    ok = diag >= -1e-10 and off >= -1e-10
    lo_r, hi_r = 0.0, max(ratio, 1.0) * 4
    if all(x >= -1e-10 for x in margins(1e-9)):
        for _ in range(50):
            mid = 0.5 * (lo_r + hi_r)
            if all(x >= -1e-10 for x in margins(mid)):
                lo_r = mid
            else:
                hi_r = mid
        implied = lo_r
    else:
        implied = 0.0
    return {"diag_margin": diag, "off_margin": off, "monotone": ok, "cfl_bound": implied}


def check_moment(scheme, a, u, p=2.0):
    """``max_{i,k} sum_o |o|^gamma |F^k_o(a_{i-o}, u_{i-o})| / (||f'|| ||a||_p ||u||_p*)``.

    ``|o|`` is measured in lattice units.  Returns the ratio (``inf`` when the
    bracket vanishes but the left side does not) and the raw maximum.
    """
    g = u.grid
    fl = flux_terms(scheme, a, u)
    worst = 0.0
    for k, terms in fl.items():
        acc = np.zeros(g.shape)
        for o, F in terms.items():
            w = math.sqrt(sum(x * x for x in o)) ** scheme.gamma if any(o) else 0.0
            if w:
                acc = acc + w * _roll(np.abs(np.broadcast_to(F, g.shape)), o, g.d)
        worst = max(worst, float(acc.max(initial=0.0)))
    bracket = scheme.flux.lip * lp_norm(a, p) * lp_norm(u, conjugate_exponent(p))
    if bracket == 0:
        ratio = 0.0 if worst == 0 else math.inf
    else:
        ratio = worst / bracket
    return {"lhs_max": worst, "bracket": bracket, "ratio": ratio, "gamma": scheme.gamma}


# -- pair sums --------------------------------------------------------------


@lru_cache(maxsize=16)
def _fold_index(d, n):
    """Flat gather index with ``M.ravel()[idx].sum(0) = prof``."""
    N = n**d
    j = np.arange(N)
    if d == 1:
        r = np.arange(n)
        cols = (j[:, None] + r[None, :]) % n
        idx = j[:, None] * n + cols
    else:
        j0, j1 = np.divmod(j, n)
        r0, r1 = np.divmod(np.arange(N), n)
        cols = ((j0[:, None] + r0[None, :]) % n) * n + (j1[:, None] + r1[None, :]) % n
        idx = j[:, None] * N + cols
    idx = idx.astype(np.intp)
    idx.setflags(write=False)
    return idx


def _pair_profile(M, d, n):
    """Fold a pair matrix ``M[j, i]`` (rows: flattened ``j``; columns: lattice
    ``i``) into ``prof[r] = sum_j M[j, j + r]``."""
    idx = _fold_index(d, n)
    return np.take(M.ravel(), idx).sum(axis=0).reshape((n,) * d)


def _batched(u, d):
    """Row ``j`` holds the constant ``u_j``; shape ``(N, 1, ..., 1)``."""
    return u.reshape((-1,) + (1,) * d)


def _ledger_profiles(scheme, a, u0, u1, D):
    """h-independent profiles for the ledger pair sums."""
    g = u0.grid
    d, n = g.d, g.n
    lam = _lam(g)
    uv = u0.values
    uj = _batched(uv, d)
    sigma = np.sign(uv[None] - uj)  # s_{m j}, rows j
    # sum_m s_mj b_{i,m}(a_m, w_m) for w = u and w = u_j, as functions of i
    own = sigma * uv[None] + _apply(scheme.fluxes(a.values, uv, lam), d, lam, weight=sigma)
    aj = a.values[(slice(None), None)]
    const = np.broadcast_to(uj, sigma.shape)
    frozen = sigma * const + _apply(scheme.fluxes(aj, const, lam), d, lam, weight=sigma)
    A = own - frozen
    P = A - np.abs(uv[None] - uj)
    ft = scheme.f_tilde(uv)
    Dv = D.values
    s1 = np.sign(u1.values[None] - _batched(u1.values, d))
    Dj = _batched(Dv, d)
    ftj = _batched(ft, d)
    Dterm = s1 * (Dv[None] * ftj - Dj * ft[None])
    Dbound = np.abs(Dv[None] - Dj) * np.abs(ftj) + np.abs(Dj) * np.abs(ftj - ft[None])
    return {
        "P": _pair_profile(P, d, n),
        "D": _pair_profile(Dterm, d, n),
        "Dbound": _pair_profile(Dbound, d, n),
        "Amin": float(A.min()),
    }


def _commutator_kernel_diff(h, d, n):
    K = _periodic_table("K", float(h), d, n)
    return [np.roll(K, 1, axis=k) - K for k in range(d)]


def discrete_commutator(a, u, flux, h, profile=None):
    """``(1/dx) sum_{i,j} sum_k s_ij (K_{i-e_k-j} - K_{i-j}) (a_{i,k} - a_{j,k}) (f(u_i) - f(u_j))``."""
    g = u.grid
    if profile is None:
        profile = kruzkov_profile(a.values, u.values, flux.f(u.values))
    diffs = _commutator_kernel_diff(h, g.d, g.n)
    return float(sum(np.sum(dk * profile[k]) for k, dk in enumerate(diffs))) / g.dx


def kruzkov_ledger(scheme, a, u_n, u_np1, ladder, theta=0.5, tol=1e-8, raise_on_violation=True):
    """Per-scale discrete entropy ledger for one step.

    For every ``h``: ``lhs = sum K |u^{n+1}_i - u^{n+1}_j|`` and the right side
    ``(i) + (ii) + (iii) + (iv)`` with

    * (i)   ``sum K |u^n_i - u^n_j|``,
    * (ii)  ``dt sum K s^{n+1}_ij (D_i f(u_j) - D_j f(u_i))`` and its bound,
    * (iii) ``dt`` times :func:`discrete_commutator` at time ``n``,
    * (iv)  the remainder ``2 sum K (A - |u^n_i - u^n_j|) - (iii)``, where
      ``A_ij = sum_m |b_{i,m}(a_m, u_m) - b_{i,m}(a_m, u_j)|``.

    The inequality follows from monotonicity alone, so a violation flags a
    broken scheme axiom.  ``weight = dx^{2d} |log h|^-theta`` converts each
    entry to the semi-norm scale.
    """
    g = u_n.grid
    D = ScalarField(g, _divergence_values(scheme, a))
    prof = _ledger_profiles(scheme, a, u_n, u_np1, D)
    T1 = diff_profile(u_np1.values, 1)
    T0 = diff_profile(u_n.values, 1)
    Y = kruzkov_profile(a.values, u_n.values, scheme.flux.f(u_n.values))
    rows = []
    for h in ladder:
        K = _periodic_table("K", float(h), g.d, g.n)
        lhs = float(np.sum(K * T1))
        t1 = float(np.sum(K * T0))
        t2 = g.dt * float(np.sum(K * prof["D"]))
        t2b = g.dt * float(np.sum(K * prof["Dbound"]))
        t3 = g.dt * discrete_commutator(a, u_n, scheme.flux, h, profile=Y)
        t4 = 2.0 * float(np.sum(K * prof["P"])) - t3
        rhs = t1 + t2 + t3 + t4
        scale = max(abs(lhs), abs(t1), abs(t2), abs(t3), abs(t4), 1e-300)
        slack = rhs - lhs
        rows.append({
            "h": float(h), "lhs": lhs, "i": t1, "ii": t2, "ii_bound": t2b, "iii": t3, "iv": t4,
            "rhs": rhs, "slack": slack, "rel_slack": slack / scale,
            "weight": g.cell_volume**2 * _log_weight(h, theta),
        })
    if raise_on_violation:
        bad = [r for r in rows if r["rel_slack"] < -tol]
        if bad:
            raise LedgerError(f"entropy ledger violated at h={bad[0]['h']:.4g} "
                              f"(relative slack {bad[0]['rel_slack']:.3g})")
    return rows


def gronwall_step_bound(rows):
    """``sup_h`` of the weighted left and right sides: the one-step semi-norm
    growth certified by the ledger."""
    lhs = max(r["weight"] * r["lhs"] for r in rows)
    rhs = max(r["weight"] * r["rhs"] for r in rows)
    return {"seminorm_next": lhs, "bound": rhs}
