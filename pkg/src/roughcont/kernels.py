"""Pair-sum kernels over the periodic lattice.

Every translation-invariant pair sum used by the package has the form

    sum_{i in torus} sum_{j in Z^d} W(x_i - x_j) P(i, j)

with ``P`` periodic in ``j``.  Folding ``j`` modulo ``n`` turns it into
``sum_r Wper[r] * profile[r]`` where ``Wper`` is the periodised weight and the
*profile* ``profile[r] = sum_i P(i, i - r)`` does not depend on the weight.  The
profiles below cost O(N^2) for ``N = n^d`` nodes and are the hot loops of the
package; each has a numba implementation and a vectorised numpy fallback (see
:mod:`roughcont._accel`).
"""

import numpy as np

from . import _accel

__all__ = ["diff_profile", "commutator_profile", "commutator_profile_fft", "kruzkov_profile", "correlate",
           "control_at_offsets"]

if _accel.HAVE_NUMBA:
    from numba import njit, prange
else:  # pragma: no cover
    prange = range

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap


# -- numba ------------------------------------------------------------------


@njit(cache=True)
def _diff_profile_1d(u, p):
    n = u.shape[0]
    out = np.zeros(n)
    for r in range(1, n):
        s = 0.0
        for i in range(n):
            j = i - r
            if j < 0:
                j += n
            e = abs(u[i] - u[j])
            if p == 1.0:
                s += e
            elif p == 2.0:
                s += e * e
            else:
                s += e ** p
        out[r] = s
    return out


@njit(cache=True)
def _diff_profile_2d(u, p):
    n0, n1 = u.shape
    out = np.zeros((n0, n1))
    for r0 in range(n0):
        for r1 in range(n1):
            if r0 == 0 and r1 == 0:
                continue
            s = 0.0
            for i0 in range(n0):
                j0 = i0 - r0
                if j0 < 0:
                    j0 += n0
                for i1 in range(n1):
                    j1 = i1 - r1
                    if j1 < 0:
                        j1 += n1
                    e = abs(u[i0, i1] - u[j0, j1])
                    if p == 1.0:
                        s += e
                    elif p == 2.0:
                        s += e * e
                    else:
                        s += e ** p
            out[r0, r1] = s
    return out


@njit(cache=True)
def _commutator_profile_1d(a, g):
    n = g.shape[0]
    R = np.zeros((1, n))
    Q = np.zeros(n)
    for r in range(1, n):
        sr = 0.0
        sq = 0.0
        for i in range(n):
            j = i - r
            if j < 0:
                j += n
            dg = g[i] - g[j]
            da = a[0, i] - a[0, j]
            w = dg * dg
            sr += da * w
            sq += abs(da) * w
        R[0, r] = sr
        Q[r] = sq
    return R, Q


@njit(cache=True)
def _commutator_profile_2d(a, g):
    n0, n1 = g.shape
    R = np.zeros((2, n0, n1))
    Q = np.zeros((n0, n1))
    for r0 in range(n0):
        for r1 in range(n1):
            if r0 == 0 and r1 == 0:
                continue
            s0 = 0.0
            s1 = 0.0
            sq = 0.0
            for i0 in range(n0):
                j0 = i0 - r0
                if j0 < 0:
                    j0 += n0
                for i1 in range(n1):
                    j1 = i1 - r1
                    if j1 < 0:
                        j1 += n1
                    dg = g[i0, i1] - g[j0, j1]
                    w = dg * dg
                    da0 = a[0, i0, i1] - a[0, j0, j1]
                    da1 = a[1, i0, i1] - a[1, j0, j1]
                    s0 += da0 * w
                    s1 += da1 * w
                    sq += np.sqrt(da0 * da0 + da1 * da1) * w
            R[0, r0, r1] = s0
            R[1, r0, r1] = s1
            Q[r0, r1] = sq
    return R, Q


@njit(cache=True)
def _kruzkov_profile_1d(a, u, fu):
    n = u.shape[0]
    Y = np.zeros((1, n))
    for r in range(1, n):
        s = 0.0
        for i in range(n):
            j = i - r
            if j < 0:
                j += n
            du = u[i] - u[j]
            if du > 0.0:
                s += (a[0, i] - a[0, j]) * (fu[i] - fu[j])
            elif du < 0.0:
                s -= (a[0, i] - a[0, j]) * (fu[i] - fu[j])
        Y[0, r] = s
    return Y


@njit(cache=True)
def _kruzkov_profile_2d(a, u, fu):
    n0, n1 = u.shape
    Y = np.zeros((2, n0, n1))
    for r0 in range(n0):
        for r1 in range(n1):
            if r0 == 0 and r1 == 0:
                continue
            s0 = 0.0
            s1 = 0.0
            for i0 in range(n0):
                j0 = i0 - r0
                if j0 < 0:
                    j0 += n0
                for i1 in range(n1):
                    j1 = i1 - r1
                    if j1 < 0:
                        j1 += n1
                    du = u[i0, i1] - u[j0, j1]
                    if du == 0.0:
                        continue
                    F = fu[i0, i1] - fu[j0, j1]
                    if du < 0.0:
                        F = -F
                    s0 += (a[0, i0, i1] - a[0, j0, j1]) * F
                    s1 += (a[1, i0, i1] - a[1, j0, j1]) * F
            Y[0, r0, r1] = s0
            Y[1, r0, r1] = s1
    return Y


@njit(cache=True, parallel=True)
def _control_offsets_2d(a, g, offs):
    n0, n1 = g.shape
    out = np.zeros(offs.shape[0])
    for t in prange(offs.shape[0]):
        r0, r1 = offs[t, 0], offs[t, 1]
        s = 0.0
        for i0 in range(n0):
            j0 = (i0 - r0) % n0
            for i1 in range(n1):
                j1 = (i1 - r1) % n1
                dg = g[i0, i1] - g[j0, j1]
                d0 = a[0, i0, i1] - a[0, j0, j1]
                d1 = a[1, i0, i1] - a[1, j0, j1]
                s += np.sqrt(d0 * d0 + d1 * d1) * dg * dg
        out[t] = s
    return out


@njit(cache=True, parallel=True)
def _control_offsets_1d(a, g, offs):
    n = g.shape[0]
    out = np.zeros(offs.shape[0])
    for t in prange(offs.shape[0]):
        r = offs[t, 0]
        s = 0.0
        for i in range(n):
            j = (i - r) % n
            dg = g[i] - g[j]
            s += abs(a[0, i] - a[0, j]) * dg * dg
        out[t] = s
    return out


# -- numpy ------------------------------------------------------------------


def _offsets(shape):
    return np.ndindex(*shape)


def _roll(x, r, lead=0):
    axes = tuple(range(lead, lead + len(r)))
    return np.roll(x, r, axis=axes)


def _diff_profile_np(u, p):
    out = np.zeros(u.shape)
    for r in _offsets(u.shape):
        if any(r):
            out[r] = np.sum(np.abs(u - _roll(u, r)) ** p)
    return out


def _commutator_profile_np(a, g):
    R = np.zeros(a.shape)
    Q = np.zeros(g.shape)
    for r in _offsets(g.shape):
        if not any(r):
            continue
        w = (g - _roll(g, r)) ** 2
        da = a - _roll(a, r, lead=1)
        R[(slice(None),) + r] = np.sum(da * w, axis=tuple(range(1, a.ndim)))
        Q[r] = np.sum(np.sqrt(np.sum(da**2, axis=0)) * w)
    return R, Q


def _control_offsets_np(a, g, offs):
    out = np.empty(offs.shape[0])
    for t, r in enumerate(offs):
        r = tuple(int(c) for c in r)
        w = (g - _roll(g, r)) ** 2
        da = a - _roll(a, r, lead=1)
        out[t] = np.sum(np.sqrt(np.sum(da**2, axis=0)) * w)
    return out


def _kruzkov_profile_np(a, u, fu):
    Y = np.zeros(a.shape)
    for r in _offsets(u.shape):
        if not any(r):
            continue
        F = np.sign(u - _roll(u, r)) * (fu - _roll(fu, r))
        da = a - _roll(a, r, lead=1)
        Y[(slice(None),) + r] = np.sum(da * F, axis=tuple(range(1, a.ndim)))
    return Y


# -- dispatch ---------------------------------------------------------------


def _c(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def diff_profile(u, p):
    """``T[r] = sum_i |u_i - u_{i-r}|^p`` for every periodic offset ``r``.

    ``p == 2`` always goes through the FFT identity
    ``T[r] = 2 sum u^2 - 2 (u corr u)[r]`` which is exact up to rounding.
    """
    u = _c(u)
    if p == 2:
        c = correlate(u, u)
        out = 2.0 * np.sum(u * u) - 2.0 * c
        out.flat[0] = 0.0
        return np.maximum(out, 0.0)
    if _accel.use_numba():
        return _diff_profile_1d(u, float(p)) if u.ndim == 1 else _diff_profile_2d(u, float(p))
    return _diff_profile_np(u, p)


def commutator_profile(a, g):
    """Vector profile ``R[r] = sum_i (a_i - a_{i-r}) (g_i - g_{i-r})^2`` and the
    no-cancellation profile ``Q[r] = sum_i |a_i - a_{i-r}| (g_i - g_{i-r})^2``."""
    a, g = _c(a), _c(g)
    if _accel.use_numba():
        return _commutator_profile_1d(a, g) if g.ndim == 1 else _commutator_profile_2d(a, g)
    return _commutator_profile_np(a, g)


def commutator_profile_fft(a, g):
    """``R`` from :func:`commutator_profile` through four cross-correlations."""
    a, g = _c(a), _c(g)
    g2 = g * g
    R = np.empty(a.shape)
    for k in range(a.shape[0]):
        ak = a[k]
        R[k] = (-2.0 * correlate(ak * g, g) + correlate(ak, g2)
                - correlate(g2, ak) + 2.0 * correlate(g, ak * g))
    return R


def control_at_offsets(a, g, offsets):
    """``Q[r]`` of :func:`commutator_profile` for selected offsets only;
    ``offsets`` has shape ``(k, d)`` with entries taken modulo ``n``."""
    a, g = _c(a), _c(g)
    offs = np.ascontiguousarray(np.mod(offsets, g.shape[0]), dtype=np.int64)
    if _accel.use_numba() and g.ndim in (1, 2):
        return (_control_offsets_1d if g.ndim == 1 else _control_offsets_2d)(a, g, offs)
    return _control_offsets_np(a, g, offs)


def kruzkov_profile(a, u, fu):
    """``Y[r] = sum_i (a_i - a_{i-r}) sign(u_i - u_{i-r}) (f(u_i) - f(u_{i-r}))``."""
    a, u, fu = _c(a), _c(u), _c(fu)
    if _accel.use_numba():
        return _kruzkov_profile_1d(a, u, fu) if u.ndim == 1 else _kruzkov_profile_2d(a, u, fu)
    return _kruzkov_profile_np(a, u, fu)


def correlate(x, y):
    """Periodic cross-correlation ``C[r] = sum_i x_i y_{i-r}``."""
    axes = tuple(range(x.ndim))
    return np.fft.irfftn(np.fft.rfftn(x) * np.conj(np.fft.rfftn(y)), s=x.shape, axes=axes)
