import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughcont.forge import RoughFieldSpec, spectral_scalar
from roughcont.grid import GridSpec, ScalarField
from roughcont.seminorm import (LogKernel, SemiNormParams, continuous_seminorm, cutoff, discrete_seminorm,
                                dyadic_ladder, fourier_equiv_check, grad_kernel_eval, kernel_eval, kernel_mass,
                                mollification_check, mollify, seminorm_ladder)


def test_kernel_values():
    assert kernel_eval(0.0, 0.25) == pytest.approx(4.0)
    assert kernel_eval(np.zeros(2), 0.25, 2) == pytest.approx(16.0)
    assert kernel_eval(2.0, 0.1) == 0.0
    assert kernel_eval(np.array([1.5, 1.5]), 0.1, 2) == 0.0
    assert kernel_eval(0.5, 0.25) == pytest.approx(4 / 3)


def test_gradient_values():
    assert grad_kernel_eval(0.0, 0.25) == 0.0
    assert np.all(grad_kernel_eval(np.zeros(2), 0.25, 2) == 0.0)
    assert grad_kernel_eval(2.5, 0.25) == 0.0
    # exact derivative of 1/(r + h) inside the unit ball
    assert grad_kernel_eval(0.5, 0.25) == pytest.approx(-16 / 9)
    assert grad_kernel_eval(-0.5, 0.25) == pytest.approx(16 / 9)


@pytest.mark.parametrize("d", [1, 2])
def test_gradient_matches_finite_differences(d):
    rng = np.random.default_rng(d)
    for _ in range(20):
        x = rng.uniform(-2.2, 2.2, d)
        if np.linalg.norm(x) < 1e-3:
            continue
        eps = 1e-6
        fd = [(kernel_eval(x + eps * e, 0.1, d) - kernel_eval(x - eps * e, 0.1, d)) / (2 * eps)
              for e in np.eye(d)]
        got = grad_kernel_eval(x if d > 1 else x[0], 0.1, d)
        assert np.allclose(np.ravel(got), np.ravel(fd), atol=1e-5)


def test_cutoff_is_c1():
    r = np.linspace(0, 2.5, 2001)
    assert np.all(np.diff(cutoff(r)) <= 1e-15)
    assert cutoff(1.0) == 1.0 and cutoff(2.0) == 0.0


@pytest.mark.parametrize("d,lo,hi", [(1, 2.0, 2.9), (2, 4.8, 5.9)])
def test_kernel_mass_log_scaling(d, lo, hi):
    # bounds established once by a quadrature sweep over h = 2^-2 .. 2^-12
    ratios = [kernel_mass(2.0**-k, d) / (k * math.log(2)) for k in range(2, 13)]
    assert lo <= min(ratios) and max(ratios) <= hi
    masses = [kernel_mass(2.0**-k, d) for k in range(2, 13)]
    assert all(b > a for a, b in zip(masses, masses[1:]))


@pytest.mark.parametrize("h", [0.5, 0.1, 1e-3])
def test_kernel_mass_lower_bound(h):
    assert kernel_mass(h) >= 2 * math.log((1 + h) / h)
    with pytest.raises(ValueError):
        kernel_mass(0.6)


def test_lattice_mass_approaches_integral():
    k = LogKernel(0.125, GridSpec(1, 1024, 1.0))
    assert k.lattice_mass() == pytest.approx(k.mass(), rel=2e-3)


def _brute_seminorm(vals, alpha, p, theta):
    n = len(vals)
    dx = 1 / n
    best = 0.0
    for h in dyadic_ladder(dx**alpha):
        s = 0.0
        for i in range(n):
            for j in range(n):
                K = sum(kernel_eval((i - j + n * m) * dx, h) for m in range(-3, 4))
                s += K * abs(vals[i] - vals[j]) ** p
        best = max(best, (dx * dx * s * abs(math.log(h)) ** -theta) ** (1 / p))
    return best


@pytest.mark.parametrize("alpha,p,theta", [(0.5, 1.0, 0.5), (0.9, 1.0, 0.5), (0.9, 2.0, 0.25)])
def test_seminorm_brute_force(backend, alpha, p, theta):
    g = GridSpec(1, 8, 1.0)
    vals = [1, 1, 1, 1, 0, 0, 0, 0]
    u = ScalarField(g, vals)
    got = discrete_seminorm(u, SemiNormParams(alpha, p, theta))
    assert got == pytest.approx(_brute_seminorm(vals, alpha, p, theta), rel=1e-12)


def test_seminorm_brute_force_random(backend):
    vals = list(np.random.default_rng(7).standard_normal(16))
    u = ScalarField(GridSpec(1, 16, 1.0), vals)
    got = discrete_seminorm(u, SemiNormParams(0.99, 1.5, 0.5))
    assert got == pytest.approx(_brute_seminorm(vals, 0.99, 1.5, 0.5), rel=1e-12)


@given(st.floats(-5, 5), st.integers(0, 2**31))
def test_seminorm_shift_invariance(c, seed):
    g = GridSpec(1, 32, 1.0)
    u = ScalarField(g, np.random.default_rng(seed).standard_normal(32))
    prm = SemiNormParams(0.5, 1.0, 0.5)
    assert discrete_seminorm(ScalarField.constant(g, c), prm) == 0.0
    assert discrete_seminorm(u.with_values(u.values + c), prm) == pytest.approx(discrete_seminorm(u, prm), rel=1e-9)


def test_ladder_rules():
    g = GridSpec(1, 64, 1.0)
    assert SemiNormParams(0.5).ladder(g) == [0.5, 0.25, 0.125]
    with pytest.raises(ValueError):
        SemiNormParams(0.5, h_set=(0.0625,)).ladder(g)
    with pytest.raises(ValueError):
        SemiNormParams(1.5)


def test_seminorm_ladder_record():
    g = GridSpec(2, 16, 1.0)
    u = ScalarField(g, np.random.default_rng(1).standard_normal(g.shape))
    rec = seminorm_ladder(u, SemiNormParams(0.75, 1.0, 0.5))
    assert rec["sup"] == max(r["value"] for r in rec["ladder"])


def _suite(n=64):
    g = GridSpec(1, n, 1.0)
    x = g.coords()[0]
    out = [ScalarField(g, np.cos(2 * math.pi * m * x)) for m in (1, 3, 8)]
    out.append(ScalarField(g, (x < 0.4).astype(float)))
    out += [spectral_scalar(RoughFieldSpec(b, seed=s), g) for s, b in enumerate((0.6, 1.0, 1.5))]
    return out


def test_continuous_and_discrete_agree_within_factor_four():
    for u in _suite():
        ladder = dyadic_ladder(u.grid.dx)
        disc = discrete_seminorm(u, SemiNormParams(1.0, 1.0, 0.5, tuple(ladder)))
        cont = continuous_seminorm(u, 1.0, 0.5, ladder)
        assert 0.25 <= cont / disc <= 4.0


def test_continuous_seminorm_monotone_in_theta():
    # the weight |log h|^-theta decreases in theta only where |log h| >= 1
    for u in _suite():
        ladder = [h for h in dyadic_ladder(u.grid.dx) if h <= 1 / math.e]
        vals = [continuous_seminorm(u, 1.0, t, ladder) for t in (0.0, 0.25, 0.5, 1.0)]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
        assert continuous_seminorm(ScalarField.constant(u.grid, 2.0), 1.0, 0.5) == 0.0


def test_fourier_side_single_modes():
    g = GridSpec(1, 256, 1.0)
    x = g.coords()[0]
    ratios = []
    for m in (1, 2, 4, 8, 16, 32, 64):
        r = fourier_equiv_check(ScalarField(g, np.cos(2 * math.pi * m * x)), 0.5)
        assert math.isfinite(r["ratio"]) and r["ratio"] > 0
        ratios.append(r["ratio"])
    assert max(ratios) / min(ratios) < 10
    c = fourier_equiv_check(ScalarField.constant(g, 3.0), 0.5)
    assert c["ratio"] == pytest.approx(1.0) and c["lhs"] == pytest.approx(9.0)


def test_mollify_preserves_constants_and_mass():
    g = GridSpec(2, 16, 1.0)
    u = ScalarField(g, np.random.default_rng(0).standard_normal(g.shape))
    assert np.allclose(mollify(ScalarField.constant(g, 1.5), 0.25).values, 1.5)
    assert mollify(u, 0.25).total() == pytest.approx(u.total(), abs=1e-10)


def test_mollification_error_decreases_with_h():
    u = _suite(128)[3]
    rows = mollification_check(u, 0.5)
    errs = [r["error"] for r in rows]
    assert errs[-1] < errs[0]
