import math

import numpy as np
import pytest

from roughcont.besov import (DyadicPartition, MollifierL, besov_norm, bernstein_check, delocalized_conv_integral,
                             lp_blocks)
from roughcont.forge import RoughFieldSpec, spectral_scalar
from roughcont.grid import GridSpec, ScalarField, lp_norm


def mode(n, m, d=1):
    g = GridSpec(d, n, 1.0)
    return ScalarField(g, np.cos(2 * math.pi * m * g.coords()[0]))


def nonzero_blocks(u):
    return [k for k, b in enumerate(lp_blocks(u)) if np.abs(b.values).max() > 1e-12]


@pytest.mark.parametrize("k", [2, 4, 6])
def test_mode_lives_in_neighbouring_blocks(k):
    nz = nonzero_blocks(mode(256, 2**k))
    assert nz and set(nz) <= {k - 1, k, k + 1}
    nz = nonzero_blocks(mode(256, 3 * 2 ** (k - 1)))  # between two dyadic points
    assert set(nz) <= {k - 1, k, k + 1}


def test_constant_is_block_zero():
    u = ScalarField.constant(GridSpec(2, 32, 1.0), 2.0)
    assert nonzero_blocks(u) == [0]
    for p in (1.0, 2.0, 3.0):
        assert besov_norm(u, 0.0, p, 2.0) == pytest.approx(2.0)


@pytest.mark.parametrize("seed", range(20))
def test_blocks_reconstruct(seed):
    d = 1 + seed % 2
    g = GridSpec(d, 128 if d == 1 else 32, 1.0)
    u = ScalarField(g, np.random.default_rng(seed).standard_normal(g.shape))
    total = sum(b.values for b in lp_blocks(u))
    assert np.abs(total - u.values).max() <= 1e-10 * np.abs(u.values).max()


def test_partition_covers_lattice():
    g = GridSpec(2, 64, 1.0)
    part = DyadicPartition.for_grid(g)
    assert np.allclose(sum(part.multipliers(g)), 1.0)


def test_lp_embedding_constant():
    # C frozen from a 60-field sweep (observed max 1.08)
    for s in range(12):
        for p in (1.0, 1.5, 2.0):
            g = GridSpec(1 + s % 2, 256 if s % 2 == 0 else 64, 1.0)
            u = (ScalarField(g, np.random.default_rng(s).standard_normal(g.shape)) if s < 6
                 else spectral_scalar(RoughFieldSpec(0.5 + 0.1 * s, seed=s), g))
            assert besov_norm(u, 0.0, p, 2.0) <= 1.2 * lp_norm(u, p)


def test_besov_non_increasing_in_q():
    g = GridSpec(1, 256, 1.0)
    u = spectral_scalar(RoughFieldSpec(0.8, seed=3), g)
    vals = [besov_norm(u, 0.0, 2.0, q) for q in (1.0, 1.5, 2.0, 4.0, math.inf)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        besov_norm(u, 0.0, 0.5, 2.0)


@pytest.mark.parametrize("k", [2, 4, 6, 8])
def test_bernstein_single_mode(k):
    # angular frequency of a wavenumber-2^k mode is 2 pi 2^k
    u = mode(1024, 2**k)
    assert bernstein_check(lp_blocks(u)[k], k, 1.0, 2.0)["ratio"] == pytest.approx(2 * math.pi, rel=1e-12)


def test_bernstein_constant_and_noise_suite():
    u = ScalarField.constant(GridSpec(1, 64, 1.0), 1.0)
    assert bernstein_check(lp_blocks(u)[0], 0, 1.0, 2.0)["ratio"] == 0.0
    g = GridSpec(1, 1024, 1.0)
    for p in (2.0, 1.5):
        ratios = []
        for k in range(2, 9):
            u = ScalarField(g, np.random.default_rng(k).standard_normal(g.shape))
            ratios.append(bernstein_check(lp_blocks(u)[k], k, 1.0, p)["ratio"])
        assert max(ratios) / min(ratios) <= 4.0
    with pytest.raises(ValueError):
        bernstein_check(lp_blocks(u)[3], 3, 0.5, 1.5)


def test_bernstein_negative_order():
    u = mode(1024, 64)
    r = bernstein_check(lp_blocks(u)[6], 6, -1.0, 2.0)["ratio"]
    assert r == pytest.approx(1 / (2 * math.pi), rel=1e-12)


def test_mollifier_zero_mass():
    L = MollifierL()
    x = np.linspace(-1.2, 1.2, 24001)
    assert abs(np.trapezoid(L.profile(x), x)) < 1e-9
    assert L.hat(np.zeros((1,))) == pytest.approx(0.0)
    # the closed-form transform matches a direct quadrature
    xi = 1.7
    direct = np.trapezoid(L.profile(x) * np.cos(2 * math.pi * xi * x), x)
    assert float(L.hat(np.array([xi]))) == pytest.approx(direct, abs=1e-8)


def test_delocalized_integral_basics():
    g = GridSpec(1, 256, 1.0)
    L = MollifierL()
    assert delocalized_conv_integral(ScalarField.constant(g, 3.0), L, 1 / 64, 2.0) == pytest.approx(0.0, abs=1e-12)
    u = ScalarField(g, np.random.default_rng(0).standard_normal(256))
    vals = [delocalized_conv_integral(u, L, 2.0**-k, 2.0) for k in range(2, 9)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        delocalized_conv_integral(u, L, 1 / 1024, 2.0)
