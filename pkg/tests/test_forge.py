import math

import numpy as np
import pytest

from roughcont.forge import (RoughFieldSpec, block_spectrum_field, field_norm_report, make_rng, poisson_coupling,
                             smooth_bump, spectral_field, spectral_scalar)
from roughcont.grid import GridSpec, ScalarField, VectorField, discrete_w1p, lp_norm


def spectral_div(a):
    g = a.grid
    m = g.wavenumbers()
    return sum(np.fft.ifftn(2j * math.pi * m[k] * drop_nyquist(np.fft.fftn(a.values[k]), m, g.n)).real
               for k in range(g.d))


def drop_nyquist(h, m, n):
    return np.where(np.any(np.abs(m) == n // 2, axis=0), 0.0, h)


def test_rng_streams_are_independent_of_order():
    x = make_rng(3, "a").standard_normal(4)
    make_rng(3, "b").standard_normal(100)
    assert np.array_equal(make_rng(3, "a").standard_normal(4), x)
    assert not np.array_equal(make_rng(3, "b").standard_normal(4), x)


def test_same_seed_same_field():
    g = GridSpec(2, 32, 1.0)
    spec = RoughFieldSpec(1.5, seed=11, divfree=True)
    assert np.array_equal(spectral_field(spec, g).values, spectral_field(spec, g).values)


def test_divfree_field():
    g = GridSpec(2, 64, 1.0)
    a = spectral_field(RoughFieldSpec(2.0, seed=1, divfree=True), g)
    assert np.abs(spectral_div(a)).max() <= 1e-10 * np.abs(a.values).max() * g.n
    with pytest.raises(ValueError):
        spectral_field(RoughFieldSpec(2.0, divfree=True), GridSpec(1, 8, 1.0))


def test_normalisation_modes():
    g = GridSpec(2, 32, 1.0)
    a = spectral_field(RoughFieldSpec(1.5, seed=2, normalize="rms"), g)
    assert lp_norm(a, 2) == pytest.approx(1.0)
    b = spectral_field(RoughFieldSpec(1.5, seed=2, normalize="max", amplitude=0.5, mean=1.0), g)
    assert np.sqrt(((b.values - 1.0) ** 2).sum(0)).max() == pytest.approx(0.5)
    with pytest.raises(ValueError):
        RoughFieldSpec(0.0)


def test_reference_lattice_restriction():
    spec = RoughFieldSpec(1.5, seed=3, n_ref=64)
    fine = spectral_scalar(spec, GridSpec(1, 64, 1.0))
    coarse = spectral_scalar(spec, GridSpec(1, 16, 1.0))
    assert np.array_equal(coarse.values, fine.values[::4])
    with pytest.raises(ValueError):
        spectral_scalar(spec, GridSpec(1, 128, 1.0))


def test_w1p_refinement_regimes():
    # the discrete norm sums raw differences, so n * w1p is the gradient scale
    smooth = [n * discrete_w1p(spectral_field(RoughFieldSpec(6.0, seed=4, n_ref=256), GridSpec(1, n, 1.0)), 2)
              for n in (32, 64, 128, 256)]
    assert max(smooth) / min(smooth) < 1.05
    rough = [n * discrete_w1p(spectral_field(RoughFieldSpec(1.2, seed=4, n_ref=128), GridSpec(2, n, 1.0)), 2)
             for n in (16, 32, 64, 128)]
    assert all(b > 1.2 * a for a, b in zip(rough, rough[1:]))


def test_block_spectrum_weights():
    g = GridSpec(1, 1024, 1.0)
    u = block_spectrum_field(g, 5, lambda k: 1.0 / (k + 1))
    m = np.abs(g.wavenumbers()[0])
    uh = np.fft.fft(u.values) / g.size
    for k in range(1, 9):
        shell = (m >= 2.0 ** (k - 1)) & (m < 2.0**k)
        assert math.sqrt(float(np.sum(np.abs(uh[shell]) ** 2))) == pytest.approx(1.0 / (k + 1))


def test_smooth_bump_periodic():
    g = GridSpec(2, 32, 1.0)
    u = smooth_bump(g, centre=0.0, width=0.1)
    assert u.values[0, 0] == pytest.approx(1.0)
    assert u.values[1, 0] == pytest.approx(u.values[-1, 0])


def test_poisson_coupling():
    g = GridSpec(2, 32, 1.0)
    assert np.allclose(poisson_coupling(ScalarField.constant(g, 2.0)).values, 0.0)
    x = g.coords()
    m = (2, 3)
    phase = 2 * math.pi * (m[0] * x[0] + m[1] * x[1])
    a = poisson_coupling(ScalarField(g, np.cos(phase)))
    m2 = m[0] ** 2 + m[1] ** 2
    for k in range(2):
        want = -2 * math.pi * m[k] * np.sin(phase) / (4 * math.pi**2 * m2)
        assert np.allclose(a.values[k], want, atol=1e-13)
    u = ScalarField(g, np.random.default_rng(0).uniform(0, 1, g.shape))
    a = poisson_coupling(u, lambda v: v**2)
    rhs = u.values**2 - np.mean(u.values**2)
    rhs = np.fft.ifftn(drop_nyquist(np.fft.fftn(rhs), g.wavenumbers(), g.n)).real
    assert np.abs(spectral_div(a) + rhs).max() <= 1e-10 * np.abs(rhs).max()


def test_field_norm_report():
    g = GridSpec(1, 16, 1.0)
    rep = field_norm_report(VectorField.constant(g, [2.0]))
    assert rep["w1p"] == 0.0 and rep["besov_grad"] == 0.0 and rep["div_max"] == 0.0
    a = spectral_field(RoughFieldSpec(1.5, seed=6), g)
    av = a.values[0]
    rep = field_norm_report(a)
    assert rep["w1p"] == pytest.approx(math.sqrt(sum((av[i] - av[(i + 1) % 16]) ** 2 for i in range(16)) / 16))
    assert rep["lp"] == pytest.approx(math.sqrt(sum(v * v for v in av) / 16))
    assert rep["div_max"] == pytest.approx(max(abs(av[(i + 1) % 16] - av[i - 1]) * 8 for i in range(16)))
