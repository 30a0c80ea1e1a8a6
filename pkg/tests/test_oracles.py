import math

import numpy as np
import pytest

from roughcont.forge import smooth_bump
from roughcont.grid import FluxLaw, GridSpec, ScalarField, VectorField, lp_norm
from roughcont.oracles import (EntropyViolation, RiemannProblem, characteristics_advect, entropy_pair_check,
                               riemann_exact, riemann_initial, shock_position)
from roughcont.scheme import centered, lax_friedrichs, step, upwind

BURGERS = FluxLaw.burgers(1.0)


def test_riemann_examples():
    shock = RiemannProblem(BURGERS, 1.0, 0.0)
    assert shock.shock_speed == pytest.approx(0.5)
    x = np.linspace(-1, 2, 301)
    assert np.array_equal(riemann_exact(shock, x, 2.0), np.where(x < 1.0, 1.0, 0.0))
    flat = RiemannProblem(BURGERS, 0.3, 0.3)
    assert np.all(riemann_exact(flat, x, 1.0) == 0.3)
    fan = RiemannProblem(BURGERS, 0.0, 1.0)
    t = 0.8
    u = riemann_exact(fan, x, t)
    inside = (x > 0) & (x < t)
    assert np.allclose(u[inside], x[inside] / t)
    assert np.all(u[x <= 0] == 0.0) and np.all(u[x >= t] == 1.0)


def test_riemann_generic_convex_flux():
    f = FluxLaw.piecewise_linear([0.0, 0.5, 1.0], [0.0, 0.1, 0.6])
    fan = RiemannProblem(f, 0.0, 1.0)
    u = riemann_exact(fan, np.array([0.1, 0.5, 1.5]), 1.0)
    assert u[0] == 0.0 and u[-1] == 1.0
    with pytest.raises(ValueError):
        RiemannProblem(FluxLaw.logistic(1.0), 0.0, 1.0)


@pytest.mark.parametrize("n", [128, 256])
def test_scheme_tracks_burgers_shock(n):
    g = GridSpec.from_ratio(1, n, 0.5)
    u = riemann_initial(g, 0.5, 0.0, 0.25, 0.75)
    a = VectorField.constant(g, [-1.0])
    s = upwind(FluxLaw.burgers(0.5))
    for _ in range(int(round(0.5 / g.dt))):
        u, _ = step(s, a, u)
    pos = shock_position(u, 0.25, (0.3, 0.7))
    assert abs(pos - 0.375) <= 2 * g.dx


def test_shock_position_requires_crossing():
    g = GridSpec(1, 16, 1.0)
    with pytest.raises(ValueError):
        shock_position(ScalarField.constant(g, 1.0), 0.5, (0.0, 1.0))


def test_characteristics_trivial_cases():
    g = GridSpec(1, 128, 1.0)
    u0 = smooth_bump(g, 0.3, 0.08)
    assert np.allclose(characteristics_advect(VectorField.constant(g, [0.0]), u0, 0.5, 10).values, u0.values)
    # translation by a whole number of cells is exact
    out = characteristics_advect(VectorField.constant(g, [0.5]), u0, 0.25, 20)
    assert np.allclose(out.values, np.roll(u0.values, 16), atol=1e-12)
    g2 = GridSpec(2, 32, 1.0)
    b = smooth_bump(g2, 0.5, 0.1)
    out = characteristics_advect(VectorField.constant(g2, [0.25, -0.25]), b, 0.5, 8)
    assert np.allclose(out.values, np.roll(b.values, (4, -4), axis=(0, 1)), atol=1e-12)


def test_characteristics_conserve_mass():
    g = GridSpec(1, 256, 1.0)
    x = g.coords()[0]
    v = VectorField(g, (0.6 + 0.3 * np.sin(2 * math.pi * x))[None])
    u0 = smooth_bump(g, 0.5, 0.1)
    out = characteristics_advect(v, u0, 0.25, 200)
    assert out.total() == pytest.approx(u0.total(), rel=1e-4)


def test_upwind_converges_to_characteristics():
    errs, ns = [], (64, 128, 256, 512)
    for n in ns:
        g = GridSpec.from_ratio(1, n, 0.5)
        x = g.coords()[0]
        v = VectorField(g, (0.6 + 0.3 * np.sin(2 * math.pi * x))[None])
        u0 = smooth_bump(g, 0.5, 0.1)
        ref = characteristics_advect(v, u0, 0.25, 400)
        u = u0
        s = upwind(FluxLaw.linear(-5, 5))
        for _ in range(int(round(0.25 / g.dt))):
            u, _ = step(s, v.scaled(-1.0), u)
        errs.append(lp_norm(u.with_values(u.values - ref.values), 1))
    order = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert order >= 0.8


def _trace(scheme, a, u, steps, check=True):
    out = [u]
    for _ in range(steps):
        u, _ = step(scheme, a, u, check=check)
        out.append(u)
    return out


def test_entropy_pair_constant_velocity():
    g = GridSpec(1, 64, 0.3 / 64)
    a = VectorField.constant(g, [1.0])
    s = upwind(FluxLaw.linear(-2, 2))
    tr = _trace(s, a, ScalarField(g, np.random.default_rng(0).uniform(0, 1, 64)), 30)
    rows = entropy_pair_check(s, tr, 0.0, a)
    assert all(r["lhs"] <= rows[0]["lhs"] + 1e-14 for r in rows)


def test_entropy_pair_consumes_divergence_slack():
    g = GridSpec(1, 64, 0.2 / 64)
    x = g.coords()[0]
    a = VectorField(g, (0.8 + 0.3 * np.sin(2 * math.pi * x))[None])
    s = upwind(FluxLaw.linear(-2, 2))
    tr = _trace(s, a, ScalarField(g, 0.5 + 0.3 * np.cos(2 * math.pi * x)), 20)
    rows = entropy_pair_check(s, tr, 1.2, a)
    assert all(r["slack"] >= 0 for r in rows)
    assert any(r["bound"] > lp_norm(tr[r["step"]].with_values(tr[r["step"]].values - 1.2), 1) for r in rows)


def test_entropy_pair_flags_control():
    g = GridSpec(1, 32, 0.4 / 32)
    a = VectorField.constant(g, [1.0])
    s = centered(FluxLaw.linear(-2, 2))
    tr = _trace(s, a, ScalarField(g, np.random.default_rng(1).uniform(0, 1, 32)), 30, check=False)
    with pytest.raises(EntropyViolation):
        entropy_pair_check(s, tr, 0.5, a)
