"""Shrunken versions of the pinned experiments; the full runs live in
test_acceptance.py."""

import pytest

from roughcont.config import ConfigError, load_config, parse_config
from roughcont.experiments import load_constants, run_experiment


def small(name, **over):
    return run_experiment(load_config(name).with_overrides(**over))


def names(rec):
    return {c.name: c.passed for c in rec.checks}


def test_mass_small():
    rec = small("c01_mass", run__configs=6, run__steps=5)
    assert rec.passed and len(rec.rows) == 6


def test_order_small():
    rec = small("c02_order", run__configs=4, run__steps=10)
    assert rec.passed


def test_ledger_small():
    rec = small("c03_ledger", grid__n=32, run__configs=3, run__steps=10)
    assert rec.passed


def test_max_principle_small():
    assert small("c04_max_principle", run__configs=4, run__steps=10).passed


def test_axioms():
    rec = small("c11_axioms", run__configs=3)
    assert rec.passed


def test_convergence_small():
    rec = small("c06_convergence", run__refinements=(64, 128, 256), run__T=0.2, field__n_ref=256)
    assert set(names(rec)) >= {"convergence-smooth", "control-not-decreasing"}


def test_riemann_and_characteristics_small():
    assert small("c10_riemann", run__sizes=(128, 256), run__T=0.5).passed
    assert small("c10_characteristics", run__sizes=(64, 128, 256), run__steps=100).passed


def test_besov_small():
    rec = small("c08_besov", grid__n=512, ladder__exponents=tuple(range(3, 9)), run__fields=3)
    assert "besov-bound" in names(rec)
    assert rec.summary["ratio_max"] <= load_constants()["besov_C"]


def test_seminorm_small():
    rec = small("c09_seminorm", run__fields=4)
    assert rec.passed


def test_commutator_control_scaling_small():
    rec = small("c07_commutator", grid__n=64, ladder__exponents=(2, 3, 4, 5, 6), run__fields=2)
    assert names(rec)["commutator-control-slope"]
    assert not rec.summary["control_sampled"]


def test_unknown_suite_rejected():
    cfg = parse_config("[meta]\nkind = simulate\n[run]\nsuite = nope\n")
    with pytest.raises(ConfigError):
        run_experiment(cfg)


def test_missing_constants(tmp_path):
    with pytest.raises(ConfigError):
        load_constants(tmp_path / "absent.json")
