"""Acceptance runs on the pinned configs, one line per criterion.

Also runnable directly: ``python tests/test_acceptance.py [numbers...]``.
"""

import sys

import pytest

from roughcont.config import load_config
from roughcont.experiments import run_experiment

CRITERIA = {
    1: ("mass conservation", ["c01_mass"], 60),
    2: ("order preservation and centered control", ["c02_order"], None),
    3: ("discrete Kruzkov ledger", ["c03_ledger"], 300),
    4: ("maximum principle, logistic flux", ["c04_max_principle"], None),
    5: ("uniform regularity across refinements", ["c05_envelope"], 600),
    6: ("refinement differences decrease", ["c06_convergence"], None),
    7: ("commutator scaling", ["c07_commutator"], 300),
    8: ("delocalized integral scaling and Besov bound", ["c08_besov"], None),
    9: ("Fourier equivalence and mollification bound", ["c09_seminorm"], None),
    10: ("Riemann and characteristics oracles", ["c10_riemann", "c10_characteristics"], None),
    11: ("scheme axiom self-checks", ["c11_axioms"], None),
}


def evaluate(number):
    """Run every config of a criterion; returns (passed, one-line report)."""
    title, configs, budget = CRITERIA[number]
    ok = True
    parts = []
    wall = 0.0
    for name in configs:
        rec = run_experiment(load_config(name))
        wall += rec.wall_clock
        ok = ok and rec.passed
        parts += [f"{c.name} {c.value:.4g} vs {c.threshold:.4g}{'' if c.passed else ' (failed)'}" for c in rec.checks]
    if budget is not None and wall > budget:
        ok = False
        parts.append(f"runtime {wall:.0f}s over {budget}s")
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}  [{wall:.1f}s]  " + ", ".join(parts)
    return ok, line


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    ok, line = evaluate(number)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    wanted = [int(a) for a in sys.argv[1:]] or sorted(CRITERIA)
    results = [evaluate(k) for k in wanted]
    for _ok, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
