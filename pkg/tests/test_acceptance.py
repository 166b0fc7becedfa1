"""Acceptance criteria, one scenario per criterion.

Each scenario returns a list of checks; a criterion passes when none of its
checks fails. A PASS/FAIL line per criterion is printed (visible with -s, and
in the terminal summary).
"""

import time

import pytest

from diracred import scenarios as sc
from diracred.cli import derive_seed

CRITERIA = {s.criterion: name for name, s in sc.REGISTRY.items() if s.criterion is not None}
TIME_LIMITS = {1: 10.0, 5: 30.0}
RESULTS: dict = {}


def _run(criterion):
    if criterion not in RESULTS:
        name = CRITERIA[criterion]
        t0 = time.perf_counter()
        checks = sc.run_scenario(name, sc.Params(), derive_seed(0, name))
        RESULTS[criterion] = (name, checks, time.perf_counter() - t0)
    return RESULTS[criterion]


def test_all_twelve_criteria_registered():
    assert sorted(CRITERIA) == list(range(1, 13))


@pytest.mark.parametrize("criterion", range(1, 13))
def test_criterion(criterion, capsys):
    name, checks, wall = _run(criterion)
    bad = [c for c in checks if c.status == "fail"]
    ok = not bad and wall < TIME_LIMITS.get(criterion, float("inf"))
    with capsys.disabled():
        print(f"\ncriterion {criterion:2d} {name:34s} {'PASS' if ok else 'FAIL'} "
              f"({len(checks)} checks, {wall:.1f} s)")
    assert checks
    assert not bad, [c.to_dict() for c in bad]
    assert wall < TIME_LIMITS.get(criterion, float("inf"))
