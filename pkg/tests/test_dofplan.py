import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ria_ibc.dofplan import (
    NO_CSIT,
    OUTER_BOUND,
    PREVIOUS_INNER,
    DofPlan,
    SearchExhausted,
    no_csit,
    optimize,
    outer_bound,
    previous_inner,
    sweep,
    theorem1,
    theorem1_plan,
    thresholds,
    to_csv,
)


def brute_force(M, N, s_max):
    """Independent oracle: enumerate b as well, pure Python, no shortcuts."""
    best = None
    for S1 in range(1, s_max + 1):
        for S2 in range(1, s_max + 1):
            for S3 in range(1, s_max + 1):
                for b in range(1, M * S1 + 1):
                    rest = F(b, N) - S1 - 3 * S2
                    S4 = min(F(6 * S2), rest)
                    if S4 < 1 or S4.denominator != 1:
                        continue
                    plan = DofPlan(M, N, b, (S1, S2, S3, int(S4)), 4 * S1 + 6 * S2 + 4 * S3 + int(S4),
                                   F(b, N * (4 * S1 + 6 * S2 + 4 * S3 + int(S4))))
                    if plan.violations():
                        continue
                    key = (-plan.dof, plan.tau, plan.S[:3])
                    if best is None or key < best[0]:
                        best = (key, plan)
    return None if best is None else best[1]


def test_thresholds():
    a, b, c = thresholds()
    assert abs(a - 2.6413) < 1e-4
    assert abs(b - 3.1557) < 1e-4
    assert abs(c - (1 + math.sqrt(37)) / 2) < 1e-10
    assert abs(2 * a**3 - 3 * a**2 - 3 * a - 8) < 1e-9


def test_theorem1_values():
    assert theorem1(4) == F(3, 7)
    assert theorem1(F(3)) == F(27, 71)
    assert theorem1(10) == F(3, 7)
    c = thresholds()[2]
    # both adjacent branches give 0.41575 at rho_C
    assert theorem1(c) == pytest.approx(9 * c / (16 * c + 20), abs=1e-12)
    assert theorem1(c) == pytest.approx(0.41575, abs=1e-5)
    assert theorem1(F(7, 2)) == 3 * F(49, 4) / (5 * F(49, 4) + 7 * F(7, 2) + 3)
    assert theorem1(F(18, 5)) == 9 * F(18, 5) / (16 * F(18, 5) + 20)


def test_theorem1_domain():
    with pytest.raises(ValueError):
        theorem1(2.5)
    with pytest.raises(ValueError):
        theorem1(-1)


def test_theorem1_continuity():
    a, b, c = thresholds()
    assert abs(theorem1(a + 1e-12) - 1 / 3) < 1e-9
    for x in (b, c):
        assert abs(theorem1(x - 1e-11) - theorem1(x + 1e-11)) < 1e-9
    assert 9 * F(4) / (16 * 4 + 20) == F(3, 7)


def test_previous_inner():
    assert previous_inner(F(2)) == F(1, 3)
    assert previous_inner(F(3)) == F(3, 8)
    assert previous_inner(F(4)) == F(2, 5)
    assert previous_inner(F(1, 4)) == F(1, 8)
    assert previous_inner(F(3, 2)) == F(3, 10)


def test_outer_bound():
    assert outer_bound(F(2)) == F(12, 25)
    assert outer_bound(F(1)) == F(1, 3)
    assert outer_bound(F(3, 2)) == F(6, 13)
    assert outer_bound(F(5, 8)) == F(5, 17)


def test_outer_continuous():
    assert all(j == 0 for _, j in OUTER_BOUND.jumps())
    assert all(j == 0 for _, j in NO_CSIT.jumps())
    assert [x for x, j in PREVIOUS_INNER.jumps() if j != 0] == [F(3), F(4)]


def test_no_csit():
    assert no_csit(F(1)) == F(1, 4)
    assert no_csit(0.4) == pytest.approx(0.2)
    assert no_csit(100) == F(1, 4)
    with pytest.raises(ValueError):
        no_csit(0)


@pytest.mark.parametrize("M, N, plan", [
    (4, 1, (12, (3, 1, 1, 6), 28)),
    (3, 1, (27, (9, 3, 2, 9), 71)),
    (8, 2, (24, (3, 1, 1, 6), 28)),
])
def test_optimize_examples(M, N, plan):
    p = optimize(M, N)
    assert (p.b, p.S, p.tau) == plan
    assert p.dof == theorem1(F(M, N))
    assert not p.violations()


# Goldens from the exhaustive search with s_max = 64; cross-checked at small
# bounds against brute_force below.
OPTIMIZE_GOLDEN = {
    (13, 4): F(52, 129),
    (18, 5): F(81, 194),
    (7, 2): F(12, 29),
    (16, 5): F(153, 382),
    (11, 3): F(99, 236),
}


@pytest.mark.parametrize("pair", sorted(OPTIMIZE_GOLDEN))
def test_optimize_golden(pair):
    assert optimize(*pair).dof == OPTIMIZE_GOLDEN[pair]


@pytest.mark.parametrize("M, N, s_max", [(4, 1, 8), (3, 1, 10), (5, 2, 8), (7, 2, 8), (13, 4, 7), (2, 1, 6)])
def test_optimize_matches_brute_force(M, N, s_max):
    expected = brute_force(M, N, s_max)
    if expected is None:
        with pytest.raises(SearchExhausted):
            optimize(M, N, s_max)
    else:
        assert optimize(M, N, s_max) == expected


def test_never_exceeds_theorem():
    for M in range(3, 25):
        for N in range(1, 9):
            rho = F(M, N)
            if rho > 8 or 2 * rho**3 - 3 * rho**2 - 3 * rho - 8 < 0:
                continue
            assert optimize(M, N, 24).dof <= theorem1(rho)


@pytest.mark.parametrize("M, N", [(4, 1), (3, 1), (8, 2), (13, 4), (18, 5), (7, 2), (16, 5), (11, 3), (5, 1), (29, 8)])
def test_closed_form_plan(M, N):
    p = theorem1_plan(M, N)
    assert not p.violations()
    assert p.dof == theorem1(F(M, N))


def test_search_exhausted():
    with pytest.raises(SearchExhausted):
        optimize(1, 1)
    with pytest.raises(ValueError):
        optimize(0, 1)


def test_plan_json_round_trip():
    p = optimize(4, 1)
    assert p.to_json() == {"b": 12, "S": [3, 1, 1, 6], "tau": 28, "dof": {"num": 3, "den": 7}}
    assert DofPlan.from_json(p.to_json(), M=4) == p
    assert DofPlan.from_json(p.to_json(), M=4, N=1) == p


def test_violations_detects():
    bad = DofPlan(4, 1, 13, (3, 1, 1, 6), 28, F(13, 28))
    assert "phase-1 rank M*S1 >= b" in bad.violations()


def test_sweep_grid():
    rows = sweep(0.25, 4.5, 0.05)
    assert len(rows) == 86
    a = thresholds()[0]
    assert all((r.proposed is None) == (r.rho < a) for r in rows)
    proposed = [r.proposed for r in rows if r.proposed is not None]
    assert proposed == sorted(proposed)
    for r in rows:
        assert r.previous <= r.outer
        if r.proposed is not None:
            assert r.previous <= r.proposed <= r.outer


def test_csv():
    text = to_csv(sweep(0.25, 4.5, 0.05))
    lines = text.splitlines()
    assert lines[0] == "rho,proposed,previous,outer,no_csit"
    assert "4.0,0.428571428571,0.4,0.48,0.25" in lines
    assert lines[1] == "0.25,,0.125,0.125,0.125"


def test_sweep_invalid():
    with pytest.raises(ValueError):
        sweep(1.0, 0.5, 0.1)
    with pytest.raises(ValueError):
        sweep(0.5, 1.0, 0)


@settings(max_examples=200, deadline=None)
@given(st.fractions(min_value=F(1, 100), max_value=F(20)))
def test_sandwich(rho):
    prev, outer = previous_inner(rho), outer_bound(rho)
    assert prev <= outer
    if 2 * rho**3 - 3 * rho**2 - 3 * rho - 8 >= 0:
        assert prev <= theorem1(rho) <= outer
