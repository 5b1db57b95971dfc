"""Executable acceptance suite shared by ``ria-ibc verify`` and the test-suite."""

from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction

from . import dofplan
from .simulator import csit_audit, leaky_phase2, run_campaign

TRIALS = 100
PLANNER_PAIRS = ((4, 1), (3, 1), (8, 2), (13, 4), (18, 5), (7, 2), (16, 5), (11, 3))
PLANNER_SMAX = 64
RHO_A, RHO_B, RHO_C = 2.6413, 3.1557, 3.5414
RHO_B_STATED = 3.2196
THRESHOLD_TOL = 1e-4

__all__ = ["CriterionResult", "run_acceptance", "format_table"]


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: str
    expected: str

    def line(self) -> str:
        return (f"[{'PASS' if self.passed else 'FAIL'}] {self.number}. {self.name}: "
                f"measured {self.measured}; expected {self.expected}")


def _campaign_criteria(faults, workers):
    t0 = time.perf_counter()
    summaries = run_campaign(TRIALS, 0, workers=workers, faults=faults)
    elapsed = time.perf_counter() - t0
    three_sevenths = Fraction(3, 7)

    ok = [s for s in summaries if s.success]
    residual = max((s.max_residual for s in summaries), default=float("nan"))
    dofs = sorted({str(s.dof) for s in summaries})
    c1 = CriterionResult(
        1, "end-to-end DoF reproduction",
        passed=len(ok) == TRIALS and all(s.dof == three_sevenths for s in summaries)
        and residual < 1e-8 and elapsed < 10.0,
        measured=f"{len(ok)}/{TRIALS} trials succeeded, max residual {residual:.2e}, "
                 f"dof {','.join(dofs)}, {elapsed:.1f} s",
        expected=f"{TRIALS}/{TRIALS}, residual < 1e-08, dof 3/7, < 10 s")

    target = (3, 3, 1, 5)
    bad = [s.seed for s in summaries if any(c != target for c in s.stage_counts)]
    seen = sorted({c for s in summaries for c in s.stage_counts})
    c2 = CriterionResult(
        2, "stage counts per UE",
        passed=not bad,
        measured=f"{TRIALS - len(bad)}/{TRIALS} trials with {target} at every UE; observed {seen}",
        expected=f"{target} at every UE on every trial")

    agree = max(s.agreement for s in summaries)
    dims = [d for s in summaries for d in s.nullspace_dims]
    min_dim = min((d for d in dims if d is not None), default=0)
    c3 = CriterionResult(
        3, "staged decoder equals null-space oracle",
        passed=agree < 1e-8 and min_dim >= 12,
        measured=f"max disagreement {agree:.2e}, null-space dimension {sorted(set(dims))}",
        expected="disagreement < 1e-08, dimension >= 12")

    def all_eq(part, value):
        return all(v == value for s in summaries for v in s.ranks[part].values())

    checks = {
        "T=3": all_eq("T", 3),
        "phase1 stack=12": all_eq("phase1_stack", 12),
        "phase2=3": all_eq("phase2", 3),
        "phase3=2": all_eq("phase3", 2),
        "phase4=3": all_eq("phase4", 3),
        "phase4 unknowns=3": all(r == 3 for s in summaries for r in s.unknown_ranks),
    }
    c8 = CriterionResult(
        8, "rank properties",
        passed=all(checks.values()),
        measured=", ".join(f"{k} {'ok' if v else 'VIOLATED'}" for k, v in checks.items()) + f" over {TRIALS} seeds",
        expected="all ranks as designed on every seed")
    return c1, c2, c3, c8


def _planner_criterion():
    t0 = time.perf_counter()
    mismatches, parts = [], []
    for M, N in PLANNER_PAIRS:
        want = dofplan.theorem1(Fraction(M, N))
        try:
            got = dofplan.optimize(M, N, PLANNER_SMAX).dof
        except dofplan.SearchExhausted:
            got = None
        parts.append(f"({M},{N})->{got}")
        if got != want:
            mismatches.append(f"({M},{N}) {got} != {want}")
    elapsed = time.perf_counter() - t0
    return CriterionResult(
        4, "planner equals closed-form DoF",
        passed=not mismatches and elapsed < 60.0,
        measured=" ".join(parts) + f" in {elapsed:.1f} s"
                 + (f"; mismatches: {'; '.join(mismatches)}" if mismatches else ""),
        expected=f"optimize(M,N,s_max={PLANNER_SMAX}) == theorem1(M/N) for all pairs, < 60 s")


def _threshold_criterion():
    a, b, c = dofplan.thresholds()
    passed = abs(a - RHO_A) < THRESHOLD_TOL and abs(b - RHO_B) < THRESHOLD_TOL and abs(c - RHO_C) < THRESHOLD_TOL
    return CriterionResult(
        5, "branch thresholds",
        passed=passed,
        measured=f"rho_A={a:.6f} rho_B={b:.6f} rho_C={c:.6f} "
                 f"(rho_B differs from the stated {RHO_B_STATED} by {RHO_B_STATED - b:.4f})",
        expected=f"{RHO_A}, {RHO_B}, {RHO_C} within {THRESHOLD_TOL}")


def _curve_criterion():
    rows = dofplan.sweep(0.25, 4.5, 0.05)
    rho_a = dofplan.thresholds()[0]
    below_outer = all(r.previous <= r.outer for r in rows)
    beats_prev = all(r.proposed >= r.previous for r in rows if r.rho >= rho_a)
    F = Fraction
    spots = {
        "outer(2)=12/25": dofplan.outer_bound(F(2)) == F(12, 25),
        "previous(3)=3/8": dofplan.previous_inner(F(3)) == F(3, 8),
        "previous(4)=2/5": dofplan.previous_inner(F(4)) == F(2, 5),
        "no_csit(1)=1/4": dofplan.no_csit(F(1)) == F(1, 4),
    }
    return CriterionResult(
        6, "comparison curves",
        passed=below_outer and beats_prev and all(spots.values()),
        measured=f"{len(rows)} grid points, previous<=outer {below_outer}, proposed>=previous {beats_prev}, "
                 + ", ".join(f"{k} {v}" for k, v in spots.items()),
        expected="all True")


def _audit_criterion():
    clean = csit_audit(1)
    leaky = csit_audit(1, builders={"phase2": leaky_phase2})
    passed = clean.passed and len(clean.log) > 0 and len(leaky.violations) == 1 and not leaky.passed
    return CriterionResult(
        7, "delayed-CSIT audit",
        passed=passed,
        measured=f"{len(clean.log)} queries with {len(clean.violations)} violations; "
                 f"injected fault gives {len(leaky.violations)} violation(s)",
        expected="0 violations; injected fault detected")


def run_acceptance(faults=(), workers: int | None = None) -> list[CriterionResult]:
    """Run all eight criteria; ``faults`` are injected into the simulated precoders."""
    c1, c2, c3, c8 = _campaign_criteria(tuple(faults), workers)
    return [c1, c2, c3, _planner_criterion(), _threshold_criterion(), _curve_criterion(),
            _audit_criterion(), c8]


def format_table(results) -> str:
    lines = [r.line() for r in results]
    n = sum(r.passed for r in results)
    lines.append(f"{n}/{len(results)} criteria passed")
    return "\n".join(lines)
