"""DoF planning for general ``(M, N)`` and the normalized-DoF comparison curves.

A plan fixes the symbol count ``b`` and per-phase slot counts
``S = (S1, S2, S3, S4)`` with ``tau = 4 S1 + 6 S2 + 4 S3 + S4``; its per-user
DoF is ``b / (N tau)``.  The feasibility constraints are

* ``M S1 >= b`` and ``4 N S1 >= b``   (phase-1 rank and equation count)
* ``M S2 >= N S1``                    (phase-2 rank)
* ``M S3 >= 2 N S2``                  (phase-3 rank)
* ``N (S1 + 3 S2 + 6 min(S2, S3)) >= b``  (total equation count)
* ``S4 = min(6 S2, b/N - S1 - 3 S2)``, a positive integer.

All DoF comparisons use :class:`fractions.Fraction`; floats appear only in
curve evaluation and root finding.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import bisect

__all__ = [
    "DEFAULT_SMAX",
    "NO_CSIT",
    "OUTER_BOUND",
    "PREVIOUS_INNER",
    "DofPlan",
    "PiecewiseCurve",
    "SearchExhausted",
    "SweepRow",
    "no_csit",
    "optimize",
    "outer_bound",
    "previous_inner",
    "sweep",
    "theorem1",
    "theorem1_plan",
    "thresholds",
    "to_csv",
]

DEFAULT_SMAX = 64
ROOT_XTOL = 1e-12
CSV_HEADER = ("rho", "proposed", "previous", "outer", "no_csit")


class SearchExhausted(RuntimeError):
    """No feasible plan exists within the search bound."""


# --------------------------------------------------------------------------
# piecewise rational curves


def _poly(coeffs, x):
    """Evaluate ``sum(c_k x^k)`` (coefficients low to high) by Horner's rule."""
    acc = 0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


@dataclass(frozen=True)
class PiecewiseCurve:
    """Rational function per interval.

    ``pieces[k]`` applies on ``[breakpoints[k-1], breakpoints[k])`` with
    ``breakpoints[-1] = 0`` implicitly and the last piece unbounded above.
    Each piece is ``(num, den)``, polynomial coefficients in ``rho`` from
    the constant term upwards.
    """

    name: str
    breakpoints: tuple
    pieces: tuple

    def __post_init__(self):
        if len(self.pieces) != len(self.breakpoints) + 1:
            raise ValueError("need exactly one more piece than breakpoints")
        if list(self.breakpoints) != sorted(self.breakpoints):
            raise ValueError("breakpoints must be increasing")

    def piece_index(self, rho) -> int:
        k = 0
        while k < len(self.breakpoints) and rho >= self.breakpoints[k]:
            k += 1
        return k

    def eval_piece(self, k: int, rho):
        num, den = self.pieces[k]
        n, d = _poly(num, rho), _poly(den, rho)
        if isinstance(n, (int, Fraction)) and isinstance(d, (int, Fraction)):
            return Fraction(n) / Fraction(d)
        return n / d

    def __call__(self, rho):
        if not rho > 0:
            raise ValueError(f"rho must be positive, got {rho!r}")
        if isinstance(rho, int):
            rho = Fraction(rho)
        return self.eval_piece(self.piece_index(rho), rho)

    def jumps(self):
        """``(breakpoint, left - right)`` at every interior breakpoint."""
        out = []
        for k, x in enumerate(self.breakpoints):
            out.append((x, self.eval_piece(k, x) - self.eval_piece(k + 1, x)))
        return out


_F = Fraction
HALF_RHO = ((0, _F(1, 2)), (1,))

PREVIOUS_INNER = PiecewiseCurve(
    "previous_inner",
    (_F(1, 2), _F(1), _F(2), _F(3), _F(4)),
    (
        HALF_RHO,
        ((_F(1, 4),), (1,)),
        ((0, 1), (2, 2)),
        ((_F(1, 3),), (1,)),
        ((_F(3, 8),), (1,)),
        ((_F(2, 5),), (1,)),
    ),
)

OUTER_BOUND = PiecewiseCurve(
    "outer_bound",
    (_F(1, 2), _F(3, 4), _F(1), _F(4, 3), _F(3, 2), _F(2)),
    (
        HALF_RHO,
        ((0, 2), (3, 2)),
        ((_F(1, 3),), (1,)),
        ((0, _F(1, 3)), (1,)),
        ((0, 2), (2, 3)),
        ((0, 6), (3, 11)),
        ((_F(12, 25),), (1,)),
    ),
)

NO_CSIT = PiecewiseCurve("no_csit", (_F(1, 2),), (HALF_RHO, ((_F(1, 4),), (1,))))


def previous_inner(rho):
    """Best normalized DoF per user of earlier delayed-CSIT schemes."""
    return PREVIOUS_INNER(rho)


def outer_bound(rho):
    return OUTER_BOUND(rho)


def no_csit(rho):
    return NO_CSIT(rho)


# --------------------------------------------------------------------------
# achievable DoF of the four-phase scheme

_BRANCH_POLYS = (
    (-8, -3, -3, 2),    # rho_A: branch 1 meets 1/3
    (-12, -3, -1, 1),   # rho_B: branch 1 meets branch 2
    (-9, -1, 1),        # rho_C: branch 2 meets branch 3
)
_BRANCHES = (
    ((0, 0, 0, 1), (8, 3, 3, 1)),
    ((0, 0, 3), (3, 7, 5)),
    ((0, 9), (20, 16)),
    ((3,), (7,)),
)


def _branch(rho) -> int:
    """Branch index 0..3 from exact polynomial signs; -1 below ``rho_A``."""
    if _poly(_BRANCH_POLYS[0], rho) < 0:
        return -1
    if _poly(_BRANCH_POLYS[1], rho) < 0:
        return 0
    if _poly(_BRANCH_POLYS[2], rho) < 0:
        return 1
    if rho < 4:
        return 2
    return 3


def theorem1(rho):
    """Normalized DoF per user achieved by the scheme at antenna ratio ``rho``.

    Exact for ``int``/``Fraction`` input (returns a ``Fraction``), float otherwise.

    Raises
    ------
    ValueError
        If ``rho`` is below ``rho_A``, where the scheme does not beat earlier ones.
    """
    if isinstance(rho, int):
        rho = Fraction(rho)
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho!r}")
    k = _branch(rho)
    if k < 0:
        raise ValueError(f"rho={float(rho):.6g} is below rho_A; the scheme is only defined above it")
    num, den = _BRANCHES[k]
    n, d = _poly(num, rho), _poly(den, rho)
    return Fraction(n) / Fraction(d) if isinstance(rho, Fraction) else n / d


def thresholds() -> tuple[float, float, float]:
    """Branch boundaries ``(rho_A, rho_B, rho_C)`` by bisection."""
    brackets = ((2.0, 3.0), (3.0, 4.0), (3.0, 4.0))
    return tuple(
        float(bisect(lambda x, c=c: _poly(c, x), lo, hi, xtol=ROOT_XTOL))
        for c, (lo, hi) in zip(_BRANCH_POLYS, brackets)
    )


# --------------------------------------------------------------------------
# plans


@dataclass(frozen=True)
class DofPlan:
    M: int
    N: int
    b: int
    S: tuple
    tau: int
    dof: Fraction

    def violations(self) -> list[str]:
        """Every violated constraint, checked in integer arithmetic."""
        M, N, b = self.M, self.N, self.b
        S1, S2, S3, S4 = self.S
        out = []
        checks = (
            ("positive slot counts", all(isinstance(s, int) and s >= 1 for s in self.S)),
            ("phase-1 rank M*S1 >= b", M * S1 >= b),
            ("phase-1 equations 4N*S1 >= b", 4 * N * S1 >= b),
            ("phase-2 rank M*S2 >= N*S1", M * S2 >= N * S1),
            ("phase-3 rank M*S3 >= 2N*S2", M * S3 >= 2 * N * S2),
            ("total equations N(S1+3S2+6min(S2,S3)) >= b", N * (S1 + 3 * S2 + 6 * min(S2, S3)) >= b),
            ("phase-4 length N*S4 = min(6N*S2, b - N*S1 - 3N*S2)",
             N * S4 == min(6 * N * S2, b - N * S1 - 3 * N * S2)),
            ("tau = 4S1+6S2+4S3+S4", self.tau == 4 * S1 + 6 * S2 + 4 * S3 + S4),
            ("dof = b/(N tau)", self.dof == Fraction(b, N * self.tau)),
        )
        for name, ok in checks:
            if not ok:
                out.append(name)
        return out

    def to_json(self) -> dict:
        return {"b": self.b, "S": list(self.S), "tau": self.tau,
                "dof": {"num": self.dof.numerator, "den": self.dof.denominator}}

    @classmethod
    def from_json(cls, doc: dict, M: int, N: int | None = None) -> "DofPlan":
        """Parse a plan document; ``N`` defaults to ``b / (dof tau)``."""
        dof = Fraction(int(doc["dof"]["num"]), int(doc["dof"]["den"]))
        b, tau = int(doc["b"]), int(doc["tau"])
        if N is None:
            n = Fraction(b) / (dof * tau)
            if n.denominator != 1:
                raise ValueError("inconsistent plan document")
            N = int(n)
        return cls(M=M, N=N, b=b, S=tuple(int(s) for s in doc["S"]), tau=tau, dof=dof)


def _check_dims(M, N, s_max):
    for name, v in (("M", M), ("N", N), ("s_max", s_max)):
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")


def optimize(M: int, N: int, s_max: int = DEFAULT_SMAX) -> DofPlan:
    """Exhaustive search for the DoF-maximizing plan with ``S1, S2, S3 <= s_max``.

    For each ``(S1, S2, S3)`` the largest feasible ``b`` is used; larger ``b``
    never lowers the DoF.  Ties are broken by smallest ``tau`` and then the
    lexicographically smallest ``(S1, S2, S3)``.

    Raises
    ------
    SearchExhausted
        When no triple admits a feasible plan.
    """
    _check_dims(M, N, s_max)
    s = np.arange(1, s_max + 1, dtype=np.int64)
    S2, S3 = (a.ravel() for a in np.meshgrid(s, s, indexing="ij"))
    best_key, best = None, None
    for S1 in range(1, s_max + 1):
        b = np.minimum.reduce([np.full_like(S2, min(M, 4 * N) * S1), N * (S1 + 3 * S2 + 6 * np.minimum(S2, S3))])
        # S4 must be an integer: on the rational branch, b/N - S1 - 3 S2 < 6 S2,
        # round b down to a multiple of N.
        rational = b - N * S1 - 3 * N * S2 < 6 * N * S2
        b = np.where(rational, (b // N) * N, b)
        s4 = np.minimum(6 * S2, (b - N * S1 - 3 * N * S2) // N)
        ok = (M * S2 >= N * S1) & (M * S3 >= 2 * N * S2) & (s4 >= 1) & (b >= 1)
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            continue
        tau = 4 * S1 + 6 * S2 + 4 * S3 + s4
        approx = b[idx] / (N * tau[idx])
        for n in idx[approx >= approx.max() * (1 - 1e-9)]:
            key = (-Fraction(int(b[n]), N * int(tau[n])), int(tau[n]), (S1, int(S2[n]), int(S3[n])))
            if best_key is None or key < best_key:
                best_key, best = key, (int(b[n]), (S1, int(S2[n]), int(S3[n]), int(s4[n])), int(tau[n]))
    if best is None:
        raise SearchExhausted(f"no feasible plan for (M, N) = ({M}, {N}) with s_max = {s_max}")
    b, S, tau = best
    plan = DofPlan(M=M, N=N, b=b, S=S, tau=tau, dof=Fraction(b, N * tau))
    assert not plan.violations(), plan.violations()
    return plan


def theorem1_plan(M: int, N: int) -> DofPlan:
    """Closed-form plan attaining :func:`theorem1` at ``rho = M/N``.

    Slot counts are the optimal vertex ``S_p = s_p b / N`` scaled by the
    least common denominator of the fractions ``s_p``.
    """
    _check_dims(M, N, 1)
    rho = Fraction(M, N)
    k = _branch(rho)
    if k < 0:
        raise ValueError(f"rho={float(rho):.6g} is below rho_A")
    if k == 0:
        s1, s2, s3 = 1 / rho, 1 / rho**2, 2 / rho**3
    elif k == 1:
        s1, s2, s3 = 1 / rho, 1 / rho**2, (rho**2 - rho - 3) / (6 * rho**2)
    elif k == 2:
        s1 = 1 / rho
        s2 = s3 = (rho - 1) / (9 * rho)
    else:
        s1, s2, s3 = Fraction(1, 4), Fraction(1, 12), Fraction(1, 12)
    s4 = min(6 * s2, 1 - s1 - 3 * s2)
    scale = math.lcm(*(f.denominator for f in (s1, s2, s3, s4)))
    S = tuple(int(f * scale) for f in (s1, s2, s3, s4))
    tau = 4 * S[0] + 6 * S[1] + 4 * S[2] + S[3]
    return DofPlan(M=M, N=N, b=N * scale, S=S, tau=tau, dof=Fraction(N * scale, N * tau))


# --------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class SweepRow:
    rho: float
    proposed: float | None
    previous: float
    outer: float
    no_csit: float


def sweep(rho_start: float, rho_end: float, step: float) -> list[SweepRow]:
    """Evaluate every curve on ``rho_start, rho_start + step, ..., <= rho_end``."""
    if not (0 < rho_start < rho_end) or not step > 0:
        raise ValueError(f"invalid grid: start={rho_start}, end={rho_end}, step={step}")
    count = int(math.floor((rho_end - rho_start) / step + 1e-9)) + 1
    rho_a = thresholds()[0]
    rows = []
    for n in range(count):
        rho = round(rho_start + n * step, 10)
        rows.append(SweepRow(
            rho=rho,
            proposed=float(theorem1(rho)) if rho >= rho_a else None,
            previous=float(previous_inner(rho)),
            outer=float(outer_bound(rho)),
            no_csit=float(no_csit(rho)),
        ))
    return rows


def _fmt(v) -> str:
    return "" if v is None else format(v, ".12g")


def to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([repr(float(r.rho)), _fmt(r.proposed), _fmt(r.previous), _fmt(r.outer), _fmt(r.no_csit)])
    return buf.getvalue()
