"""Seeded end-to-end trials, Monte Carlo campaigns and the delayed-CSIT audit."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .channel import (
    SYMBOL_STREAM,
    ChannelSet,
    CsitViolation,
    block_channel,
    complex_gaussian,
    generate,
    keyed_rng,
)
from .frame import USERS, build_frame, cell, total_slots
from .linalg import rank
from .precoding import B, M_ANT, N_ANT, SLOTS, PrecoderSet, build_precoders, phase2_precoders
from .receiver import DECODE_TOL, StagedDecoder, nullspace_oracle_decode, observe

THREADS_ENV = "RIA_IBC_THREADS"

__all__ = [
    "AuditReport",
    "CampaignStats",
    "TrialResult",
    "TrialSummary",
    "csit_audit",
    "draw_symbols",
    "leaky_phase2",
    "monte_carlo",
    "precoder_ranks",
    "run_campaign",
    "run_trial",
    "worker_count",
]


def draw_symbols(seed: int, b: int = B) -> dict:
    """Unit-variance complex Gaussian symbol vectors ``{i: x_i}``."""
    return {i: complex_gaussian(keyed_rng(seed, SYMBOL_STREAM, i), b) for i in USERS}


def precoder_ranks(channels: ChannelSet, pc: PrecoderSet) -> dict:
    """Ranks of the structural blocks of one precoder set.

    ``phase1_stack[i]`` stacks the blocks ``H_{j,c(i)} V_i`` of user ``i``'s
    phase-1 transmission over all four receivers (its own included).
    """
    frame = channels.frame
    out = {
        "T": {k: rank(t.rows) for k, t in pc.T.items()},
        "phase1_stack": {},
        "phase2": {k[::2]: rank(v) for k, v in pc.V.items() if k[1] == 2},
        "phase3": {k[::2]: rank(v) for k, v in pc.V.items() if k[1] == 3},
        "phase4": {k[0]: rank(v) for k, v in pc.V.items() if k[1] == 4},
    }
    for i in USERS:
        r = frame.round_of(1, (i,))
        stack = np.vstack([block_channel(channels, j, cell(i), 1, r) @ pc.get(i, 1, r) for j in USERS])
        out["phase1_stack"][i] = rank(stack)
    return out


@dataclass
class TrialResult:
    seed: int
    staged: tuple = field(repr=False)
    oracle: tuple = field(repr=False)
    agreement: float
    ranks: dict = field(repr=False)
    tau: int
    b: int = B
    N: int = N_ANT
    tol: float = DECODE_TOL

    @property
    def all_success(self) -> bool:
        return (all(r.success for r in self.staged) and all(r.success for r in self.oracle)
                and self.agreement < self.tol)

    @property
    def empirical_dof_per_user(self) -> Fraction | None:
        return Fraction(self.b, self.N * self.tau) if self.all_success else None

    @property
    def max_residual(self) -> float:
        vals = [r.residual for r in self.staged + self.oracle if np.isfinite(r.residual)]
        return max(vals) if vals else float("nan")


def run_trial(seed: int, tol: float = DECODE_TOL, faults=()) -> TrialResult:
    """One full frame for all four UEs with both decoders."""
    frame = build_frame(SLOTS)
    cs = generate(seed, frame, M_ANT, N_ANT)
    pc = build_precoders(cs, seed, faults=faults)
    x = draw_symbols(seed)
    staged, oracle, agreement = [], [], 0.0
    for j in USERS:
        obs = observe(cs, pc, x, j)
        s = StagedDecoder(cs, pc, j).decode(obs, x[j], tol)
        o = nullspace_oracle_decode(j, obs, cs, pc, x[j], tol)
        staged.append(s)
        oracle.append(o)
        if s.recovered is None or o.recovered is None:
            agreement = float("inf")
        else:
            diff = np.linalg.norm(s.recovered - o.recovered) / np.linalg.norm(o.recovered)
            agreement = max(agreement, float(diff))
    return TrialResult(seed=seed, staged=tuple(staged), oracle=tuple(oracle), agreement=agreement,
                       ranks=precoder_ranks(cs, pc), tau=total_slots(frame), tol=tol)


@dataclass(frozen=True)
class TrialSummary:
    """Picklable per-trial digest used by campaigns and the acceptance suite."""

    seed: int
    success: bool
    max_residual: float
    agreement: float
    stage_counts: tuple
    nullspace_dims: tuple
    unknown_ranks: tuple
    ranks: dict
    dof: Fraction | None
    errors: tuple

    @classmethod
    def of(cls, t: TrialResult) -> "TrialSummary":
        return cls(
            seed=t.seed,
            success=t.all_success,
            max_residual=t.max_residual,
            agreement=t.agreement,
            stage_counts=tuple(r.stage_counts for r in t.staged),
            nullspace_dims=tuple(r.nullspace_dim for r in t.oracle),
            unknown_ranks=tuple(r.rank_report.get("unknown_rank") for r in t.staged),
            ranks=t.ranks,
            dof=t.empirical_dof_per_user,
            errors=tuple(r.error for r in t.staged + t.oracle if r.error),
        )


def _summarize(args) -> TrialSummary:
    seed, tol, faults = args
    return TrialSummary.of(run_trial(seed, tol, faults))


def worker_count(requested: int | None = None) -> int:
    """Worker processes to use, capped by ``RIA_IBC_THREADS`` when set."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, n)


def run_campaign(num_trials: int, base_seed: int = 0, tol: float = DECODE_TOL,
                 workers: int | None = None, faults=()) -> list[TrialSummary]:
    """Summaries of trials ``base_seed .. base_seed + num_trials - 1`` in seed order."""
    if num_trials < 1:
        raise ValueError(f"num_trials must be >= 1, got {num_trials}")
    jobs = [(base_seed + n, tol, tuple(faults)) for n in range(num_trials)]
    n = min(worker_count(workers), num_trials)
    if n == 1:
        return [_summarize(a) for a in jobs]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(_summarize, jobs, chunksize=max(1, num_trials // (4 * n))))


@dataclass(frozen=True)
class CampaignStats:
    trials: int
    successes: int
    max_residual: float | None
    dof: Fraction | None
    failures: tuple

    @classmethod
    def aggregate(cls, summaries) -> "CampaignStats":
        summaries = sorted(summaries, key=lambda s: s.seed)
        res = [s.max_residual for s in summaries if np.isfinite(s.max_residual)]
        dofs = {s.dof for s in summaries if s.success}
        return cls(
            trials=len(summaries),
            successes=sum(s.success for s in summaries),
            max_residual=max(res) if res else None,
            dof=dofs.pop() if len(dofs) == 1 else None,
            failures=tuple(s.seed for s in summaries if not s.success),
        )

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "successes": self.successes,
            "max_residual": self.max_residual,
            "dof": None if self.dof is None else {"num": self.dof.numerator, "den": self.dof.denominator},
            "failures": list(self.failures),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CampaignStats":
        dof = doc["dof"]
        return cls(
            trials=int(doc["trials"]),
            successes=int(doc["successes"]),
            max_residual=None if doc["max_residual"] is None else float(doc["max_residual"]),
            dof=None if dof is None else Fraction(int(dof["num"]), int(dof["den"])),
            failures=tuple(int(s) for s in doc["failures"]),
        )


def monte_carlo(num_trials: int, base_seed: int = 0, tol: float = DECODE_TOL,
                workers: int | None = None) -> CampaignStats:
    return CampaignStats.aggregate(run_campaign(num_trials, base_seed, tol, workers))


@dataclass(frozen=True)
class AuditReport:
    seed: int
    log: tuple
    violations: tuple
    error: str | None = None

    @property
    def passed(self) -> bool:
        return not self.violations and self.error is None


def leaky_phase2(view, T, mix, b=B):
    """Phase-2 builder that illegally peeks at one phase-2 channel (fault injection)."""
    view.block(1, 1, 2, 1, op="leaky_phase2")
    return phase2_precoders(view, T, mix, b)


def csit_audit(seed: int, builders: dict | None = None) -> AuditReport:
    """Build the precoders with every channel query logged and checked."""
    frame = build_frame(SLOTS)
    cs = generate(seed, frame, M_ANT, N_ANT)
    log: list = []
    error = None
    try:
        build_precoders(cs, seed, log=log, builders=builders)
    except CsitViolation as exc:
        error = str(exc)
    return AuditReport(seed=seed, log=tuple(log), violations=tuple(a for a in log if a.violation), error=error)
