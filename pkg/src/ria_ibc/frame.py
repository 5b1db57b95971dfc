"""Four-phase transmission frame of the 2-cell 2-user IBC.

Users are labelled 1..4 and BS ``c(u) = ceil(u/2)`` serves user ``u``, so
cell 1 holds users {1, 2} and cell 2 holds users {3, 4}.  Phase ``p`` has
``binomial(4, p)`` rounds, one per ``p``-subset of users, each lasting
``S_p`` slots.  All indices in the public API are 1-based.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from math import comb

NUM_PHASES = 4
USERS = (1, 2, 3, 4)

__all__ = [
    "NUM_PHASES",
    "USERS",
    "FrameConfig",
    "RoundRole",
    "build_frame",
    "cell",
    "cellmate",
    "round_role",
    "total_slots",
]


def cell(u: int) -> int:
    """Index of the BS serving user ``u``."""
    _check_user(u)
    return (u + 1) // 2


def cellmate(u: int) -> int:
    """The other user served by the same BS as ``u``."""
    _check_user(u)
    return u + 1 if u % 2 else u - 1


def _check_user(u: int) -> None:
    if u not in USERS:
        raise ValueError(f"user index must be in 1..4, got {u!r}")


class RoundRole(enum.Enum):
    SERVING = "serving"
    LISTENING = "listening"
    MIXED = "mixed"


@dataclass(frozen=True)
class FrameConfig:
    """Immutable phase/round/slot schedule.

    ``served_sets[p - 1][r - 1]`` is the ordered served-user tuple of round
    ``(p, r)``.
    """

    slots: tuple[int, int, int, int]
    rounds: tuple[int, int, int, int]
    served_sets: tuple[tuple[tuple[int, ...], ...], ...]

    @property
    def num_phases(self) -> int:
        return NUM_PHASES

    def _check_phase(self, p: int) -> None:
        if not 1 <= p <= NUM_PHASES:
            raise ValueError(f"phase index must be in 1..4, got {p!r}")

    def _check_round(self, p: int, r: int) -> None:
        self._check_phase(p)
        if not 1 <= r <= self.rounds[p - 1]:
            raise ValueError(f"round index for phase {p} must be in 1..{self.rounds[p - 1]}, got {r!r}")

    def slots_in(self, p: int) -> int:
        self._check_phase(p)
        return self.slots[p - 1]

    def served(self, p: int, r: int) -> tuple[int, ...]:
        self._check_round(p, r)
        return self.served_sets[p - 1][r - 1]

    def round_of(self, p: int, users) -> int:
        """Round index of phase ``p`` whose served set equals ``users``."""
        self._check_phase(p)
        key = tuple(sorted(users))
        try:
            return self.served_sets[p - 1].index(key) + 1
        except ValueError:
            raise ValueError(f"no round of phase {p} serves {key}") from None

    def listening_round(self, p: int, u: int) -> int:
        """The unique round of phase ``p`` in which ``u`` listens.

        Only phase 3 has exactly one such round per user; raises otherwise.
        """
        _check_user(u)
        hits = [r for r, a in self.iter_rounds(p) if u not in a]
        if len(hits) != 1:
            raise ValueError(f"user {u} listens in {len(hits)} rounds of phase {p}, not exactly one")
        return hits[0]

    def iter_rounds(self, p: int):
        """Yield ``(r, served_set)`` for every round of phase ``p``."""
        self._check_phase(p)
        for r, a in enumerate(self.served_sets[p - 1], start=1):
            yield r, a

    def iter_all_rounds(self):
        """Yield ``(p, r, served_set)`` over the whole frame in time order."""
        for p in range(1, NUM_PHASES + 1):
            for r, a in self.iter_rounds(p):
                yield p, r, a


def build_frame(slots) -> FrameConfig:
    """Build the frame for per-phase slot counts ``(S1, S2, S3, S4)``."""
    slots = tuple(slots)
    if len(slots) != NUM_PHASES:
        raise ValueError(f"expected {NUM_PHASES} slot counts, got {len(slots)}")
    for s in slots:
        if isinstance(s, bool) or int(s) != s or s < 1:
            raise ValueError(f"slot counts must be positive integers, got {slots!r}")
    slots = tuple(int(s) for s in slots)
    served = tuple(
        tuple(itertools.combinations(USERS, p)) for p in range(1, NUM_PHASES + 1)
    )
    rounds = tuple(comb(len(USERS), p) for p in range(1, NUM_PHASES + 1))
    return FrameConfig(slots=slots, rounds=rounds, served_sets=served)


def total_slots(frame: FrameConfig) -> int:
    """Total slot count ``tau = sum_p R_p * S_p``."""
    return sum(r * s for r, s in zip(frame.rounds, frame.slots))


def round_role(frame: FrameConfig, p: int, r: int, u: int) -> RoundRole:
    """Role of user ``u`` in round ``(p, r)``.

    In phase 3 a served user whose cell-mate is also served receives
    interference from both BSs and cannot cancel it in isolation (mixed).
    """
    _check_user(u)
    a = frame.served(p, r)
    if u not in a:
        return RoundRole.LISTENING
    if p == 3 and cellmate(u) in a:
        return RoundRole.MIXED
    return RoundRole.SERVING
