"""Block-fading channel generation and the delayed-CSIT visibility gate.

Every per-slot ``N x M`` matrix is drawn from its own random stream keyed by
``(seed, j, i, p, r, s)``, so values do not depend on generation order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .frame import USERS, FrameConfig, build_frame

__all__ = [
    "AccessRecord",
    "ChannelSet",
    "CsitView",
    "CsitViolation",
    "block_channel",
    "complex_gaussian",
    "csit_view",
    "dump_json",
    "generate",
    "keyed_rng",
    "load_json",
]

NUM_BS = 2

# Stream domains; kept distinct so channel, mixing, precoder and symbol
# draws never share a stream for the same seed.
CHANNEL_STREAM = 0
PHASE1_STREAM = 1
MIX_STREAM = 2
SYMBOL_STREAM = 3


def keyed_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric CN(0, 1) samples."""
    z = rng.standard_normal(tuple(np.atleast_1d(shape)) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


class CsitViolation(RuntimeError):
    """A transmitter-side query touched CSI of the current or a future phase."""


@dataclass(frozen=True)
class ChannelSet:
    frame: FrameConfig
    M: int
    N: int
    seed: int
    entries: dict = field(repr=False)

    def slot(self, j: int, i: int, p: int, r: int, s: int) -> np.ndarray:
        try:
            return self.entries[(j, i, p, r, s)]
        except KeyError:
            raise IndexError(f"no channel for (j={j}, i={i}, p={p}, r={r}, s={s})") from None

    def block(self, j: int, i: int, p: int, r: int) -> np.ndarray:
        return block_channel(self, j, i, p, r)


def _slot_keys(frame: FrameConfig):
    for p, r, _ in frame.iter_all_rounds():
        for s in range(1, frame.slots_in(p) + 1):
            for j in USERS:
                for i in range(1, NUM_BS + 1):
                    yield j, i, p, r, s


def generate(seed: int, frame: FrameConfig, M: int, N: int) -> ChannelSet:
    """Draw every per-slot channel of ``frame`` as i.i.d. CN(0, 1) entries."""
    if M < 1 or N < 1:
        raise ValueError(f"antenna counts must be positive, got M={M}, N={N}")
    entries = {}
    for key in _slot_keys(frame):
        h = complex_gaussian(keyed_rng(seed, CHANNEL_STREAM, *key), (N, M))
        h.setflags(write=False)
        entries[key] = h
    return ChannelSet(frame=frame, M=M, N=N, seed=int(seed), entries=entries)


def block_channel(cs: ChannelSet, j: int, i: int, p: int, r: int) -> np.ndarray:
    """Block-diagonal ``(N S_p) x (M S_p)`` channel of round ``(p, r)``."""
    if j not in USERS or i not in (1, 2):
        raise IndexError(f"invalid link (j={j}, i={i})")
    try:
        cs.frame.served(p, r)
    except ValueError as exc:
        raise IndexError(str(exc)) from None
    blocks = [cs.entries[(j, i, p, r, s)] for s in range(1, cs.frame.slots_in(p) + 1)]
    return block_diag(*blocks)


@dataclass(frozen=True)
class AccessRecord:
    op: str
    view_phase: int
    j: int
    i: int
    p: int
    r: int

    @property
    def violation(self) -> bool:
        return self.p >= self.view_phase


class CsitView:
    """Read-only window onto the channels of phases ``< visible_up_to_phase``.

    When ``log`` is a list every query is appended to it, including the
    offending one before a :class:`CsitViolation` is raised.
    """

    def __init__(self, cs: ChannelSet, visible_up_to_phase: int, log: list | None = None):
        self._cs = cs
        self.visible_up_to_phase = visible_up_to_phase
        self.log = log

    @property
    def frame(self) -> FrameConfig:
        return self._cs.frame

    @property
    def dims(self) -> tuple[int, int]:
        return self._cs.M, self._cs.N

    def block(self, j: int, i: int, p: int, r: int, op: str = "") -> np.ndarray:
        rec = AccessRecord(op=op, view_phase=self.visible_up_to_phase, j=j, i=i, p=p, r=r)
        if self.log is not None:
            self.log.append(rec)
        if rec.violation:
            raise CsitViolation(
                f"{op or 'query'} requested phase-{p} CSI (round {r}, link {j}<-{i}) "
                f"while constructing phase {self.visible_up_to_phase}"
            )
        return block_channel(self._cs, j, i, p, r)


def csit_view(cs: ChannelSet, current_phase: int, log: list | None = None) -> CsitView:
    if not 1 <= current_phase <= 4:
        raise ValueError(f"current_phase must be in 1..4, got {current_phase!r}")
    return CsitView(cs, current_phase, log)


def dump_json(cs: ChannelSet, path) -> None:
    """Write ``cs`` as JSON; entries keyed ``"j.i.p.r.s"``, values row-major ``[re, im]`` pairs."""
    doc = {
        "M": cs.M,
        "N": cs.N,
        "seed": cs.seed,
        "slots": list(cs.frame.slots),
        "entries": {
            ".".join(map(str, k)): [[float(z.real), float(z.imag)] for z in v.ravel()]
            for k, v in cs.entries.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_json(path) -> ChannelSet:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    M, N = int(doc["M"]), int(doc["N"])
    frame = build_frame(doc["slots"])
    entries = {}
    for k, pairs in doc["entries"].items():
        key = tuple(int(t) for t in k.split("."))
        a = np.array([complex(re, im) for re, im in pairs]).reshape(N, M)
        a.setflags(write=False)
        entries[key] = a
    expected = set(_slot_keys(frame))
    if set(entries) != expected:
        raise ValueError("channel file does not cover the frame exactly")
    return ChannelSet(frame=frame, M=M, N=N, seed=int(doc["seed"]), entries=entries)
