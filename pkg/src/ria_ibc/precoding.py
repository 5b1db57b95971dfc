"""Precoder construction for the four-phase scheme with ``(M, N) = (4, 1)``.

Notation used in keys:

* ``T[(j, i)]`` -- the 3x12 block of user ``i``'s phase-1 transmission
  overheard by user ``j``.
* ``t_rows[(k, j, i)]`` -- the 1x12 row of user ``i``'s phase-2 signal (the
  one aligned with ``T[(j, i)]``) observed by user ``k``.
* ``W[(j, i)]`` -- the 1x12 row of user ``i``'s phase-3 signal observed by
  user ``j`` in the single phase-3 round where ``j`` listens.

Each builder receives channels only through a :class:`~ria_ibc.channel.CsitView`
opened for the phase being built, so any use of current-phase CSI raises.

Power normalization is a single scalar per round shared by all served users.
Per-user or per-column scaling would change which functional of the symbols
is retransmitted and break the alignment the decoders rely on.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    MIX_STREAM,
    PHASE1_STREAM,
    ChannelSet,
    CsitView,
    complex_gaussian,
    csit_view,
    keyed_rng,
)
from .frame import USERS, FrameConfig, build_frame, cell
from .linalg import unit_columns

B = 12
M_ANT = 4
N_ANT = 1
SLOTS = (3, 1, 1, 6)

FAULT_PHASE3_SIGN = "phase3-sign"
FAULTS = (FAULT_PHASE3_SIGN,)

__all__ = [
    "B",
    "FAULTS",
    "FAULT_PHASE3_SIGN",
    "M_ANT",
    "N_ANT",
    "SLOTS",
    "MixCoefficients",
    "OhiRow",
    "PrecoderSet",
    "build_precoders",
    "compute_T",
    "compute_W_rows",
    "compute_t_rows",
    "draw_mix",
    "phase1_precoders",
    "phase2_precoders",
    "phase3_precoders",
    "phase3_table",
    "phase4_precoders",
    "phase4_table",
]


@dataclass(frozen=True)
class OhiRow:
    """Overheard-interference row(s) with their index tuple.

    ``kind`` is ``"T"`` (3x12 block), ``"t"`` or ``"W"`` (single rows).  For
    ``"t"`` rows ``k`` is the observing user; otherwise ``None``.
    """

    kind: str
    j: int
    i: int
    k: int | None
    rows: np.ndarray = field(repr=False)

    @property
    def key(self) -> tuple:
        return (self.k, self.j, self.i) if self.kind == "t" else (self.j, self.i)

    @property
    def row(self) -> np.ndarray:
        if self.rows.shape[0] != 1:
            raise ValueError(f"{self.kind}{self.key} has {self.rows.shape[0]} rows")
        return self.rows[0]


@dataclass(frozen=True)
class MixCoefficients:
    """Random combining coefficients known to every node before transmission.

    ``phase2[(i, r)]`` is 4x3, ``phase3[(r, pair)]`` is a length-4 vector
    shared by both users of ``pair`` in round ``r``, and ``phase4[k]`` is a
    length-24 vector (six independent per-slot 4x1 blocks) that spreads every
    row observed by user ``k``.
    """

    phase2: dict
    phase3: dict
    phase4: dict


def draw_mix(seed: int, frame: FrameConfig | None = None) -> MixCoefficients:
    frame = frame or build_frame(SLOTS)
    s1, s2, s3, s4 = frame.slots
    phase2 = {}
    for r, a in frame.iter_rounds(2):
        for i in a:
            phase2[(i, r)] = complex_gaussian(keyed_rng(seed, MIX_STREAM, 2, r, i), (M_ANT * s2, N_ANT * s1))
    phase3 = {}
    for r, a in frame.iter_rounds(3):
        for n, pair in enumerate(itertools.combinations(a, 2), start=1):
            phase3[(r, pair)] = complex_gaussian(keyed_rng(seed, MIX_STREAM, 3, r, n), M_ANT * s3)
    phase4 = {k: complex_gaussian(keyed_rng(seed, MIX_STREAM, 4, 1, k), M_ANT * s4) for k in USERS}
    return MixCoefficients(phase2=phase2, phase3=phase3, phase4=phase4)


def phase3_table(frame: FrameConfig | None = None) -> dict:
    """``{r: {u: (tkey, tkey)}}`` -- rows combined by each served user per phase-3 round.

    For served set ``A`` and a pair ``{u, m}`` of it, user ``u`` retransmits
    ``t_rows[(o, m, u)]`` where ``o`` is the third served user: the row that
    ``o`` overheard coupled with ``t_rows[(o, u, m)]`` in phase 2.
    """
    frame = frame or build_frame(SLOTS)
    table = {}
    for r, a in frame.iter_rounds(3):
        per_user = {}
        for u in a:
            keys = []
            for pair in itertools.combinations(a, 2):
                if u in pair:
                    m = pair[0] if pair[1] == u else pair[1]
                    (o,) = set(a) - set(pair)
                    keys.append((o, m, u))
            per_user[u] = tuple(keys)
        table[r] = per_user
    return table


def phase4_table() -> dict:
    """``{i: (wkey, ...)}`` -- W rows combined by user ``i`` in phase 4, observers ascending."""
    return {i: tuple((k, i) for k in USERS if k != i) for i in USERS}


@dataclass
class PrecoderSet:
    frame: FrameConfig
    b: int
    V: dict
    T: dict
    t_rows: dict
    W: dict
    phase3_terms: dict
    phase4_terms: dict
    mix: MixCoefficients
    faults: tuple = ()

    def get(self, i: int, p: int, r: int) -> np.ndarray:
        """``V_i^(p, r)``, the zero matrix when ``i`` is not served."""
        v = self.V.get((i, p, r))
        if v is None:
            if i not in USERS:
                raise IndexError(f"invalid user {i}")
            self.frame.served(p, r)
            return np.zeros((M_ANT * self.frame.slots_in(p), self.b), dtype=complex)
        return v


def phase1_precoders(seed: int, b: int = B, frame: FrameConfig | None = None) -> dict:
    """Predefined full-rank phase-1 precoders ``{i: V_i^(1, i)}`` with unit-norm columns."""
    frame = frame or build_frame(SLOTS)
    rows = M_ANT * frame.slots_in(1)
    return {i: unit_columns(complex_gaussian(keyed_rng(seed, PHASE1_STREAM, i), (rows, b))) for i in USERS}


def compute_T(view: CsitView, V1: dict, j: int, i: int) -> OhiRow:
    """Phase-1 signal of user ``i`` as overheard by user ``j``."""
    if j == i:
        raise ValueError("T blocks are defined for j != i only")
    r = view.frame.round_of(1, (i,))
    h = view.block(j, cell(i), 1, r, op="compute_T")
    return OhiRow("T", j, i, None, h @ V1[i])


def _normalize_round(mats: dict, b: int) -> float:
    """Common scale giving the round's precoders unit mean column power."""
    total = sum(float(np.linalg.norm(v) ** 2) for v in mats.values())
    if total == 0.0:
        return 1.0
    return float(np.sqrt(b * len(mats) / total))


def phase2_precoders(view: CsitView, T: dict, mix: MixCoefficients, b: int = B) -> dict:
    """``{(i, r): V_i^(2, r)}``; each user re-sends a random mix of what its partner overheard."""
    out = {}
    for r, (u, v) in view.frame.iter_rounds(2):
        raw = {u: mix.phase2[(u, r)] @ T[(v, u)].rows, v: mix.phase2[(v, r)] @ T[(u, v)].rows}
        s = _normalize_round(raw, b)
        for i, m in raw.items():
            out[(i, r)] = s * m
    return out


def compute_t_rows(view: CsitView, V2: dict) -> dict:
    out = {}
    for r, pair in view.frame.iter_rounds(2):
        for i in pair:
            j = pair[0] if pair[1] == i else pair[1]
            for k in USERS:
                if k in pair:
                    continue
                h = view.block(k, cell(i), 2, r, op="compute_t_rows")
                out[(k, j, i)] = OhiRow("t", j, i, k, h @ V2[(i, r)])
    return out


def phase3_precoders(t_rows: dict, mix: MixCoefficients, frame: FrameConfig | None = None,
                     b: int = B, faults=()):
    """Build phase-3 precoders.

    Returns ``(V3, terms)`` where ``V3[(i, r)]`` is the 4x12 precoder and
    ``terms[(i, r)]`` lists its rank-one components as ``(sigma, tkey)`` with
    the round's power scale already folded into ``sigma``.
    """
    frame = frame or build_frame(SLOTS)
    table = phase3_table(frame)
    V3, terms = {}, {}
    for r, a in frame.iter_rounds(3):
        comps = {}
        for u in a:
            parts = []
            for key in table[r][u]:
                o, m, _ = key
                pair = tuple(sorted((u, m)))
                sigma = mix.phase3[(r, pair)]
                if FAULT_PHASE3_SIGN in faults and u == a[2] and pair == (a[1], a[2]):
                    sigma = -sigma
                parts.append((sigma, key))
            comps[u] = parts
        raw = {u: sum(np.outer(s, t_rows[k].row) for s, k in parts) for u, parts in comps.items()}
        scale = _normalize_round(raw, b)
        for u, parts in comps.items():
            terms[(u, r)] = tuple((scale * s, k) for s, k in parts)
            V3[(u, r)] = scale * raw[u]
    return V3, terms


def compute_W_rows(view: CsitView, V3: dict) -> dict:
    out = {}
    frame = view.frame
    for j in USERS:
        r = frame.listening_round(3, j)
        for i in frame.served(3, r):
            h = view.block(j, cell(i), 3, r, op="compute_W_rows")
            out[(j, i)] = OhiRow("W", j, i, None, h @ V3[(i, r)])
    return out


def phase4_precoders(W: dict, mix: MixCoefficients, b: int = B):
    """Build phase-4 precoders ``V_i^(4) = sum_k Sigma_k W_{k,i}`` (24x12).

    The vector ``Sigma_k`` is shared by every row that user ``k`` overheard,
    which is what lets user ``k`` strip a whole coupled triple at once.
    Returns ``(V4, terms)`` in the same form as :func:`phase3_precoders`.
    """
    table = phase4_table()
    raw, comps = {}, {}
    for i, keys in table.items():
        comps[i] = [(mix.phase4[k], (k, i)) for k, _ in keys]
        raw[i] = sum(np.outer(s, W[key].row) for s, key in comps[i])
    scale = _normalize_round(raw, b)
    V4 = {i: scale * m for i, m in raw.items()}
    terms = {i: tuple((scale * s, key) for s, key in parts) for i, parts in comps.items()}
    return V4, terms


def build_precoders(channels: ChannelSet, seed: int, *, log: list | None = None,
                    faults=(), builders: dict | None = None) -> PrecoderSet:
    """Construct the full precoder set phase by phase under delayed CSIT.

    ``builders`` may replace any of ``"phase2"``, ``"phase3"`` or ``"phase4"``
    (same signatures as the module functions; ``phase2`` also receives the
    view) -- used for fault injection.
    """
    frame = channels.frame
    if (channels.M, channels.N) != (M_ANT, N_ANT) or frame.slots != SLOTS:
        raise ValueError(
            f"the scheme is implemented for (M, N) = (4, 1) with slots {SLOTS}; "
            f"got ({channels.M}, {channels.N}) with {frame.slots}"
        )
    unknown = set(faults) - set(FAULTS)
    if unknown:
        raise ValueError(f"unknown faults: {sorted(unknown)}")
    builders = dict(builders or {})
    p2 = builders.get("phase2", phase2_precoders)
    p3 = builders.get("phase3", phase3_precoders)
    p4 = builders.get("phase4", phase4_precoders)

    mix = draw_mix(seed, frame)
    V1 = phase1_precoders(seed, B, frame)
    V = {(i, 1, i): m for i, m in V1.items()}

    view = csit_view(channels, 2, log)
    T = {(j, i): compute_T(view, V1, j, i) for i in USERS for j in USERS if j != i}
    V2 = p2(view, T, mix)
    V.update({(i, 2, r): m for (i, r), m in V2.items()})

    view = csit_view(channels, 3, log)
    t_rows = compute_t_rows(view, V2)
    V3, terms3 = p3(t_rows, mix, frame, B, faults)
    V.update({(i, 3, r): m for (i, r), m in V3.items()})

    view = csit_view(channels, 4, log)
    W = compute_W_rows(view, V3)
    V4, terms4 = p4(W, mix)
    V.update({(i, 4, 1): m for i, m in V4.items()})

    return PrecoderSet(frame=frame, b=B, V=V, T=T, t_rows=t_rows, W=W,
                       phase3_terms=terms3, phase4_terms=terms4, mix=mix,
                       faults=tuple(faults))
