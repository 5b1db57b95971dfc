"""Reception, overheard-interference bookkeeping and decoding at one UE.

Two independent decoders are provided:

* :class:`StagedDecoder` follows the phase-by-phase cancellation: phase-1
  overheard blocks remove aligned terms, phase-2 coupled values are split
  through the mixed rounds of phase 3, and phase 4 is zero-forced jointly
  with the mixed-round residuals.
* :func:`nullspace_oracle_decode` ignores all structure and projects the
  global signal-space matrix onto the left null space of the interference.

Receivers are assumed to know every channel and precoder (global receive CSI).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, block_channel
from .frame import USERS, RoundRole, cell, cellmate, round_role
from .linalg import RANK_RTOL, left_null_space, rank, row_coefficients
from .precoding import PrecoderSet

SCHEME_TOL = 1e-6
DECODE_TOL = 1e-8
NONZERO_RTOL = 1e-9

__all__ = [
    "CleanLC",
    "CoupledPair",
    "CoupledTriple",
    "DecodeError",
    "DecodeResult",
    "MixedResidual",
    "OhiLedger",
    "StagedDecoder",
    "nullspace_oracle_decode",
    "observe",
    "receive",
    "signal_space",
    "solve_symbols",
]


class DecodeError(RuntimeError):
    pass


def _symbols(x, i: int) -> np.ndarray:
    if isinstance(x, dict):
        return np.asarray(x[i])
    return np.asarray(x[i - 1])


def receive(channels: ChannelSet, precoders: PrecoderSet, x, p: int, r: int, j: int) -> np.ndarray:
    """Noiseless observation ``y_j^(p, r) = sum_i H_{j,c(i)} V_i x_i``."""
    y = None
    for i in USERS:
        h = block_channel(channels, j, cell(i), p, r)
        v = precoders.get(i, p, r)
        xi = _symbols(x, i)
        if h.shape[1] != v.shape[0] or v.shape[1] != xi.shape[0]:
            raise ValueError(f"shape mismatch: H {h.shape}, V {v.shape}, x {xi.shape}")
        term = h @ (v @ xi)
        y = term if y is None else y + term
    return y


def observe(channels: ChannelSet, precoders: PrecoderSet, x, j: int) -> dict:
    """All observations of UE ``j`` keyed by ``(p, r)``."""
    return {(p, r): receive(channels, precoders, x, p, r, j)
            for p, r, _ in channels.frame.iter_all_rounds()}


@dataclass(frozen=True)
class CleanLC:
    """An interference-free equation ``row @ x_j = value``."""

    row: np.ndarray = field(repr=False)
    value: complex
    provenance: tuple


@dataclass(frozen=True)
class CoupledPair:
    served: tuple
    keys: tuple
    rows: tuple = field(repr=False)
    value: complex
    provenance: tuple


@dataclass(frozen=True)
class CoupledTriple:
    served: tuple
    keys: tuple
    rows: tuple = field(repr=False)
    value: complex
    provenance: tuple


@dataclass(frozen=True)
class MixedResidual:
    """``row @ x_j + sum(coef[a] * a) = value`` with unknown interference scalars ``a``."""

    row: np.ndarray = field(repr=False)
    value: complex
    coef: dict = field(repr=False)
    provenance: tuple
    decoupled: tuple


@dataclass
class OhiLedger:
    ue: int
    phase1: dict = field(default_factory=dict)
    coupled_pairs: dict = field(default_factory=dict)
    coupled_triple: CoupledTriple | None = None
    decoupling: dict = field(default_factory=dict)
    decoupled: dict = field(default_factory=dict)

    def table_view(self) -> dict:
        """Index-level overheard interference grouped by served set.

        Entries are ``("T", j, i)``, ``("t", k, j, i)`` or ``("W", j, i)``;
        groups are ``("coupled", entries)`` or ``("decoupled", entries)``.
        """
        view = {}
        for i in sorted(self.phase1):
            view[(i,)] = (("T", self.ue, i),)
        for served, cp in sorted(self.coupled_pairs.items()):
            view[served] = (("coupled", tuple(("t",) + k for k in cp.keys)),)
        for served, keys in sorted(self.decoupling.items()):
            view[served] = (("decoupled", tuple(("t",) + k for k in keys)),)
        if self.coupled_triple is not None:
            ct = self.coupled_triple
            view[ct.served] = (("coupled", tuple(("W",) + k for k in ct.keys)),)
        return view


@dataclass
class DecodeResult:
    ue: int
    clean_lcs: tuple = field(repr=False)
    stage_counts: tuple
    recovered: np.ndarray | None = field(repr=False)
    residual: float
    rank_report: dict
    success: bool
    nullspace_dim: int | None = None
    error: str | None = None

    @property
    def rank12(self) -> bool:
        return bool(self.rank_report.get("clean_rank") == 12)

    def to_json(self) -> dict:
        return {
            "ue": self.ue,
            "clean_lcs_per_stage": list(self.stage_counts),
            "rank12": self.rank12,
            "residual": float(self.residual) if np.isfinite(self.residual) else None,
            "nullspace_dim": self.nullspace_dim,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DecodeResult":
        """Rebuild the summary fields; per-equation data is not serialized."""
        residual = float("nan") if doc["residual"] is None else float(doc["residual"])
        return cls(ue=int(doc["ue"]), clean_lcs=(), stage_counts=tuple(int(c) for c in doc["clean_lcs_per_stage"]),
                   recovered=None, residual=residual,
                   rank_report={"clean_rank": 12 if doc["rank12"] else None},
                   success=bool(doc["rank12"]) and residual < DECODE_TOL,
                   nullspace_dim=doc["nullspace_dim"])


def solve_symbols(clean_lcs, b: int = 12) -> np.ndarray:
    """Solve the stacked clean equations for the ``b`` desired symbols."""
    if len(clean_lcs) < b:
        raise DecodeError(f"only {len(clean_lcs)} clean LCs for {b} symbols")
    a = np.array([lc.row for lc in clean_lcs])
    v = np.array([lc.value for lc in clean_lcs])
    rk = rank(a)
    if rk < b:
        raise DecodeError(f"clean LC stack has rank {rk} < {b}")
    x, *_ = np.linalg.lstsq(a, v, rcond=None)
    return x


def _relative_error(x_hat, x_true) -> float:
    return float(np.linalg.norm(x_hat - x_true) / np.linalg.norm(x_true))


class StagedDecoder:
    """Phase-by-phase decoder for one UE.

    Interference terms are expanded into scalar *atoms*:

    * ``("t", (k, m, i))`` -- ``t_rows[(k, m, i)] @ x_i``.  With ``m == j``
      the row lies in the span of the overheard block ``T[(j, i)]`` and the
      value is known after phase 1; with ``k == j`` it is one half of a
      coupled phase-2 value.
    * ``("W", (j, i))`` -- one third of the coupled phase-3 listening value.

    Coupled sums are substituted away; atoms left with a nonzero coefficient
    are genuine unknowns and must be zero-forced.
    """

    def __init__(self, channels: ChannelSet, precoders: PrecoderSet, j: int):
        if j not in USERS:
            raise ValueError(f"invalid UE {j}")
        self.cs = channels
        self.pc = precoders
        self.j = j
        self.frame = channels.frame
        self.ledger = OhiLedger(ue=j)
        self.clean: list[CleanLC] = []
        self.mixed: list[MixedResidual] = []
        self.stage_counts: list[int] = []
        self.rank_report: dict = {"max_alignment_residual": 0.0}

    def _h(self, k: int, bs: int, p: int, r: int) -> np.ndarray:
        return block_channel(self.cs, k, bs, p, r)

    def _aligned_value(self, row, i: int) -> complex:
        rows, values = self.ledger.phase1[i]
        c, res = row_coefficients(row, rows)
        self.rank_report["max_alignment_residual"] = max(self.rank_report["max_alignment_residual"], res)
        if res > SCHEME_TOL:
            raise DecodeError(f"UE{self.j}: row not aligned with T[{self.j},{i}] (residual {res:.2e})")
        return complex(c @ values)

    # phase 1 ---------------------------------------------------------------

    def phase1_collect(self, obs: dict) -> list[CleanLC]:
        j, out = self.j, []
        for r, (i,) in self.frame.iter_rounds(1):
            rows = self._h(j, cell(i), 1, r) @ self.pc.get(i, 1, r)
            y = obs[(1, r)]
            if i == j:
                out.extend(CleanLC(rows[n], complex(y[n]), (1, r)) for n in range(rows.shape[0]))
            else:
                self.ledger.phase1[i] = (rows, np.asarray(y))
        self.clean.extend(out)
        self.stage_counts.append(len(out))
        return out

    # phase 2 ---------------------------------------------------------------

    def phase2_decode(self, obs: dict) -> list[CleanLC]:
        j, out = self.j, []
        for r, pair in self.frame.iter_rounds(2):
            y = obs[(2, r)]
            if j in pair:
                (i,) = set(pair) - {j}
                d = (self._h(j, cell(j), 2, r) @ self.pc.get(j, 2, r))[0]
                row_i = (self._h(j, cell(i), 2, r) @ self.pc.get(i, 2, r))[0]
                out.append(CleanLC(d, complex(y[0]) - self._aligned_value(row_i, i), (2, r)))
            else:
                a, b = pair
                rows = tuple((self._h(j, cell(o), 2, r) @ self.pc.get(o, 2, r))[0] for o in pair)
                self.ledger.coupled_pairs[pair] = CoupledPair(
                    served=pair, keys=((j, b, a), (j, a, b)), rows=rows,
                    value=complex(y[0]), provenance=(2, r))
        self.clean.extend(out)
        self.stage_counts.append(len(out))
        return out

    # substitution machinery ------------------------------------------------

    def _pair_eliminated_owner(self, pair) -> int:
        """Owner whose half of a coupled pair is expressed through the other half."""
        cm = cellmate(self.j)
        if cm in pair:
            (other,) = set(pair) - {cm}
            return other
        return min(pair)

    def _triple_eliminated_owner(self, served) -> int:
        return min(u for u in served if cell(u) != cell(self.j))

    def _reduce(self, y, d, terms):
        """Subtract known terms and apply coupled-sum identities.

        Returns ``(y_reduced, {atom: coefficient})`` for the atoms whose
        coefficient does not vanish.
        """
        j = self.j
        y = np.array(y, dtype=complex)
        unknown: dict = {}
        ref = float(np.linalg.norm(d))
        for col, atom in terms:
            ref = max(ref, float(np.linalg.norm(col)))
            kind, key = atom
            if kind == "t" and key[1] == j:
                y = y - col * self._aligned_value(self.pc.t_rows[key].row, key[2])
            else:
                unknown[atom] = unknown.get(atom, 0) + col
        for atom in list(unknown):
            kind, key = atom
            if kind != "t":
                continue
            k, m, i = key
            if k != j:
                raise DecodeError(f"UE{j}: unexpected foreign observation {key}")
            pair = tuple(sorted((i, m)))
            if i != self._pair_eliminated_owner(pair):
                continue
            col = unknown.pop(atom)
            y = y - col * self.ledger.coupled_pairs[pair].value
            partner = ("t", (j, i, m))
            unknown[partner] = unknown.get(partner, 0) - col
        w_atoms = [a for a in unknown if a[0] == "W"]
        if w_atoms:
            ct = self.ledger.coupled_triple
            if ct is None:
                raise DecodeError(f"UE{j}: phase-3 triple needed before it was observed")
            e = self._triple_eliminated_owner(ct.served)
            col = unknown.pop(("W", (j, e)), None)
            if col is not None:
                y = y - col * ct.value
                for o in ct.served:
                    if o != e:
                        unknown[("W", (j, o))] = unknown.get(("W", (j, o)), 0) - col
        kept = {a: c for a, c in unknown.items() if np.linalg.norm(c) > NONZERO_RTOL * ref}
        return y, kept

    # phase 3 ---------------------------------------------------------------

    def _phase3_terms(self, r: int, served):
        j = self.j
        h = {bs: self._h(j, bs, 3, r) for bs in (1, 2)}
        d = h[cell(j)] @ self.pc.get(j, 3, r)
        terms = []
        for i in served:
            if i == j:
                continue
            for sigma, key in self.pc.phase3_terms[(i, r)]:
                terms.append((h[cell(i)] @ sigma, ("t", key)))
        return d, terms

    def phase3_decode(self, obs: dict) -> list[CleanLC]:
        j, out = self.j, []
        for r, served in self.frame.iter_rounds(3):
            role = round_role(self.frame, 3, r, j)
            y = obs[(3, r)]
            if role is RoundRole.LISTENING:
                rows = tuple((self._h(j, cell(i), 3, r) @ self.pc.get(i, 3, r))[0] for i in served)
                self.ledger.coupled_triple = CoupledTriple(
                    served=served, keys=tuple((j, i) for i in served), rows=rows,
                    value=complex(y[0]), provenance=(3, r))
                continue
            d, terms = self._phase3_terms(r, served)
            y_red, unknown = self._reduce(y, d, terms)
            if role is RoundRole.SERVING:
                if unknown:
                    raise DecodeError(
                        f"UE{j}: unexpected nonzero residual after serving-round subtraction in (3,{r})")
                out.append(CleanLC(d[0], complex(y_red[0]), (3, r)))
            else:
                if len(unknown) != 1:
                    raise DecodeError(f"UE{j}: mixed round (3,{r}) left {len(unknown)} unknowns, expected 1")
                ((atom, coef),) = unknown.items()
                _, (_, m, i) = atom
                pair = tuple(sorted((i, m)))
                keys = self.ledger.coupled_pairs[pair].keys
                self.ledger.decoupling[served] = keys
                self.mixed.append(MixedResidual(d[0], complex(y_red[0]), {atom: complex(coef[0])},
                                                (3, r), keys))
        self.clean.extend(out)
        self.stage_counts.append(len(out))
        return out

    # phase 4 ---------------------------------------------------------------

    def _phase4_terms(self):
        j, frame, pc = self.j, self.frame, self.pc
        h4 = {bs: self._h(j, bs, 4, 1) for bs in (1, 2)}
        d = h4[cell(j)] @ pc.get(j, 4, 1)
        terms = []
        for i in USERS:
            if i == j:
                continue
            for big_sigma, (k, _) in pc.phase4_terms[i]:
                col = h4[cell(i)] @ big_sigma
                if k == j:
                    terms.append((col, ("W", (j, i))))
                    continue
                rk = frame.listening_round(3, k)
                hk = self._h(k, cell(i), 3, rk)
                for sigma, key in pc.phase3_terms[(i, rk)]:
                    terms.append((col * (hk @ sigma)[0], ("t", key)))
        return d, terms

    def phase4_decode(self, obs: dict) -> list[CleanLC]:
        y = obs[(4, 1)]
        d, terms = self._phase4_terms()
        y_red, unknown = self._reduce(y, d, terms)
        atoms = sorted(set(unknown) | {a for m in self.mixed for a in m.coef})
        n4 = d.shape[0]
        rows = np.vstack([d] + [m.row[None, :] for m in self.mixed])
        vals = np.concatenate([y_red, [m.value for m in self.mixed]])
        coef = np.zeros((rows.shape[0], len(atoms)), dtype=complex)
        for n, a in enumerate(atoms):
            if a in unknown:
                coef[:n4, n] = unknown[a]
            for q, m in enumerate(self.mixed):
                coef[n4 + q, n] = m.coef.get(a, 0.0)
        rk = rank(coef)
        self.rank_report["unknown_atoms"] = tuple(atoms)
        self.rank_report["unknown_rank"] = rk
        self.rank_report["joint_equations"] = rows.shape[0]
        if rk != 3:
            raise DecodeError(f"UE{self.j}: unknown-coefficient matrix has rank {rk}, expected 3")
        u = left_null_space(coef)
        proj = u.conj().T
        leak = float(np.linalg.norm(proj @ coef) / np.linalg.norm(coef))
        self.rank_report["projection_leak"] = leak
        if leak > SCHEME_TOL:
            raise DecodeError(f"UE{self.j}: projection leaves interference {leak:.2e}")
        prow, pval = proj @ rows, proj @ vals
        out = [CleanLC(prow[n], complex(pval[n]), (4, 1)) for n in range(prow.shape[0])]
        self.clean.extend(out)
        self.stage_counts.append(len(out))
        return out

    # driver ----------------------------------------------------------------

    def decode(self, obs: dict, x_true=None, tol: float = DECODE_TOL) -> DecodeResult:
        error, x_hat, residual = None, None, float("nan")
        try:
            self.phase1_collect(obs)
            self.phase2_decode(obs)
            self.phase3_decode(obs)
            self.phase4_decode(obs)
            self.rank_report["clean_rank"] = rank(np.array([lc.row for lc in self.clean]))
            x_hat = solve_symbols(self.clean, self.pc.b)
        except DecodeError as exc:
            error = str(exc)
        if self.clean and "clean_rank" not in self.rank_report:
            self.rank_report["clean_rank"] = rank(np.array([lc.row for lc in self.clean]))
        if x_hat is not None:
            for m in self.mixed:
                ((atom, g),) = m.coef.items()
                self.ledger.decoupled[atom[1]] = (m.value - m.row @ x_hat) / g
            if x_true is not None:
                residual = _relative_error(x_hat, np.asarray(x_true))
            else:
                a = np.array([lc.row for lc in self.clean])
                v = np.array([lc.value for lc in self.clean])
                residual = float(np.linalg.norm(a @ x_hat - v) / np.linalg.norm(v))
        success = error is None and residual < tol
        if error is None and not success:
            error = f"residual {residual:.3e} exceeds tolerance {tol:.1e}"
        return DecodeResult(ue=self.j, clean_lcs=tuple(self.clean), stage_counts=tuple(self.stage_counts),
                            recovered=x_hat, residual=residual, rank_report=dict(self.rank_report),
                            success=success, error=error)


def signal_space(channels: ChannelSet, precoders: PrecoderSet, j: int) -> np.ndarray:
    """Global ``(N tau) x (4 b)`` signal-space matrix of UE ``j``, rounds in time order."""
    blocks = []
    for p, r, _ in channels.frame.iter_all_rounds():
        blocks.append(np.hstack([block_channel(channels, j, cell(i), p, r) @ precoders.get(i, p, r)
                                 for i in USERS]))
    return np.vstack(blocks)


def nullspace_oracle_decode(j: int, observations: dict, channels: ChannelSet, precoders: PrecoderSet,
                            x_true=None, tol: float = DECODE_TOL) -> DecodeResult:
    """Zero-force all interference at once using the global signal space."""
    b = precoders.b
    g = signal_space(channels, precoders, j)
    y = np.concatenate([observations[(p, r)] for p, r, _ in channels.frame.iter_all_rounds()])
    own = slice((j - 1) * b, j * b)
    interference = np.delete(g, np.s_[own], axis=1)
    u = left_null_space(interference, RANK_RTOL)
    dim = u.shape[1]
    proj = u.conj().T
    desired = proj @ g[:, own]
    report = {"interference_rank": g.shape[0] - dim, "nullspace_dim": dim,
              "clean_rank": rank(desired) if dim else 0}
    error, x_hat, residual = None, None, float("nan")
    if dim < b:
        error = f"UE{j}: interference null space has dimension {dim} < {b}"
    elif report["clean_rank"] < b:
        error = f"UE{j}: projected desired block has rank {report['clean_rank']} < {b}"
    else:
        x_hat, *_ = np.linalg.lstsq(desired, proj @ y, rcond=None)
        residual = (_relative_error(x_hat, np.asarray(x_true)) if x_true is not None
                    else float(np.linalg.norm(desired @ x_hat - proj @ y) / np.linalg.norm(proj @ y)))
        if not residual < tol:
            error = f"residual {residual:.3e} exceeds tolerance {tol:.1e}"
    lcs = tuple(CleanLC(desired[n], complex((proj @ y)[n]), ()) for n in range(dim))
    return DecodeResult(ue=j, clean_lcs=lcs, stage_counts=(), recovered=x_hat, residual=residual,
                        rank_report=report, success=error is None, nullspace_dim=dim, error=error)
