import numpy as np
import pytest

from ria_ibc.channel import CsitViolation, block_channel, csit_view, generate
from ria_ibc.frame import cell
from ria_ibc.linalg import rank, row_coefficients
from ria_ibc.precoding import (
    SLOTS,
    build_precoders,
    compute_t_rows,
    compute_W_rows,
    draw_mix,
    phase1_precoders,
    phase3_table,
    phase4_precoders,
    phase4_table,
)

# t-row keys are (observer k, j, owner i).  Frozen by hand: in each round,
# user u resends its two rows seen by the other two served users.
PHASE3_GOLDEN = {
    1: {1: {(3, 2, 1), (2, 3, 1)}, 2: {(3, 1, 2), (1, 3, 2)}, 3: {(2, 1, 3), (1, 2, 3)}},
    2: {1: {(4, 2, 1), (2, 4, 1)}, 2: {(4, 1, 2), (1, 4, 2)}, 4: {(2, 1, 4), (1, 2, 4)}},
    3: {1: {(4, 3, 1), (3, 4, 1)}, 3: {(4, 1, 3), (1, 4, 3)}, 4: {(3, 1, 4), (1, 3, 4)}},
    4: {2: {(4, 3, 2), (3, 4, 2)}, 3: {(4, 2, 3), (2, 4, 3)}, 4: {(3, 2, 4), (2, 3, 4)}},
}

# W_{k,i} -> the t rows it is built from, frozen by hand.
W_GOLDEN = {
    (4, 1): {(3, 2, 1), (2, 3, 1)}, (3, 1): {(4, 2, 1), (2, 4, 1)}, (2, 1): {(4, 3, 1), (3, 4, 1)},
    (4, 2): {(3, 1, 2), (1, 3, 2)}, (3, 2): {(4, 1, 2), (1, 4, 2)}, (1, 2): {(4, 3, 2), (3, 4, 2)},
    (4, 3): {(2, 1, 3), (1, 2, 3)}, (2, 3): {(4, 1, 3), (1, 4, 3)}, (1, 3): {(4, 2, 3), (2, 4, 3)},
    (3, 4): {(2, 1, 4), (1, 2, 4)}, (2, 4): {(3, 1, 4), (1, 3, 4)}, (1, 4): {(3, 2, 4), (2, 3, 4)},
}


def test_phase1(frame):
    v = phase1_precoders(5)
    assert all(m.shape == (12, 12) and rank(m) == 12 for m in v.values())
    assert np.allclose(np.linalg.norm(v[1], axis=0), 1.0)
    again = phase1_precoders(5)
    assert all(np.array_equal(v[i], again[i]) for i in v)


def test_nonserved_zero(precoders):
    assert not precoders.get(2, 1, 1).any()
    assert not precoders.get(3, 2, 1).any()
    assert not precoders.get(2, 3, 3).any()
    assert precoders.get(2, 3, 3).shape == (4, 12)


def test_T_blocks(precoders, channels):
    assert len(precoders.T) == 12
    for (j, i), t in precoders.T.items():
        assert t.rows.shape == (3, 12) and rank(t.rows) == 3
    for i in (1, 2, 3, 4):
        own = block_channel(channels, i, cell(i), 1, i) @ precoders.get(i, 1, i)
        stack = np.vstack([own] + [precoders.T[(j, i)].rows for j in (1, 2, 3, 4) if j != i])
        assert rank(stack) == 12


def test_phase2_alignment_and_rank(precoders, channels, frame):
    for r, (u, v) in frame.iter_rounds(2):
        for i, j in ((u, v), (v, u)):
            vi = precoders.get(i, 2, r)
            assert vi.shape == (4, 12) and rank(vi) == 3
            seen = block_channel(channels, j, cell(i), 2, r) @ vi
            _, res = row_coefficients(seen[0], precoders.T[(j, i)].rows)
            assert res < 1e-9


def test_t_rows(precoders, channels, frame):
    assert len(precoders.t_rows) == 24
    r = frame.round_of(2, (3, 4))
    # t^(1)_{4,3} = h_{1,2}^(2,6) Sigma_3^(2,6) T_{4,3}, up to the round power scale
    expected = block_channel(channels, 1, 2, 2, r) @ precoders.get(3, 2, r)
    assert np.allclose(precoders.t_rows[(1, 4, 3)].row, expected[0])
    for (k, j, i), t in precoders.t_rows.items():
        assert k not in (i, j)
        _, res = row_coefficients(t.row, precoders.T[(j, i)].rows)
        assert res < 1e-9


def test_phase3_table_matches_golden(frame):
    table = phase3_table(frame)
    assert {r: {u: set(k) for u, k in row.items()} for r, row in table.items()} == PHASE3_GOLDEN


def test_phase3_precoders(precoders):
    assert rank(precoders.get(1, 3, 3)) == 2
    for (i, r), terms in precoders.phase3_terms.items():
        assert {k for _, k in terms} == PHASE3_GOLDEN[r][i]
        rebuilt = sum(np.outer(s, precoders.t_rows[k].row) for s, k in terms)
        assert np.allclose(rebuilt, precoders.get(i, 3, r))


def test_shared_pair_coefficients(precoders):
    # both users of a pair use the same combining vector
    for r in range(1, 5):
        by_pair = {}
        for (i, rr), terms in precoders.phase3_terms.items():
            if rr != r:
                continue
            for sigma, (o, m, _) in terms:
                by_pair.setdefault(tuple(sorted((i, m))), []).append(sigma)
        for sigmas in by_pair.values():
            assert len(sigmas) == 2 and np.allclose(sigmas[0], sigmas[1])


def test_W_rows(precoders, channels, frame):
    assert len(precoders.W) == 12
    for (k, i), w in precoders.W.items():
        r = frame.listening_round(3, k)
        assert set(phase3_table(frame)[r][i]) == W_GOLDEN[(k, i)]
        basis = np.array([precoders.t_rows[key].row for key in W_GOLDEN[(k, i)]])
        _, res = row_coefficients(w.row, basis)
        assert res < 1e-9
    # W_{4,2} = h_{4,1}^(3,1) V_2^(3,1)
    assert np.allclose(precoders.W[(4, 2)].row, (block_channel(channels, 4, 1, 3, 1) @ precoders.get(2, 3, 1))[0])


def test_phase4(precoders):
    assert phase4_table()[1] == ((2, 1), (3, 1), (4, 1))
    for i in (1, 2, 3, 4):
        v = precoders.get(i, 4, 1)
        assert v.shape == (24, 12) and rank(v) == 3
        assert [k for _, k in precoders.phase4_terms[i]] == list(phase4_table()[i])


def test_phase4_linear_in_W(precoders):
    zero = {k: type(w)(w.kind, w.j, w.i, w.k, np.zeros_like(w.rows)) for k, w in precoders.W.items()}
    v4, _ = phase4_precoders(zero, precoders.mix)
    assert all(not m.any() for m in v4.values())


def test_round_power(precoders, frame):
    for p, r, a in frame.iter_all_rounds():
        if p == 1:
            continue
        total = sum(np.linalg.norm(precoders.get(i, p, r)) ** 2 for i in a)
        assert np.isclose(total / (12 * len(a)), 1.0)


def test_csit_log(channels):
    log = []
    build_precoders(channels, 1, log=log)
    assert len(log) == 48
    assert not any(rec.violation for rec in log)
    assert [rec.view_phase for rec in log] == [2] * 12 + [3] * 24 + [4] * 12


def test_same_phase_query_raises(channels, precoders):
    v2 = {(i, r): precoders.get(i, 2, r) for (i, p, r) in precoders.V if p == 2}
    with pytest.raises(CsitViolation):
        compute_t_rows(csit_view(channels, 2), v2)
    v3 = {(i, r): precoders.get(i, 3, r) for (i, p, r) in precoders.V if p == 3}
    with pytest.raises(CsitViolation):
        compute_W_rows(csit_view(channels, 3), v3)


def test_rejects_other_dims(frame):
    with pytest.raises(ValueError):
        build_precoders(generate(0, frame, 3, 1), 0)
    with pytest.raises(ValueError):
        build_precoders(generate(0, frame, 4, 1), 0, faults=("nope",))


def test_mix_determinism(frame):
    a, b = draw_mix(3, frame), draw_mix(3, frame)
    assert all(np.array_equal(a.phase4[k], b.phase4[k]) for k in a.phase4)
    assert a.phase2[(1, 1)].shape == (4, 3) and a.phase4[1].shape == (24,)


def test_slots_constant():
    assert SLOTS == (3, 1, 1, 6)
