import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from rcldpc.construction import (BinaryBaseMatrix, InfeasibleLiftError, QcCode, QcFormatError,
                                 circulant_lift, family_code, format_qc, girth, lift,
                                 member_code, parse_qc, peg_expand, read_qc, write_qc)
from rcldpc.protomatrix import FamilyRangeError, Protomatrix

from oracles import gf2_rank


def _block_sums(b, p, f):
    h = b.entries.astype(int)
    n_c, n_v = p.shape
    blocks = h.reshape(n_c, f, n_v, f)
    return blocks.sum(axis=3), blocks.sum(axis=1)  # row sums, column sums per block


def test_peg_full_family(family):
    b = peg_expand(family.full, 4)
    assert b.entries.shape == (68, 100)
    assert b.entries.max() == 1
    rs, cs = _block_sums(b, family.full, 4)
    assert np.array_equal(rs, np.repeat(family.full.entries[:, None, :], 4, axis=1))
    assert np.array_equal(cs, np.repeat(family.full.entries[:, :, None], 4, axis=2)
                          .transpose(0, 1, 2))


def test_peg_degree_sums(family):
    p = family.full
    b = peg_expand(p, 4)
    np.testing.assert_array_equal(b.entries.sum(axis=0), np.repeat(p.entries.sum(axis=0), 4))
    np.testing.assert_array_equal(b.entries.sum(axis=1), np.repeat(p.entries.sum(axis=1), 4))
    assert b.punctured == frozenset(range(40, 44))


def test_peg_single_edge_factor2():
    b = peg_expand(Protomatrix([[1, 1]]), 2)
    blk = b.entries[:, :2]
    assert (blk.sum(axis=0) == 1).all() and (blk.sum(axis=1) == 1).all()


def test_peg_double_edge_factor4():
    b = peg_expand(Protomatrix([[2, 1]]), 4)
    blk = b.entries[:, :4]
    assert blk.max() == 1
    assert (blk.sum(axis=0) == 2).all() and (blk.sum(axis=1) == 2).all()


def test_peg_infeasible():
    with pytest.raises(InfeasibleLiftError):
        peg_expand(Protomatrix([[5, 1]]), 4)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.lists(st.integers(0, 3), min_size=5, max_size=5), min_size=2, max_size=3))
def test_peg_sums_property(rows):
    arr = np.array(rows)
    arr[:, 0] = np.maximum(arr[:, 0], 1)
    arr[0] = np.maximum(arr[0], 1)
    try:
        p = Protomatrix(arr)
    except ValueError:
        return
    b = peg_expand(p, 4)
    rs, cs = _block_sums(b, p, 4)
    assert (rs == p.entries[:, None, :]).all()
    assert (cs == p.entries[:, :, None]).all()


@pytest.mark.parametrize("s", range(4))
def test_single_circulant(s):
    code = QcCode(np.array([[s]]), 4, frozenset(), np.zeros(0, dtype=int), 1, (1, 1))
    h = code.parity_check().toarray()
    expected = np.roll(np.eye(4, dtype=int), s, axis=1)
    assert np.array_equal(h, expected)


def test_circulant_lift_preserves_degrees(family):
    b = peg_expand(family.member(2), 4)
    code = circulant_lift(b, 8, seed=3)
    h = code.parity_check()
    np.testing.assert_array_equal(np.asarray(h.sum(axis=0)).ravel(),
                                  np.repeat(b.entries.sum(axis=0), 8))
    np.testing.assert_array_equal(np.asarray(h.sum(axis=1)).ravel(),
                                  np.repeat(b.entries.sum(axis=1), 8))
    assert ((code.shifts >= 0) == (b.entries == 1)).all()
    assert code.shifts.max() < 8


def test_girth_all_ones():
    assert girth(np.ones((2, 2), dtype=int)) == 4


def test_girth_tree():
    h = np.array([[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1]])
    assert girth(h) == math.inf


def test_girth_six_cycle():
    h = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]])
    assert girth(h) == 6


def test_girth_qc_matches_explicit(member1_z4):
    h = member1_z4.parity_check().toarray()
    assert girth(member1_z4) == girth(h)


def test_full_family_code(family_codes):
    code = family_codes[14]
    assert (code.n, code.n_rows, code.k) == (3200, 2176, 1024)
    assert code.shifts.shape == (68, 100)
    assert girth(code) == 6
    assert code.meta["daughter_full_rank"]


@pytest.mark.parametrize("n,tx", [(0, 1280), (6, 2048), (14, 3072)])
def test_member_dimensions(family_codes, n, tx):
    code = family_codes[n]
    assert code.k == 1024
    assert code.tx_map.size == tx
    # counting oracle: 4 * (11 + n) * 32 columns less 4 * 32 punctured
    assert code.n == 4 * (11 + n) * 32
    assert tx == code.n - 128


def test_members_nested(family_codes):
    for a, b in zip(family_codes, family_codes[1:]):
        r, c = a.shifts.shape
        assert np.array_equal(b.shifts[:r, :c], a.shifts)
        assert np.array_equal(a.info_cols, b.info_cols)


def test_member_girth_all(family_codes):
    for code in family_codes:
        assert girth(code) >= 6


def test_member_range(family):
    with pytest.raises(FamilyRangeError):
        member_code(family, 15)


def test_lift_deterministic(family):
    p = family.member(0)
    a = lift(p, Z=8, seed=5, max_retries=1)
    b = lift(p, Z=8, seed=5, max_retries=1)
    assert np.array_equal(a.shifts, b.shifts)
    c = lift(p, Z=8, seed=6, max_retries=1)
    assert not np.array_equal(a.shifts, c.shifts)


def test_lift_retry_records_failure(family):
    code = lift(family.member(0), Z=4, seed=0, max_retries=2)
    assert code.meta["attempts"] == 2
    assert not code.meta["girth_ok"]
    assert code.meta["girth"] < 6


def test_daughter_rank_oracle(family_codes):
    code = family_codes[0]
    h = code.parity_check().toarray()
    assert gf2_rank(h) == code.meta["daughter_rank"] == 384


def test_toy_code(toy_code):
    assert girth(toy_code) >= 6
    assert toy_code.k == 48 and toy_code.tx_map.size == 64


def test_qc_text_round_trip(family_codes, tmp_path):
    code = family_codes[3]
    path = tmp_path / "c.qc"
    write_qc(code, path, {"member": 3})
    back = read_qc(path)
    assert np.array_equal(back.shifts, code.shifts)
    assert back.Z == code.Z and back.punctured == code.punctured
    assert np.array_equal(back.info_cols, code.info_cols)
    assert back.daughter == code.daughter and back.factor == code.factor
    assert path.read_text().startswith("# {")
    assert (back.parity_check() != code.parity_check()).nnz == 0


def test_qc_parse_error():
    with pytest.raises(QcFormatError):
        parse_qc("4 1 1\nx\n")
