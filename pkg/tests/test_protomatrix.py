from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rcldpc.protomatrix import (AR4JA_4_5, FamilyRangeError, InvalidProtomatrixError,
                                Protomatrix, ProtomatrixParseError, RcFamily, daughter,
                                embedded_family, export_family, fixture_text,
                                format_protomatrix, member, parse_protomatrix, rate,
                                validate_family)


def test_rate_daughter():
    assert rate(daughter()) == Fraction(4, 5)


def test_rate_full_family(family):
    assert rate(family.full) == Fraction(1, 3)


def test_rate_single_parity_check():
    assert rate(Protomatrix([[1, 1]])) == Fraction(1, 2)


def test_rate_all_punctured_rejected():
    with pytest.raises(InvalidProtomatrixError):
        Protomatrix([[1, 1]], frozenset({0, 1}))


@pytest.mark.parametrize("entries", [
    [[1, -1, 1]],          # negative multiplicity
    [[1, 0, 1], [0, 0, 0]],  # empty row
    [[1, 0, 1], [1, 0, 1]],  # empty column and no positive rate
    [[1, 1], [1, 1]],      # square: rate zero
])
def test_invalid_protomatrix(entries):
    with pytest.raises(InvalidProtomatrixError):
        Protomatrix(entries)


def test_member_zero_is_daughter(family):
    m0 = member(family, 0)
    assert np.array_equal(m0.entries, AR4JA_4_5)
    assert m0.punctured == {10}


def test_member_three(family):
    m = member(family, 3)
    assert m.shape == (6, 14)
    assert rate(m) == Fraction(8, 13)


def test_member_fourteen_is_full(family):
    assert member(family, 14) == family.full


@pytest.mark.parametrize("n", [-1, 15, 20])
def test_member_out_of_range(family, n):
    with pytest.raises(FamilyRangeError):
        member(family, n)


@pytest.mark.parametrize("n", range(15))
def test_member_rates(family, n):
    assert rate(member(family, n)) == Fraction(8, 10 + n)


@pytest.mark.parametrize("n", range(14))
def test_members_nest(family, n):
    small, big = member(family, n), member(family, n + 1)
    assert np.array_equal(big.entries[:small.n_checks, :small.n_vars], small.entries)
    assert small.punctured == big.punctured


def test_extension_rows_edge_limits(family):
    h = family.full.entries
    ext = h[3:, :11]
    assert set(ext[:, 10].tolist()) <= {1, 2}
    assert set(np.delete(ext, 10, axis=1).ravel().tolist()) <= {0, 1}
    assert (h[3:].sum(axis=1) >= 4).all()


def test_embedded_family_valid(family):
    assert validate_family(family) == []
    assert len(family) == 15


def _with_row(family, r, row):
    h = family.full.entries.copy()
    h[r] = row
    return RcFamily(Protomatrix(h, family.full.punctured))


def test_weight_violation(family):
    row = np.zeros(25, dtype=int)
    row[[6, 10, 11]] = 1  # weight 3 including the new variable
    f = _with_row(family, 3, row)
    v = validate_family(f)
    assert len(v) == 1 and v[0].startswith("weight")


def test_nesting_violation(family):
    h = family.full.entries.copy()
    h[4, 11] = 1  # new variable of row 4 also hangs off row 5
    v = validate_family(RcFamily(Protomatrix(h, family.full.punctured)))
    assert len(v) == 1 and v[0].startswith("nesting")


def test_fixture_matches_embedded_constant(family):
    assert parse_protomatrix(fixture_text()) == family.full


def test_text_round_trip(family):
    for n, text in export_family(family).items():
        assert parse_protomatrix(text) == member(family, n)


def test_text_format_is_one_based(family):
    text = format_protomatrix(member(family, 0))
    assert text.splitlines()[0] == "3 11"
    assert text.splitlines()[-1] == "punctured: 11"


@pytest.mark.parametrize("text,lineno", [
    ("2 3\n1 1 1\n1 x 1\npunctured:\n", 3),
    ("2 3\n1 1 1\n1 1\npunctured:\n", 3),
    ("2 3\n1 1 1\n1 1 1\nfoo\n", 4),
    ("two three\n", 1),
    ("1 2\n1 1\npunctured: 3\n", 3),
])
def test_parse_errors_carry_line(text, lineno):
    with pytest.raises(ProtomatrixParseError) as exc:
        parse_protomatrix(text)
    assert exc.value.lineno == lineno
    assert f"line {lineno}" in str(exc.value)


@given(st.lists(st.lists(st.integers(0, 3), min_size=5, max_size=5), min_size=1, max_size=3),
       st.sets(st.integers(0, 4), max_size=1))
def test_round_trip_property(rows, punct):
    arr = np.array(rows)
    arr[:, 0] += 1
    arr[0] += 1
    try:
        p = Protomatrix(arr, frozenset(punct))
    except InvalidProtomatrixError:
        return
    assert parse_protomatrix(format_protomatrix(p)) == p


def test_embedded_family_is_fresh_each_call():
    assert embedded_family().full == embedded_family().full
