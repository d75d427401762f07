import json

import numpy as np
import pytest

from substcps.errors import GapOrOverlap, NotPrimitive, SchemaError
from substcps.substitution import (
    DigitSets,
    build_system,
    iterate_digit_sets,
    parse_beta_expression,
    parse_spec,
    validate_tile_equation,
)

from conftest import system


def doc(**over):
    d = {"format": 1, "letters": ["a", "b"], "rules": {"a": "ab", "b": "a"}}
    d.update(over)
    return d


@pytest.mark.parametrize(
    "bad",
    [
        doc(format=2),
        doc(rules={"a": "ab"}),
        doc(rules={"a": "ac", "b": "a"}),
        doc(rules={"a": "aa", "b": "a"}),  # b never produced
        doc(lengths={"a": "1"}),
        doc(extra=1),
        "{not json",
    ],
)
def test_schema_errors(bad):
    with pytest.raises(SchemaError):
        parse_spec(bad if isinstance(bad, str) else json.dumps(bad))


def test_multichar_letters_split_on_spaces():
    s = parse_spec(doc(letters=["L", "S1"], rules={"L": "L S1", "S1": ["L"]}))
    assert s.rules["L"] == ("L", "S1")


def test_not_primitive():
    with pytest.raises(NotPrimitive):
        build_system(parse_spec(doc(rules={"a": "ab", "b": "b"})))


def test_matrix_orientation():
    # S[i, j] counts letter i inside the image of letter j
    S = system("tribonacci").matrix.S
    assert S.tolist() == [[1, 1, 1], [1, 0, 0], [0, 1, 0]]


def test_fibonacci_lengths():
    s = system("fibonacci")
    assert [str(x) for x in s.lengths] == ["beta", "1"]
    assert s.primitivity_exponent == 2


def test_aab_abab_digit_sets():
    """Exact digit sets of a -> aab, b -> abab with lengths 1 and sqrt 2 = beta - 2."""
    s = system("aab_abab")
    ctx = s.field
    assert s.min_poly.coeffs == (2, -4, 1)
    e = lambda t: parse_beta_expression(t, ctx)
    want = [
        [{e("0"), e("1")}, {e("0"), e("beta - 1")}],  # 1 + sqrt 2 = beta - 1
        [{e("2")}, {e("1"), e("beta")}],  # 2 + sqrt 2 = beta
    ]
    got = [[set(s.digits.D[i][j]) for j in range(2)] for i in range(2)]
    assert got == want


@pytest.mark.parametrize("name", ["fibonacci", "tribonacci", "aab_abab"])
def test_tile_equation_chains(name):
    s = system(name)
    assert validate_tile_equation(s.digits, s.lengths, s.field.beta(), s.beta_value)


def test_tile_equation_detects_gap():
    s = system("fibonacci")
    D = [list(map(list, row)) for row in s.digits.D]
    D[1][0] = [D[1][0][0] + s.field.one()]
    broken = DigitSets(s.digits.letters, tuple(tuple(tuple(c) for c in row) for row in D))
    with pytest.raises(GapOrOverlap):
        validate_tile_equation(broken, s.lengths, s.field.beta(), s.beta_value)


@pytest.mark.parametrize("name", ["fibonacci", "tribonacci", "aab_abab"])
@pytest.mark.parametrize("M", [1, 2, 3, 4])
def test_iterated_digit_counts_match_matrix_power(name, M):
    s = system(name)
    DM = iterate_digit_sets(s.digits, M, s.field.beta())
    assert np.array_equal(DM.counts(), np.linalg.matrix_power(s.matrix.S, M))
    # no repeated digit: the M-th power still tiles without overlap
    for row in DM.D:
        for cell in row:
            assert len(set(cell)) == len(cell)


def test_left_eigenvector_lengths():
    s = system("tribonacci")
    ell = s.length_values()
    assert np.allclose(ell @ s.matrix.S, s.beta_value * ell, atol=1e-12)
