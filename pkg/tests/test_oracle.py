"""Hand-built attribute matrices for the rule-search solver."""

import pytest

from minirpm.generator import AttributeVector, Provenance, Rule, RuleSet
from minirpm.oracle import AmbiguousPuzzleError, solve_by_rules


def _av(shape=0, size=3, fill=3, mask=1):
    return AttributeVector(shape=shape, size=size, fill=fill, mask=mask)


def _prov(matrix, candidates, config="center", rules=()):
    return Provenance(RuleSet(config, tuple(rules)), matrix, candidates)


def _matrix(fn):
    """3x3 matrix from a (row, col) -> AttributeVector function."""
    return [[fn(r, c) for c in range(3)] for r in range(3)]


def test_constant_rule_identifies_answer():
    matrix = _matrix(lambda r, c: _av(shape=2))
    answer = matrix[2][2]
    candidates = [_av(shape=s) for s in (0, 1, 3, 4)] + [
        _av(shape=2, size=s) for s in (1, 2)
    ]
    candidates = candidates[:3] + [answer] + candidates[3:] + [_av(shape=2, fill=5)]
    assert len(candidates) == 8
    assert solve_by_rules(_prov(matrix, candidates)) == 3


def test_progression_rule():
    matrix = _matrix(lambda r, c: _av(size=1 + c, fill=r + 1))
    candidates = [_av(size=s, fill=3) for s in (1, 2, 4, 5)] + [
        _av(size=3, fill=f) for f in (1, 2, 4)
    ]
    candidates.insert(6, matrix[2][2])  # size=3, fill=3
    assert solve_by_rules(_prov(matrix, candidates)) == 6


def test_arithmetic_rule_minus():
    # size: col0 - col1 = col2 in every row.
    sizes = [(5, 2, 3), (4, 3, 1), (3, 1, 2)]
    matrix = _matrix(lambda r, c: _av(size=sizes[r][c], fill=r + 1))
    candidates = [_av(size=s, fill=3) for s in (1, 3, 4, 5)]
    candidates = candidates[:1] + [matrix[2][2]] + candidates[1:] + [
        _av(size=2, fill=f) for f in (1, 2, 4)
    ]
    assert solve_by_rules(_prov(matrix, candidates)) == 1


def test_distribute_three_rule():
    perms = [(0, 2, 4), (2, 4, 0), (4, 0, 2)]
    matrix = _matrix(lambda r, c: _av(shape=perms[r][c]))
    candidates = [_av(shape=s) for s in (0, 1, 3, 4)] + [
        _av(shape=2, size=s) for s in (1, 2, 4)
    ]
    candidates.insert(5, matrix[2][2])  # shape=2 completes {0,2,4}
    assert solve_by_rules(_prov(matrix, candidates)) == 5


def test_set_op_xor_rule():
    rows = [(0b1100, 0b1010, 0b0110), (0b0011, 0b0101, 0b0110), (0b1001, 0b0011, 0b1010)]
    matrix = _matrix(lambda r, c: _av(mask=rows[r][c]))
    wrong_masks = (0b0001, 0b0010, 0b0100, 0b1000, 0b1111, 0b0111, 0b1011)
    candidates = [_av(mask=m) for m in wrong_masks[:4]]
    candidates += [matrix[2][2]] + [_av(mask=m) for m in wrong_masks[4:]]
    assert solve_by_rules(_prov(matrix, candidates, config="grid2x2")) == 4


def test_duplicate_answer_is_ambiguous():
    matrix = _matrix(lambda r, c: _av())
    answer = matrix[2][2]
    candidates = [answer, answer] + [_av(shape=s) for s in (1, 2, 3, 4)] + [
        _av(size=1),
        _av(size=2),
    ]
    with pytest.raises(AmbiguousPuzzleError):
        solve_by_rules(_prov(matrix, candidates))


def test_no_valid_candidate_is_ambiguous():
    matrix = _matrix(lambda r, c: _av(shape=2))
    candidates = [_av(shape=s) for s in (0, 1, 3, 4)] * 2
    with pytest.raises(AmbiguousPuzzleError):
        solve_by_rules(_prov(matrix, candidates))


def test_candidate_count_is_checked():
    matrix = _matrix(lambda r, c: _av())
    with pytest.raises(ValueError, match="8 candidates"):
        solve_by_rules(_prov(matrix, [matrix[2][2]] * 3))


def test_solver_ignores_stored_ruleset():
    # A bogus stored rule set must not influence the search.
    matrix = _matrix(lambda r, c: _av(fill=1 + c))
    candidates = [_av(fill=f) for f in (1, 2)] + [matrix[2][2]] + [
        _av(fill=3, size=s) for s in (1, 2, 4, 5)
    ] + [_av(fill=3, shape=1)]
    bogus = (Rule("shape", "distribute_three"),)
    assert solve_by_rules(_prov(matrix, candidates, rules=bogus)) == 2
