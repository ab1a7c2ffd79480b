"""Rule-search solver used to validate generated puzzles.

The solver never reads the stored rule set. It re-infers, per attribute,
which row predicates are consistent with the first two rows of the
attribute matrix, then accepts exactly the candidates whose completed
third row satisfies at least one consistent predicate for every attribute
facet. Zero or several surviving candidates means the puzzle is ambiguous
and must be discarded by the generator.
"""

from __future__ import annotations

__all__ = ["AmbiguousPuzzleError", "solve_by_rules"]


class AmbiguousPuzzleError(Exception):
    """Raised when no candidate, or more than one, completes the matrix."""


def _const_all(rows):
    vals = {v for row in rows for v in row}
    if len(vals) == 1:
        v = vals.pop()
        return lambda row: all(x == v for x in row)
    return None


def _row_const(rows):
    if all(len(set(row)) == 1 for row in rows):
        return lambda row: len(set(row)) == 1
    return None


def _progression(rows, step):
    ok = all(row[1] - row[0] == step and row[2] - row[1] == step for row in rows)
    if ok:
        return lambda row: row[1] - row[0] == step and row[2] - row[1] == step
    return None


def _arithmetic(rows, sign):
    ok = all(row[2] == row[0] + sign * row[1] for row in rows)
    if ok:
        return lambda row: row[2] == row[0] + sign * row[1]
    return None


def _distribute_three(rows):
    sets = [frozenset(row) for row in rows]
    if all(len(s) == 3 for s in sets) and sets[0] == sets[1]:
        pool = sets[0]
        return lambda row: frozenset(row) == pool and len(set(row)) == 3
    return None


def _set_op(rows, op):
    ok = all(op(row[0], row[1]) == row[2] for row in rows)
    if ok:
        return lambda row: op(row[0], row[1]) == row[2]
    return None


_SET_OPS = (
    lambda a, b: a & b,
    lambda a, b: a | b,
    lambda a, b: a ^ b,
)


def _scalar_predicates(rows, with_arithmetic: bool):
    preds = []
    for cand in (
        _const_all(rows),
        _row_const(rows),
        _distribute_three(rows),
        *(_progression(rows, s) for s in (-2, -1, 1, 2)),
    ):
        if cand is not None:
            preds.append(cand)
    if with_arithmetic:
        for sign in (1, -1):
            cand = _arithmetic(rows, sign)
            if cand is not None:
                preds.append(cand)
    return preds


def _mask_predicates(rows):
    preds = []
    for cand in (_const_all(rows), _row_const(rows)):
        if cand is not None:
            preds.append(cand)
    for op in _SET_OPS:
        cand = _set_op(rows, op)
        if cand is not None:
            preds.append(cand)
    return preds


def solve_by_rules(provenance) -> int:
    """Return the unique candidate index completing the attribute matrix.

    ``provenance`` must carry the full 3x3 attribute matrix and the 8
    candidate attribute vectors. Independent of the stored answer and the
    stored rule set by construction.
    """
    matrix = provenance.matrix
    candidates = provenance.candidates
    if len(candidates) != 8:
        raise ValueError(f"expected 8 candidates, got {len(candidates)}")

    facets = []  # (consistent predicates, row-3 value extractor)
    for attr in ("shape", "size", "fill"):
        rows = [
            tuple(getattr(matrix[r][c], attr) for c in range(3)) for r in range(2)
        ]
        ctx = tuple(getattr(matrix[2][c], attr) for c in range(2))
        preds = _scalar_predicates(rows, with_arithmetic=attr != "shape")
        facets.append((preds, lambda cand, a=attr, ctx=ctx: ctx + (getattr(cand, a),)))

    mask_rows = [tuple(matrix[r][c].mask for c in range(3)) for r in range(2)]
    mask_ctx = tuple(matrix[2][c].mask for c in range(2))
    facets.append(
        (_mask_predicates(mask_rows), lambda cand, ctx=mask_ctx: ctx + (cand.mask,))
    )

    count_rows = [tuple(matrix[r][c].count for c in range(3)) for r in range(2)]
    count_ctx = tuple(matrix[2][c].count for c in range(2))
    facets.append(
        (
            _scalar_predicates(count_rows, with_arithmetic=True),
            lambda cand, ctx=count_ctx: ctx + (cand.count,),
        )
    )

    passing = []
    for idx, cand in enumerate(candidates):
        ok = True
        for preds, row3_of in facets:
            if preds and not any(p(row3_of(cand)) for p in preds):
                ok = False
                break
        if ok:
            passing.append(idx)
    if len(passing) != 1:
        raise AmbiguousPuzzleError(
            f"{len(passing)} candidates complete the matrix (expected exactly 1)"
        )
    return passing[0]
