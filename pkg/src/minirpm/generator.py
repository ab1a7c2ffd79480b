"""Procedural mini-RPM puzzle generation with known attribute-level rules.

Every puzzle is a 3x3 matrix of panels (bottom-right missing) plus 8
candidate answers. Rules hold row-wise per attribute; attributes not
governed by a rule are sampled per row and held constant within the row.
Wrong candidates are single-attribute perturbations of the answer, biased
toward the nearest different legal value so they stay confusable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .oracle import AmbiguousPuzzleError, solve_by_rules
from .raster import rasterize

SHAPES = ("triangle", "square", "pentagon", "hexagon", "circle")
CENTER = "center"
GRID2X2 = "grid2x2"
CONFIGS = (CENTER, GRID2X2)

# Inclusive value ranges per scalar attribute.
RANGES = {"shape": (0, 4), "size": (1, 5), "fill": (1, 5), "count": (1, 4)}

PROGRESSION_STEPS = (-2, -1, 1, 2)
ARITH_OPS = ("plus", "minus")
SET_OPS = ("and", "or", "xor")

_KINDS_BY_ATTR = {
    "shape": ("constant", "progression", "distribute_three"),
    "size": ("constant", "progression", "arithmetic", "distribute_three"),
    "fill": ("constant", "progression", "arithmetic", "distribute_three"),
    "count": ("constant", "progression", "arithmetic", "distribute_three"),
    "position": ("set_op",),
}


class GenerationError(Exception):
    pass


@dataclass(frozen=True)
class AttributeVector:
    """Symbolic description of one panel."""

    shape: int  # index into SHAPES
    size: int  # 1..5
    fill: int  # 1..5 (gray intensity level)
    mask: int  # bitset over slots; center config uses the single slot 0b1

    @property
    def count(self) -> int:
        return int(self.mask).bit_count()

    def validate(self, config: str) -> None:
        for attr, value in (("shape", self.shape), ("size", self.size), ("fill", self.fill)):
            lo, hi = RANGES[attr]
            if not lo <= value <= hi:
                raise ValueError(f"{attr}={value} outside [{lo}, {hi}]")
        if config == CENTER:
            if self.mask != 0b1:
                raise ValueError(f"center config requires mask 0b1, got {self.mask:#b}")
        else:
            if not 1 <= self.mask <= 0b1111:
                raise ValueError(f"grid2x2 mask {self.mask:#b} outside 4-slot range")


@dataclass(frozen=True)
class Rule:
    """One attribute-level row rule.

    ``param`` is the progression step, an arithmetic op ("plus"/"minus"),
    or a set op ("and"/"or"/"xor"); None for constant/distribute_three.
    """

    attribute: str
    kind: str
    param: object = None


@dataclass(frozen=True)
class RuleSet:
    config: str
    rules: tuple[Rule, ...]

    def governed(self) -> set[str]:
        return {r.attribute for r in self.rules}


@dataclass
class Provenance:
    ruleset: RuleSet
    matrix: list[list[AttributeVector]]  # 3x3, row-major; [2][2] is the answer
    candidates: list[AttributeVector]  # 8 entries, including the answer


@dataclass
class Puzzle:
    context: np.ndarray  # (8, S, S) uint8, row-major 3x3 minus bottom-right
    choices: np.ndarray  # (8, S, S) uint8
    answer: int
    image_size: int
    config: str
    provenance: Optional[Provenance] = None


def _rule_feasible(rule: Rule) -> bool:
    if rule.kind == "progression":
        lo, hi = RANGES[rule.attribute]
        return hi - lo >= 2 * abs(rule.param)
    return True


def sample_ruleset(config: str, rng: np.random.Generator, max_rejects: int = 1000) -> RuleSet:
    """Uniformly sample 1..4 compatible row rules for the configuration."""
    if config not in CONFIGS:
        raise ValueError(f"unknown config {config!r}")
    pool = ["shape", "size", "fill"]
    if config == GRID2X2:
        pool.append("numpos")  # one slot shared by count and position rules
    rejects = 0
    while True:
        n = int(rng.integers(1, len(pool) + 1))
        chosen = list(rng.choice(len(pool), size=n, replace=False))
        rules = []
        for i in sorted(chosen):
            attr = pool[i]
            if attr == "numpos":
                attr = "position" if rng.random() < 0.5 else "count"
            kind = _KINDS_BY_ATTR[attr][rng.integers(len(_KINDS_BY_ATTR[attr]))]
            if kind == "progression":
                param = PROGRESSION_STEPS[rng.integers(4)]
            elif kind == "arithmetic":
                param = ARITH_OPS[rng.integers(2)]
            elif kind == "set_op":
                param = SET_OPS[rng.integers(3)]
            else:
                param = None
            rules.append(Rule(attr, kind, param))
        if all(_rule_feasible(r) for r in rules):
            return RuleSet(config, tuple(rules))
        rejects += 1
        if rejects >= max_rejects:
            raise GenerationError(
                f"{max_rejects} consecutive infeasible rule sets; attribute "
                "ranges are mis-specified"
            )


def _value_row(rule: Rule, rng: np.random.Generator, triple_pool=None) -> tuple[int, int, int]:
    """One in-range row of scalar values satisfying ``rule``."""
    lo, hi = RANGES[rule.attribute]
    if rule.kind == "progression":
        s = rule.param
        start_lo = lo - min(0, 2 * s)
        start_hi = hi - max(0, 2 * s)
        v = int(rng.integers(start_lo, start_hi + 1))
        return (v, v + s, v + 2 * s)
    if rule.kind == "arithmetic":
        pairs = [
            (a, b)
            for a in range(lo, hi + 1)
            for b in range(lo, hi + 1)
            if lo <= (a + b if rule.param == "plus" else a - b) <= hi
        ]
        a, b = pairs[rng.integers(len(pairs))]
        return (a, b, a + b if rule.param == "plus" else a - b)
    if rule.kind == "distribute_three":
        perm = rng.permutation(3)
        return tuple(triple_pool[i] for i in perm)
    raise AssertionError(rule.kind)


def _nonzero_mask(rng: np.random.Generator) -> int:
    return int(rng.integers(1, 16))


def _mask_with_count(count: int, rng: np.random.Generator) -> int:
    slots = rng.choice(4, size=count, replace=False)
    return int(sum(1 << s for s in slots))


def _setop_row(op: str, rng: np.random.Generator) -> tuple[int, int, int]:
    for _ in range(200):
        m1, m2 = _nonzero_mask(rng), _nonzero_mask(rng)
        if op == "and":
            m3 = m1 & m2
        elif op == "or":
            m3 = m1 | m2
        else:
            m3 = m1 ^ m2
        if m3:
            return (m1, m2, m3)
    raise GenerationError(f"could not sample a non-empty {op} position row")


def instantiate_matrix(
    ruleset: RuleSet, rng: np.random.Generator, max_retries: int = 50
) -> list[list[AttributeVector]]:
    """A 3x3 attribute matrix whose every row satisfies every rule."""
    by_attr = {r.attribute: r for r in ruleset.rules}
    if len(by_attr) != len(ruleset.rules):
        raise ValueError("at most one rule per attribute")
    for _ in range(max_retries):
        try:
            return _instantiate_once(ruleset, by_attr, rng)
        except GenerationError:
            continue
    raise GenerationError("matrix instantiation kept leaving attribute ranges")


def _instantiate_once(ruleset, by_attr, rng) -> list[list[AttributeVector]]:
    grids: dict[str, list[tuple[int, int, int]]] = {}
    for attr in ("shape", "size", "fill"):
        rule = by_attr.get(attr)
        lo, hi = RANGES[attr]
        if rule is None:
            grids[attr] = [(v, v, v) for v in rng.integers(lo, hi + 1, size=3)]
        elif rule.kind == "constant":
            v = int(rng.integers(lo, hi + 1))
            grids[attr] = [(v, v, v)] * 3
        elif rule.kind == "distribute_three":
            pool = tuple(int(v) for v in rng.choice(np.arange(lo, hi + 1), size=3, replace=False))
            grids[attr] = [_value_row(rule, rng, pool) for _ in range(3)]
        else:
            grids[attr] = [_value_row(rule, rng) for _ in range(3)]

    if ruleset.config == CENTER:
        masks = [(1, 1, 1)] * 3
    elif "position" in by_attr:
        rule = by_attr["position"]
        if rule.kind == "set_op":
            masks = [_setop_row(rule.param, rng) for _ in range(3)]
        else:
            raise ValueError(f"position rule kind {rule.kind!r} not supported")
    elif "count" in by_attr:
        rule = by_attr["count"]
        if rule.kind == "constant":
            v = int(rng.integers(1, 5))
            counts = [(v, v, v)] * 3
        elif rule.kind == "distribute_three":
            pool = tuple(int(v) for v in rng.choice(np.arange(1, 5), size=3, replace=False))
            counts = [_value_row(rule, rng, pool) for _ in range(3)]
        else:
            counts = [_value_row(rule, rng) for _ in range(3)]
        # Slot layout is a derived attribute here: any mask with the right
        # population works, so it is sampled per panel.
        masks = [tuple(_mask_with_count(c, rng) for c in row) for row in counts]
    else:
        # Free: one mask per row, constant within the row.
        masks = [(m, m, m) for m in (_nonzero_mask(rng) for _ in range(3))]

    matrix = [
        [
            AttributeVector(
                shape=int(grids["shape"][r][c]),
                size=int(grids["size"][r][c]),
                fill=int(grids["fill"][r][c]),
                mask=int(masks[r][c]),
            )
            for c in range(3)
        ]
        for r in range(3)
    ]
    for row in matrix:
        for av in row:
            av.validate(ruleset.config)
    return matrix


def _replace(av: AttributeVector, attr: str, value: int) -> AttributeVector:
    kwargs = {"shape": av.shape, "size": av.size, "fill": av.fill, "mask": av.mask}
    kwargs[attr] = value
    return AttributeVector(**kwargs)


def make_distractors(
    matrix: list[list[AttributeVector]], ruleset: RuleSet, rng: np.random.Generator
) -> list[AttributeVector]:
    """7 wrong candidates, each one attribute change away from the answer.

    Candidates are ordered nearest-change-first (maximally confusable) and
    widened to larger changes only when needed to reach 7 distinct panels.
    """
    target = matrix[2][2]
    governed = ruleset.governed()
    options: list[tuple[int, float, AttributeVector]] = []
    for attr in ("shape", "size", "fill"):
        lo, hi = RANGES[attr]
        cur = getattr(target, attr)
        for v in range(lo, hi + 1):
            if v != cur:
                options.append((abs(v - cur), rng.random(), _replace(target, attr, v)))
    if ruleset.config == GRID2X2:
        if "count" in governed:
            # Slot layout is free when count is governed; only a count change
            # is detectable, so perturb the count and redraw slots.
            for v in range(1, 5):
                if v != target.count:
                    options.append(
                        (
                            abs(v - target.count),
                            rng.random(),
                            _replace(target, "mask", _mask_with_count(v, rng)),
                        )
                    )
        else:
            for m in range(1, 16):
                if m != target.mask:
                    dist = (m ^ target.mask).bit_count()
                    options.append((dist, rng.random(), _replace(target, "mask", m)))
    options.sort(key=lambda t: (t[0], t[1]))
    picked: list[AttributeVector] = []
    for _, _, av in options:
        if av not in picked and av != target:
            picked.append(av)
        if len(picked) == 7:
            return picked
    raise GenerationError("attribute space too small for 7 distinct distractors")


def _render_puzzle(
    matrix, candidates, answer, config, image_size, rng
) -> tuple[np.ndarray, np.ndarray]:
    context = np.stack(
        [
            rasterize(matrix[r][c], image_size, config, rng)
            for r in range(3)
            for c in range(3)
            if not (r == 2 and c == 2)
        ]
    )
    choices = np.stack([rasterize(av, image_size, config, rng) for av in candidates])
    return context, choices


def generate_puzzle(
    config: str, image_size: int, rng: np.random.Generator, max_attempts: int = 200
) -> Puzzle:
    """One oracle-validated puzzle; ambiguous draws are discarded, not repaired."""
    for _ in range(max_attempts):
        ruleset = sample_ruleset(config, rng)
        try:
            matrix = instantiate_matrix(ruleset, rng)
            distractors = make_distractors(matrix, ruleset, rng)
        except GenerationError:
            continue
        answer = int(rng.integers(8))
        candidates = distractors[:answer] + [matrix[2][2]] + distractors[answer:]
        provenance = Provenance(ruleset, matrix, candidates)
        try:
            solved = solve_by_rules(provenance)
        except AmbiguousPuzzleError:
            continue
        if solved != answer:  # pragma: no cover - oracle uniqueness implies this
            continue
        context, choices = _render_puzzle(
            matrix, candidates, answer, config, image_size, rng
        )
        return Puzzle(
            context=context,
            choices=choices,
            answer=answer,
            image_size=image_size,
            config=config,
            provenance=provenance,
        )
    raise GenerationError(f"no valid puzzle after {max_attempts} attempts")


def generate_dataset(
    n: int, config: str, image_size: int, seed: int
) -> list[Puzzle]:
    """n valid puzzles, each drawn from an independent per-puzzle seed."""
    if n < 1:
        raise ValueError(f"need n >= 1 puzzles, got {n}")
    children = np.random.SeedSequence(seed).spawn(n)
    return [
        generate_puzzle(config, image_size, np.random.default_rng(child))
        for child in children
    ]
