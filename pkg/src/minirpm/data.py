"""On-disk dataset format, RAVEN-style import, and few-shot subsampling.

File layout (little-endian throughout): magic "RPMD", u32 version, u64
puzzle count, u32 image size, u8 config tag, u8 provenance flag, then one
fixed-length record per puzzle: answer byte, 16 raw 8-bit grayscale images
(row-major), and, when flagged, a fixed-size provenance block. Fixed record
length gives O(1) random access by index.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .generator import (
    CENTER,
    GRID2X2,
    AttributeVector,
    Provenance,
    Puzzle,
    Rule,
    RuleSet,
)

__all__ = [
    "save",
    "load",
    "import_external",
    "ImportReport",
    "subsample",
    "to_arrays",
    "DatasetFormatError",
]

_MAGIC = b"RPMD"
_VERSION = 1
_CONFIG_TAGS = {CENTER: 0, GRID2X2: 1}
_CONFIG_NAMES = {v: k for k, v in _CONFIG_TAGS.items()}

_ATTR_CODES = {"shape": 0, "size": 1, "fill": 2, "count": 3, "position": 4}
_ATTR_NAMES = {v: k for k, v in _ATTR_CODES.items()}
_KIND_CODES = {
    "constant": 0,
    "progression": 1,
    "arithmetic": 2,
    "distribute_three": 3,
    "set_op": 4,
}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}
_ARITH_CODES = {"plus": 0, "minus": 1}
_SETOP_CODES = {"and": 0, "or": 1, "xor": 2}


class DatasetFormatError(Exception):
    pass


def _encode_param(rule: Rule) -> int:
    if rule.kind == "progression":
        return int(rule.param)
    if rule.kind == "arithmetic":
        return _ARITH_CODES[rule.param]
    if rule.kind == "set_op":
        return _SETOP_CODES[rule.param]
    return 0


def _decode_param(kind: str, raw: int):
    if kind == "progression":
        return raw
    if kind == "arithmetic":
        return {v: k for k, v in _ARITH_CODES.items()}[raw]
    if kind == "set_op":
        return {v: k for k, v in _SETOP_CODES.items()}[raw]
    return None


def _pack_av(av: AttributeVector) -> bytes:
    return struct.pack("<4B", av.shape, av.size, av.fill, av.mask)


def _unpack_av(buf: bytes) -> AttributeVector:
    shape, size, fill, mask = struct.unpack("<4B", buf)
    return AttributeVector(shape=shape, size=size, fill=fill, mask=mask)


def _pack_provenance(prov: Provenance) -> bytes:
    out = [struct.pack("<B", len(prov.ruleset.rules))]
    for slot in range(4):
        if slot < len(prov.ruleset.rules):
            r = prov.ruleset.rules[slot]
            out.append(
                struct.pack(
                    "<3Bb", 1, _ATTR_CODES[r.attribute], _KIND_CODES[r.kind], _encode_param(r)
                )
            )
        else:
            out.append(struct.pack("<3Bb", 0, 0, 0, 0))
    for r in range(3):
        for c in range(3):
            out.append(_pack_av(prov.matrix[r][c]))
    for av in prov.candidates:
        out.append(_pack_av(av))
    return b"".join(out)


_PROV_LEN = 1 + 4 * 4 + 9 * 4 + 8 * 4


def _unpack_provenance(buf: bytes, config: str) -> Provenance:
    (n_rules,) = struct.unpack("<B", buf[:1])
    rules = []
    for slot in range(4):
        present, attr, kind, param = struct.unpack(
            "<3Bb", buf[1 + 4 * slot : 5 + 4 * slot]
        )
        if present:
            kind_name = _KIND_NAMES[kind]
            rules.append(
                Rule(_ATTR_NAMES[attr], kind_name, _decode_param(kind_name, param))
            )
    if len(rules) != n_rules:
        raise DatasetFormatError("provenance rule count mismatch")
    off = 17
    matrix = [
        [_unpack_av(buf[off + 4 * (3 * r + c) : off + 4 * (3 * r + c) + 4]) for c in range(3)]
        for r in range(3)
    ]
    off += 36
    candidates = [_unpack_av(buf[off + 4 * i : off + 4 * i + 4]) for i in range(8)]
    return Provenance(RuleSet(config, tuple(rules)), matrix, candidates)


def save(puzzles: list[Puzzle], path) -> None:
    if not puzzles:
        raise ValueError("refusing to save an empty dataset")
    first = puzzles[0]
    with_prov = first.provenance is not None
    for p in puzzles:
        if p.image_size != first.image_size or p.config != first.config:
            raise ValueError("all puzzles in a file must share image size and config")
        if (p.provenance is not None) != with_prov:
            raise ValueError("all puzzles in a file must agree on provenance presence")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(
            struct.pack(
                "<IQIBB",
                _VERSION,
                len(puzzles),
                first.image_size,
                _CONFIG_TAGS[first.config],
                int(with_prov),
            )
        )
        for p in puzzles:
            f.write(struct.pack("<B", p.answer))
            f.write(np.ascontiguousarray(p.context, dtype=np.uint8).tobytes())
            f.write(np.ascontiguousarray(p.choices, dtype=np.uint8).tobytes())
            if with_prov:
                f.write(_pack_provenance(p.provenance))


def load(path) -> list[Puzzle]:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 22:
        raise DatasetFormatError(f"{path}: truncated header")
    if raw[:4] != _MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {raw[:4]!r}")
    version, count, image_size, config_tag, with_prov = struct.unpack(
        "<IQIBB", raw[4:22]
    )
    if version != _VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {version}")
    if config_tag not in _CONFIG_NAMES:
        raise DatasetFormatError(f"{path}: unknown config tag {config_tag}")
    config = _CONFIG_NAMES[config_tag]
    img_bytes = 16 * image_size * image_size
    record_len = 1 + img_bytes + (_PROV_LEN if with_prov else 0)
    if len(raw) != 22 + count * record_len:
        raise DatasetFormatError(
            f"{path}: expected {22 + count * record_len} bytes, found {len(raw)} "
            "(truncated or corrupt)"
        )
    puzzles = []
    pos = 22
    for _ in range(count):
        answer = raw[pos]
        if answer > 7:
            raise DatasetFormatError(f"{path}: answer byte {answer} out of range")
        pos += 1
        images = np.frombuffer(raw, dtype=np.uint8, count=img_bytes, offset=pos)
        images = images.reshape(16, image_size, image_size).copy()
        pos += img_bytes
        prov = None
        if with_prov:
            prov = _unpack_provenance(raw[pos : pos + _PROV_LEN], config)
            pos += _PROV_LEN
        puzzles.append(
            Puzzle(
                context=images[:8],
                choices=images[8:],
                answer=answer,
                image_size=image_size,
                config=config,
                provenance=prov,
            )
        )
    return puzzles


@dataclass
class ImportReport:
    imported: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)  # (filename, reason)

    @property
    def total(self) -> int:
        return self.imported + len(self.errors)


def _resize_weights(n_in: int, n_out: int) -> np.ndarray:
    """Area-average resampling matrix: rows sum to 1, constants stay exact."""
    w = np.zeros((n_out, n_in))
    ratio = n_in / n_out
    for i in range(n_out):
        lo, hi = i * ratio, (i + 1) * ratio
        j0, j1 = int(np.floor(lo)), int(np.ceil(hi))
        for j in range(j0, min(j1, n_in)):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                w[i, j] = overlap / ratio
    return w


def resize_area(image: np.ndarray, out_size: int) -> np.ndarray:
    h, w = image.shape
    wh = _resize_weights(h, out_size)
    ww = _resize_weights(w, out_size)
    out = wh @ image.astype(np.float64) @ ww.T
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def import_external(
    directory, image_size: int = 96, config: str = CENTER
) -> tuple[list[Puzzle], ImportReport]:
    """Import RAVEN-style records: one ``.npz`` per puzzle with a 16-image
    grayscale stack under ``image`` and the answer index under ``target``.

    Bad records are reported per file and skipped; import continues.
    Images are downsampled by area averaging; provenance is absent.
    """
    directory = Path(directory)
    report = ImportReport()
    puzzles: list[Puzzle] = []
    files = sorted(directory.glob("*.npz"))
    if not files:
        raise FileNotFoundError(f"no .npz records found in {directory}")
    for path in files:
        try:
            with np.load(path) as npz:
                if "image" not in npz:
                    raise KeyError("missing 'image' array")
                if "target" not in npz:
                    raise KeyError("missing 'target' index")
                stack = np.asarray(npz["image"])
                target = int(np.asarray(npz["target"]))
            if stack.ndim != 3 or stack.shape[0] != 16:
                raise ValueError(f"expected a 16xHxW stack, got {stack.shape}")
            if not 0 <= target <= 7:
                raise ValueError(f"target {target} out of range 0..7")
            resized = np.stack([resize_area(img, image_size) for img in stack])
            puzzles.append(
                Puzzle(
                    context=resized[:8],
                    choices=resized[8:],
                    answer=target,
                    image_size=image_size,
                    config=config,
                    provenance=None,
                )
            )
            report.imported += 1
        except Exception as exc:  # noqa: BLE001 - per-file error reporting
            report.errors.append((path.name, str(exc)))
    return puzzles, report


def subsample(puzzles: list[Puzzle], fraction: float, seed: int) -> list[Puzzle]:
    """floor(n * fraction) puzzles, uniform without replacement, order kept."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    n = len(puzzles)
    k = int(np.floor(n * fraction))
    if k == 0:
        raise ValueError(f"fraction {fraction} of {n} puzzles leaves nothing")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=k, replace=False))
    return [puzzles[i] for i in idx]


def to_arrays(puzzles: list[Puzzle]) -> tuple[np.ndarray, np.ndarray]:
    """(N,16,S,S) uint8 image stacks and (N,) answer indices for training."""
    images = np.stack([np.concatenate([p.context, p.choices]) for p in puzzles])
    answers = np.array([p.answer for p in puzzles], dtype=np.int64)
    return images, answers
