"""Nearest-neighbor retrieval over reaction strings via side-tagged character
shingles hashed into fixed-width bit fingerprints and Tanimoto similarity.
The index is an exhaustive scan, persisted in a small binary format.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Optional, Sequence, Union

MAGIC = b"PFPX"
VERSION = 1
DEFAULT_WIDTH = 2048
SHINGLE_LENGTHS = range(3, 7)


class EmptyReactionError(ValueError):
    pass


class WidthMismatchError(ValueError):
    pass


class EmptyIndexError(ValueError):
    pass


@dataclass(frozen=True)
class BitFingerprint:
    bits: int  # big-integer bitset
    width: int

    @property
    def n_set(self) -> int:
        return self.bits.bit_count()

    def set_positions(self) -> list[int]:
        return [i for i in range(self.width) if self.bits >> i & 1]


def _sides(reaction: str) -> list[tuple[str, str]]:
    if ">>" in reaction:
        left, right = reaction.split(">>", 1)
    else:
        parts = reaction.split(">")
        left, right = parts[0], parts[-1]
    return [("r", left.strip()), ("p", right.strip())]


def _bit_for(tag: str, shingle: str, width: int) -> int:
    digest = hashlib.blake2b(f"{tag}:{shingle}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % width


def fingerprint(reaction: str, width: int = DEFAULT_WIDTH) -> BitFingerprint:
    """Hash character shingles (lengths 3-6) of the reactant and product sides,
    each tagged with its side, into a fixed-width bit vector. Deterministic."""
    if not reaction or not reaction.strip():
        raise EmptyReactionError("reaction string is empty")
    bits = 0
    for tag, side in _sides(reaction):
        if not side:
            continue
        if len(side) < min(SHINGLE_LENGTHS):
            bits |= 1 << _bit_for(tag, side, width)
            continue
        for length in SHINGLE_LENGTHS:
            for i in range(len(side) - length + 1):
                bits |= 1 << _bit_for(tag, side[i : i + length], width)
    return BitFingerprint(bits=bits, width=width)


def tanimoto(a: BitFingerprint, b: BitFingerprint) -> float:
    """|a AND b| / |a OR b|; two empty fingerprints count as identical."""
    if a.width != b.width:
        raise WidthMismatchError(f"{a.width} vs {b.width}")
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 1.0
    return (a.bits & b.bits).bit_count() / union


@dataclass
class FingerprintIndex:
    width: int = DEFAULT_WIDTH
    entries: list[tuple[int, BitFingerprint]] = None

    def __post_init__(self):
        if self.entries is None:
            self.entries = []

    def add(self, entry_id: int, reaction_or_fp: Union[str, BitFingerprint]) -> None:
        fp = reaction_or_fp if isinstance(reaction_or_fp, BitFingerprint) else fingerprint(reaction_or_fp, self.width)
        if fp.width != self.width:
            raise WidthMismatchError(f"{fp.width} vs index width {self.width}")
        self.entries.append((entry_id, fp))

    def save(self, path: str) -> None:
        nbytes = (self.width + 7) // 8
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<IIQ", VERSION, self.width, len(self.entries)))
            for entry_id, fp in self.entries:
                fh.write(struct.pack("<QI", entry_id, fp.n_set))
                fh.write(fp.bits.to_bytes(nbytes, "big"))

    @classmethod
    def load(cls, path: str) -> "FingerprintIndex":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != MAGIC:
                raise ValueError(f"not a fingerprint index: bad magic {magic!r}")
            version, width, count = struct.unpack("<IIQ", fh.read(16))
            if version != VERSION:
                raise ValueError(f"unsupported index version {version}")
            nbytes = (width + 7) // 8
            index = cls(width=width)
            for _ in range(count):
                entry_id, n_set = struct.unpack("<QI", fh.read(12))
                bits = int.from_bytes(fh.read(nbytes), "big")
                fp = BitFingerprint(bits=bits, width=width)
                if fp.n_set != n_set:
                    raise ValueError(f"corrupt entry {entry_id}: popcount mismatch")
                index.entries.append((entry_id, fp))
        return index


def build_index(reactions: Sequence[str], width: int = DEFAULT_WIDTH, ids: Optional[Sequence[int]] = None) -> FingerprintIndex:
    index = FingerprintIndex(width=width)
    for i, reaction in enumerate(reactions):
        index.add(ids[i] if ids is not None else i, reaction)
    return index


def nearest(query: Union[str, BitFingerprint], index: FingerprintIndex, k: int = 1) -> list[tuple[int, float]]:
    """Top-k entries by Tanimoto similarity, descending; ties break toward the
    smaller id. k=1 is the retrieval baseline, larger k feeds few-shot prompts."""
    if not index.entries:
        raise EmptyIndexError("index has no entries")
    if k < 1:
        raise ValueError("k must be at least 1")
    fp = query if isinstance(query, BitFingerprint) else fingerprint(query, index.width)
    scored = [(entry_id, tanimoto(fp, entry_fp)) for entry_id, entry_fp in index.entries]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]
