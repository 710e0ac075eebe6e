"""Cyclic designs: orbit lists, pair-coverage validation, short-orbit structure."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .blocks import (
    Block,
    canonical_base_block,
    check_block,
    difference_multiset,
    divisors,
    orbit_length,
    translate,
)


class InconsistencyError(RuntimeError):
    """An internal invariant that holds for every valid design was violated.

    Signals that an input presented as a valid cyclic design is not one, or
    that a certified guarantee failed to hold (either is a hard error).
    """


@dataclass(frozen=True)
class Orbit:
    """A translation orbit of blocks, stored as canonical base block + length."""

    base: Block
    length: int

    def is_full(self, v: int) -> bool:
        return self.length == v


@dataclass(frozen=True)
class CyclicDesign:
    """A cyclic (v, k, lambda) design given by an ordered list of orbits.

    Repeated orbits are legal and kept distinct by list position (superimposed
    designs are lambda copies of one orbit list).  Construction checks cheap
    structural facts only; pair coverage is the job of validate_design.
    """

    v: int
    k: int
    lam: int
    orbits: tuple[Orbit, ...]

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError(f"block size k must be >= 2, got {self.k}")
        if self.v < self.k:
            raise ValueError(f"need v >= k, got v={self.v}, k={self.k}")
        if self.lam < 1:
            raise ValueError(f"index lambda must be >= 1, got {self.lam}")
        for orb in self.orbits:
            check_block(orb.base, self.v)
            if len(orb.base) != self.k:
                raise ValueError(
                    f"orbit base {orb.base} has size {len(orb.base)}, expected {self.k}"
                )
            if not (0 < orb.length <= self.v and self.v % orb.length == 0):
                raise ValueError(f"orbit length {orb.length} does not divide v={self.v}")

    @classmethod
    def from_base_blocks(
        cls, v: int, k: int, lam: int, bases: Iterable[Sequence[int]]
    ) -> "CyclicDesign":
        """Build a design from base blocks, canonicalizing and computing lengths."""
        orbits = []
        for raw in bases:
            block = tuple(sorted(raw))
            check_block(block, v)
            base = canonical_base_block(block, v)
            orbits.append(Orbit(base, orbit_length(base, v)))
        return cls(v, k, lam, tuple(orbits))

    def num_blocks(self) -> int:
        return sum(orb.length for orb in self.orbits)

    def canonical_key(self) -> tuple[Block, ...]:
        """Sorted multiset of canonical orbit representatives; equality key."""
        return tuple(sorted(canonical_base_block(o.base, self.v) for o in self.orbits))


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    witness_pair: tuple[int, int] | None = None
    observed: int | None = None

    def to_dict(self) -> dict:
        out: dict = {"ok": self.ok}
        if not self.ok:
            out["witness_pair"] = list(self.witness_pair)
            out["observed"] = self.observed
        return out


def develop(design: CyclicDesign) -> list[Block]:
    """All blocks of the design: t-translates of each base for t in [0, length)."""
    blocks: list[Block] = []
    for orb in design.orbits:
        for t in range(orb.length):
            blocks.append(translate(orb.base, t, design.v))
    return blocks


def check_structure(design: CyclicDesign) -> None:
    """Raise if any orbit length field disagrees with its base block."""
    for idx, orb in enumerate(design.orbits):
        actual = orbit_length(orb.base, design.v)
        if actual != orb.length:
            raise ValueError(
                f"orbit {idx}: stored length {orb.length} but base {orb.base} "
                f"has orbit length {actual}"
            )


def validate_design(design: CyclicDesign) -> ValidationResult:
    """PASS iff every unordered pair of points lies in exactly lambda blocks.

    Uses the difference-counting shortcut when every orbit is full (uniform
    difference multiset is equivalent to pair coverage there) and explicit
    pair counting otherwise.
    """
    check_structure(design)
    v, lam = design.v, design.lam
    if all(orb.length == v for orb in design.orbits):
        counts = difference_multiset([orb.base for orb in design.orbits], v)
        for d in range(1, v):
            if counts[d] != lam:
                # The pair {0, d} is covered once per occurrence of d.
                return ValidationResult(False, (0, d), counts[d])
        return ValidationResult(True)

    cover: dict[tuple[int, int], int] = {}
    for block in develop(design):
        for i in range(len(block)):
            for j in range(i + 1, len(block)):
                pair = (block[i], block[j])
                cover[pair] = cover.get(pair, 0) + 1
    for x in range(v):
        for y in range(x + 1, v):
            got = cover.get((x, y), 0)
            if got != lam:
                return ValidationResult(False, (x, y), got)
    return ValidationResult(True)


@dataclass(frozen=True)
class ShortOrbitInfo:
    orbit_index: int
    length: int
    stabilizer: Block
    cosets: tuple[Block, ...]

    def to_dict(self) -> dict:
        return {
            "orbit_index": self.orbit_index,
            "length": self.length,
            "stabilizer": list(self.stabilizer),
            "cosets": [list(c) for c in self.cosets],
        }


@dataclass(frozen=True)
class ShortOrbitReport:
    h: int
    m: int
    divisor_count: int
    short_orbits: tuple[ShortOrbitInfo, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "m": self.m,
            "divisor_count": self.divisor_count,
            "short_orbits": [s.to_dict() for s in self.short_orbits],
        }


def _stabilizer_cosets(base: Block, length: int, v: int) -> tuple[Block, tuple[Block, ...]]:
    """Decompose a short base block into cosets of its stabilizer subgroup."""
    step = length
    stab = tuple(range(0, v, step))
    by_residue: dict[int, list[int]] = {}
    for x in base:
        by_residue.setdefault(x % step, []).append(x)
    cosets = []
    for rep in sorted(by_residue):
        members = tuple(sorted(by_residue[rep]))
        expected = tuple(sorted((rep + s) % v for s in stab))
        if members != expected:
            raise InconsistencyError(
                f"base block {base} is not a union of cosets of {stab}"
            )
        cosets.append(members)
    return stab, tuple(cosets)


def short_orbit_analysis(design: CyclicDesign) -> ShortOrbitReport:
    """Count short/full orbits and certify the counting bounds they satisfy.

    For a valid cyclic (v,k,lambda) design with h short and m full orbits:
    h <= lambda * sigma0(k), h <= 2*lambda*sqrt(k), and
    lambda(v-1)/(k(k-1)) - 2*lambda*sqrt(k) <= m <= lambda(v-1)/(k(k-1)) <= m+h.
    All comparisons use exact integer arithmetic (squaring out the sqrt).
    A violation means the input is not actually a valid design.
    """
    result = validate_design(design)
    if not result.ok:
        raise ValueError(f"design fails validation: {result}")
    v, k, lam = design.v, design.k, design.lam
    shorts = []
    m = 0
    for idx, orb in enumerate(design.orbits):
        if orb.length == v:
            m += 1
        else:
            stab, cosets = _stabilizer_cosets(orb.base, orb.length, v)
            shorts.append(ShortOrbitInfo(idx, orb.length, stab, cosets))
    h = len(shorts)
    sigma0 = len(divisors(k))

    if h > lam * sigma0:
        raise InconsistencyError(f"h={h} exceeds lambda*sigma0(k)={lam * sigma0}")
    if h * h > 4 * lam * lam * k:  # h <= 2*lam*sqrt(k)
        raise InconsistencyError(f"h={h} exceeds 2*lambda*sqrt(k)")
    kk = k * (k - 1)
    # m <= lam(v-1)/(k(k-1)) <= m+h, then the sqrt lower bound on m.
    if m * kk > lam * (v - 1):
        raise InconsistencyError(f"m={m} exceeds lambda(v-1)/(k(k-1))")
    if lam * (v - 1) > (m + h) * kk:
        raise InconsistencyError(f"m+h={m + h} below lambda(v-1)/(k(k-1))")
    gap = lam * (v - 1) - m * kk
    if gap > 0 and gap * gap > 4 * lam * lam * k * kk * kk:
        raise InconsistencyError(f"m={m} below lambda(v-1)/(k(k-1)) - 2*lambda*sqrt(k)")

    # Block count identity: sum of orbit sizes = lam*v*(v-1)/(k(k-1)).
    total = design.num_blocks()
    if total * kk != lam * v * (v - 1):
        raise InconsistencyError(
            f"block count {total} != lambda*v*(v-1)/(k(k-1)) = {lam * v * (v - 1) / kk}"
        )
    return ShortOrbitReport(h, m, sigma0, tuple(shorts))


def rebuild_from_blocks(v: int, k: int, lam: int, blocks: Sequence[Block]) -> CyclicDesign:
    """Reassemble a design (orbit multiset) from a developed block multiset."""
    from collections import Counter as _Counter

    seen: _Counter = _Counter()
    for block in blocks:
        seen[canonical_base_block(block, v)] += 1
    orbits = []
    for base in sorted(seen):
        length = orbit_length(base, v)
        copies, extra = divmod(seen[base], length)
        if extra:
            raise ValueError(
                f"block multiset is not a union of orbits: {base} appears {seen[base]}x"
            )
        orbits.extend([Orbit(base, length)] * copies)
    return CyclicDesign(v, k, lam, tuple(orbits))
