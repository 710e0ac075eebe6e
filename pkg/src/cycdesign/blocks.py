"""Arithmetic over Z_v: blocks, translation orbits and difference multisets.

A block is a sorted tuple of distinct residues in [0, v).  Everything in
this module is a pure function of its inputs; blocks are plain tuples and
safe to share between workers.
"""

from __future__ import annotations

from collections import Counter
from typing import Iterable, Sequence

Block = tuple[int, ...]


def make_block(elements: Iterable[int], v: int) -> Block:
    """Sort and validate a collection of residues into a block."""
    block = tuple(sorted(int(x) for x in elements))
    check_block(block, v)
    return block


def check_block(block: Sequence[int], v: int) -> None:
    """Raise ValueError unless ``block`` is a valid sorted block mod v."""
    if v < 1:
        raise ValueError(f"modulus must be positive, got {v}")
    if len(block) == 0:
        raise ValueError("block must be nonempty")
    for x in block:
        if not 0 <= x < v:
            raise ValueError(f"block element {x} out of range [0,{v})")
    for a, b in zip(block, block[1:]):
        if a >= b:
            raise ValueError(f"block {tuple(block)} not strictly increasing")


def block_mask(block: Sequence[int]) -> int:
    """Bitset mirror of a block; bit x set iff x is in the block."""
    mask = 0
    for x in block:
        mask |= 1 << x
    return mask


def translate(block: Block, t: int, v: int) -> Block:
    """Return block + t (mod v), re-sorted."""
    if not 0 <= t < v:
        raise ValueError(f"translate amount {t} out of range [0,{v})")
    return tuple(sorted((x + t) % v for x in block))


def divisors(n: int) -> list[int]:
    """All positive divisors of n in increasing order."""
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def orbit_length(block: Block, v: int) -> int:
    """Cardinality of the Z_v-translation orbit of ``block``.

    Equals the least t > 0 with block + t = block; always a divisor of v,
    and at least v/k for a k-element block.
    """
    for d in divisors(v):
        if d == v:
            return v
        if translate(block, d, v) == block:
            return d
    return v


def canonical_base_block(block: Block, v: int) -> Block:
    """Lexicographically least translate of ``block``; the orbit's dedup key."""
    best = block
    for t in range(1, v):
        cand = translate(block, t, v)
        if cand < best:
            best = cand
    return best


def orbit_blocks(block: Block, v: int) -> list[Block]:
    """All distinct translates of ``block``, in translate order from t=0."""
    return [translate(block, t, v) for t in range(orbit_length(block, v))]


def translate_amount(base: Block, block: Block, v: int) -> int:
    """Least t >= 0 with base + t = block; raises if they share no orbit."""
    for candidate in sorted({(block[0] - b) % v for b in base}):
        if translate(base, candidate, v) == block:
            return candidate
    raise ValueError(f"{block} is not a translate of {base} mod {v}")


def difference_multiset(family: Iterable[Sequence[int]], v: int) -> Counter:
    """Counts of x - y (mod v) over ordered pairs x != y within each block.

    The result maps nonzero residues to multiplicities (missing = 0) and is
    symmetric under d <-> v - d.
    """
    counts: Counter = Counter()
    for block in family:
        check_block(block, v)
        for i, x in enumerate(block):
            for j, y in enumerate(block):
                if i != j:
                    counts[(x - y) % v] += 1
    return counts
