"""Difference family predicates and the family <-> cyclic design correspondence."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .blocks import Block, check_block, difference_multiset, make_block
from .designs import CyclicDesign, validate_design


@dataclass(frozen=True)
class DifferenceFamily:
    """Base blocks over Z_v with a target index lambda.

    A family is a (v,k,lambda) difference family when its internal
    differences cover every nonzero residue exactly lambda times; that is
    what is_cdf checks, not a construction invariant.
    """

    v: int
    k: int
    lam: int
    base_blocks: tuple[Block, ...]

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError(f"block size k must be >= 2, got {self.k}")
        if self.lam < 1:
            raise ValueError(f"index lambda must be >= 1, got {self.lam}")
        for block in self.base_blocks:
            check_block(block, self.v)
            if len(block) != self.k:
                raise ValueError(f"block {block} has size {len(block)}, expected {self.k}")

    @classmethod
    def from_blocks(
        cls, v: int, k: int, lam: int, blocks: Iterable[Sequence[int]]
    ) -> "DifferenceFamily":
        return cls(v, k, lam, tuple(make_block(b, v) for b in blocks))

    def expected_block_count(self) -> int:
        """lambda(v-1)/(k(k-1)); the size any (v,k,lambda) family must have."""
        num = self.lam * (self.v - 1)
        den = self.k * (self.k - 1)
        if num % den:
            raise ValueError(f"lambda(v-1)={num} not divisible by k(k-1)={den}")
        return num // den


@dataclass(frozen=True)
class CheckResult:
    """Outcome of a predicate, with a re-checkable witness on failure."""

    ok: bool
    reason: str | None = None
    witness: dict | None = None

    def to_dict(self) -> dict:
        out: dict = {"ok": self.ok}
        if self.reason is not None:
            out["reason"] = self.reason
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def is_cdf(family: DifferenceFamily) -> CheckResult:
    """PASS iff every nonzero residue occurs exactly lambda times in the differences.

    The failure witness is the smallest undercovered residue when one
    exists, else the smallest overcovered one.
    """
    counts = difference_multiset(family.base_blocks, family.v)
    over = None
    for d in range(1, family.v):
        if counts[d] < family.lam:
            return CheckResult(
                False,
                reason="difference multiplicity",
                witness={"residue": d, "observed": counts[d], "expected": family.lam},
            )
        if counts[d] > family.lam and over is None:
            over = d
    if over is not None:
        return CheckResult(
            False,
            reason="difference multiplicity",
            witness={"residue": over, "observed": counts[over], "expected": family.lam},
        )
    return CheckResult(True)


def is_ddf(family: DifferenceFamily) -> CheckResult:
    """PASS iff is_cdf passes and the base blocks are pairwise disjoint.

    Rejects lam >= k: such families cannot be disjoint difference families
    (aside from the degenerate one-block (k,k,k) case, which we exclude).
    """
    if family.lam >= family.k:
        raise ValueError(
            f"disjointness check requires lambda <= k-1, got lambda={family.lam}, k={family.k}"
        )
    cdf = is_cdf(family)
    if not cdf.ok:
        return cdf
    seen: dict[int, int] = {}
    for idx, block in enumerate(family.base_blocks):
        for x in block:
            if x in seen:
                return CheckResult(
                    False,
                    reason="blocks not disjoint",
                    witness={"point": x, "block_indices": [seen[x], idx]},
                )
            seen[x] = idx
    return CheckResult(True)


def is_symmetric_ddf(family: DifferenceFamily) -> CheckResult:
    """Symmetric variant for (v,3,1) families with v = 1 (mod 6).

    PASS iff is_ddf passes, no base block contains 0, and no nonzero x has
    both x and v-x appearing among base-block elements.
    """
    if family.k != 3 or family.lam != 1 or family.v % 6 != 1:
        raise ValueError(
            "symmetric check is defined only for k=3, lambda=1, v = 1 (mod 6); "
            f"got v={family.v}, k={family.k}, lambda={family.lam}"
        )
    for block in family.base_blocks:
        if 0 in block:
            return CheckResult(
                False, reason="contains zero", witness={"block": list(block)}
            )
    present = {x for block in family.base_blocks for x in block}
    for x in range(1, (family.v + 1) // 2):
        if x in present and family.v - x in present:
            return CheckResult(
                False,
                reason="x and v-x both present",
                witness={"x": x, "complement": family.v - x},
            )
    return is_ddf(family)


def cdf_design_roundtrip(family: DifferenceFamily) -> CyclicDesign:
    """Develop the family into a design; valid iff the family is a CDF.

    Only defined for gcd(v,k)=1, where every orbit is automatically full and
    the equivalence holds in both directions.
    """
    if math.gcd(family.v, family.k) != 1:
        raise ValueError(
            f"gcd(v,k)={math.gcd(family.v, family.k)} != 1; develop via the "
            "general design path instead"
        )
    design = CyclicDesign.from_base_blocks(
        family.v, family.k, family.lam, family.base_blocks
    )
    return design


__all__ = [
    "DifferenceFamily",
    "CheckResult",
    "is_cdf",
    "is_ddf",
    "is_symmetric_ddf",
    "cdf_design_roundtrip",
    "validate_design",
]
