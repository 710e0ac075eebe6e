"""Producers of designs and difference families: exhaustive enumeration at
small v, fast single-witness construction, and superimposed designs.

Everything emitted here is re-verified by the independent predicates
(is_cdf / validate_design) before it leaves this module.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterator

from sympy import isprime, primitive_root

from .blocks import Block, canonical_base_block, make_block, orbit_length
from .designs import CyclicDesign, Orbit, validate_design
from .families import DifferenceFamily, is_cdf


@dataclass
class EnumerationBudget:
    """Caps for backtracking enumeration; None means unlimited.

    order_seed shuffles the candidate-value order (the set of solutions is
    unchanged); restarting a budgeted search under different seeds is how
    first solutions are found at larger v.
    """

    max_solutions: int | None = None
    max_nodes: int | None = None
    canonical_only: bool = True
    order_seed: int | None = None

    def __post_init__(self) -> None:
        if self.max_solutions is not None and self.max_solutions <= 0:
            raise ValueError("max_solutions must be positive")
        if self.max_nodes is not None and self.max_nodes <= 0:
            raise ValueError("max_nodes must be positive")


@dataclass
class EnumerationStats:
    """Filled in while an enumeration stream is consumed."""

    nodes: int = 0
    emitted: int = 0
    exhaustive: bool = False


def _search_families(
    v: int,
    k: int,
    targets: list[int],
    budget: EnumerationBudget,
    stats: EnumerationStats,
) -> Iterator[list[Block]]:
    """Backtracking over base blocks against per-residue difference targets.

    Branches on the smallest residue d whose difference count is still below
    targets[d]; any family covering d has a representative block containing
    both 0 and d, so trying every such block is exhaustive.  Block elements
    beyond {0, d} are added one at a time in increasing order, pruning the
    moment any residue's count would exceed its target.
    """
    need = list(targets)  # need[d] = remaining multiplicity for residue d
    chosen: list[Block] = []
    done = False  # set when a budget cap fires
    rng = random.Random(budget.order_seed) if budget.order_seed is not None else None

    def take(elems: list[int], y: int) -> bool:
        """Add y's differences against elems to the count, or refuse."""
        added = []
        ok = True
        for x in elems:
            d = (y - x) % v
            e = (x - y) % v
            if need[d] == 0 or need[e] == 0 or (d == e and need[d] < 2):
                ok = False
                break
            need[d] -= 1
            need[e] -= 1
            added.append((d, e))
        if not ok:
            for d, e in added:
                need[d] += 1
                need[e] += 1
            return False
        return True

    def drop(elems: list[int], y: int) -> None:
        for x in elems:
            need[(y - x) % v] += 1
            need[(x - y) % v] += 1

    def extend(
        elems: list[int], cands: list[int], start: int, left: int, lo: int
    ) -> Iterator[list[Block]]:
        nonlocal done
        if left == 0:
            chosen.append(tuple(sorted(elems)))
            yield from recurse(lo)
            chosen.pop()
            return
        for idx in range(start, len(cands)):
            if done:
                return
            y = cands[idx]
            stats.nodes += 1
            if budget.max_nodes is not None and stats.nodes > budget.max_nodes:
                done = True
                return
            if take(elems, y):
                elems.append(y)
                yield from extend(elems, cands, idx + 1, left - 1, lo)
                elems.pop()
                drop(elems, y)

    def recurse(lo: int) -> Iterator[list[Block]]:
        nonlocal done
        while lo < v and need[lo] == 0:
            lo += 1
        if lo == v:
            yield list(chosen)
            return
        d_star = lo
        stats.nodes += 1
        if not take([0], d_star):
            return
        # Remaining elements may lie anywhere in [1, v) except d_star itself;
        # visiting them in a fixed (possibly shuffled) list order makes each
        # block set appear exactly once.
        cands = [y for y in range(1, v) if y != d_star]
        if rng is not None:
            rng.shuffle(cands)
        yield from extend([0, d_star], cands, 0, k - 2, lo)
        drop([0], d_star)

    yield from recurse(1)
    if not done:
        stats.exhaustive = True


def enumerate_cdfs(
    v: int,
    k: int,
    lam: int,
    budget: EnumerationBudget | None = None,
    stats: EnumerationStats | None = None,
) -> Iterator[DifferenceFamily]:
    """Stream every (v,k,lambda) difference family within budget.

    With canonical_only, families are emitted once per translation class
    (compared as sorted multisets of canonical orbit representatives) with
    canonicalized blocks; otherwise raw solutions stream through undeduped.
    Exhaustive when no budget cap fires; check stats.exhaustive afterwards.
    """
    if lam * (v - 1) % (k * (k - 1)) != 0:
        raise ValueError(
            f"lambda(v-1) = {lam * (v - 1)} not divisible by k(k-1) = {k * (k - 1)}"
        )
    budget = budget or EnumerationBudget()
    stats = stats or EnumerationStats()
    targets = [0] + [lam] * (v - 1)
    seen: set[tuple[Block, ...]] = set()
    for blocks in _search_families(v, k, targets, budget, stats):
        if budget.canonical_only:
            key = tuple(sorted(canonical_base_block(b, v) for b in blocks))
            if key in seen:
                continue
            seen.add(key)
            family = DifferenceFamily(v, k, lam, key)
        else:
            family = DifferenceFamily(v, k, lam, tuple(blocks))
        result = is_cdf(family)
        if not result.ok:
            raise AssertionError(f"enumerator produced a non-CDF: {result}")
        stats.emitted += 1
        yield family
        if budget.max_solutions is not None and stats.emitted >= budget.max_solutions:
            stats.exhaustive = False
            return


def _short_orbit_base(v: int) -> Block:
    return (0, v // 3, 2 * v // 3)


def enumerate_cyclic_sts(
    v: int,
    budget: EnumerationBudget | None = None,
    stats: EnumerationStats | None = None,
) -> Iterator[CyclicDesign]:
    """Stream all cyclic Steiner triple systems of order v within budget.

    For v = 1 (mod 6) these are developments of (v,3,1) difference families.
    For v = 3 (mod 6) each design has the short orbit {0, v/3, 2v/3} plus
    full orbits whose differences cover everything except 0 and +-v/3 exactly
    once.  Every other v (and v = 9, where the search space is empty) yields
    an empty stream.
    """
    if v < 3:
        raise ValueError(f"need v >= 3, got {v}")
    budget = budget or EnumerationBudget()
    stats = stats or EnumerationStats()
    if v % 6 == 1:
        for family in enumerate_cdfs(v, 3, 1, budget, stats):
            design = CyclicDesign.from_base_blocks(v, 3, 1, family.base_blocks)
            _require_valid(design)
            yield design
        return
    if v % 6 != 3:
        stats.exhaustive = True
        return

    short = _short_orbit_base(v)
    targets = [0] + [1] * (v - 1)
    targets[v // 3] = 0
    targets[2 * v // 3] = 0
    seen: set[tuple[Block, ...]] = set()
    for blocks in _search_families(v, 3, targets, budget, stats):
        key = tuple(sorted(canonical_base_block(b, v) for b in blocks))
        if budget.canonical_only:
            if key in seen:
                continue
            seen.add(key)
        orbits = [Orbit(short, orbit_length(short, v))]
        orbits += [Orbit(b, orbit_length(b, v)) for b in key]
        design = CyclicDesign(v, 3, 1, tuple(orbits))
        _require_valid(design)
        stats.emitted += 1
        yield design
        if budget.max_solutions is not None and stats.emitted >= budget.max_solutions:
            stats.exhaustive = False
            return


def _require_valid(design: CyclicDesign) -> None:
    result = validate_design(design)
    if not result.ok:
        raise AssertionError(f"generator produced an invalid design: {result.to_dict()}")


class ConstructionError(RuntimeError):
    """All construction attempts within the retry budget failed verification."""


def _sixth_root_family(v: int) -> DifferenceFamily:
    """Triple family over prime v = 1 (mod 6) from a primitive sixth root.

    With w a primitive sixth root of unity mod v, the blocks g^i * {1, w^2,
    w^4} for i below (v-1)/6 tile the nonzero residues by their differences.
    Output is verified by the caller before use.
    """
    g = primitive_root(v)
    m = (v - 1) // 6
    omega = pow(g, 2 * m, v)  # primitive cube root of unity
    blocks = []
    gi = 1
    for _ in range(m):
        blocks.append(make_block({gi, gi * omega % v, gi * omega * omega % v}, v))
        gi = gi * g % v
    return DifferenceFamily(v, 3, 1, tuple(blocks))


def _greedy_triple_partition(v: int, rng: random.Random) -> list[Block] | None:
    """One randomized greedy attempt at partitioning difference classes.

    Classes 1..(v-1)/2 must split into triples {x, y, z} with z = x+y or
    x+y+z = v; each triple realizes the base block {0, x, x+y}.
    """
    half = (v - 1) // 2
    remaining = set(range(1, half + 1))
    blocks: list[Block] = []
    while remaining:
        x = min(remaining)
        remaining.discard(x)
        candidates = []
        for y in remaining:
            z = x + y if x + y <= half else v - x - y
            if z != y and z != x and z in remaining:
                candidates.append((y, z))
        if not candidates:
            return None
        y, z = rng.choice(candidates)
        remaining.discard(y)
        remaining.discard(z)
        blocks.append(make_block({0, x, x + y}, v))
    return blocks


def construct_sts_cdf(v: int, seed: int = 0, max_restarts: int = 5000) -> DifferenceFamily:
    """One (v,3,1) difference family for v = 1 (mod 6), verified before return.

    Prime v uses the sixth-root construction; composite v falls back to a
    seeded randomized greedy over difference classes, then to exhaustive
    search when v < 100.  Deterministic for a fixed seed.
    """
    if v % 6 != 1 or v < 7:
        raise ValueError(f"need v = 1 (mod 6) and v >= 7, got {v}")
    if isprime(v):
        family = _sixth_root_family(v)
        if is_cdf(family).ok:
            return family
    rng = random.Random(seed)
    for _ in range(max_restarts):
        blocks = _greedy_triple_partition(v, rng)
        if blocks is None:
            continue
        family = DifferenceFamily(v, 3, 1, tuple(sorted(blocks)))
        if is_cdf(family).ok:
            return family
    if v < 100:
        for family in enumerate_cdfs(v, 3, 1, EnumerationBudget(max_solutions=1)):
            return family
    raise ConstructionError(f"no (v,3,1) difference family found for v={v} within budget")


def superimpose(family: DifferenceFamily, copies: int) -> CyclicDesign:
    """Design developing `copies` overlaid copies of a difference family.

    The orbit list repeats each orbit of the developed family exactly
    `copies` times (short orbits additionally repeat v/length times, keeping
    the developed block multiset faithful); the index multiplies accordingly.
    """
    if copies < 1:
        raise ValueError(f"copies must be >= 1, got {copies}")
    result = is_cdf(family)
    if not result.ok:
        raise ValueError(f"superimpose requires a verified CDF: {result.to_dict()}")
    v = family.v
    orbits: list[Orbit] = []
    for block in family.base_blocks:
        base = canonical_base_block(block, v)
        length = orbit_length(base, v)
        orbits.extend([Orbit(base, length)] * (v // length))
    design = CyclicDesign(v, family.k, family.lam * copies, tuple(orbits * copies))
    _require_valid(design)
    return design
