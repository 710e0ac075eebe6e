"""Exact search for pairwise disjoint representatives, one per orbit.

The searcher assigns each variable (orbit, or translate-restricted set) one
candidate block, tracking occupied points in a single bitset; feasibility of
a candidate is one AND.  Variables are picked most-constrained-first with
ties by index, so runs are deterministic and INFEASIBLE node counts are
reproducible.  FEASIBLE witnesses are re-checked by a verifier that shares
no state with the searcher.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from sympy import isprime

from .blocks import Block, block_mask, translate
from .designs import CyclicDesign, InconsistencyError
from .families import DifferenceFamily, is_symmetric_ddf

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
TIMEOUT = "timeout"

PLAIN = "plain"
SYMMETRIC = "symmetric"


@dataclass
class SearchStats:
    nodes: int = 0
    max_depth: int = 0
    prunes: int = 0

    def to_dict(self) -> dict:
        return {"nodes": self.nodes, "max_depth": self.max_depth, "prunes": self.prunes}


@dataclass(frozen=True)
class RepresentativeSystem:
    """One chosen translate per orbit; invariant: the blocks are disjoint."""

    design: CyclicDesign
    chosen: tuple[tuple[int, int], ...]  # (orbit index, translate)

    def blocks(self) -> list[Block]:
        v = self.design.v
        return [
            translate(self.design.orbits[i].base, t, v) for i, t in self.chosen
        ]

    def to_dict(self) -> dict:
        return {"chosen": [[i, t] for i, t in self.chosen]}


@dataclass
class SearchOutcome:
    status: str
    chosen: tuple[tuple[int, int], ...] | None
    stats: SearchStats
    order: tuple[int, ...]
    condition: "ConditionReport | None" = None

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    def to_dict(self) -> dict:
        out = {
            "status": self.status,
            "stats": self.stats.to_dict(),
            "order": list(self.order),
        }
        if self.chosen is not None:
            out["chosen"] = [[i, t] for i, t in self.chosen]
        if self.condition is not None:
            out["condition"] = self.condition.to_dict()
        return out


def _solve_disjoint(
    candidates: list[list[tuple[int, int]]],
    max_nodes: int | None,
) -> tuple[str, tuple[tuple[int, int], ...] | None, SearchStats, tuple[int, ...]]:
    """Pick one (label, mask) per variable with all masks pairwise disjoint.

    Backtracking, most-constrained-first (fewest currently conflict-free
    candidates, ties by variable index).  Returns INFEASIBLE only after the
    whole tree is exhausted; a node budget overrun returns TIMEOUT instead.
    """
    n = len(candidates)
    stats = SearchStats()
    order = tuple(
        i for i in sorted(range(n), key=lambda i: (len(candidates[i]), i))
    )
    assigned: list[tuple[int, int] | None] = [None] * n
    used = 0
    timed_out = False

    def pick_var() -> tuple[int, list[tuple[int, int]]] | None:
        best_i = -1
        best_free: list[tuple[int, int]] = []
        best_count = -1
        for i in range(n):
            if assigned[i] is not None:
                continue
            free = [(t, m) for t, m in candidates[i] if not (m & used)]
            if best_count == -1 or len(free) < best_count:
                best_i, best_free, best_count = i, free, len(free)
                if best_count == 0:
                    break
        if best_i == -1:
            return None
        return best_i, best_free

    def search(depth: int) -> bool:
        nonlocal used, timed_out
        stats.max_depth = max(stats.max_depth, depth)
        nxt = pick_var()
        if nxt is None:
            return True
        i, free = nxt
        if not free:
            stats.prunes += 1
            return False
        for t, m in free:
            stats.nodes += 1
            if max_nodes is not None and stats.nodes > max_nodes:
                timed_out = True
                return False
            assigned[i] = (t, m)
            used |= m
            if search(depth + 1):
                return True
            used &= ~m
            assigned[i] = None
            if timed_out:
                return False
        return False

    if search(0):
        chosen = tuple((i, assigned[i][0]) for i in range(n))  # type: ignore[index]
        return FEASIBLE, chosen, stats, order
    if timed_out:
        return TIMEOUT, None, stats, order
    return INFEASIBLE, None, stats, order


def _symmetric_candidate(block: Block, v: int) -> int | None:
    """Composite mask for symmetric mode, or None if the block is inadmissible.

    Bits [0, v) are points; bit v+c-1 marks the complement class c = min(x, v-x),
    so one AND rejects both point overlaps and x / v-x collisions across blocks.
    """
    if 0 in block:
        return None
    mask = block_mask(block)
    for x in block:
        cls = min(x, v - x)
        bit = 1 << (v + cls - 1)
        if mask & bit:
            return None  # x and v-x inside one block
        mask |= bit
    return mask


def verify_representatives(
    design: CyclicDesign, chosen: Sequence[tuple[int, int]], mode: str = PLAIN
) -> bool:
    """Independent witness check: one in-range translate per orbit, disjoint blocks."""
    if sorted(i for i, _ in chosen) != list(range(len(design.orbits))):
        return False
    blocks = []
    taken: set[int] = set()
    for i, t in chosen:
        orb = design.orbits[i]
        if not 0 <= t < orb.length:
            return False
        block = translate(orb.base, t, design.v)
        if taken & set(block):
            return False
        taken |= set(block)
        blocks.append(block)
    if mode == SYMMETRIC:
        family = DifferenceFamily(design.v, design.k, design.lam, tuple(sorted(blocks)))
        return is_symmetric_ddf(family).ok
    return True


def find_disjoint_representatives(
    design: CyclicDesign,
    mode: str = PLAIN,
    max_nodes: int | None = None,
) -> SearchOutcome:
    """Search for one block per orbit with all chosen blocks pairwise disjoint.

    Symmetric mode (k=3, lambda=1, v = 1 mod 6 only) additionally forbids
    blocks through 0 and any appearance of both x and v-x.  Repeated orbits
    are independent variables.  INFEASIBLE is returned only after provably
    exhausting the search space; hitting max_nodes yields TIMEOUT.
    """
    v = design.v
    if mode not in (PLAIN, SYMMETRIC):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == SYMMETRIC and (design.k != 3 or design.lam != 1 or v % 6 != 1):
        raise ValueError(
            "symmetric mode requires k=3, lambda=1, v = 1 (mod 6); "
            f"got v={v}, k={design.k}, lambda={design.lam}"
        )
    candidates: list[list[tuple[int, int]]] = []
    for orb in design.orbits:
        cands = []
        for t in range(orb.length):
            block = translate(orb.base, t, v)
            if mode == SYMMETRIC:
                mask = _symmetric_candidate(block, v)
                if mask is None:
                    continue
            else:
                mask = block_mask(block)
            cands.append((t, mask))
        candidates.append(cands)
    status, chosen, stats, order = _solve_disjoint(candidates, max_nodes)
    if status == FEASIBLE:
        assert chosen is not None
        if not verify_representatives(design, chosen, mode):
            raise InconsistencyError("search produced a witness that fails verification")
    return SearchOutcome(status, chosen, stats, order)


def find_translate_representatives(
    blocks: Sequence[Sequence[int]],
    v: int,
    translate_sets: Sequence[Sequence[int]],
    max_nodes: int | None = None,
) -> SearchOutcome:
    """Choose t_i from each translate set so the sets blocks[i] + t_i are disjoint.

    Point sets may have different sizes (they need not come from one design).
    """
    if len(blocks) != len(translate_sets):
        raise ValueError("need one translate set per block")
    candidates = []
    for block, tset in zip(blocks, translate_sets):
        if len(tset) < 1:
            raise ValueError("every translate set must be nonempty")
        sorted_block = tuple(sorted(block))
        cands = [
            (t, block_mask(translate(sorted_block, t % v, v))) for t in tset
        ]
        candidates.append(cands)
    status, chosen, stats, order = _solve_disjoint(candidates, max_nodes)
    if status == FEASIBLE:
        assert chosen is not None
        if not verify_translate_system(blocks, v, chosen):
            raise InconsistencyError("translate witness fails verification")
    return SearchOutcome(status, chosen, stats, order)


def verify_translate_system(
    blocks: Sequence[Sequence[int]], v: int, chosen: Sequence[tuple[int, int]]
) -> bool:
    taken: set[int] = set()
    for i, t in chosen:
        shifted = {(x + t) % v for x in blocks[i]}
        if taken & shifted:
            return False
        taken |= shifted
    return sorted(i for i, _ in chosen) == list(range(len(blocks)))


@dataclass(frozen=True)
class TranslateInstance:
    """Inputs to the disjoint-translate sufficient condition over a prime field."""

    p: int
    d: int
    sets: tuple[tuple[int, ...], ...]
    translate_sets: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if len(self.sets) != len(self.translate_sets):
            raise ValueError("need one translate set per point set")
        for s in self.sets + self.translate_sets:
            if not s:
                raise ValueError("sets must be nonempty")
            for x in s:
                if not 0 <= x < self.p:
                    raise ValueError(f"element {x} out of range [0,{self.p})")

    @property
    def m(self) -> int:
        return len(self.sets)


@dataclass(frozen=True)
class ConditionReport:
    """Which parts of the sufficient condition hold; all three imply feasibility."""

    multinomial_nonzero: bool
    diameter_ok: bool
    translate_size_ok: bool

    @property
    def all_ok(self) -> bool:
        return self.multinomial_nonzero and self.diameter_ok and self.translate_size_ok

    def to_dict(self) -> dict:
        return {
            "multinomial_nonzero": self.multinomial_nonzero,
            "diameter_ok": self.diameter_ok,
            "translate_size_ok": self.translate_size_ok,
            "all": self.all_ok,
        }


def _factorial_valuation(n: int, p: int) -> int:
    """Exponent of prime p in n! (Legendre's formula)."""
    total = 0
    pk = p
    while pk <= n:
        total += n // pk
        pk *= p
    return total


def multinomial_is_zero_mod_p(m: int, d: int, p: int) -> bool:
    """Whether (md)!/(d!)^m = 0 (mod p), by carry counting, no factorials."""
    return _factorial_valuation(m * d, p) - m * _factorial_valuation(d, p) > 0


def check_disjoint_translate_condition(inst: TranslateInstance) -> ConditionReport:
    """Evaluate the three-part sufficient condition for disjoint translates.

    When all three hold ((md)!/(d!)^m nonzero mod p, |X_i - X_j| <= 2d for
    all pairs, and |T_i| >= (m-1)d + 1), a system of translates making the
    sets pairwise disjoint is guaranteed to exist.
    """
    if not isprime(inst.p):
        raise ValueError(f"p={inst.p} is not prime")
    p, d, m = inst.p, inst.d, inst.m
    multinomial_nonzero = not multinomial_is_zero_mod_p(m, d, p)
    diameter_ok = True
    for i in range(m):
        for j in range(i + 1, m):
            diffs = {(x - y) % p for x in inst.sets[i] for y in inst.sets[j]}
            if len(diffs) > 2 * d:
                diameter_ok = False
                break
        if not diameter_ok:
            break
    translate_size_ok = all(len(t) >= (m - 1) * d + 1 for t in inst.translate_sets)
    return ConditionReport(multinomial_nonzero, diameter_ok, translate_size_ok)


def prime_case_driver(design: CyclicDesign, max_nodes: int | None = None) -> SearchOutcome:
    """Disjoint representatives for a (p,k,1) design over prime p.

    Builds the translate-condition instance with d = ceil(k^2/2) and every
    translate set equal to Z_p, checks it, and runs the translate search.
    Whenever the condition holds the search is guaranteed feasible; an
    INFEASIBLE there is an internal inconsistency and raises.  If the
    condition fails (tiny v only), falls back to the plain search.
    """
    v, k = design.v, design.k
    if not isprime(v):
        raise ValueError(f"v={v} is not prime")
    if design.lam != 1:
        raise ValueError(f"prime driver requires lambda=1, got {design.lam}")
    d = (k * k + 1) // 2
    bases = tuple(orb.base for orb in design.orbits)
    full_range = tuple(range(v))
    inst = TranslateInstance(v, d, bases, tuple(full_range for _ in bases))
    report = check_disjoint_translate_condition(inst)
    if report.all_ok:
        outcome = find_translate_representatives(
            bases, v, inst.translate_sets, max_nodes
        )
        if outcome.status == INFEASIBLE:
            raise InconsistencyError(
                "translate condition held but exhaustive search found no system"
            )
        outcome.condition = report
        return outcome
    outcome = find_disjoint_representatives(design, PLAIN, max_nodes)
    outcome.condition = report
    return outcome
