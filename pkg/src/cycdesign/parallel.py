"""Partial parallel classes: slot hypergraph, nibble colouring, greedy repair.

The constructive pipeline turns a cyclic design with m full orbits into a
partial parallel class holding s = floor((k-1)/lambda) blocks from almost
every orbit:

  1. build a (k+1)-uniform hypergraph whose edges pair each block of a full
     orbit with one of that orbit's slot vertices;
  2. properly edge-colour it with a near-degree number of colours
     (randomized nibble rounds plus greedy completion);
  3. project the largest colour class onto the design, keeping orbits with
     at least s matched slots;
  4. filter out orbits rich in conflicted blocks, then greedily repair the
     remaining deficiencies with a certified bound on how many orbits end
     one block short.

Stage 4's output bound tau_{s-1}(P'') <= (k+1) d(P') + tau_{s-1}(P') is
asserted on every run; d(P') drops by exactly one per repair step.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .blocks import Block, translate
from .designs import CyclicDesign, InconsistencyError


class RepairPreconditionError(ValueError):
    """A deficient orbit lacks enough good blocks for the certified repair."""

    def __init__(self, orbit_index: int, good: int, threshold: int):
        self.orbit_index = orbit_index
        self.good = good
        self.threshold = threshold
        super().__init__(
            f"orbit {orbit_index} has {good} good blocks; repair needs more than {threshold}"
        )


# ---------------------------------------------------------------------------
# Partial parallel classes


class PartialParallelClass:
    """A set of pairwise disjoint blocks of a design, tagged by orbit.

    Maintains per-orbit counts, the histogram tau_a, and the potential
    d(P) = sum_{a <= s-2} (s-1-a) tau_a incrementally; point-ownership
    arrays give O(k) disjointness tests and block classification.
    """

    def __init__(self, design: CyclicDesign, debug: bool = False):
        self.design = design
        self.debug = debug
        self.s = (design.k - 1) // design.lam
        v = design.v
        t = len(design.orbits)
        self.counts = [0] * t
        self.blocks: list[dict[int, Block]] = [dict() for _ in range(t)]  # id -> block
        self.owner_orbit = np.full(v, -1, dtype=np.int64)
        self.owner_bid = np.full(v, -1, dtype=np.int64)
        self._hist: dict[int, int] = {0: t}
        self._d = self._contrib(0) * t
        self._next_bid = 0

    # potential contribution of an orbit sitting at count a
    def _contrib(self, a: int) -> int:
        if self.s >= 2 and a <= self.s - 2:
            return self.s - 1 - a
        return 0

    def _shift(self, orbit_index: int, new: int) -> None:
        old = self.counts[orbit_index]
        self._hist[old] -= 1
        self._hist[new] = self._hist.get(new, 0) + 1
        self._d += self._contrib(new) - self._contrib(old)
        self.counts[orbit_index] = new

    def add(self, orbit_index: int, block: Block) -> int:
        """Insert a disjoint block; returns its id.  Raises on any overlap."""
        for x in block:
            if self.owner_orbit[x] >= 0:
                raise ValueError(f"point {x} already covered")
        bid = self._next_bid
        self._next_bid += 1
        self.blocks[orbit_index][bid] = block
        for x in block:
            self.owner_orbit[x] = orbit_index
            self.owner_bid[x] = bid
        self._shift(orbit_index, self.counts[orbit_index] + 1)
        if self.debug:
            self.verify()
        return bid

    def remove(self, orbit_index: int, bid: int) -> Block:
        block = self.blocks[orbit_index].pop(bid)
        for x in block:
            self.owner_orbit[x] = -1
            self.owner_bid[x] = -1
        self._shift(orbit_index, self.counts[orbit_index] - 1)
        if self.debug:
            self.verify()
        return block

    def tau(self, a: int) -> int:
        return self._hist.get(a, 0)

    def potential(self) -> int:
        return self._d

    def potential_recomputed(self) -> int:
        """From-scratch potential; oracle for the incremental value."""
        return sum(self._contrib(len(b)) for b in self.blocks)

    def num_blocks(self) -> int:
        return sum(len(b) for b in self.blocks)

    def points_used(self) -> int:
        return int((self.owner_orbit >= 0).sum())

    def all_blocks(self) -> list[tuple[int, int, Block]]:
        out = []
        for i, per in enumerate(self.blocks):
            for bid, block in per.items():
                out.append((i, bid, block))
        return out

    def copy(self) -> "PartialParallelClass":
        clone = PartialParallelClass(self.design, debug=self.debug)
        for i, bid, block in self.all_blocks():
            clone.add(i, block)
        return clone

    def verify(self) -> None:
        """Re-check disjointness and every maintained counter from scratch."""
        seen: set[int] = set()
        for i, per in enumerate(self.blocks):
            if len(per) != self.counts[i]:
                raise InconsistencyError(f"count mismatch at orbit {i}")
            for block in per.values():
                for x in block:
                    if x in seen:
                        raise InconsistencyError(f"point {x} covered twice")
                    seen.add(x)
        if self._d != self.potential_recomputed():
            raise InconsistencyError("incremental potential diverged")
        if sum(self._hist.values()) != len(self.design.orbits):
            raise InconsistencyError("tau histogram does not sum to orbit count")

    def deficiency_mask(self) -> np.ndarray:
        """Boolean per orbit: count <= s-1 (orbits a good block must avoid)."""
        return np.array([c <= self.s - 1 for c in self.counts], dtype=bool)


def classify_block(
    pclass: PartialParallelClass, block: Block, orbit_index: int | None = None
) -> bool:
    """True iff the block is good for this class (definitional check).

    Good means: at most one chosen block hit per orbit, and no chosen block
    hit in any orbit currently holding at most s-1 blocks.  The block's own
    orbit does not enter the conditions.
    """
    del orbit_index
    s = pclass.s
    hit: dict[int, set[int]] = {}
    for x in block:
        orb = int(pclass.owner_orbit[x])
        if orb >= 0:
            hit.setdefault(orb, set()).add(int(pclass.owner_bid[x]))
    for orb, bids in hit.items():
        if len(bids) >= 2:
            return False
        if pclass.counts[orb] <= s - 1:
            return False
    return True


def good_translates(pclass: PartialParallelClass, orbit_index: int) -> np.ndarray:
    """Translates t of the orbit whose blocks are good, vectorized."""
    design = pclass.design
    orb = design.orbits[orbit_index]
    v = design.v
    ts = np.arange(orb.length, dtype=np.int64)
    cols_orb = []
    cols_bid = []
    for b in orb.base:
        idx = (ts + b) % v
        cols_orb.append(pclass.owner_orbit[idx])
        cols_bid.append(pclass.owner_bid[idx])
    orbs = np.stack(cols_orb, axis=1)
    bids = np.stack(cols_bid, axis=1)
    hit = orbs >= 0
    deficient = pclass.deficiency_mask()
    bad = np.zeros(len(ts), dtype=bool)
    # hits into orbits that are still one or more blocks below s
    bad |= (hit & deficient[np.where(hit, orbs, 0)]).any(axis=1)
    # two distinct chosen blocks hit within one orbit
    k = design.k
    for l1 in range(k):
        for l2 in range(l1 + 1, k):
            both = hit[:, l1] & hit[:, l2]
            bad |= both & (orbs[:, l1] == orbs[:, l2]) & (bids[:, l1] != bids[:, l2])
    return ts[~bad]


def bad_block_counts(pclass: PartialParallelClass) -> np.ndarray:
    """Number of bad blocks in each orbit of the design."""
    t = len(pclass.design.orbits)
    out = np.zeros(t, dtype=np.int64)
    for i in range(t):
        length = pclass.design.orbits[i].length
        out[i] = length - len(good_translates(pclass, i))
    return out


# ---------------------------------------------------------------------------
# Auxiliary hypergraph


class ExplicitHypergraph:
    """A hypergraph given by an explicit uniform edge list; used in tests."""

    def __init__(self, n_vertices: int, edges: Sequence[Sequence[int]]):
        self.n_vertices = n_vertices
        self.n_edges = len(edges)
        self._inc = np.asarray(edges, dtype=np.int64)

    def incidence_array(self) -> np.ndarray:
        return self._inc

    def max_degree(self) -> int:
        if self.n_edges == 0:
            return 0
        return int(np.bincount(self._inc.ravel(), minlength=self.n_vertices).max())


class AuxiliaryHypergraph:
    """(k+1)-uniform hypergraph pairing full-orbit blocks with slot vertices.

    Vertices 0..v-1 are the design points; vertices v..v+w-1 are slots,
    s_i of them per full orbit with s_i in {s, s+1} summing to
    w = floor((v-1)/k).  Edge (i, t, j) joins block base_i + t with slot j
    of orbit i, so there are v*w edges, every point has degree k*w, and
    every slot has degree v.
    """

    def __init__(self, design: CyclicDesign):
        v, k, lam = design.v, design.k, design.lam
        s = (k - 1) // lam
        full = [i for i, orb in enumerate(design.orbits) if orb.length == v]
        m = len(full)
        w = (v - 1) // k
        if m < 1:
            raise ValueError("need at least one full orbit")
        if s * m > w or (s + 1) * m < w:
            raise ValueError(
                f"slot assignment infeasible: s*m={s * m}, w={w}, (s+1)*m={(s + 1) * m}"
            )
        extra = w - s * m  # this many orbits get s+1 slots, lowest indices first
        self.design = design
        self.uniformity = k + 1
        self.full_orbit_indices = full
        self.slot_counts = [s + 1 if j < extra else s for j in range(m)]
        self.s = s
        self.w = w
        self.n_vertices = v + w
        self.n_edges = v * w
        self.degree_point = k * w
        self.degree_slot = v
        self.codegree_point_pairs_bound = k + lam - 1
        # edge ids: orbit-major, then translate, then slot
        self._edge_base = np.zeros(m + 1, dtype=np.int64)
        for j in range(m):
            self._edge_base[j + 1] = self._edge_base[j] + v * self.slot_counts[j]
        self._slot_base = np.zeros(m + 1, dtype=np.int64)
        for j in range(m):
            self._slot_base[j + 1] = self._slot_base[j] + self.slot_counts[j]
        self._inc: np.ndarray | None = None
        if self._edge_base[m] != self.n_edges:
            raise InconsistencyError("edge count mismatch")
        if not (v - k <= self.degree_point <= v - 1):
            raise InconsistencyError("point degree out of range")
        if v <= 50:
            self._brute_force_check()

    def max_degree(self) -> int:
        return max(self.degree_point, self.degree_slot)

    def decode_edge(self, eid: int) -> tuple[int, int, int]:
        """Edge id -> (full-orbit position, translate, slot index)."""
        j = int(np.searchsorted(self._edge_base, eid, side="right")) - 1
        t, slot = divmod(eid - int(self._edge_base[j]), self.slot_counts[j])
        return j, int(t), int(slot)

    def incidence_array(self) -> np.ndarray:
        if self._inc is not None:
            return self._inc
        v = self.design.v
        k = self.design.k
        inc = np.empty((self.n_edges, k + 1), dtype=np.int64)
        for j, orbit_index in enumerate(self.full_orbit_indices):
            base = self.design.orbits[orbit_index].base
            sj = self.slot_counts[j]
            ts = np.repeat(np.arange(v, dtype=np.int64), sj)
            rows = slice(int(self._edge_base[j]), int(self._edge_base[j + 1]))
            for col, b in enumerate(base):
                inc[rows, col] = (ts + b) % v
            slots = np.tile(np.arange(sj, dtype=np.int64), v) + int(self._slot_base[j])
            inc[rows, k] = v + slots
        self._inc = inc
        return inc

    def _brute_force_check(self) -> None:
        inc = self.incidence_array()
        deg = np.bincount(inc.ravel(), minlength=self.n_vertices)
        v = self.design.v
        if not np.all(deg[:v] == self.degree_point):
            raise InconsistencyError("point degrees disagree with k*w")
        if not np.all(deg[v:] == self.degree_slot):
            raise InconsistencyError("slot degrees disagree with v")
        # slots pairwise never share an edge: each edge has exactly one slot
        if np.any(inc[:, -1] < v) or np.any(inc[:, :-1] >= v):
            raise InconsistencyError("edge shape broken")


def build_auxiliary_hypergraph(design: CyclicDesign) -> AuxiliaryHypergraph:
    """Construct the slot hypergraph over the design's full orbits."""
    return AuxiliaryHypergraph(design)


# ---------------------------------------------------------------------------
# Edge colouring


def verify_proper_colouring(graph, colouring: np.ndarray, colours: int) -> bool:
    """Independent properness check: no vertex sees one colour twice."""
    inc = graph.incidence_array()
    if len(colouring) != graph.n_edges:
        return False
    if graph.n_edges == 0:
        return True
    if colouring.min() < 0 or colouring.max() >= colours:
        return False
    r = inc.shape[1]
    keys = inc.astype(np.int64) * colours + colouring[:, None]
    flat = np.sort(keys.ravel())
    return bool(np.all(flat[1:] != flat[:-1]))


def _random_available_colours(
    avail: np.ndarray, n_colours: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform random available colour per row of a packed availability matrix.

    avail has dtype uint64, one row per edge; returns -1 for rows with no
    available colour.  A few rejection-sampling sweeps catch the dense rows;
    sparse rows get an exact vectorized rank-select (pick the n-th set bit
    by binary search on popcounts).
    """
    n = avail.shape[0]
    out = np.full(n, -1, dtype=np.int64)
    pending = np.arange(n)
    for _ in range(8):
        if len(pending) == 0:
            return out
        cand = rng.integers(0, n_colours, size=len(pending))
        words = avail[pending, cand >> 6]
        hits = (words >> (cand & 63).astype(np.uint64)) & np.uint64(1) == 1
        out[pending[hits]] = cand[hits]
        pending = pending[~hits]
    if len(pending) == 0:
        return out
    rows = avail[pending]
    pc = np.bitwise_count(rows).astype(np.int64)
    totals = pc.sum(axis=1)
    nonzero = totals > 0
    pending = pending[nonzero]
    if len(pending) == 0:
        return out
    rows = rows[nonzero]
    pc = pc[nonzero]
    totals = totals[nonzero]
    ranks = (rng.random(len(pending)) * totals).astype(np.int64)
    cum = np.cumsum(pc, axis=1)
    word_idx = (cum > ranks[:, None]).argmax(axis=1)
    prev = cum - pc
    in_word = (ranks - prev[np.arange(len(pending)), word_idx]).astype(np.uint64)
    word = rows[np.arange(len(pending)), word_idx]
    pos = np.zeros(len(pending), dtype=np.uint64)
    for width in (32, 16, 8, 4, 2, 1):
        w = np.uint64(width)
        low = (word >> pos) & ((np.uint64(1) << w) - np.uint64(1))
        cnt = np.bitwise_count(low).astype(np.uint64)
        skip = in_word >= cnt
        in_word = np.where(skip, in_word - cnt, in_word)
        pos = np.where(skip, pos + w, pos)
    out[pending] = word_idx * 64 + pos.astype(np.int64)
    return out


def nibble_edge_colouring(
    graph,
    colours: int,
    seed: int = 0,
    batch_fraction: float = 0.1,
) -> np.ndarray | None:
    """Proper edge colouring with `colours` colours, or None on failure.

    Phases, all deterministic given the seed:

      * nibble rounds colour random batches of the uncoloured edges with
        uniformly random available colours, first over a base palette of
        max-degree many colours and then over the full palette; picks that
        collide within a round are resolved by uncolouring (first pick in
        batch order wins), and edges with no colour left are deferred;
      * a sequential greedy completion pass takes the leftovers, fewest
        available colours first, lowest colour; a stuck edge displaces the
        cheapest set of blocking edges, which re-enter the queue;
      * the largest colour class is then consolidated and augmented into a
        near-maximal matching by properness-preserving recolouring, since
        downstream class extraction keys on that single class.

    Failure (None) means some edge stayed uncolourable within the walk
    budget.  Output is 0-based and verified proper before return.
    """
    if colours < 1:
        raise ValueError("need at least one colour")
    n_edges = graph.n_edges
    colouring = np.full(n_edges, -1, dtype=np.int64)
    if n_edges == 0:
        return colouring
    inc = graph.incidence_array()
    r = inc.shape[1]
    rng = np.random.default_rng(seed)
    n_words = (colours + 63) // 64
    used = np.zeros((graph.n_vertices, n_words), dtype=np.uint64)
    # owner[x, c] = edge currently giving vertex x colour c, -1 if none
    owner = np.full((graph.n_vertices, colours), -1, dtype=np.int32)
    tail_mask = np.uint64((1 << (colours % 64)) - 1) if colours % 64 else None

    def availability(rows: np.ndarray) -> np.ndarray:
        acc = used[inc[rows, 0]].copy()
        for col in range(1, r):
            np.bitwise_or(acc, used[inc[rows, col]], out=acc)
        np.bitwise_not(acc, out=acc)
        if tail_mask is not None:
            acc[:, -1] &= tail_mask
        return acc

    def avail_row(eid: int) -> np.ndarray:
        row = used[inc[eid, 0]].copy()
        for col in range(1, r):
            row |= used[inc[eid, col]]
        np.bitwise_not(row, out=row)
        if tail_mask is not None:
            row[-1] &= tail_mask
        return row

    def lowest_bit(row: np.ndarray) -> int | None:
        nz = np.flatnonzero(row)
        if len(nz) == 0:
            return None
        word = int(row[nz[0]])
        return int(nz[0]) * 64 + (word & -word).bit_length() - 1

    def commit(rows: np.ndarray, cols: np.ndarray) -> None:
        colouring[rows] = cols
        verts = inc[rows].ravel()
        cc = np.repeat(cols, r)
        bits = np.uint64(1) << (cc.astype(np.uint64) & np.uint64(63))
        # ufunc.at: plain fancy |= would drop updates on repeated vertices
        np.bitwise_or.at(used, (verts, cc >> 6), bits)
        owner[verts, cc] = np.repeat(rows, r).astype(np.int32)

    def commit_one(eid: int, col: int) -> None:
        commit(np.array([eid]), np.array([col]))

    def uncolour(eid: int) -> int:
        col = int(colouring[eid])
        verts = inc[eid]
        used[verts, col >> 6] &= ~(np.uint64(1) << np.uint64(col & 63))
        owner[verts, col] = -1
        colouring[eid] = -1
        return col

    # --- nibble rounds -----------------------------------------------------
    # Rounds first draw from a base palette of max-degree many colours; the
    # rest stay in reserve so later phases still find room at saturated
    # vertices, and classes concentrate near matching size.  Base
    # availability only shrinks while rounds run, so an edge that sees no
    # base colour is deferred immediately.
    def palette_words(width: int) -> np.ndarray:
        words = np.zeros(n_words, dtype=np.uint64)
        words[: width // 64] = ~np.uint64(0)
        if width % 64:
            words[width // 64] = np.uint64((1 << (width % 64)) - 1)
        return words

    def run_rounds(pool: np.ndarray, width: int) -> np.ndarray:
        mask_words = palette_words(width)
        deferred: list[np.ndarray] = []
        stall = 0
        rounds = 0
        while len(pool) and stall < 16 and rounds < 4000:
            rounds += 1
            batch_size = max(1, int(len(pool) * batch_fraction))
            take = rng.permutation(len(pool))[:batch_size]
            batch = pool[take]
            avail = availability(batch)
            avail &= mask_words
            live = np.bitwise_count(avail).sum(axis=1) > 0
            dead = batch[~live]
            picks = _random_available_colours(avail[live], width, rng)
            cand = batch[live]
            cand_cols = picks
            # within-batch conflicts: first pick per (vertex, colour) wins
            vert_keys = (inc[cand] * np.int64(colours) + cand_cols[:, None]).ravel()
            ranks = np.repeat(np.arange(len(cand)), r)
            order = np.lexsort((ranks, vert_keys))
            sorted_keys = vert_keys[order]
            dup = np.zeros(len(sorted_keys), dtype=bool)
            dup[1:] = sorted_keys[1:] == sorted_keys[:-1]
            loser = np.zeros(len(cand), dtype=bool)
            np.maximum.at(loser, ranks[order], dup)
            winners = cand[~loser]
            if len(winners) == 0 and len(dead) == 0:
                stall += 1
                continue
            stall = 0
            commit(winners, cand_cols[~loser])
            if len(dead):
                deferred.append(dead)
            gone = np.zeros(n_edges, dtype=bool)
            gone[winners] = True
            gone[dead] = True
            pool = pool[~gone[pool]]
        if len(pool):
            deferred.append(pool)
        return np.concatenate(deferred) if deferred else np.empty(0, dtype=np.int64)

    base = min(colours, max(1, graph.max_degree()))
    uncoloured = run_rounds(rng.permutation(n_edges), base)
    if len(uncoloured) and colours > base:
        uncoloured = run_rounds(uncoloured, colours)

    # --- greedy completion -------------------------------------------------
    walk_budget = 1000 + 50 * len(uncoloured)

    def force_through(eid: int) -> bool:
        """Colour a stuck edge by displacement, uncolouring whoever blocks.

        The stuck edge grabs a colour held by as few neighbours as possible
        (random among those); the displaced edges re-enter the queue and
        usually land on a free colour immediately.  Bounded by a global
        step budget.
        """
        nonlocal walk_budget
        queue = deque([eid])
        while queue:
            f = int(queue.popleft())
            if colouring[f] >= 0:
                continue
            got = lowest_bit(avail_row(f))
            if got is not None:
                commit_one(f, got)
                continue
            if walk_budget <= 0:
                return False
            walk_budget -= 1
            holders = owner[inc[f]]  # (r, colours)
            n_block = (holders >= 0).sum(axis=0)
            cheapest = np.flatnonzero(n_block == n_block.min())
            target = int(cheapest[rng.integers(len(cheapest))])
            blockers = {int(b) for b in holders[:, target] if b >= 0}
            for b in blockers:
                uncolour(b)
                queue.append(b)
            commit_one(f, target)
        return True

    if len(uncoloured):
        counts = np.bitwise_count(availability(uncoloured)).sum(axis=1)
        heap = [(int(c), int(e)) for c, e in zip(counts, uncoloured)]
        heapq.heapify(heap)
        while heap:
            cnt, eid = heapq.heappop(heap)
            if colouring[eid] >= 0:
                continue
            row = avail_row(eid)
            true_cnt = int(np.bitwise_count(row).sum())
            if true_cnt == 0:
                if force_through(eid):
                    continue
                return None
            if heap and true_cnt > heap[0][0]:
                heapq.heappush(heap, (true_cnt, eid))
                continue
            commit_one(eid, lowest_bit(row))

    _enlarge_largest_class(graph, inc, colouring, colours, rng, commit, uncolour,
                           avail_row, lowest_bit, owner)

    if not verify_proper_colouring(graph, colouring, colours):
        raise InconsistencyError("colouring failed the properness verifier")
    return colouring


def _enlarge_largest_class(
    graph, inc, colouring, colours, rng, commit, uncolour, avail_row, lowest_bit, owner
) -> None:
    """Grow the largest colour class by properness-preserving recolouring.

    First absorbs every edge disjoint from the class (maximal-matching
    consolidation), then runs an alternating walk: an edge at an uncovered
    vertex whose vertices meet exactly one class member can join the class
    if that member moves to another colour; the member's vertices rejoin
    the uncovered pool.  Absorptions strictly grow the class, swaps
    reshuffle which vertices are uncovered, and the walk is capped.
    """
    r = inc.shape[1]
    n_edges = graph.n_edges
    sizes = np.bincount(colouring, minlength=colours)
    cstar = int(sizes.argmax())
    covered = np.zeros(graph.n_vertices, dtype=bool)
    members = np.flatnonzero(colouring == cstar)
    if len(members):
        covered[inc[members].ravel()] = True

    def absorb_pass() -> None:
        while True:
            free = ~covered[inc].any(axis=1) & (colouring != cstar)
            cand = np.flatnonzero(free)
            if len(cand) == 0:
                return
            verts = inc[cand].ravel()
            ranks = np.repeat(np.arange(len(cand)), r)
            order = np.lexsort((ranks, verts))
            sv = verts[order]
            dup = np.zeros(len(sv), dtype=bool)
            dup[1:] = sv[1:] == sv[:-1]
            loser = np.zeros(len(cand), dtype=bool)
            np.maximum.at(loser, ranks[order], dup)
            moved = cand[~loser]
            for e in moved:
                uncolour(int(e))
            commit(moved, np.full(len(moved), cstar, dtype=np.int64))
            covered[inc[moved].ravel()] = True

    absorb_pass()

    # vertex -> incident edges, CSR layout, for the alternating walk
    flat = inc.ravel()
    order = np.argsort(flat, kind="stable")
    eids_by_vertex = (order // r).astype(np.int64)
    indptr = np.zeros(graph.n_vertices + 1, dtype=np.int64)
    np.cumsum(np.bincount(flat, minlength=graph.n_vertices), out=indptr[1:])

    def incident(x: int) -> np.ndarray:
        return eids_by_vertex[indptr[x] : indptr[x + 1]]

    uncovered = [
        int(x)
        for x in np.flatnonzero(~covered)
        if indptr[x + 1] > indptr[x]
    ]
    steps = 2000 + 10 * len(uncovered)
    while uncovered and steps > 0:
        steps -= 1
        pick = int(rng.integers(len(uncovered)))
        u = uncovered[pick]
        if covered[u]:
            uncovered[pick] = uncovered[-1]
            uncovered.pop()
            continue
        cands = incident(u)
        cover_count = covered[inc[cands]].sum(axis=1)
        best = int(cover_count.min())
        choices = cands[cover_count == best]
        e = int(choices[rng.integers(len(choices))])
        everts = inc[e]
        if best == 0:
            uncolour(e)
            commit(np.array([e]), np.array([cstar]))
            covered[everts] = True
            continue
        # collect the distinct class members blocking e
        blockers = {int(b) for b in owner[everts, cstar] if b >= 0}
        if len(blockers) != 1:
            continue
        f = blockers.pop()
        alt = lowest_bit(avail_row(f))
        if alt is None:
            continue
        uncolour(f)
        commit(np.array([f]), np.array([alt]))
        covered[inc[f]] = False
        uncolour(e)
        commit(np.array([e]), np.array([cstar]))
        covered[everts] = True
        for x in inc[f]:
            x = int(x)
            if not covered[x] and indptr[x + 1] > indptr[x]:
                uncovered.append(x)


def extract_class(
    graph: AuxiliaryHypergraph, colouring: np.ndarray, design: CyclicDesign
) -> PartialParallelClass:
    """Project the largest colour class onto the design.

    Keeps only orbits with at least s slots matched in the class (ties in
    class size break to the lowest colour index), then trims every kept
    orbit to exactly s blocks, lowest translates first.  The result holds
    s blocks from each kept orbit and none from any other.
    """
    sizes = np.bincount(colouring)
    best_colour = int(sizes.argmax())  # argmax takes the lowest index on ties
    edge_ids = np.flatnonzero(colouring == best_colour)
    per_orbit: dict[int, list[int]] = {}
    for eid in edge_ids:
        j, t, _slot = graph.decode_edge(int(eid))
        per_orbit.setdefault(j, []).append(t)
    s = graph.s
    pclass = PartialParallelClass(design)
    v = design.v
    for j, translates in sorted(per_orbit.items()):
        if len(translates) < s:
            continue
        orbit_index = graph.full_orbit_indices[j]
        base = design.orbits[orbit_index].base
        for t in sorted(translates)[:s]:
            pclass.add(orbit_index, translate(base, t, v))
    return pclass


# ---------------------------------------------------------------------------
# Greedy repair


@dataclass
class RepairStep:
    orbit_index: int
    block: Block
    removed: list[tuple[int, Block]]
    potential_after: int

    def to_dict(self) -> dict:
        return {
            "orbit_index": self.orbit_index,
            "block": list(self.block),
            "removed": [[i, list(b)] for i, b in self.removed],
            "potential_after": self.potential_after,
        }


@dataclass
class RepairResult:
    pclass: PartialParallelClass
    steps: list[RepairStep]
    initial_potential: int
    initial_tau: int
    bound: int
    final_tau: int

    def to_dict(self) -> dict:
        return {
            "steps": len(self.steps),
            "initial_potential": self.initial_potential,
            "initial_tau_s_minus_1": self.initial_tau,
            "certified_bound": self.bound,
            "final_tau_s_minus_1": self.final_tau,
        }


def greedy_repair(pclass: PartialParallelClass) -> RepairResult:
    """Raise every orbit to s-1 or s blocks, certifying the deficiency bound.

    Each step adds the lexicographically least good block of the lowest
    deficient orbit and evicts the (at most k) blocks it meets; the
    potential drops by exactly 1 per step, so tau_{s-1} of the result is at
    most (k+1) d(P') + tau_{s-1}(P').  Both facts are asserted, not assumed.
    The input must hold at most s blocks per orbit, and every deficient
    orbit must hold more than k^2(ks-k+1)(d(P')-1) good blocks; otherwise a
    precondition error names the offending orbit.
    """
    design = pclass.design
    k, s = design.k, pclass.s
    if s < 2:
        raise ValueError(f"repair needs s >= 2, got s={s} (k={k}, lambda={design.lam})")
    t = len(design.orbits)
    for i in range(t):
        if pclass.counts[i] > s:
            raise ValueError(f"orbit {i} holds {pclass.counts[i]} blocks, more than s={s}")
    d0 = pclass.potential()
    tau0 = pclass.tau(s - 1)
    threshold = k * k * (k * s - k + 1) * (d0 - 1)
    if d0 > 0:
        for i in range(t):
            if pclass.counts[i] <= s - 2:
                good = len(good_translates(pclass, i))
                if good <= threshold:
                    raise RepairPreconditionError(i, good, threshold)

    work = pclass.copy()
    v = design.v
    steps: list[RepairStep] = []
    while work.potential() > 0:
        before = work.potential()
        j = min(i for i in range(t) if work.counts[i] <= s - 2)
        ts = good_translates(work, j)
        if len(ts) == 0:
            raise InconsistencyError(f"no good block available in orbit {j}")
        base = design.orbits[j].base
        block = min(translate(base, int(t_), v) for t_ in ts)
        evicted: list[tuple[int, Block]] = []
        hit_bids = {
            (int(work.owner_orbit[x]), int(work.owner_bid[x]))
            for x in block
            if work.owner_orbit[x] >= 0
        }
        for orb, bid in sorted(hit_bids):
            evicted.append((orb, work.remove(orb, bid)))
        work.add(j, block)
        after = work.potential()
        if after != before - 1:
            raise InconsistencyError(
                f"potential moved {before} -> {after}; repair step must drop it by 1"
            )
        steps.append(RepairStep(j, block, evicted, after))

    final_tau = work.tau(s - 1)
    bound = (k + 1) * d0 + tau0
    if final_tau > bound:
        raise InconsistencyError(
            f"tau_(s-1)={final_tau} exceeds certified bound {bound}"
        )
    if work.tau(s) != t - final_tau:
        raise InconsistencyError("orbits not split between s-1 and s blocks")
    return RepairResult(work, steps, d0, tau0, bound, final_tau)


# ---------------------------------------------------------------------------
# Full pipeline


@dataclass
class PipelineParams:
    """Dials for the constructive pipeline.

    epsilon is the reporting target for the fraction of deficient orbits
    (must satisfy 0 < epsilon < 1/(4 k^2) for the design's k); eta sets the
    colour budget ceil((1+eta) * max degree).  On colouring failure the
    engine retries with a fresh random stream reseed_retries times before
    doubling the colour count, up to the trivial bound and retry_cap.
    """

    epsilon: float = 0.01
    eta: float = 0.2
    seed: int = 0
    batch_fraction: float = 0.1
    retry_cap: int = 20
    reseed_retries: int = 3

    def __post_init__(self) -> None:
        if not 0 < self.epsilon:
            raise ValueError("epsilon must be positive")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if not 0 < self.batch_fraction <= 1:
            raise ValueError("batch_fraction must lie in (0, 1]")
        if self.retry_cap < 1:
            raise ValueError("retry_cap must be positive")

    def epsilon_star(self, k: int, lam: int) -> float:
        s = (k - 1) // lam
        return self.epsilon / (2 * (k + 1) * s)


@dataclass
class PipelineResult:
    status: str  # "certified" | "failed"
    stage: str | None
    report: dict
    pclass: PartialParallelClass | None = None
    repair: RepairResult | None = None

    @property
    def certified(self) -> bool:
        return self.status == "certified"


def _pick_disjoint_blocks(
    design: CyclicDesign, orbit_index: int, count: int, taken: np.ndarray
) -> list[Block]:
    """First `count` blocks of the orbit, in translate order, avoiding taken points."""
    orb = design.orbits[orbit_index]
    v = design.v
    picked = []
    for t in range(orb.length):
        block = translate(orb.base, t, v)
        if not any(taken[x] for x in block):
            picked.append(block)
            for x in block:
                taken[x] = True
            if len(picked) == count:
                return picked
    raise ValueError(
        f"could not pick {count} disjoint blocks from orbit {orbit_index}"
    )


def full_pipeline(design: CyclicDesign, params: PipelineParams) -> PipelineResult:
    """Run all four stages and certify the repair bound.

    Returns a failed result naming the stage when a stage precondition
    cannot be met (routine at small v); raises only for domain errors
    (k < 2 lambda + 1 or epsilon out of range) and internal inconsistencies.
    """
    v, k, lam = design.v, design.k, design.lam
    if k < 2 * lam + 1:
        raise ValueError(f"pipeline requires k >= 2*lambda+1; got k={k}, lambda={lam}")
    if not params.epsilon < 1 / (4 * k * k):
        raise ValueError(
            f"epsilon must be below 1/(4k^2) = {1 / (4 * k * k):.6g}, got {params.epsilon}"
        )
    s = (k - 1) // lam
    t = len(design.orbits)
    report: dict = {
        "v": v,
        "k": k,
        "lambda": lam,
        "s": s,
        "orbits": t,
        "epsilon": params.epsilon,
        "epsilon_star": params.epsilon_star(k, lam),
        "eta": params.eta,
        "seed": params.seed,
    }

    # stage 1: slot hypergraph and colouring
    try:
        graph = build_auxiliary_hypergraph(design)
    except ValueError as exc:
        report["error"] = str(exc)
        return PipelineResult("failed", "hypergraph", report)
    delta = graph.max_degree()
    trivial = graph.uniformity * (delta - 1) + 1
    colours = int(np.ceil((1 + params.eta) * delta))
    attempts = []
    colouring = None
    for attempt in range(params.retry_cap):
        sub_seed = int(np.random.SeedSequence([params.seed, attempt]).generate_state(1)[0])
        colouring = nibble_edge_colouring(
            graph, colours, seed=sub_seed, batch_fraction=params.batch_fraction
        )
        attempts.append({"colours": colours, "success": colouring is not None})
        if colouring is not None:
            break
        if (attempt + 1) % (params.reseed_retries + 1) == 0:
            colours = min(trivial, colours * 2)
    report["hypergraph"] = {
        "edges": graph.n_edges,
        "slots": graph.w,
        "full_orbits": len(graph.full_orbit_indices),
        "slot_counts": graph.slot_counts,
        "max_degree": delta,
    }
    report["colouring_attempts"] = attempts
    if colouring is None:
        return PipelineResult("failed", "colouring", report)
    sizes = np.bincount(colouring, minlength=colours)
    report["largest_class"] = int(sizes.max())

    # stage 2: project the largest class
    pclass = extract_class(graph, colouring, design)
    m = len(graph.full_orbit_indices)
    matched = sum(1 for i in graph.full_orbit_indices if pclass.counts[i] == s)
    report["matched_orbits"] = matched
    report["stage1_target_orbits"] = (1 - params.epsilon_star(k, lam)) * m
    report["stage1_target_met"] = matched >= report["stage1_target_orbits"]

    # stage 3: set aside orbits rich in bad blocks, drop clashing orbits
    bad = bad_block_counts(pclass)
    heavy = [i for i in range(t) if 2 * int(bad[i]) >= s * t]
    if len(heavy) > k * k * s * lam:
        raise InconsistencyError(
            f"{len(heavy)} orbits are rich in bad blocks; at most {k * k * s * lam} possible"
        )
    report["heavy_orbits"] = heavy
    taken = np.zeros(v, dtype=bool)
    replacement: dict[int, list[Block]] = {}
    try:
        for i in heavy:
            replacement[i] = _pick_disjoint_blocks(design, i, s, taken)
    except ValueError as exc:
        report["error"] = str(exc)
        return PipelineResult("failed", "replacement-class", report)
    clashing = []
    heavy_set = set(heavy)
    for i, _bid, block in pclass.all_blocks():
        if i not in heavy_set and any(taken[x] for x in block):
            clashing.append(i)
    clashing = sorted(set(clashing))
    report["clashing_orbits"] = clashing

    merged = PartialParallelClass(design)
    for i in heavy:
        for block in replacement[i]:
            merged.add(i, block)
    dropped = heavy_set | set(clashing)
    for i, _bid, block in pclass.all_blocks():
        if i not in dropped:
            merged.add(i, block)
    report["pre_repair"] = {
        "potential": merged.potential(),
        "tau": {a: merged.tau(a) for a in range(s + 1)},
    }

    # stage 4: greedy repair with its certificate
    try:
        repair = greedy_repair(merged)
    except RepairPreconditionError as exc:
        report["error"] = str(exc)
        report["offending_orbit"] = exc.orbit_index
        return PipelineResult("failed", "repair", report, pclass=merged)
    final = repair.pclass
    report["repair"] = repair.to_dict()
    report["deficient_fraction"] = repair.final_tau / t
    report["epsilon_target_met"] = repair.final_tau <= params.epsilon * t
    report["points_used"] = final.points_used()
    report["bound_certified"] = True
    return PipelineResult("certified", None, report, pclass=final, repair=repair)
