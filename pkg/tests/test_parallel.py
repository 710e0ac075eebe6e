import random

import numpy as np
import pytest

from cycdesign.blocks import translate
from cycdesign.designs import CyclicDesign, Orbit
from cycdesign.families import cdf_design_roundtrip
from cycdesign.generate import construct_sts_cdf
from cycdesign.parallel import (
    AuxiliaryHypergraph,
    ExplicitHypergraph,
    PartialParallelClass,
    PipelineParams,
    RepairPreconditionError,
    bad_block_counts,
    build_auxiliary_hypergraph,
    classify_block,
    extract_class,
    full_pipeline,
    good_translates,
    greedy_repair,
    nibble_edge_colouring,
    verify_proper_colouring,
)


@pytest.fixture(scope="module")
def sts601():
    return cdf_design_roundtrip(construct_sts_cdf(601))


# ---------------------------------------------------------------------------
# partial parallel classes


def test_class_bookkeeping(sts13_design):
    pclass = PartialParallelClass(sts13_design, debug=True)
    assert pclass.s == 2
    assert pclass.potential() == 2  # two orbits, each two blocks short of s-1
    bid = pclass.add(0, (0, 1, 4))
    assert pclass.counts[0] == 1 and pclass.tau(1) == 1
    assert pclass.potential() == 1
    with pytest.raises(ValueError, match="covered"):
        pclass.add(1, (2, 4, 9))  # 4 is taken
    pclass.remove(0, bid)
    assert pclass.potential() == 2 and pclass.num_blocks() == 0


def test_incremental_potential_matches_recomputation(sts601):
    rng = random.Random(13)
    pclass = PartialParallelClass(sts601)
    v = sts601.v
    placed = []
    for step in range(1000):
        if placed and rng.random() < 0.4:
            i, bid = placed.pop(rng.randrange(len(placed)))
            pclass.remove(i, bid)
        else:
            i = rng.randrange(len(sts601.orbits))
            t = rng.randrange(v)
            block = translate(sts601.orbits[i].base, t, v)
            if all(pclass.owner_orbit[x] < 0 for x in block):
                placed.append((i, pclass.add(i, block)))
        assert pclass.potential() == pclass.potential_recomputed()
    pclass.verify()


def test_classify_examples(sts13_design):
    pclass = PartialParallelClass(sts13_design)
    # empty class: everything is good
    assert classify_block(pclass, (0, 1, 4))
    assert classify_block(pclass, (5, 7, 12))

    # one block placed: its orbit is deficient, so touching it is bad
    pclass.add(0, (0, 1, 4))
    assert not classify_block(pclass, (1, 2, 5))
    assert classify_block(pclass, (2, 3, 6))

    # two blocks of one orbit: a block meeting both is bad even at count s
    pclass.add(0, (5, 6, 9))
    bad = (1, 5, 8)  # hits (0,1,4) and (5,6,9), both in orbit 0
    assert not classify_block(pclass, bad)


def test_classify_matches_characterization(sts13_design):
    """With per-orbit counts in {0, s}, bad means 'meets two blocks of one
    full orbit'; cross-check the definitional test against that reading."""
    design = sts13_design
    pclass = PartialParallelClass(design)
    pclass.add(0, (0, 1, 4))
    pclass.add(0, (2, 3, 6))
    v = design.v
    for i, orb in enumerate(design.orbits):
        for t in range(orb.length):
            block = translate(orb.base, t, v)
            hit = [b for b in [(0, 1, 4), (2, 3, 6)] if set(b) & set(block)]
            expected_good = len(hit) <= 1
            assert classify_block(pclass, block) == expected_good
    goods = good_translates(pclass, 1)
    direct = [
        t for t in range(v) if classify_block(pclass, translate(design.orbits[1].base, t, v))
    ]
    assert sorted(goods.tolist()) == direct


# ---------------------------------------------------------------------------
# auxiliary hypergraph


def test_hypergraph_sts13(sts13_design):
    graph = build_auxiliary_hypergraph(sts13_design)
    assert graph.uniformity == 4
    assert graph.w == 4 and graph.slot_counts == [2, 2]
    assert graph.n_edges == 52
    assert graph.degree_point == 12 and graph.degree_slot == 13
    inc = graph.incidence_array()
    deg = np.bincount(inc.ravel(), minlength=graph.n_vertices)
    assert np.all(deg[:13] == 12) and np.all(deg[13:] == 13)
    # every edge holds exactly one slot vertex: slot-pair codegrees are zero
    assert np.all((inc >= 13).sum(axis=1) == 1)
    # point-pair codegrees within the proven bound
    pair_counts = {}
    for row in inc:
        pts = [x for x in row if x < 13]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                key = (min(pts[i], pts[j]), max(pts[i], pts[j]))
                pair_counts[key] = pair_counts.get(key, 0) + 1
    assert max(pair_counts.values()) <= graph.codegree_point_pairs_bound


def test_hypergraph_sts7(fano_design):
    graph = build_auxiliary_hypergraph(fano_design)
    assert graph.slot_counts == [2]
    assert graph.n_edges == 14


def test_hypergraph_forced_assignment():
    # m=1, w=3, s=2: the single orbit takes s+1 = 3 slots
    design = CyclicDesign(10, 3, 1, (Orbit((0, 1, 2), 10),))
    graph = build_auxiliary_hypergraph(design)
    assert graph.slot_counts == [3]


def test_hypergraph_domain_errors(sts15_design):
    no_full = CyclicDesign(9, 3, 1, (Orbit((0, 3, 6), 3),))
    with pytest.raises(ValueError, match="full orbit"):
        build_auxiliary_hypergraph(no_full)
    # sm > w: at lambda=1, s=2, two full orbits want 4 slots but w=2
    crowded = CyclicDesign.from_base_blocks(7, 3, 1, [(0, 1, 3), (0, 1, 5)])
    with pytest.raises(ValueError, match="slot assignment"):
        build_auxiliary_hypergraph(crowded)


def test_edge_decode_roundtrip(sts13_design):
    graph = build_auxiliary_hypergraph(sts13_design)
    inc = graph.incidence_array()
    v = sts13_design.v
    for eid in range(graph.n_edges):
        j, t, slot = graph.decode_edge(eid)
        orbit_index = graph.full_orbit_indices[j]
        block = translate(sts13_design.orbits[orbit_index].base, t, v)
        assert tuple(sorted(inc[eid][:-1])) == block


# ---------------------------------------------------------------------------
# nibble colouring


def test_colouring_disjoint_edges():
    graph = ExplicitHypergraph(6, [(0, 1), (2, 3), (4, 5)])
    col = nibble_edge_colouring(graph, 1, seed=5)
    assert col is not None and set(col) == {0}
    assert verify_proper_colouring(graph, col, 1)


def test_colouring_triangle():
    tri = ExplicitHypergraph(3, [(0, 1), (1, 2), (0, 2)])
    assert nibble_edge_colouring(tri, 2, seed=1) is None
    col = nibble_edge_colouring(tri, 3, seed=1)
    assert col is not None and verify_proper_colouring(tri, col, 3)


def test_colouring_sts13(sts13_design):
    graph = build_auxiliary_hypergraph(sts13_design)
    for seed in range(5):
        col = nibble_edge_colouring(graph, 18, seed=seed)
        assert col is not None
        assert verify_proper_colouring(graph, col, 18)
    # too-tight budgets fail gracefully rather than crash
    assert nibble_edge_colouring(graph, 13, seed=0) is None


def test_colouring_deterministic(sts13_design):
    graph = build_auxiliary_hypergraph(sts13_design)
    a = nibble_edge_colouring(graph, 20, seed=7)
    b = nibble_edge_colouring(graph, 20, seed=7)
    assert a is not None and np.array_equal(a, b)


def test_properness_verifier_rejects_bad():
    graph = ExplicitHypergraph(3, [(0, 1), (1, 2)])
    assert not verify_proper_colouring(graph, np.array([0, 0]), 2)
    assert verify_proper_colouring(graph, np.array([0, 1]), 2)


# ---------------------------------------------------------------------------
# class extraction


def test_extract_disjoint_graph_takes_everything(sts13_design):
    graph = build_auxiliary_hypergraph(sts13_design)
    col = nibble_edge_colouring(graph, 18, seed=3)
    pclass = extract_class(graph, col, sts13_design)
    assert all(c in (0, 2) for c in pclass.counts)
    assert pclass.tau(2) + pclass.tau(0) == 2
    pclass.verify()


def test_extract_empty_when_classes_tiny(sts13_design):
    graph = build_auxiliary_hypergraph(sts13_design)
    # give every edge its own colour: largest class has one edge < s
    col = np.arange(graph.n_edges, dtype=np.int64)
    assert verify_proper_colouring(graph, col, graph.n_edges)
    pclass = extract_class(graph, col, sts13_design)
    assert pclass.num_blocks() == 0


# ---------------------------------------------------------------------------
# greedy repair


def _full_class(design, pairs):
    pclass = PartialParallelClass(design)
    for i, t in pairs:
        pclass.add(i, translate(design.orbits[i].base, t, design.v))
    return pclass


def test_repair_identity_when_potential_zero(sts13_design):
    # one block per orbit reaches s-1 everywhere, so the potential is zero
    pclass = _full_class(sts13_design, [(0, 0), (1, 8)])
    assert pclass.potential() == 0
    result = greedy_repair(pclass)
    assert result.steps == []
    assert result.final_tau == pclass.tau(1) == 2


def test_no_two_per_orbit_class_in_sts13():
    # a class with two blocks from each STS(13) orbit would cover 12 of 13
    # points; exhaustive search shows none exists
    from cycdesign.search import find_translate_representatives

    bases = [(0, 1, 4), (0, 1, 4), (0, 2, 7), (0, 2, 7)]
    out = find_translate_representatives(bases, 13, [range(13)] * 4)
    assert out.status == "infeasible"


def test_repair_rejects_overfull_orbit(sts13_design):
    pclass = _full_class(sts13_design, [(0, 0), (0, 5), (0, 7)])
    with pytest.raises(ValueError, match="more than s"):
        greedy_repair(pclass)


def test_repair_precondition_error(sts13_design):
    # d(P') = 2 needs more than 36 good blocks per deficient orbit; orbits
    # only have 13, so the precondition must fail with a named orbit
    pclass = PartialParallelClass(sts13_design)
    with pytest.raises(RepairPreconditionError) as exc:
        greedy_repair(pclass)
    assert exc.value.orbit_index in (0, 1)


def test_repair_single_step(sts13_design):
    # one orbit full at s, the other empty: d(P') = 1, threshold 0
    pclass = _full_class(sts13_design, [(0, 0), (0, 5)])
    assert pclass.potential() == 1
    result = greedy_repair(pclass)
    assert len(result.steps) == 1
    assert result.final_tau <= result.bound == 4 * 1 + 0
    assert result.pclass.tau(2) == 2 - result.final_tau
    # input untouched
    assert pclass.potential() == 1


def test_repair_bound_and_decrement_at_scale(sts601):
    params = PipelineParams(epsilon=0.02, eta=0.2, seed=0)
    res = full_pipeline(sts601, params)
    assert res.certified
    repair = res.repair
    assert repair.final_tau <= (sts601.k + 1) * repair.initial_potential + repair.initial_tau
    pots = [s.potential_after for s in repair.steps]
    assert pots == list(range(repair.initial_potential - 1, -1, -1))
    # repair of a repaired class is the identity
    again = greedy_repair(res.pclass)
    assert again.steps == []


# ---------------------------------------------------------------------------
# full pipeline


def test_pipeline_domain_gates(sts13_design):
    with pytest.raises(ValueError, match="2\\*lambda"):
        full_pipeline(
            CyclicDesign.from_base_blocks(7, 3, 2, [(0, 1, 3), (0, 1, 5)]),
            PipelineParams(epsilon=0.001),
        )
    with pytest.raises(ValueError, match="epsilon"):
        full_pipeline(sts13_design, PipelineParams(epsilon=0.5))


def test_pipeline_small_v_fails_with_stage(sts13_design):
    res = full_pipeline(sts13_design, PipelineParams(epsilon=0.02, seed=1))
    assert not res.certified
    assert res.stage in ("colouring", "replacement-class", "repair")
    assert res.report.get("error") or res.stage == "colouring"


def test_pipeline_certifies_at_601(sts601):
    res = full_pipeline(sts601, PipelineParams(epsilon=0.02, eta=0.2, seed=2))
    assert res.certified
    report = res.report
    assert report["bound_certified"]
    assert report["repair"]["final_tau_s_minus_1"] <= report["repair"]["certified_bound"]
    assert 0 < report["deficient_fraction"] < 1
    assert report["largest_class"] <= sts601.v // 3
    assert len(report["heavy_orbits"]) <= 9 * 2 * 1  # k^2 * s * lambda
    final = res.pclass
    final.verify()
    assert all(c in (1, 2) for c in final.counts)


def test_bad_block_counts_match_scan(sts13_design):
    pclass = _full_class(sts13_design, [(0, 0), (0, 5)])
    bad = bad_block_counts(pclass)
    for i, orb in enumerate(sts13_design.orbits):
        direct = sum(
            not classify_block(pclass, translate(orb.base, t, sts13_design.v))
            for t in range(orb.length)
        )
        assert bad[i] == direct
