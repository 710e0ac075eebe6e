import random
from itertools import combinations, combinations_with_replacement

import pytest

from cycdesign.blocks import canonical_base_block
from cycdesign.designs import short_orbit_analysis, validate_design
from cycdesign.families import DifferenceFamily, is_cdf
from cycdesign.generate import (
    ConstructionError,
    EnumerationBudget,
    EnumerationStats,
    construct_sts_cdf,
    enumerate_cdfs,
    enumerate_cyclic_sts,
    superimpose,
)


def oracle_cdfs(v, k, lam):
    """Every (v,k,lam) family as a sorted multiset of canonical orbit reps,
    found by testing all combinations of representatives directly."""
    reps = sorted({canonical_base_block(b, v) for b in combinations(range(v), k)})
    count = lam * (v - 1) // (k * (k - 1))
    found = set()
    for combo in combinations_with_replacement(reps, count):
        fam = DifferenceFamily(v, k, lam, combo)
        if is_cdf(fam).ok:
            found.add(combo)
    return found


@pytest.mark.parametrize("v", [7, 13])
def test_enumeration_matches_oracle(v):
    stats = EnumerationStats()
    got = {f.base_blocks for f in enumerate_cdfs(v, 3, 1, stats=stats)}
    assert stats.exhaustive
    assert got == oracle_cdfs(v, 3, 1)


def test_enumeration_examples():
    fams = {f.base_blocks for f in enumerate_cdfs(7, 3, 1)}
    # the orbit class of {0,1,3} and its reversed twin (canonically {0,1,5})
    assert fams == {((0, 1, 3),), ((0, 1, 5),)}

    fams13 = {f.base_blocks for f in enumerate_cdfs(13, 3, 1)}
    assert ((0, 1, 4), (0, 2, 7)) in fams13

    with pytest.raises(ValueError, match="divisible"):
        list(enumerate_cdfs(9, 3, 1))


def test_enumeration_budgets():
    stats = EnumerationStats()
    fams = list(enumerate_cdfs(13, 3, 1, EnumerationBudget(max_solutions=2), stats))
    assert len(fams) == 2 and not stats.exhaustive

    stats = EnumerationStats()
    list(enumerate_cdfs(13, 3, 1, EnumerationBudget(max_nodes=10), stats))
    assert not stats.exhaustive and stats.nodes > 10

    with pytest.raises(ValueError):
        EnumerationBudget(max_solutions=0)


def test_enumeration_seeded_order_same_census():
    plain = {f.base_blocks for f in enumerate_cdfs(13, 3, 1)}
    seeded = {
        f.base_blocks
        for f in enumerate_cdfs(13, 3, 1, EnumerationBudget(order_seed=99))
    }
    assert plain == seeded


def test_raw_mode_emits_duplicates_at_higher_lambda():
    dedup = list(enumerate_cdfs(7, 3, 2, EnumerationBudget(canonical_only=True)))
    raw = list(enumerate_cdfs(7, 3, 2, EnumerationBudget(canonical_only=False)))
    assert len(raw) >= len(dedup)
    keys = {
        tuple(sorted(canonical_base_block(b, 7) for b in f.base_blocks)) for f in raw
    }
    assert keys == {f.base_blocks for f in dedup}


def test_every_emitted_family_verifies():
    for v in (7, 13, 19):
        for fam in enumerate_cdfs(v, 3, 1):
            assert is_cdf(fam).ok


def test_sts_stream_examples():
    assert list(enumerate_cyclic_sts(9)) == []
    assert list(enumerate_cyclic_sts(11)) == []
    assert list(enumerate_cyclic_sts(12)) == []

    designs7 = list(enumerate_cyclic_sts(7))
    assert len(designs7) == 2  # {0,1,3} and its reversed twin

    designs15 = list(enumerate_cyclic_sts(15))
    assert designs15
    for d in designs15:
        rep = short_orbit_analysis(d)
        assert rep.h == 1 and rep.m == 2

    # v=3 is the one-block degenerate system
    designs3 = list(enumerate_cyclic_sts(3))
    assert len(designs3) == 1 and designs3[0].orbits[0].base == (0, 1, 2)


def test_sts15_matches_direct_oracle():
    """Independent census: the short orbit is forced, so try all pairs of
    full-orbit representatives and validate each candidate design."""
    from cycdesign.blocks import orbit_length
    from cycdesign.designs import CyclicDesign, Orbit

    v = 15
    reps = sorted({canonical_base_block(b, v) for b in combinations(range(v), 3)})
    full = [r for r in reps if orbit_length(r, v) == v]
    short = (0, 5, 10)
    expected = set()
    for pair in combinations(full, 2):
        orbits = (Orbit(short, 5),) + tuple(Orbit(b, v) for b in pair)
        design = CyclicDesign(v, 3, 1, orbits)
        if validate_design(design).ok:
            expected.add(pair)
    got = {
        tuple(sorted(o.base for o in d.orbits if o.length == v))
        for d in enumerate_cyclic_sts(v)
    }
    assert got == expected


@pytest.mark.parametrize("v", [7, 13, 25, 61])
def test_construct_sts_cdf(v):
    fam = construct_sts_cdf(v)
    assert is_cdf(fam).ok
    assert len(fam.base_blocks) == (v - 1) // 6


def test_construct_sts_cdf_deterministic():
    a = construct_sts_cdf(49, seed=5)
    b = construct_sts_cdf(49, seed=5)
    assert a.base_blocks == b.base_blocks
    assert is_cdf(a).ok


def test_construct_sts_cdf_domain():
    with pytest.raises(ValueError):
        construct_sts_cdf(9)
    with pytest.raises(ValueError):
        construct_sts_cdf(15)


def test_superimpose_examples(fano_family):
    doubled = superimpose(fano_family, 2)
    assert doubled.lam == 2 and len(doubled.orbits) == 2
    assert validate_design(doubled).ok

    ds = DifferenceFamily.from_blocks(13, 4, 1, [(0, 1, 3, 9)])
    doubled13 = superimpose(ds, 2)
    assert doubled13.lam == 2 and len(doubled13.orbits) == 2
    assert validate_design(doubled13).ok

    same = superimpose(fano_family, 1)
    assert same.lam == 1 and len(same.orbits) == 1


def test_superimpose_requires_cdf():
    bad = DifferenceFamily.from_blocks(7, 3, 1, [(0, 1, 2)])
    with pytest.raises(ValueError):
        superimpose(bad, 2)
