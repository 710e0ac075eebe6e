import random

import pytest

from cycdesign.designs import CyclicDesign, InconsistencyError
from cycdesign.families import DifferenceFamily, is_symmetric_ddf
from cycdesign.generate import enumerate_cyclic_sts, superimpose
from cycdesign.search import (
    ConditionReport,
    RepresentativeSystem,
    TranslateInstance,
    check_disjoint_translate_condition,
    find_disjoint_representatives,
    find_translate_representatives,
    multinomial_is_zero_mod_p,
    prime_case_driver,
    verify_representatives,
)


def test_single_orbit_trivially_feasible(fano_design):
    out = find_disjoint_representatives(fano_design)
    assert out.feasible
    assert verify_representatives(fano_design, out.chosen)


def test_superimposed_fano_infeasible(fano_family):
    doubled = superimpose(fano_family, 2)
    out = find_disjoint_representatives(doubled)
    assert out.status == "infeasible"
    # reproducible exhaustion
    again = find_disjoint_representatives(doubled)
    assert again.stats.nodes == out.stats.nodes
    assert again.order == out.order


def test_sts13_feasible(sts13_design):
    out = find_disjoint_representatives(sts13_design)
    assert out.feasible
    system = RepresentativeSystem(sts13_design, out.chosen)
    blocks = [set(b) for b in system.blocks()]
    assert not (blocks[0] & blocks[1])


def test_timeout_reported_not_infeasible(fano_family):
    doubled = superimpose(fano_family, 2)
    out = find_disjoint_representatives(doubled, max_nodes=2)
    assert out.status == "timeout"


def test_symmetric_mode(fano_design):
    out = find_disjoint_representatives(fano_design, mode="symmetric")
    assert out.feasible
    blocks = [
        tuple(sorted((b + t) % 7 for b in fano_design.orbits[i].base))
        for i, t in out.chosen
    ]
    fam = DifferenceFamily(7, 3, 1, tuple(sorted(blocks)))
    assert is_symmetric_ddf(fam).ok


def test_symmetric_mode_domain(sts15_design):
    with pytest.raises(ValueError):
        find_disjoint_representatives(sts15_design, mode="symmetric")


def test_translate_search_examples():
    out = find_translate_representatives([(0, 1, 4), (0, 2, 7)], 13, [range(13)] * 2)
    assert out.feasible

    out = find_translate_representatives([(0, 1, 3)], 7, [[0]])
    assert out.feasible and out.chosen == ((0, 0),)

    out = find_translate_representatives([(0, 1, 3), (0, 1, 3)], 7, [range(7)] * 2)
    assert out.status == "infeasible"

    with pytest.raises(ValueError):
        find_translate_representatives([(0, 1, 3)], 7, [[]])


def test_multinomial_carry_counting():
    assert not multinomial_is_zero_mod_p(2, 5, 13)  # 10!/(5!)^2 = 252 = 5 (mod 13)
    assert not multinomial_is_zero_mod_p(1, 5, 7)
    assert multinomial_is_zero_mod_p(3, 5, 13)  # 15! picks up a factor of 13
    # cross-check against direct arithmetic on small cases
    import math

    for p in (5, 7, 11, 13):
        for m in range(1, 4):
            for d in range(1, 8):
                direct = math.factorial(m * d) // math.factorial(d) ** m % p == 0
                assert multinomial_is_zero_mod_p(m, d, p) == direct, (m, d, p)


def test_condition_checker_examples():
    inst = TranslateInstance(13, 5, ((0, 1, 4), (0, 2, 7)), (tuple(range(13)),) * 2)
    report = check_disjoint_translate_condition(inst)
    assert report == ConditionReport(True, True, True)
    assert report.all_ok

    single = TranslateInstance(7, 5, ((0, 1, 3),), (tuple(range(7)),))
    assert check_disjoint_translate_condition(single).all_ok

    big_m = TranslateInstance(
        13, 5, ((0, 1), (2, 3), (4, 5)), (tuple(range(13)),) * 3
    )
    report = check_disjoint_translate_condition(big_m)
    assert not report.multinomial_nonzero

    with pytest.raises(ValueError, match="prime"):
        check_disjoint_translate_condition(
            TranslateInstance(9, 2, ((0, 1),), (tuple(range(9)),))
        )


def test_condition_diameter():
    # |X1 - X2| spans too many residues once the windows are far apart
    wide = TranslateInstance(97, 1, ((0, 50), (1, 30)), (tuple(range(97)),) * 2)
    report = check_disjoint_translate_condition(wide)
    assert not report.diameter_ok


def test_prime_driver(fano_design, sts13_design):
    for design in (fano_design, sts13_design):
        out = prime_case_driver(design)
        assert out.feasible
        assert out.condition is not None and out.condition.all_ok

    ds13 = CyclicDesign.from_base_blocks(13, 4, 1, [(0, 1, 3, 9)])
    out = prime_case_driver(ds13)
    assert out.feasible

    with pytest.raises(ValueError):
        prime_case_driver(CyclicDesign.from_base_blocks(15, 3, 1, [(0, 1, 4)]))


def test_novak_small_orders():
    for v in (7, 13, 19):
        for design in enumerate_cyclic_sts(v):
            out = find_disjoint_representatives(design)
            assert out.feasible, f"v={v}"
            assert verify_representatives(design, out.chosen)


def test_condition_implies_feasible_random():
    """Sampled version of the guarantee: condition holds => search succeeds."""
    from sympy import isprime

    rng = random.Random(99)
    primes = [p for p in range(5, 98) if isprime(p)]
    done = 0
    while done < 100:
        p = rng.choice(primes)
        m = rng.randrange(1, 5)
        d = rng.randrange(1, 7)
        if m * d >= p or (m - 1) * d + 1 > p:
            continue
        sets = []
        for _ in range(m):
            lo = rng.randrange(p)
            size = rng.randrange(1, d + 1)
            window = [(lo + off) % p for off in range(d)]
            sets.append(tuple(sorted(rng.sample(window, size))))
        tsize = rng.randrange((m - 1) * d + 1, p + 1)
        tsets = [tuple(sorted(rng.sample(range(p), tsize))) for _ in range(m)]
        inst = TranslateInstance(p, d, tuple(sets), tuple(tsets))
        if not check_disjoint_translate_condition(inst).all_ok:
            continue
        out = find_translate_representatives(inst.sets, p, inst.translate_sets)
        assert out.feasible, inst
        done += 1
