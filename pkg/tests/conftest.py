import pytest

from cycdesign.designs import CyclicDesign
from cycdesign.families import DifferenceFamily, cdf_design_roundtrip


@pytest.fixture(scope="session")
def fano_family() -> DifferenceFamily:
    return DifferenceFamily.from_blocks(7, 3, 1, [(0, 1, 3)])


@pytest.fixture(scope="session")
def fano_design(fano_family) -> CyclicDesign:
    return cdf_design_roundtrip(fano_family)


@pytest.fixture(scope="session")
def sts13_family() -> DifferenceFamily:
    return DifferenceFamily.from_blocks(13, 3, 1, [(0, 1, 4), (0, 2, 7)])


@pytest.fixture(scope="session")
def sts13_design(sts13_family) -> CyclicDesign:
    return cdf_design_roundtrip(sts13_family)


@pytest.fixture(scope="session")
def sts15_design() -> CyclicDesign:
    return CyclicDesign.from_base_blocks(15, 3, 1, [(0, 1, 4), (0, 2, 9), (0, 5, 10)])


@pytest.fixture(scope="session")
def design_993() -> CyclicDesign:
    # three copies of the short orbit plus three full orbits; index 3
    bases = [(0, 3, 6)] * 3 + [(0, 1, 2), (0, 2, 4), (0, 4, 8)]
    return CyclicDesign.from_base_blocks(9, 3, 3, bases)
