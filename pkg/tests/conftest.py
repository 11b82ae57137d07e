import numpy as np
import pytest

from csstap import AngleDopplerGrid, ArrayGeometry, build_dictionary


@pytest.fixture(scope="session")
def dft_dictionary():
    """4x4 geometry on its DFT-aligned grid: 16 orthonormal columns."""
    return build_dictionary(ArrayGeometry(4, 4), AngleDopplerGrid.uniform(4, 4))


@pytest.fixture(scope="session")
def overcomplete_dictionary():
    """4x4 geometry on an 8x8 grid: 16x64, coherent columns."""
    return build_dictionary(ArrayGeometry(4, 4), AngleDopplerGrid.uniform(8, 8))


@pytest.fixture()
def rng():
    return np.random.default_rng(0xC0FFEE)
