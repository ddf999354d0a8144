import numpy as np
import pytest

from splitmax.grid import Cuboid, GridSpec, StateZ


def random_state(grid, rng, consistent=True):
    z = StateZ(grid, rng.standard_normal((6,) + grid.shape))
    return z.apply_pec() if consistent else z


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def box_grid():
    """Anisotropic grid with unequal spacings and offsets."""
    return GridSpec(Cuboid(-0.2, 0.8, 0.1, 1.4, 0.0, 0.7), 6, 7, 5)
