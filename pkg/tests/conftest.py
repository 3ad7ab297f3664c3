import numpy as np
import pytest

from sedinv.grid import GridGeometry, ScalarField2D


@pytest.fixture
def unit_geometry():
    return GridGeometry(nx=50, ny=50, dx=0.02, dy=0.02)


def random_field(geometry: GridGeometry, seed: int = 0, lo: float = 0.0,
                 hi: float = 1.0) -> ScalarField2D:
    rng = np.random.default_rng(seed)
    return ScalarField2D(geometry, rng.uniform(lo, hi, geometry.n_cells))
