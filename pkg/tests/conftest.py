import numpy as np
import pytest

from pfx4.constitutive import MaterialParams
from pfx4.mesh import Mesh, generate_rectangle, promote_q4_to_q9


@pytest.fixture
def steel():
    """Material table of the shear benchmark."""
    return MaterialParams(e_young=210.0e3, nu=0.3, rho0=8.0e-9,
                          gc=2.7, l0=3.75e-3, eta0=1e-6)


@pytest.fixture
def unit_square_q4():
    return Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
                np.array([[0, 1, 2, 3]]))


@pytest.fixture
def grid4x4_q9():
    return promote_q4_to_q9(
        generate_rectangle(np.linspace(0, 1, 5), np.linspace(0, 1, 5)))


def strip_meshes(l0, n_per_l0=4, length=1.0, rows=2):
    """Q4/Q9 strip meshes on [-L, L] x [0, rows*h] with a grid line at 0."""
    h = l0 / n_per_l0
    nx = int(round(2 * length / h))
    if nx % 2:
        nx += 1
    mq4 = generate_rectangle(np.linspace(-length, length, nx + 1),
                             np.linspace(0.0, rows * h, rows + 1))
    return mq4, promote_q4_to_q9(mq4)
