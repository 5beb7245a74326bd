import numpy as np
import pytest

from thinrod import geometry as g
from thinrod.mesh3d import HEX_CORNERS, HexMesh


def cube_mesh(n_cubes: int = 1) -> HexMesh:
    """Disjoint unit cubes side by side in y2 (no boundary tags)."""
    nodes = np.concatenate([HEX_CORNERS + [0.0, 2.0 * i, 0.0] for i in range(n_cubes)])
    hexes = np.arange(8 * n_cubes).reshape(n_cubes, 8)
    empty = np.empty((0, 4), int)
    return HexMesh(nodes=nodes, hexes=hexes, faces=empty, tags=np.empty(0, int),
                   layers=np.array([0.0, 1.0]), section_nodes=4 * n_cubes,
                   node_layer=np.repeat([0, 1], 4)[np.arange(8 * n_cubes) % 8],
                   layer_sections=[])


@pytest.fixture
def unit_square():
    """Constant unit-square section (-1/2, 1/2)^2 on (0, 1)."""
    return g.rect_heights(0.5, 0.5, 0.5, 0.5, name="unit_square")


@pytest.fixture
def two_boxes():
    return g.piecewise_rects([0.5], [(0.5, 0.5, 0.5, 0.5), (0.25, 0.25, 0.25, 0.25)])
