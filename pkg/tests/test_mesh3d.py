import math

import numpy as np
import pytest

from thinrod import geometry as g
from thinrod import mesh3d as m


def test_counts_unit_square(unit_square):
    mesh = m.extrude_mesh(unit_square, 4, 2)
    assert mesh.n_hexes == 16
    assert mesh.n_nodes == 45 == 5 * mesh.section_nodes
    assert mesh.count_faces(m.Tag.GAMMA0) == 4
    assert mesh.count_faces(m.Tag.GAMMA1) == 4
    assert mesh.count_faces(m.Tag.LATERAL) == 4 * 4 * 2


def test_breakpoint_is_a_layer(two_boxes):
    mesh = m.extrude_mesh(two_boxes, 4, 4)
    np.testing.assert_allclose(mesh.layers, [0, 0.25, 0.5, 0.75, 1.0])


def test_refinement_error_for_close_breakpoints():
    p = g.piecewise_rects([0.05], [(0.5,) * 4, (0.25,) * 4])
    with pytest.raises(m.MeshError, match="increase"):
        m.extrude_mesh(p, 8, 4)
    m.extrude_mesh(p, 40, 4)


def test_invalid_sizes(unit_square):
    with pytest.raises(m.MeshError):
        m.extrude_mesh(unit_square, 1, 4)
    with pytest.raises(m.MeshError):
        m.extrude_mesh(unit_square, 4, 1)


def test_volumes(unit_square, two_boxes):
    assert m.mesh_volume(m.extrude_mesh(unit_square, 4, 3)) == pytest.approx(1.0, abs=1e-12)
    assert m.mesh_volume(m.extrude_mesh(two_boxes, 8, 4)) == pytest.approx(0.625, abs=1e-12)


def test_dome_volume_second_order():
    exact = 1 + 1 / math.pi
    n = np.array([8, 16, 32, 64])
    err = [abs(m.mesh_volume(m.extrude_mesh(g.preset("dome"), k, 4)) - exact) for k in n]
    rate = -np.polyfit(np.log(n), np.log(err), 1)[0]
    assert rate >= 1.9
    assert all(b < a for a, b in zip(err, err[1:]))


def test_trumpet_volume_converges():
    exact = math.pi * (0.09 + 2 * 0.09 / 3 + 0.09 / 5)     # pi * int (0.3 + 0.3 x^2)^2
    vols = [m.mesh_volume(m.extrude_mesh(g.preset("trumpet"), k, 6)) for k in (16, 32, 64)]
    err = [abs(v - exact) for v in vols]
    assert err[-1] < 1e-4
    assert err[2] < err[1] < err[0]


def test_disc_template():
    P, Q = m.disc_template(8)
    assert len(Q) == 5 * 16
    x, y = P[Q, 0], P[Q, 1]
    area = 0.5 * (x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y).sum(axis=1)
    assert np.all(area > 0)
    assert area.sum() == pytest.approx(math.pi, rel=1e-14)
    # boundary polygon on a circle slightly outside the unit circle (area-preserving scale)
    r = np.hypot(P[:, 0], P[:, 1])
    outer = r[r > 0.99 * r.max()]
    assert len(outer) == 4 * 4
    np.testing.assert_allclose(outer, outer[0], rtol=1e-12)
    assert 1.0 < outer[0] < 1.02


@pytest.mark.parametrize("name", g.PRESETS)
def test_mesh_invariants(name):
    p = g.preset(name)
    mesh = m.extrude_mesh(p, 8, 4)
    _, det, _ = m.hex_jacobians(mesh)
    assert np.all(det > 0)
    assert len(mesh.layers) == 9
    # every boundary face tagged once, Gamma faces on the end planes
    assert len(mesh.tags) == len(mesh.faces)
    key = np.sort(mesh.faces, axis=1)
    assert len(np.unique(key, axis=0)) == len(key)
    for tag, y in ((m.Tag.GAMMA0, p.l0), (m.Tag.GAMMA1, p.l1)):
        f = mesh.faces[mesh.tags == tag]
        assert len(f) > 0
        assert np.all(mesh.nodes[f, 0] == y)
    lat = mesh.faces[mesh.tags == m.Tag.LATERAL]
    assert not np.any(np.all(mesh.nodes[lat, 0] == p.l0, axis=1))
    # nodes sit on their station
    np.testing.assert_array_equal(mesh.nodes[:, 0], mesh.layers[mesh.node_layer])
    # section weights integrate the section area
    for j, (ids, w) in enumerate(mesh.layer_sections):
        assert w.sum() == pytest.approx(g.area_at(p, mesh.layers[j]), rel=1e-12)


def test_extruded_topology(unit_square):
    mesh = m.extrude_mesh(unit_square, 5, 3)
    nt = mesh.section_nodes
    first = mesh.hexes[:9]
    for c in range(1, 5):
        np.testing.assert_array_equal(mesh.hexes[9 * c:9 * (c + 1)], first + c * nt)


@pytest.mark.parametrize("n1,n_sec", [(2, 2), (6, 3), (10, 5)])
def test_tag_counts_under_refinement(unit_square, n1, n_sec):
    mesh = m.extrude_mesh(unit_square, n1, n_sec)
    assert mesh.count_faces(m.Tag.GAMMA0) == mesh.count_faces(m.Tag.GAMMA1) == n_sec ** 2
    assert mesh.count_faces(m.Tag.LATERAL) == 4 * n1 * n_sec


def test_piecewise_drops_unused_nodes(two_boxes):
    mesh = m.extrude_mesh(two_boxes, 4, 4)
    assert np.all(np.bincount(mesh.hexes.ravel(), minlength=mesh.n_nodes) > 0)
    assert m.mesh_volume(mesh) == pytest.approx(0.625, abs=1e-12)


def test_write_mesh(tmp_path, unit_square):
    mesh = m.extrude_mesh(unit_square, 4, 2)
    path = tmp_path / "mesh.txt"
    m.write_mesh(mesh, path)
    assert m.read_mesh_counts(path) == (45, 16, len(mesh.faces))
    lines = path.read_text().splitlines()
    assert len(lines) == 2 + 45 + 16 + len(mesh.faces)
    assert lines[-1].split()[0] in {"GAMMA0", "GAMMA1", "LATERAL"}


def test_shape_functions_partition_of_unity():
    rng = np.random.default_rng(1)
    for a, b, c in rng.uniform(0, 1, (10, 3)):
        N, dN = m.shape_functions(a, b, c)
        assert N.sum() == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(dN.sum(axis=0), 0.0, atol=1e-15)
    N, _ = m.shape_functions(*m.HEX_CORNERS[5])
    np.testing.assert_array_equal(N, np.eye(8)[5])
