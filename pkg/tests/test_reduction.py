import numpy as np
import pytest

from thinrod import geometry as g
from thinrod import reduction as r
from thinrod.fem import assemble_mass
from thinrod.harness import RodProblem
from thinrod.limit1d import Mode1D, weighted_mass
from thinrod.mesh3d import extrude_mesh


def station_mode(mesh, func):
    return Mode1D.from_function(func, mesh.layers)


def normalized(profile, f):
    n = np.sqrt(f.values @ (weighted_mass(profile, f.grid) @ f.values))
    return Mode1D(f.grid, f.values / n, 1.0)


def test_extend_constant(unit_square):
    mesh = extrude_mesh(unit_square, 4, 3)
    u = r.extend(station_mode(mesh, lambda y: 1.0), mesh)
    np.testing.assert_array_equal(u.values, 1.0)


def test_extend_linear(unit_square):
    mesh = extrude_mesh(unit_square, 4, 2)
    u = r.extend(station_mode(mesh, lambda y: y), mesh)
    np.testing.assert_array_equal(u.values, mesh.nodes[:, 0])


def test_extend_interpolates_and_checks_cover(unit_square):
    mesh = extrude_mesh(unit_square, 4, 2)
    fine = Mode1D.from_function(lambda y: 2 * y, np.linspace(0, 1, 13))
    np.testing.assert_allclose(r.extend(fine, mesh).values, 2 * mesh.nodes[:, 0], atol=1e-15)
    short = Mode1D.from_function(lambda y: y, np.linspace(0, 0.5, 5))
    with pytest.raises(r.ReductionError):
        r.extend(short, mesh)


def test_field_length_checked(unit_square):
    mesh = extrude_mesh(unit_square, 2, 2)
    with pytest.raises(r.ReductionError):
        r.Field3D(np.zeros(3), mesh)


def test_isometry_dome_sine():
    p = g.preset("dome")
    mesh = extrude_mesh(p, 1024, 2)
    f = station_mode(mesh, lambda y: np.sin(np.pi * y))
    lhs = r.l2_norm(r.extend(f, mesh)) ** 2
    rhs = f.values @ (weighted_mass(p, mesh.layers) @ f.values)
    assert abs(lhs - rhs) <= 1e-6
    # both approach int (1 + sin/2) sin^2 = 1/2 + 2/(3 pi)
    assert lhs == pytest.approx(0.5 + 2 / (3 * np.pi), abs=5e-6)


@pytest.mark.parametrize("name", g.PRESETS)
def test_average_of_extension_is_identity(name):
    mesh = extrude_mesh(g.preset(name), 8, 4)
    f = station_mode(mesh, lambda y: np.cos(3 * y) + y)
    avg = r.section_average(r.extend(f, mesh))
    np.testing.assert_allclose(avg.values, f.values, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(avg.grid, mesh.layers)


@pytest.mark.parametrize("name", ["constant", "dome", "trumpet"])
def test_average_of_odd_field_vanishes(name):
    mesh = extrude_mesh(g.preset(name), 6, 4)
    u = r.Field3D(mesh.nodes[:, 1] * (1 + mesh.nodes[:, 0]), mesh)
    np.testing.assert_allclose(r.section_average(u).values, 0.0, atol=1e-12)


def test_first_mode_average_is_sine(unit_square):
    prob = RodProblem(unit_square, "mixed", 64, 4)
    u = prob.solve(0.2, 1).fields[0]
    avg = r.section_average(u)
    ref = normalized(unit_square, Mode1D.from_function(lambda y: np.sin(np.pi * y), avg.grid))
    e = avg.values - ref.values
    assert np.sqrt(e @ weighted_mass(unit_square, avg.grid) @ e) < 1e-3
    assert r.mode_distance(u, ref, mass=prob.M) < 1e-3


def test_mode_distance_examples(unit_square):
    mesh = extrude_mesh(unit_square, 16, 2)
    M = assemble_mass(mesh)
    f = normalized(unit_square, station_mode(mesh, lambda y: np.sin(np.pi * y)))
    fe = r.extend(f, mesh)
    assert r.mode_distance(fe, f, M) <= 1e-12
    assert r.mode_distance(r.Field3D(-fe.values, mesh), f, M) <= 1e-12
    # unit field orthogonal to extend(f): odd in y2
    v = mesh.nodes[:, 1] * np.sin(np.pi * mesh.nodes[:, 0])
    v /= np.sqrt(v @ M @ v)
    assert abs(v @ M @ fe.values) < 1e-12
    assert r.mode_distance(r.Field3D(v, mesh), f, M) == pytest.approx(np.sqrt(2), abs=1e-10)


def test_subspace_distance_examples(unit_square):
    mesh = extrude_mesh(unit_square, 16, 2)
    M = assemble_mass(mesh)
    f = normalized(unit_square, station_mode(mesh, lambda y: np.sin(np.pi * y)))
    fe = r.extend(f, mesh)
    v = mesh.nodes[:, 1] * np.sin(np.pi * mesh.nodes[:, 0])
    v = r.Field3D(v / np.sqrt(v @ M @ v), mesh)
    assert r.subspace_distance([fe], f, M) <= 1e-12
    assert r.subspace_distance([fe, v], f, M) <= 1e-12
    assert r.subspace_distance(v, f, M) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(r.ReductionError):
        r.subspace_distance([fe, fe], f, M)
    with pytest.raises(r.ReductionError):
        r.subspace_distance([], f, M)


def test_pythagoras(unit_square):
    prob = RodProblem(g.preset("dome"), "mixed", 16, 4)
    u = prob.solve(0.3, 1).fields[0]
    f = normalized(g.preset("dome"), station_mode(prob.mesh, lambda y: y * (1 - y)))
    fe = r.extend(f, prob.mesh).values
    c = u.values @ prob.M @ fe
    d = r.subspace_distance([u], f, prob.M)
    assert d ** 2 + c ** 2 == pytest.approx(fe @ prob.M @ fe, abs=1e-10)
    md = r.mode_distance(u, f, prob.M)
    assert md ** 2 == pytest.approx(1 + fe @ prob.M @ fe - 2 * abs(c), abs=1e-10)


def test_align_sign(unit_square):
    mesh = extrude_mesh(unit_square, 8, 2)
    u = r.Field3D(-np.sin(np.pi * mesh.nodes[:, 0]), mesh)
    a = r.align_sign(u)
    assert r.section_average(a).values[1] > 0
    np.testing.assert_array_equal(r.align_sign(a).values, a.values)


def test_extension_matrix(two_boxes):
    mesh = extrude_mesh(two_boxes, 8, 4)
    E = r.extension_matrix(mesh)
    f = station_mode(mesh, np.exp)
    np.testing.assert_array_equal(E @ f.values, r.extend(f, mesh).values)
