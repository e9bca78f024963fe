import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from romkit.exceptions import InvalidMeshError
from romkit.ffd import (
    FfdLattice,
    bernstein,
    bernstein_derivative,
    element_quality,
    from_parameters,
    morph_mesh,
    read_mesh,
    read_mesh_csv,
    write_mesh,
)
from romkit.fom.mesh import TriMesh, disk_mesh, unit_square_mesh


def _lattice(rng, degrees=(2, 3, 2), scale=0.05):
    lat = FfdLattice(rng.normal(size=3), rng.uniform(0.5, 2.0, size=3), degrees)
    return lat, scale * rng.normal(size=lat.displacements.shape)


@given(st.integers(0, 8), st.lists(st.floats(0, 1), min_size=1, max_size=20))
def test_bernstein_partition_of_unity(n, s):
    B = bernstein(n, np.array(s))
    np.testing.assert_allclose(B.sum(axis=1), 1.0, atol=1e-14)
    assert np.all(B >= 0)
    np.testing.assert_allclose(bernstein_derivative(n, np.array(s)).sum(axis=1), 0.0, atol=1e-11)


def test_bernstein_derivative_matches_finite_difference():
    s = np.linspace(0.05, 0.95, 7)
    h = 1e-6
    fd = (bernstein(4, s + h) - bernstein(4, s - h)) / (2 * h)
    np.testing.assert_allclose(bernstein_derivative(4, s), fd, atol=1e-8)


def test_zero_displacement_is_bitwise_identity(rng):
    lat = FfdLattice(np.zeros(3), np.ones(3))
    pts = rng.uniform(-0.5, 1.5, size=(50, 3))
    out = lat.morph(pts)
    assert np.array_equal(out, pts)
    assert out is not pts


def test_tensor_weights_partition_of_unity(rng):
    lat, _ = _lattice(rng)
    W = lat.weights(rng.uniform(size=(30, 3)))
    np.testing.assert_allclose(W.sum(axis=(1, 2, 3)), 1.0, atol=1e-14)


def test_affine_reproduction(rng):
    lat = FfdLattice(np.array([-1.0, 0.0, 0.5]), np.array([2.0, 1.5, 1.0]), (3, 2, 2))
    A = np.eye(3) + 0.1 * rng.normal(size=(3, 3))
    b = rng.normal(size=3)
    P = lat.control_points()
    moved = FfdLattice(lat.origin, lat.extents, lat.degrees, displacements=P @ A.T + b - P)
    pts = lat.origin + rng.uniform(size=(40, 3)) * lat.extents
    np.testing.assert_allclose(moved.morph(pts), pts @ A.T + b, atol=1e-12)


def test_points_outside_box_untouched(rng):
    lat, disp = _lattice(rng)
    lat = FfdLattice(lat.origin, lat.extents, lat.degrees, displacements=disp)
    outside = lat.origin - 1.0 - rng.uniform(size=(10, 3))
    assert np.array_equal(lat.morph(outside), outside)


def test_default_active_freezes_shell_and_is_continuous(rng):
    lat = FfdLattice(np.zeros(3), np.ones(3), (3, 3, 3))
    assert lat.n_parameters == 2 * 2 * 2 * 3
    moved = from_parameters(lat, 0.05 * rng.normal(size=lat.n_parameters))
    face = np.column_stack([np.zeros(20), rng.uniform(size=(20, 2))])
    np.testing.assert_allclose(moved.morph(face), face, atol=1e-15)


def test_shell_activation_warns():
    with pytest.warns(RuntimeWarning, match="shell"):
        FfdLattice(np.zeros(3), np.ones(3), (2, 2, 2), active=[(0, 1, 1, 0)])


def test_registry_order_and_checksum():
    lat = FfdLattice.planar((0, 0), (1, 1), (2, 2))
    assert lat.dof_registry() == ["P[1,1,0].x", "P[1,1,0].y"]
    with pytest.raises(ValueError, match="checksum"):
        from_parameters(lat, [0.1, 0.0], checksum="0" * 64)
    moved = from_parameters(lat, [0.1, -0.2], checksum=lat.registry_checksum())
    np.testing.assert_allclose(moved.displacements[1, 1, 0], [0.1, -0.2, 0.0])
    with pytest.raises(ValueError, match="expected 2"):
        from_parameters(lat, [0.1])


def test_jacobian_matches_finite_differences(rng):
    lat, disp = _lattice(rng)
    lat = FfdLattice(lat.origin, lat.extents, lat.degrees, displacements=disp)
    x = lat.origin + rng.uniform(0.2, 0.8, size=(1, 3)) * lat.extents
    h = 1e-6
    fd = np.column_stack([(lat.morph(x + h * e) - lat.morph(x - h * e))[0] / (2 * h) for e in np.eye(3)])
    np.testing.assert_allclose(lat.jacobian(x)[0], fd, atol=1e-8)
    assert lat.check_injective()


def test_planar_morph_keeps_2d_points(rng):
    lat = from_parameters(FfdLattice.planar((-1.1, -1.1), (2.2, 2.2)), [0.3, -0.2])
    pts = rng.uniform(-1, 1, size=(10, 2))
    out = lat.morph(pts)
    assert out.shape == (10, 2)
    assert not np.allclose(out, pts)


def test_inverted_element_is_detected():
    mesh = unit_square_mesh(4)
    lat = FfdLattice.planar((-0.05, -0.05), (1.1, 1.1), (2, 2))
    ok, report = morph_mesh(from_parameters(lat, [0.1, 0.1]), mesh)
    assert report["min_quality"] > 0 and report["elements"] == len(mesh.triangles)
    # dragging the centre far past the box folds the lattice over itself
    with pytest.raises(InvalidMeshError) as info:
        morph_mesh(from_parameters(lat, [2.0, 0.0]), mesh)
    assert len(info.value.elements) > 0
    assert not from_parameters(lat, [2.0, 0.0]).check_injective()


def test_3d_surface_quality_flags_flipped_normals():
    ref = TriMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]]), np.array([[0, 1, 2]]))
    flipped = TriMesh(np.array([[0, 0, 0], [0, 1, 0], [1, 0, 0.0]]), np.array([[0, 1, 2]]))
    assert element_quality(ref, ref)[0] > 0
    assert element_quality(flipped, ref)[0] < 0


def test_mesh_io_round_trip(tmp_path):
    mesh = disk_mesh(3)
    write_mesh(tmp_path / "m.txt", mesh)
    back = read_mesh(tmp_path / "m.txt", planar=True)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)
    (tmp_path / "m.csv").write_text("v,0,0,0\nv,1,0,0\nv,0,1,0\nt,0,1,2\n")
    tri = read_mesh_csv(tmp_path / "m.csv", planar=True)
    assert tri.triangles.tolist() == [[0, 1, 2]]
    (tmp_path / "bad.txt").write_text("3\n0 0 0\n")
    with pytest.raises(ValueError, match="malformed"):
        read_mesh(tmp_path / "bad.txt")
