import numpy as np
import pytest
from hypothesis import given, strategies as st

from conformal_lab.errors import BoundsError, FormatError, GeometryError
from conformal_lab.mesh import (DiscreteMap, DiskMesh, TriangleLocator, build_disk_mesh, identity_map,
                                map_from_function, read_map, read_mesh, wirtinger, write_map, write_mesh)
from conformal_lab.distortion import distortion_of
from conftest import disk

complexes = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


def test_level_zero_is_hexagonal_fan():
    m = build_disk_mesh(0)
    assert (m.n_vertices, m.n_triangles, len(m.boundary_ids)) == (7, 6, 6)


def test_level_one_counts():
    m = build_disk_mesh(1)
    assert (m.n_vertices, m.n_triangles) == (19, 24)


def test_counts_follow_subdivision_recurrence():
    prev = disk(0)
    for level in range(1, 6):
        m = disk(level)
        n_edges = len(prev.edges[0])
        assert m.n_vertices == prev.n_vertices + n_edges
        assert m.n_triangles == 4 * prev.n_triangles
        prev = m


@pytest.mark.parametrize("level", [-1, 11])
def test_level_out_of_range(level):
    with pytest.raises(BoundsError):
        build_disk_mesh(level)


@pytest.mark.parametrize("level", range(0, 6))
def test_mesh_invariants(level):
    m = disk(level)
    r = np.abs(m.vertices)
    assert np.all(np.abs(r[m.boundary_ids] - 1) <= 1e-12)
    assert np.all(r[m.interior_ids] < 1)
    assert np.all(m.signed_areas > 0)
    # boundary vertices at equally spaced angles, counterclockwise
    ang = np.unwrap(np.angle(m.vertices[m.boundary_ids]))
    steps = np.diff(ang)
    assert np.allclose(steps, 2 * np.pi / len(m.boundary_ids), atol=1e-12)


@pytest.mark.parametrize("level", range(0, 6))
def test_edge_manifold(level):
    m = disk(level)
    e = np.sort(np.concatenate([m.triangles[:, [0, 1]], m.triangles[:, [1, 2]], m.triangles[:, [2, 0]]]), axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    assert set(counts) <= {1, 2}
    assert np.sum(counts == 1) == len(m.boundary_ids)


@pytest.mark.parametrize("level", range(0, 7))
def test_area_deficit_matches_inscribed_polygon(level):
    m = disk(level)
    nb = len(m.boundary_ids)
    assert m.total_area < np.pi
    assert np.pi - m.total_area <= 2 * np.pi**3 / (3 * nb**2)
    assert m.total_area == pytest.approx(nb / 2 * np.sin(2 * np.pi / nb), rel=1e-12)


def test_edge_length_halves():
    # boundary midpoints are pushed onto the circle, so the constant settles near 1.44
    for level in range(1, 7):
        assert disk(level).max_edge_length <= 1.5 * 2.0**-level
        assert disk(level).max_edge_length < disk(level - 1).max_edge_length


def test_identity_derivatives_exact():
    m = disk(4)
    d = wirtinger(m, identity_map(m))
    assert np.max(np.abs(d.h_w - 1)) <= 1e-14
    assert np.max(np.abs(d.h_wbar)) <= 1e-14


def test_real_linear_map():
    m = disk(3)
    d = wirtinger(m, map_from_function(m, lambda z: z + 0.5 * np.conj(z)))
    assert np.allclose(d.h_w, 1, atol=1e-14) and np.allclose(d.h_wbar, 0.5, atol=1e-14)


def test_conjugation_reverses_orientation():
    m = disk(3)
    f = distortion_of(m, map_from_function(m, np.conj))
    assert np.allclose(f.J, -1, atol=1e-14)
    assert f.reversing.all()


@given(complexes, complexes, complexes)
def test_affine_maps_are_exact(a, b, c):
    m = disk(2)
    d = wirtinger(m, map_from_function(m, lambda z: a + b * z + c * np.conj(z)))
    assert np.max(np.abs(d.h_w - b)) <= 1e-13 * (1 + abs(a) + abs(b) + abs(c))
    assert np.max(np.abs(d.h_wbar - c)) <= 1e-13 * (1 + abs(a) + abs(b) + abs(c))


@given(st.integers(0, 2**32 - 1), complexes, complexes)
def test_derivatives_are_linear(seed, b, c):
    m = disk(2)
    g = np.random.default_rng(seed)
    u = g.normal(size=m.n_vertices) + 1j * g.normal(size=m.n_vertices)
    v = g.normal(size=m.n_vertices) + 1j * g.normal(size=m.n_vertices)
    du, dv = wirtinger(m, DiscreteMap(u)), wirtinger(m, DiscreteMap(v))
    dc = wirtinger(m, DiscreteMap(1.0 + b * u + c * v))
    scale = 1 + abs(b) + abs(c)
    assert np.allclose(dc.h_w, b * du.h_w + c * dv.h_w, atol=1e-11 * scale)
    assert np.allclose(dc.h_wbar, b * du.h_wbar + c * dv.h_wbar, atol=1e-11 * scale)


def test_degenerate_triangle_is_a_geometry_error():
    m = DiskMesh(np.array([0, 1, 2 + 0j]), np.array([[0, 1, 2]]), np.array([0, 1, 2]), 0)
    with pytest.raises(GeometryError):
        _ = m.areas


def test_mesh_and_map_files_round_trip(tmp_path):
    m = disk(3)
    write_mesh(m, tmp_path / "m.txt")
    m2 = read_mesh(tmp_path / "m.txt")
    assert np.array_equal(m.vertices, m2.vertices)
    assert np.array_equal(m.triangles, m2.triangles)
    assert np.array_equal(m.boundary_ids, m2.boundary_ids)
    assert m2.refinement_level == 3
    h = map_from_function(m, lambda z: z * np.exp(0.3j) + 0.1 * z**2)
    write_map(h, tmp_path / "h.txt")
    assert np.array_equal(read_map(tmp_path / "h.txt").values, h.values)
    assert (tmp_path / "m.txt").read_text().startswith(f"diskmesh v1 {m.n_vertices} {m.n_triangles} ")


def test_bad_headers(tmp_path):
    (tmp_path / "x").write_text("nonsense\n")
    with pytest.raises(FormatError):
        read_mesh(tmp_path / "x")
    with pytest.raises(FormatError):
        read_map(tmp_path / "x")


def test_locator_finds_barycenters():
    m = disk(4)
    loc = TriangleLocator(m.vertices, m.triangles)
    tri, lam = loc.locate(m.barycenters)
    assert np.array_equal(tri, np.arange(m.n_triangles))
    assert np.allclose(lam, 1 / 3)
    tri, _ = loc.locate(np.array([1.5 + 0j]))
    assert tri[0] == -1
