import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbmrom.errors import InvalidDomain, InvalidMesh, ParseError
from sbmrom.mesh import (
    TriMesh,
    element_geometry,
    generate_channel_mesh,
    load_mesh,
    mirror_permutation,
    save_mesh,
)


def test_fine_mesh_counts_within_15_percent(fine_mesh):
    # node count of a comparable unstructured mesh of this size
    assert abs(fine_mesh.n_node - 5419) / 5419 <= 0.15
    assert abs(fine_mesh.n_elem - 10476) / 10476 <= 0.15
    nx, ny = 150, 30
    assert fine_mesh.n_node == (nx + 1) * (ny + 1)


def test_minimal_cell():
    m = generate_channel_mesh((0.0, 1.0), (0.0, 1.0), 1.0)
    assert m.n_node == 4
    assert m.n_elem >= 2
    assert np.all(m.areas > 0)
    assert np.isclose(m.areas.sum(), 1.0)


@pytest.mark.parametrize("rng", [((1.0, 1.0), (0.0, 1.0)), ((0.0, 1.0), (2.0, 1.0))])
def test_degenerate_range(rng):
    with pytest.raises(InvalidDomain):
        generate_channel_mesh(*rng, 0.1)


def test_nonpositive_edge():
    with pytest.raises(InvalidDomain):
        generate_channel_mesh((0, 1), (0, 1), 0.0)


def test_gradients_partition_of_unity(medium_mesh):
    assert np.abs(medium_mesh.shape_gradients.sum(axis=1)).max() <= 1e-14 * 20


def test_right_triangle_geometry(unit_triangle):
    area, grads = element_geometry(unit_triangle, 0)
    assert area == 0.5
    np.testing.assert_allclose(grads, [[-1, -1], [1, 0], [0, 1]], atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_scaling_law(coords):
    p = np.array(coords).reshape(3, 2)
    cross = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0])
    if abs(cross) < 1e-3:
        return
    if cross < 0:
        p = p[[0, 2, 1]]
    edges = np.array([[0, 1], [1, 2], [2, 0]])
    tags = np.array(["Bottom", "Right", "Left"])
    m1 = TriMesh(p, [[0, 1, 2]], edges, tags)
    m2 = TriMesh(2 * p, [[0, 1, 2]], edges, tags)
    a1, g1 = element_geometry(m1, 0)
    a2, g2 = element_geometry(m2, 0)
    assert np.isclose(a2, 4 * a1, rtol=1e-12)
    np.testing.assert_allclose(g2, 0.5 * g1, rtol=1e-10, atol=1e-12)
    assert np.abs(g1.sum(axis=0)).max() <= 1e-10 * np.abs(g1).max()
    # N_a is linear with N_a(x_b) = delta_ab, so grad N_a . (x_b - x_c) = delta_ab - delta_ac
    for a in range(3):
        for b in range(3):
            c = (b + 1) % 3
            assert np.isclose(g1[a] @ (p[b] - p[c]), float(a == b) - float(a == c), atol=1e-9)


def test_element_id_bounds(unit_triangle):
    with pytest.raises(IndexError):
        element_geometry(unit_triangle, 1)


def test_inverted_element_rejected():
    with pytest.raises(InvalidMesh):
        TriMesh([[0, 0], [1, 0], [0, 1]], [[0, 2, 1]], [[0, 1]], ["Bottom"])


def test_unknown_tag_rejected():
    with pytest.raises(InvalidMesh):
        TriMesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], [[0, 1]], ["Side"])


def test_round_trip_small(tmp_path):
    m = generate_channel_mesh((0.0, 1.0), (0.0, 1.0), 1.0)
    save_mesh(m, tmp_path / "m.txt")
    assert load_mesh(tmp_path / "m.txt") == m


def test_round_trip_fine(fine_mesh, tmp_path):
    p = tmp_path / "fine.txt"
    save_mesh(fine_mesh, p)
    back = load_mesh(p)
    assert back == fine_mesh
    assert np.array_equal(back.nodes, fine_mesh.nodes)
    n_lines = len(p.read_text().splitlines())
    assert n_lines == 1 + fine_mesh.n_node + fine_mesh.n_elem + len(fine_mesh.boundary_edges)
    assert p.read_text().startswith(f"TRIMESH v1 {fine_mesh.n_node} {fine_mesh.n_elem} ")


def test_bad_index_in_file(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("TRIMESH v1 3 1 1\n0 0\n1 0\n0 1\n0 1 3\n0 1 Bottom\n")
    with pytest.raises(IndexError):
        load_mesh(p)


def test_parse_error_has_line(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("TRIMESH v1 3 1 1\n0 0\n1 zero\n0 1\n0 1 2\n0 1 Bottom\n")
    with pytest.raises(ParseError, match="line 3"):
        load_mesh(p)


def test_bad_header(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("MESH 3 1 1\n")
    with pytest.raises(ParseError, match="line 1"):
        load_mesh(p)


def test_mirror_symmetry(medium_mesh):
    perm = mirror_permutation(medium_mesh)
    assert perm is not None
    np.testing.assert_allclose(medium_mesh.nodes[perm, 1], -medium_mesh.nodes[:, 1], atol=1e-14)
    elems = {tuple(sorted(e)) for e in medium_mesh.elements.tolist()}
    mapped = {tuple(sorted(perm[e])) for e in medium_mesh.elements}
    assert elems == mapped


def test_edge_incidence(medium_mesh):
    edges, adj = medium_mesh.edge_topology
    n_boundary = np.count_nonzero(adj[:, 1] < 0)
    n_interior = len(edges) - n_boundary
    assert n_boundary + 2 * n_interior == 3 * medium_mesh.n_elem
    assert n_boundary == len(medium_mesh.boundary_edges)


def test_inradius_of_fine_cells(fine_mesh):
    # right isoceles triangle with legs 0.02
    assert np.allclose(fine_mesh.inradii, 0.02 * (2 - np.sqrt(2)) / 2, rtol=1e-9)


def test_mesh_is_immutable(medium_mesh):
    with pytest.raises(ValueError):
        medium_mesh.nodes[0, 0] = 1.0
