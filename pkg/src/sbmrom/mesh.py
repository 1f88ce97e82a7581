"""Background triangulation of the channel.

The mesh is a plain container of numpy arrays: node coordinates, counter-
clockwise element triples and tagged boundary edges.  Element areas and the
(constant) gradients of the three linear shape functions are computed once
at construction.

Text format (``save_mesh`` / ``load_mesh``)::

    TRIMESH v1 <n_node> <n_elem> <n_bedge>
    x y                # n_node lines, shortest round-trip float repr
    i j k              # n_elem lines, 0-based node indices
    i j TAG            # n_bedge lines, TAG in Left/Right/Top/Bottom
"""

from __future__ import annotations

from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InvalidDomain, InvalidMesh, ParseError

BOUNDARY_TAGS = ("Left", "Right", "Top", "Bottom")


class TriMesh:
    """Immutable linear-triangle mesh with boundary tags.

    Parameters
    ----------
    nodes : (n_node, 2) array
    elements : (n_elem, 3) int array, counter-clockwise
    boundary_edges : (n_bedge, 2) int array
    boundary_tags : sequence of str, one per boundary edge
    """

    def __init__(self, nodes, elements, boundary_edges, boundary_tags):
        self.nodes = np.ascontiguousarray(nodes, dtype=float).reshape(-1, 2)
        self.elements = np.ascontiguousarray(elements, dtype=np.int64).reshape(-1, 3)
        self.boundary_edges = np.ascontiguousarray(boundary_edges, dtype=np.int64).reshape(-1, 2)
        self.boundary_tags = np.asarray(list(boundary_tags), dtype="<U6")
        if len(self.boundary_tags) != len(self.boundary_edges):
            raise InvalidMesh("one tag per boundary edge required")
        n = len(self.nodes)
        for name, arr in (("element", self.elements), ("boundary edge", self.boundary_edges)):
            if arr.size and (arr.min() < 0 or arr.max() >= n):
                raise IndexError(f"{name} references a node index outside [0, {n})")
        bad = set(self.boundary_tags.tolist()) - set(BOUNDARY_TAGS)
        if bad:
            raise InvalidMesh(f"unknown boundary tags {sorted(bad)}")
        self.areas, self.shape_gradients = _element_geometry(self.nodes, self.elements)
        if np.any(self.areas <= 0.0):
            raise InvalidMesh("elements must have strictly positive signed area")
        for arr in (self.nodes, self.elements, self.boundary_edges, self.areas, self.shape_gradients):
            arr.setflags(write=False)

    @property
    def n_node(self):
        return len(self.nodes)

    @property
    def n_elem(self):
        return len(self.elements)

    @property
    def n_dof(self):
        return 3 * len(self.nodes)

    @property
    def bounds(self):
        lo = self.nodes.min(axis=0)
        hi = self.nodes.max(axis=0)
        return (lo[0], hi[0]), (lo[1], hi[1])

    def __eq__(self, other):
        if not isinstance(other, TriMesh):
            return NotImplemented
        return (
            np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.elements, other.elements)
            and np.array_equal(self.boundary_edges, other.boundary_edges)
            and np.array_equal(self.boundary_tags, other.boundary_tags)
        )

    __hash__ = None

    def __repr__(self):
        return f"TriMesh(n_node={self.n_node}, n_elem={self.n_elem}, n_bedge={len(self.boundary_edges)})"

    @cached_property
    def edge_topology(self):
        """Unique edges and their adjacent elements.

        Returns ``(edge_nodes, edge_elements)`` where ``edge_nodes`` is (E, 2)
        with sorted node pairs and ``edge_elements`` is (E, 2) holding the
        adjacent element ids (-1 in the second slot for boundary edges).
        """
        local = np.array([[0, 1], [1, 2], [2, 0]])
        pairs = np.sort(self.elements[:, local].reshape(-1, 2), axis=1)
        owner = np.repeat(np.arange(self.n_elem), 3)
        edges, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.ravel()
        if counts.max() > 2:
            raise InvalidMesh("an edge is shared by more than two elements")
        order = np.argsort(inverse, kind="stable")
        adj = -np.ones((len(edges), 2), dtype=np.int64)
        first = np.ones(len(order), dtype=bool)
        sorted_inv = inverse[order]
        first[1:] = sorted_inv[1:] != sorted_inv[:-1]
        adj[sorted_inv[first], 0] = owner[order][first]
        adj[sorted_inv[~first], 1] = owner[order][~first]
        return edges, adj

    @cached_property
    def inradii(self):
        x = self.nodes[self.elements]
        perimeter = sum(np.linalg.norm(x[:, (a + 1) % 3] - x[:, a], axis=1) for a in range(3))
        return 2.0 * self.areas / perimeter

    @cached_property
    def edge_lengths(self):
        edges, _ = self.edge_topology
        return np.linalg.norm(self.nodes[edges[:, 1]] - self.nodes[edges[:, 0]], axis=1)

    def boundary_element_of(self):
        """Element owning each boundary edge."""
        edges, adj = self.edge_topology
        key = {tuple(e): a for e, a in zip(edges.tolist(), adj[:, 0].tolist())}
        return np.array([key[tuple(sorted(e))] for e in self.boundary_edges.tolist()], dtype=np.int64)


def _element_geometry(nodes, elements):
    x = nodes[elements]
    x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2]
    twice_area = (x2[:, 0] - x1[:, 0]) * (x3[:, 1] - x1[:, 1]) - (x3[:, 0] - x1[:, 0]) * (x2[:, 1] - x1[:, 1])
    grads = np.empty((len(elements), 3, 2))
    grads[:, 0, 0] = x2[:, 1] - x3[:, 1]
    grads[:, 0, 1] = x3[:, 0] - x2[:, 0]
    grads[:, 1, 0] = x3[:, 1] - x1[:, 1]
    grads[:, 1, 1] = x1[:, 0] - x3[:, 0]
    grads[:, 2, 0] = x1[:, 1] - x2[:, 1]
    grads[:, 2, 1] = x2[:, 0] - x1[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        grads /= twice_area[:, None, None]
    return 0.5 * twice_area, grads


def element_geometry(mesh, element_id):
    """Area and shape-function gradients (3, 2) of one element."""
    if not 0 <= element_id < mesh.n_elem:
        raise IndexError(f"element id {element_id} out of range")
    return float(mesh.areas[element_id]), mesh.shape_gradients[element_id].copy()


def generate_channel_mesh(x_range, y_range, target_edge):
    """Structured crisscross triangulation of a rectangle.

    Each rectangular cell is cut along one diagonal; the diagonal direction
    alternates in a checkerboard and is mirrored about the horizontal
    midline, so the mesh maps onto itself under ``y -> y_mid - (y - y_mid)``
    whenever the number of cell rows is even.  Nodes are numbered row-major
    by (y, x).
    """
    (x0, x1), (y0, y1) = (tuple(map(float, x_range)), tuple(map(float, y_range)))
    if not (np.isfinite([x0, x1, y0, y1]).all() and x1 > x0 and y1 > y0):
        raise InvalidDomain(f"degenerate domain {x_range} x {y_range}")
    if not target_edge > 0:
        raise InvalidDomain("target_edge must be positive")
    nx = max(1, int(round((x1 - x0) / target_edge)))
    ny = max(1, int(round((y1 - y0) / target_edge)))

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    # mirror the y coordinates exactly so the node set is bit-symmetric
    ys = 0.5 * (ys - ys[::-1]) + 0.5 * (y0 + y1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    lower = j < (ny + 1) // 2
    mirror_j = np.where(lower, j, ny - 1 - j)
    diag = (i + mirror_j) % 2
    diag = np.where(lower, diag, 1 - diag)

    n00 = j * (nx + 1) + i
    n10 = n00 + 1
    n01 = n00 + nx + 1
    n11 = n01 + 1
    tri_a = np.where(diag[:, None] == 0, np.column_stack([n00, n10, n11]), np.column_stack([n00, n10, n01]))
    tri_b = np.where(diag[:, None] == 0, np.column_stack([n00, n11, n01]), np.column_stack([n10, n11, n01]))
    elements = np.stack([tri_a, tri_b], axis=1).reshape(-1, 3)

    row = np.arange(nx)
    col = np.arange(ny)
    bottom = np.column_stack([row, row + 1])
    right = np.column_stack([col * (nx + 1) + nx, (col + 1) * (nx + 1) + nx])
    top = np.column_stack([ny * (nx + 1) + row + 1, ny * (nx + 1) + row])[::-1]
    left = np.column_stack([(col + 1) * (nx + 1), col * (nx + 1)])[::-1]
    bedges = np.vstack([bottom, right, top, left])
    tags = ["Bottom"] * nx + ["Right"] * ny + ["Top"] * nx + ["Left"] * ny
    return TriMesh(nodes, elements, bedges, tags)


def save_mesh(mesh, path):
    path = Path(path)
    lines = [f"TRIMESH v1 {mesh.n_node} {mesh.n_elem} {len(mesh.boundary_edges)}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    lines += [f"{a} {b} {c}" for a, b, c in mesh.elements.tolist()]
    lines += [f"{a} {b} {t}" for (a, b), t in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags.tolist())]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write mesh to {path}: {exc}") from exc


def load_mesh(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read mesh from {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty mesh file", line=1)
    head = lines[0].split()
    if len(head) != 5 or head[0] != "TRIMESH" or head[1] != "v1":
        raise ParseError("expected header 'TRIMESH v1 <n_node> <n_elem> <n_bedge>'", line=1)
    try:
        n_node, n_elem, n_bedge = (int(v) for v in head[2:])
    except ValueError:
        raise ParseError("non-integer counts in header", line=1) from None
    expected = 1 + n_node + n_elem + n_bedge
    if len(lines) < expected:
        raise ParseError(f"file truncated: expected {expected} lines, found {len(lines)}", line=len(lines) + 1)

    nodes = np.empty((n_node, 2))
    elements = np.empty((n_elem, 3), dtype=np.int64)
    bedges = np.empty((n_bedge, 2), dtype=np.int64)
    tags = []
    lineno = 1
    try:
        for k in range(n_node):
            lineno += 1
            parts = lines[lineno - 1].split()
            if len(parts) != 2:
                raise ValueError("expected 'x y'")
            nodes[k] = float(parts[0]), float(parts[1])
        for k in range(n_elem):
            lineno += 1
            parts = lines[lineno - 1].split()
            if len(parts) != 3:
                raise ValueError("expected 'i j k'")
            elements[k] = [int(p) for p in parts]
        for k in range(n_bedge):
            lineno += 1
            parts = lines[lineno - 1].split()
            if len(parts) != 3 or parts[2] not in BOUNDARY_TAGS:
                raise ValueError("expected 'i j TAG'")
            bedges[k] = int(parts[0]), int(parts[1])
            tags.append(parts[2])
    except ValueError as exc:
        raise ParseError(str(exc), line=lineno) from None
    if any(line.strip() for line in lines[expected:]):
        raise ParseError("trailing content after declared records", line=expected + 1)
    return TriMesh(nodes, elements, bedges, tags)


def mirror_permutation(mesh, y_mid=None, tol=1e-12):
    """Node permutation realising ``y -> 2*y_mid - y`` or None if none exists."""
    if y_mid is None:
        (_, _), (y0, y1) = mesh.bounds
        y_mid = 0.5 * (y0 + y1)
    mirrored = mesh.nodes.copy()
    mirrored[:, 1] = 2.0 * y_mid - mirrored[:, 1]
    scale = max(1.0, float(np.abs(mesh.nodes).max()))
    key = lambda p: np.round(p / (tol * scale * 10)).astype(np.int64)
    lookup = {tuple(k): n for n, k in enumerate(key(mesh.nodes).tolist())}
    perm = [lookup.get(tuple(k)) for k in key(mirrored).tolist()]
    if any(p is None for p in perm):
        return None
    return np.array(perm, dtype=np.int64)
