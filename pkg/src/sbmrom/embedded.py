"""Embedded circular obstacle: active/inactive classification and the
surrogate-boundary data needed by the shifted Neumann flux.

An element is removed (inactive) as soon as one of its vertices lies in the
closed disk, so the active region is always a union of whole, uncut
elements.  The surrogate boundary is the set of interior edges shared by an
active and an inactive element.  On every surrogate edge a two-point Gauss
rule is laid out and each quadrature point is mapped to the circle by the
closest-point projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateClassification, GeometryOutOfBounds, SingularProjection

GAUSS_2 = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


@dataclass(frozen=True)
class CircleGeometry:
    center_x: float
    radius: float
    center_y: float = 0.0

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryOutOfBounds(f"radius must be positive, got {self.radius}")

    @property
    def center(self):
        return np.array([self.center_x, self.center_y], dtype=float)

    def label(self):
        return f"R={self.radius:g};xc={self.center_x:g}"


def closest_point(geom, x_tilde):
    """Closest-point map onto the circle.

    Works on a single point or on an (n, 2) array.  Returns ``(x, d, n, tau)``:
    the boundary point, the distance vector ``x - x_tilde``, the unit normal
    pointing out of the fluid (into the disk) and the tangent ``(n_y, -n_x)``.
    """
    xt = np.asarray(x_tilde, dtype=float)
    single = xt.ndim == 1
    xt = np.atleast_2d(xt)
    c = geom.center
    rel = xt - c
    dist = np.hypot(rel[:, 0], rel[:, 1])
    if np.any(dist == 0.0):
        raise SingularProjection("closest point undefined at the circle center")
    x = c + geom.radius * rel / dist[:, None]
    d = x - xt
    n = (c - x) / geom.radius
    n /= np.hypot(n[:, 0], n[:, 1])[:, None]
    tau = np.column_stack([n[:, 1], -n[:, 0]])
    if single:
        return x[0], d[0], n[0], tau[0]
    return x, d, n, tau


class SurrogateDomain:
    """Result of classifying a mesh against an embedded circle.

    Per-edge arrays (length ``n_edges``): ``edge_nodes`` (node pair),
    ``edge_element`` (adjacent active element), ``edge_normal`` (unit,
    pointing from the active element into the removed region),
    ``edge_length``.

    Per quadrature point arrays (length ``2 * n_edges``, edge-major):
    ``qp_edge``, ``qp_shape`` (values of the two edge-node shape functions),
    ``qp_xtilde``, ``qp_x`` (mapped point on the circle), ``qp_d``,
    ``qp_n``, ``qp_tau``, ``qp_weight``.
    """

    def __init__(self, mesh, geom, element_active, node_active, edge_nodes, edge_element):
        self.mesh = mesh
        self.geometry = geom
        self.element_active = element_active
        self.node_active = node_active
        self.edge_nodes = edge_nodes
        self.edge_element = edge_element
        self._orient_edges()
        self.qp_edge = None
        surrogate_quadrature(self)
        for name, val in vars(self).items():
            if isinstance(val, np.ndarray):
                val.setflags(write=False)

    @property
    def n_edges(self):
        return len(self.edge_nodes)

    @property
    def inactive_nodes(self):
        return np.flatnonzero(~self.node_active)

    @property
    def active_nodes(self):
        return np.flatnonzero(self.node_active)

    def dof_mask(self):
        """Boolean mask over the 3*n_node state entries of active nodes."""
        return np.tile(self.node_active, 3)

    def _orient_edges(self):
        nodes = self.mesh.nodes
        a, b = nodes[self.edge_nodes[:, 0]], nodes[self.edge_nodes[:, 1]]
        t = b - a
        length = np.hypot(t[:, 0], t[:, 1])
        normal = np.column_stack([t[:, 1], -t[:, 0]]) / length[:, None]
        elem = self.mesh.elements[self.edge_element]
        centroid = nodes[elem].mean(axis=1)
        flip = np.einsum("ij,ij->i", 0.5 * (a + b) - centroid, normal) < 0
        normal[flip] *= -1.0
        self.edge_length = length
        self.edge_normal = normal

    def polyline_degree(self):
        """Number of surrogate edges incident to each node (2 on a closed loop)."""
        return np.bincount(self.edge_nodes.ravel(), minlength=self.mesh.n_node)

    def dump_csv(self, path):
        """Surrogate edges as ``x1 y1 x2 y2 nx ny`` rows, for plotting."""
        nodes = self.mesh.nodes
        rows = np.column_stack(
            [nodes[self.edge_nodes[:, 0]], nodes[self.edge_nodes[:, 1]], self.edge_normal]
        )
        np.savetxt(path, rows, fmt="%.17g", header="x1 y1 x2 y2 nx ny", comments="")


def surrogate_quadrature(sd):
    """Fill the per-quadrature-point arrays of a SurrogateDomain in place."""
    nodes = sd.mesh.nodes
    ne = sd.n_edges
    xi = np.tile(GAUSS_2, ne)
    edge = np.repeat(np.arange(ne), 2)
    a = nodes[sd.edge_nodes[edge, 0]]
    b = nodes[sd.edge_nodes[edge, 1]]
    xt = (1.0 - xi)[:, None] * a + xi[:, None] * b
    if ne:
        x, d, n, tau = closest_point(sd.geometry, xt)
    else:
        x = d = n = tau = np.empty((0, 2))
    sd.qp_edge = edge
    sd.qp_shape = np.column_stack([1.0 - xi, xi])
    sd.qp_xtilde = xt
    sd.qp_x = x
    sd.qp_d = d
    sd.qp_n = n
    sd.qp_tau = tau
    sd.qp_weight = 0.5 * sd.edge_length[edge]
    return sd


def classify(mesh, geom):
    """Split the mesh into active and inactive parts for the given circle.

    ``geom=None`` means no obstacle: every element is active.
    """
    if geom is None:
        return full_domain(mesh)
    (x0, x1), (y0, y1) = mesh.bounds
    cx, cy, r = geom.center_x, geom.center_y, geom.radius
    if not (cx - r > x0 and cx + r < x1 and cy - r > y0 and cy + r < y1):
        raise GeometryOutOfBounds(f"circle {geom} touches or crosses the outer boundary")

    rel = mesh.nodes - geom.center
    inside = np.hypot(rel[:, 0], rel[:, 1]) <= r
    element_active = ~inside[mesh.elements].any(axis=1)
    if not element_active.any():
        raise DegenerateClassification("no active element left")
    node_active = np.zeros(mesh.n_node, dtype=bool)
    node_active[mesh.elements[element_active].ravel()] = True

    owner = mesh.boundary_element_of()
    if not element_active[owner].all():
        raise GeometryOutOfBounds("removed region reaches the outer boundary")

    edges, adj = mesh.edge_topology
    interior = adj[:, 1] >= 0
    e_int, adj_int = edges[interior], adj[interior]
    act = element_active[adj_int]
    cut = act[:, 0] != act[:, 1]
    edge_nodes = e_int[cut]
    edge_element = np.where(act[cut, 0], adj_int[cut, 0], adj_int[cut, 1])

    both = act[:, 0] & act[:, 1]
    ids = np.flatnonzero(element_active)
    remap = -np.ones(mesh.n_elem, dtype=np.int64)
    remap[ids] = np.arange(len(ids))
    i, j = remap[adj_int[both, 0]], remap[adj_int[both, 1]]
    graph = coo_matrix((np.ones(len(i)), (i, j)), shape=(len(ids), len(ids)))
    ncomp, _ = connected_components(graph, directed=False)
    if ncomp != 1:
        raise DegenerateClassification(f"active region splits into {ncomp} edge-connected pieces")

    return SurrogateDomain(mesh, geom, element_active, node_active, edge_nodes, edge_element)


def full_domain(mesh):
    """Trivial classification with every element active (body-fitted channel)."""
    sd = SurrogateDomain.__new__(SurrogateDomain)
    sd.mesh = mesh
    sd.geometry = None
    sd.element_active = np.ones(mesh.n_elem, dtype=bool)
    sd.node_active = np.ones(mesh.n_node, dtype=bool)
    sd.edge_nodes = np.empty((0, 2), dtype=np.int64)
    sd.edge_element = np.empty(0, dtype=np.int64)
    sd.edge_length = np.empty(0)
    sd.edge_normal = np.empty((0, 2))
    sd.qp_edge = np.empty(0, dtype=np.int64)
    sd.qp_shape = np.empty((0, 2))
    for name in ("qp_xtilde", "qp_x", "qp_d", "qp_n", "qp_tau"):
        setattr(sd, name, np.empty((0, 2)))
    sd.qp_weight = np.empty(0)
    return sd
