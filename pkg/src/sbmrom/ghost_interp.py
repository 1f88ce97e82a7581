"""Ghost-node filling with polyharmonic-spline interpolation.

Before the POD, every snapshot field is extended into the removed region:
an interpolant ``sum_k w_k phi(|x - x_k|) + sum_j b_j p_j(x)`` with
``phi(r) = (eps r)^2 log(eps r)`` is fitted to the active-node values and
evaluated at the inactive nodes.  The saddle-point matrix depends only on
the centers, so it is factored once per geometry and reused for every
snapshot and field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.spatial.distance import cdist

from .errors import DegenerateCenters, SingularSystem


def rbf_kernel(r, eps=1.0):
    """Second-order polyharmonic spline, continuous at ``r = 0``."""
    s = eps * np.asarray(r, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = s[pos] ** 2 * np.log(s[pos])
    return out if out.ndim else float(out)


def monomials(points, degree=2):
    """Rows ``p_j(x)`` for the full 2D monomial basis up to ``degree``."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    cols = []
    for total in range(degree + 1):
        for py in range(total + 1):
            cols.append(x[:, 0] ** (total - py) * x[:, 1] ** py)
    return np.column_stack(cols) if cols else np.empty((len(x), 0))


def _distances(a, b):
    return cdist(a, b)


class RbfSystem:
    """Factored saddle system for a fixed set of centers."""

    def __init__(self, centers, eps=1.0, sigma=0.0, degree=2):
        self.centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        self.eps = eps
        self.sigma = sigma
        self.degree = degree
        n = len(self.centers)
        P = monomials(self.centers, degree)
        m = P.shape[1]
        if n < m or np.linalg.matrix_rank(P) < m:
            raise DegenerateCenters(f"{n} centers do not determine a degree-{degree} polynomial")
        A = np.zeros((n + m, n + m))
        A[:n, :n] = rbf_kernel(_distances(self.centers, self.centers), eps)
        if sigma:
            A[:n, :n] += sigma ** 2 * np.eye(n)
        A[:n, n:] = P
        A[n:, :n] = P.T
        self.n_poly = m
        try:
            self._lu = la.lu_factor(A, check_finite=True)
        except (la.LinAlgError, ValueError) as exc:
            raise SingularSystem(str(exc)) from exc
        if np.any(np.diag(self._lu[0]) == 0.0):
            raise SingularSystem("saddle matrix is singular")

    def solve(self, values):
        """Weights and polynomial coefficients for one or many data columns."""
        d = np.asarray(values, dtype=float)
        rhs = np.zeros((len(self.centers) + self.n_poly,) + d.shape[1:])
        rhs[: len(self.centers)] = d
        sol = la.lu_solve(self._lu, rhs)
        if not np.all(np.isfinite(sol)):
            raise SingularSystem("non-finite interpolation coefficients")
        return sol[: len(self.centers)], sol[len(self.centers):]

    def evaluation_matrix(self, points):
        """Matrix mapping stacked ``[w; b]`` to values at ``points``."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.hstack([rbf_kernel(_distances(pts, self.centers), self.eps), monomials(pts, self.degree)])


@dataclass
class RbfInterpolant:
    centers: np.ndarray
    weights: np.ndarray
    coeffs: np.ndarray
    eps: float = 1.0
    sigma: float = 0.0
    degree: int = 2

    def __call__(self, x):
        return evaluate(self, x)


def build_interpolant(points, values, eps=1.0, sigma=0.0, degree=2):
    system = RbfSystem(points, eps, sigma, degree)
    w, b = system.solve(values)
    return RbfInterpolant(system.centers, w, b, eps, sigma, degree)


def evaluate(interp, x):
    x = np.asarray(x, dtype=float)
    pts = x.reshape(-1, 2)
    K = rbf_kernel(_distances(pts, interp.centers), interp.eps)
    out = K @ interp.weights + monomials(pts, interp.degree) @ interp.coeffs
    return float(out[0]) if x.ndim == 1 else out


class GhostFiller:
    """Reusable ghost filling for one classified geometry.

    ``centers="all"`` uses every active node; ``centers="band"`` keeps the
    active nodes within ``band_factor * R`` of the circle center.
    """

    def __init__(self, mesh, surrogate, eps=1.0, sigma=0.0, degree=2, centers="all", band_factor=3.0):
        self.n_node = mesh.n_node
        self.ghost = surrogate.inactive_nodes
        active = surrogate.active_nodes
        if centers == "band":
            geom = surrogate.geometry
            dist = np.linalg.norm(mesh.nodes[active] - geom.center, axis=1)
            active = active[dist <= band_factor * geom.radius]
        elif centers != "all":
            raise ValueError(f"unknown center selection {centers!r}")
        self.centers = active
        self.system = None
        if len(self.ghost):
            self.system = RbfSystem(mesh.nodes[active], eps, sigma, degree)
            self._E = self.system.evaluation_matrix(mesh.nodes[self.ghost])

    def fill(self, states):
        """Copy of ``states`` (flat vector or N_h x N_s matrix) with ghost
        entries of each field replaced by the interpolant."""
        S = np.array(states, dtype=float, copy=True)
        if self.system is None:
            return S
        vec = S.ndim == 1
        S2 = S.reshape(3 * self.n_node, -1)
        n = self.n_node
        for f in range(3):
            block = S2[f * n:(f + 1) * n]
            w, b = self.system.solve(block[self.centers])
            block[self.ghost] = self._E @ np.vstack([w, b])
        return S2.ravel() if vec else S2


def fill_ghost(snapshot, mesh, surrogate, **options):
    return GhostFiller(mesh, surrogate, **options).fill(snapshot)
