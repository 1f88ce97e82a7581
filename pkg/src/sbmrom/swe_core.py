"""Pointwise shallow-water physics on conserved states ``U = (h, h v1, h v2)``.

All functions are vectorised over leading axes: ``U`` has shape ``(..., 3)``.
Heights below ``h_min`` are clamped before any division; each clamped entry
is counted in ``DIAGNOSTICS["h_clamped"]``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np

DIAGNOSTICS = Counter()


@dataclass(frozen=True)
class PhysicsParams:
    """Gravity, bed slope, Manning friction and the dry-state clamp.

    ``bed_gradient`` is either a constant 2-vector or a callable mapping an
    ``(n, 2)`` array of points to ``(n, 2)`` gradients of the bathymetry ``z``.
    """

    g: float = 9.81
    bed_gradient: Optional[object] = None
    manning: float = 0.0
    h_min: float = 1e-8

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError("gravity must be positive")
        if self.manning < 0:
            raise ValueError("Manning coefficient must be non-negative")

    @property
    def has_source(self):
        if self.manning > 0:
            return True
        if self.bed_gradient is None:
            return False
        if callable(self.bed_gradient):
            return True
        return bool(np.any(np.asarray(self.bed_gradient, dtype=float) != 0.0))

    def grad_z(self, x):
        x = np.asarray(x, dtype=float)
        if self.bed_gradient is None:
            return np.zeros(x.shape[:-1] + (2,))
        if callable(self.bed_gradient):
            return np.asarray(self.bed_gradient(x), dtype=float)
        return np.broadcast_to(np.asarray(self.bed_gradient, dtype=float), x.shape[:-1] + (2,))


def _split(U, h_min):
    U = np.asarray(U, dtype=float)
    h = U[..., 0]
    clamped = h < h_min
    n = int(np.count_nonzero(clamped))
    if n:
        DIAGNOSTICS["h_clamped"] += n
        h = np.where(clamped, h_min, h)
    return U, h, U[..., 1] / h, U[..., 2] / h


def velocity(U, h_min=1e-8):
    _, _, v1, v2 = _split(U, h_min)
    return np.stack([v1, v2], axis=-1)


def flux(U, g=9.81, h_min=1e-8):
    """Flux tensor with shape ``(..., 2, 3)``: ``F[..., 0, :]`` is the x-flux."""
    U, _, v1, v2 = _split(U, h_min)
    h, q1, q2 = U[..., 0], U[..., 1], U[..., 2]
    p = 0.5 * g * h * h
    F = np.empty(U.shape[:-1] + (2, 3))
    F[..., 0, 0] = q1
    F[..., 0, 1] = q1 * v1 + p
    F[..., 0, 2] = q1 * v2
    F[..., 1, 0] = q2
    F[..., 1, 1] = q2 * v1
    F[..., 1, 2] = q2 * v2 + p
    return F


def jacobians(U, g=9.81, h_min=1e-8):
    """Flux Jacobians ``(A1, A2)``, each of shape ``(..., 3, 3)``."""
    U, h, v1, v2 = _split(U, h_min)
    shape = U.shape[:-1] + (3, 3)
    A1 = np.zeros(shape)
    A2 = np.zeros(shape)
    gh = g * U[..., 0]
    A1[..., 0, 1] = 1.0
    A1[..., 1, 0] = gh - v1 * v1
    A1[..., 1, 1] = 2.0 * v1
    A1[..., 2, 0] = -v1 * v2
    A1[..., 2, 1] = v2
    A1[..., 2, 2] = v1
    A2[..., 0, 2] = 1.0
    A2[..., 1, 0] = -v1 * v2
    A2[..., 1, 1] = v2
    A2[..., 1, 2] = v1
    A2[..., 2, 0] = gh - v2 * v2
    A2[..., 2, 2] = 2.0 * v2
    return A1, A2


def a0(U, h_min=1e-8):
    """Jacobian dU/dY of conserved w.r.t. primitive variables (h, v1, v2)."""
    U, h, v1, v2 = _split(U, h_min)
    M = np.zeros(U.shape[:-1] + (3, 3))
    M[..., 0, 0] = 1.0
    M[..., 1, 0] = v1
    M[..., 1, 1] = h
    M[..., 2, 0] = v2
    M[..., 2, 2] = h
    return M


def a0_inverse(U, h_min=1e-8):
    U, h, v1, v2 = _split(U, h_min)
    inv_h = 1.0 / h
    M = np.zeros(U.shape[:-1] + (3, 3))
    M[..., 0, 0] = 1.0
    M[..., 1, 0] = -v1 * inv_h
    M[..., 1, 1] = inv_h
    M[..., 2, 0] = -v2 * inv_h
    M[..., 2, 2] = inv_h
    return M


def source(U, params=None, x=None):
    """Source vector ``Z = (0, S1, S2)`` with bed slope and Manning friction.

    ``x`` (points, shape ``(..., 2)``) is only needed for a spatially varying
    bed gradient.
    """
    params = params or PhysicsParams()
    U, h, v1, v2 = _split(U, params.h_min)
    Z = np.zeros(U.shape)
    if not params.has_source:
        return Z
    if params.bed_gradient is None:
        gz = np.zeros(U.shape[:-1] + (2,))
    else:
        pts = np.zeros(U.shape[:-1] + (2,)) if x is None else x
        gz = params.grad_z(pts)
    s_o1, s_o2 = -gz[..., 0], -gz[..., 1]
    if params.manning > 0:
        speed = np.sqrt(v1 * v1 + v2 * v2)
        fric = params.manning ** 2 * speed * h ** (-4.0 / 3.0)
        s_f1, s_f2 = fric * v1, fric * v2
    else:
        s_f1 = s_f2 = 0.0
    gh = params.g * U[..., 0]
    Z[..., 1] = gh * (s_o1 - s_f1)
    Z[..., 2] = gh * (s_o2 - s_f2)
    return Z


def wave_speed(U, g=9.81, h_min=1e-8):
    """Maximum characteristic speed ``|v| + sqrt(g h)``."""
    U, h, v1, v2 = _split(U, h_min)
    return np.sqrt(v1 * v1 + v2 * v2) + np.sqrt(g * h)
