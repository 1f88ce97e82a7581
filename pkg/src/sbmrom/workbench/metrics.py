"""Relative space-time Frobenius errors restricted to active nodes."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError, TimeGridMismatch

FIELDS = ("h", "hv1", "hv2")


def _field_rows(n_node, field):
    if field is None or field == "all":
        return slice(None)
    f = FIELDS.index(field) if isinstance(field, str) else int(field)
    return slice(f * n_node, (f + 1) * n_node)


def _active_rows(surrogate, n_dof, field):
    n = n_dof // 3
    mask = np.ones(n, dtype=bool) if surrogate is None else np.asarray(surrogate.node_active, dtype=bool)
    if field is None or field == "all":
        return np.tile(mask, 3)
    full = np.zeros(n_dof, dtype=bool)
    full[_field_rows(n, field)] = mask
    return full


def frobenius_norm_active(U, surrogate=None, field=None):
    """Euclidean norm over the active-node entries of one field (or all)."""
    U = np.asarray(U, dtype=float)
    rows = _active_rows(surrogate, U.shape[0], field)
    return np.sqrt(np.sum(U[rows] ** 2, axis=0))


def trapezoid_weights(times):
    t = np.asarray(times, dtype=float)
    if t.size == 1:
        return np.ones(1)
    w = np.zeros_like(t)
    dt = np.diff(t)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def spacetime_error(ref, test, surrogate=None, field="h", times=None, test_times=None, atol=1e-9):
    """Relative space-time error with trapezoidal time weights.

    ``ref`` and ``test`` are N_h x n_samples matrices (or objects exposing
    ``.states`` and ``.times``).
    """
    if hasattr(ref, "states"):
        times = ref.times if times is None else times
        ref = ref.states
    if hasattr(test, "states"):
        test_times = test.times if test_times is None else test_times
        test = test.states
    ref = np.asarray(ref, dtype=float)
    test = np.asarray(test, dtype=float)
    if ref.shape != test.shape:
        if ref.shape[0] != test.shape[0]:
            raise ShapeError(f"state sizes differ: {ref.shape[0]} vs {test.shape[0]}")
        raise TimeGridMismatch(f"{ref.shape[1]} reference samples vs {test.shape[1]} test samples")
    if times is None:
        times = np.arange(ref.shape[1], dtype=float)
    times = np.asarray(times, dtype=float)
    if test_times is not None:
        test_times = np.asarray(test_times, dtype=float)
        if test_times.shape != times.shape or np.any(np.abs(test_times - times) > atol):
            raise TimeGridMismatch("sample times differ")
    rows = _active_rows(surrogate, ref.shape[0], field)
    w = trapezoid_weights(times)
    num = np.sum((ref[rows] - test[rows]) ** 2, axis=0)
    den = np.sum(ref[rows] ** 2, axis=0)
    den_total = np.dot(w, den)
    if den_total == 0.0:
        return 0.0 if np.dot(w, num) == 0.0 else np.inf
    return float(np.sqrt(np.dot(w, num) / den_total))


def least_squares_projection(states, Phi, rows=None):
    """``Phi (Phi^T Phi)^-1 Phi^T U`` column by column.

    With a boolean ``rows`` mask the fit uses those rows of ``Phi`` and ``U``
    only (the fluid-domain degrees of freedom); the result is still lifted
    with the full ``Phi``.
    """
    Phi = np.asarray(getattr(Phi, "modes", Phi), dtype=float)
    X = np.asarray(states, dtype=float)
    if X.shape[0] != Phi.shape[0]:
        raise ShapeError(f"states have {X.shape[0]} rows, basis has {Phi.shape[0]}")
    if rows is not None:
        coef = np.linalg.lstsq(Phi[rows], X[rows], rcond=None)[0]
    else:
        coef = np.linalg.solve(Phi.T @ Phi, Phi.T @ X)
    return Phi @ coef


def projection_error(trajectory, Phi, surrogate=None, field="h", times=None, restrict=False):
    """Space-time error of the best basis approximation of a trajectory.

    ``restrict=True`` fits only the active rows of ``surrogate``, so values
    the trajectory holds at removed nodes do not enter the fit.
    """
    states = trajectory.states if hasattr(trajectory, "states") else trajectory
    if times is None:
        times = getattr(trajectory, "times", None)
    rows = None
    if restrict and surrogate is not None:
        rows = np.tile(np.asarray(surrogate.node_active, dtype=bool), 3)
    approx = least_squares_projection(states, Phi, rows)
    return spacetime_error(states, approx, surrogate, field, times)
