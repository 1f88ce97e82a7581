"""Proper orthogonal decomposition by the method of snapshots.

The correlation matrix ``C = S^T S`` uses the plain Euclidean (Frobenius)
inner product of the stacked fields, with no mass weighting.  Modes are
``phi_i = S psi_i / sqrt(lambda_i)`` for the eigenpairs of ``C`` above the
numerical rank cutoff ``1e-12 * lambda_1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EigenFailure, EmptySpectrum, ShapeError

RANK_CUTOFF = 1e-12


@dataclass
class SnapshotMatrix:
    data: np.ndarray
    meta: list = field(default_factory=list)
    interpolated: bool = False

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] < 1:
            raise ShapeError("snapshot matrix must be 2D with at least one column")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("snapshot matrix has non-finite entries")

    @property
    def n_snapshots(self):
        return self.data.shape[1]

    @classmethod
    def concatenate(cls, parts):
        parts = list(parts)
        meta = [m for p in parts for m in p.meta]
        interp = {p.interpolated for p in parts}
        if len(interp) > 1:
            raise ValueError("cannot mix interpolated and raw snapshots")
        return cls(np.hstack([p.data for p in parts]), meta, interp.pop())


@dataclass
class PodBasis:
    """Orthonormal modes (columns of ``modes``) and the full eigenvalue spectrum."""

    modes: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n_modes(self):
        return self.modes.shape[1]

    @property
    def rank(self):
        lam = self.eigenvalues
        return int(np.count_nonzero(lam > RANK_CUTOFF * lam[0])) if lam.size and lam[0] > 0 else 0

    def truncate(self, n):
        if not 0 < n <= self.n_modes:
            raise ValueError(f"cannot keep {n} of {self.n_modes} modes")
        return PodBasis(self.modes[:, :n].copy(), self.eigenvalues)

    def select(self, mu_pod):
        return self.truncate(select_modes(self.eigenvalues, mu_pod))

    def cumulative_energy(self):
        lam = np.clip(self.eigenvalues, 0.0, None)
        return np.cumsum(lam) / lam.sum()


def correlation(S):
    """``S^T S``, symmetrised so the result is exactly symmetric."""
    S = np.asarray(S, dtype=float)
    C = S.T @ S
    return 0.5 * (C + C.T)


def compute_modes(S):
    """Full POD basis of a snapshot matrix (ndarray or SnapshotMatrix)."""
    S = S.data if isinstance(S, SnapshotMatrix) else np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[1] < 1:
        raise ShapeError("need a 2D snapshot matrix with at least one column")
    C = correlation(S)
    try:
        lam, psi = np.linalg.eigh(C)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    order = np.argsort(lam, kind="stable")[::-1]
    lam = np.clip(lam[order], 0.0, None)
    psi = psi[:, order]
    if lam[0] <= 0.0:
        return PodBasis(np.zeros((S.shape[0], 0)), lam)
    keep = lam > RANK_CUTOFF * lam[0]
    modes = (S @ psi[:, keep]) / np.sqrt(lam[keep])
    # one re-orthonormalisation pass removes the round-off of the snapshot
    # formula for the trailing, poorly separated eigenvalues
    modes, r = np.linalg.qr(modes)
    modes *= np.sign(np.diag(r))
    idx = np.argmax(np.abs(modes), axis=0)
    modes *= np.sign(modes[idx, np.arange(modes.shape[1])])
    return PodBasis(modes, lam)


def select_modes(eigenvalues, mu_pod):
    """Smallest n whose leading eigenvalues hold at least ``mu_pod`` of the energy."""
    if not 0.0 < mu_pod <= 1.0:
        raise ValueError("mu_pod must lie in (0, 1]")
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size == 0 or lam.max() <= 0.0:
        raise EmptySpectrum("spectrum has no positive eigenvalue")
    lam = np.sort(lam)[::-1]
    lam = lam[lam > RANK_CUTOFF * lam[0]]
    if mu_pod >= 1.0:
        return len(lam)
    frac = np.cumsum(lam) / lam.sum()
    return min(int(np.searchsorted(frac, mu_pod, side="left")) + 1, len(lam))


def project(modes, U):
    Phi = np.asarray(modes.modes if isinstance(modes, PodBasis) else modes)
    U = np.asarray(U, dtype=float)
    if U.shape[0] != Phi.shape[0]:
        raise ShapeError(f"state has {U.shape[0]} rows, basis has {Phi.shape[0]}")
    return Phi.T @ U


def lift(modes, a):
    Phi = np.asarray(modes.modes if isinstance(modes, PodBasis) else modes)
    a = np.asarray(a, dtype=float)
    if a.shape[0] != Phi.shape[1]:
        raise ShapeError(f"{a.shape[0]} coefficients for {Phi.shape[1]} modes")
    return Phi @ a


def write_spectrum_csv(eigenvalues, path):
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    cum = np.cumsum(lam) / lam.sum() if lam.sum() > 0 else np.zeros_like(lam)
    with open(path, "w") as fh:
        fh.write("i,lambda,cumulative_energy\n")
        for i, (l, c) in enumerate(zip(lam, cum), start=1):
            fh.write(f"{i},{l:.17g},{c:.17g}\n")
