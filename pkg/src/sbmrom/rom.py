"""POD-Galerkin reduced model marched with the same predictor/multi-corrector
scheme as the full model.

Each corrector solves ``M_r (a^(k+1) - a^n) = -dt Phi^T R(Phi (a^n + a^(k)) / 2)``
where ``R`` is the full residual assembled on the online geometry and
``M_r = Phi^T M Phi`` is factored once.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la

from .embedded import classify
from .errors import EmptyBasis, NumericalBlowup, ShapeError, SingularReducedMass
from .fom import FomConfig, FomOperator, background_mass, time_schedule, sample_steps
from .pod import PodBasis

log = logging.getLogger(__name__)

BLOWUP_FACTOR = 1e6


def _as_matrix(basis):
    Phi = basis.modes if isinstance(basis, PodBasis) else basis
    Phi = np.asarray(Phi, dtype=float)
    if Phi.ndim != 2 or Phi.shape[1] == 0:
        raise EmptyBasis("reduced basis has no modes")
    return Phi


class RomOperator:
    """Reduced operator for one online geometry.

    ``ghost_mass`` sets the diagonal mass used for inactive nodes when
    forming ``M_r``: ``"zero"`` restricts ``M_r`` to the fluid domain,
    ``"background"`` takes the lumped mass those nodes have on the full
    background mesh, ``"unit"`` keeps the full model's pinning value 1.

    With ``"zero"`` a basis can carry directions that live only on removed
    nodes (the canonical basis, for one).  ``M_r`` is then singular, but the
    reduced residual has no component along those directions, so the
    minimum-norm solve keeps them frozen exactly as the full model does.
    """

    def __init__(self, basis, mesh, geometry, config=None, surrogate=None, ghost_mass="zero"):
        self.Phi = _as_matrix(basis)
        if self.Phi.shape[0] != mesh.n_dof:
            raise ShapeError(f"basis has {self.Phi.shape[0]} rows, mesh needs {mesh.n_dof}")
        self.config = config or FomConfig()
        self.geometry = geometry
        self.surrogate = surrogate if surrogate is not None else classify(mesh, geometry)
        self.fom = FomOperator(mesh, self.surrogate, self.config)
        mass = self.fom.mass.copy()
        ghost = ~self.fom.dof_active
        if ghost_mass == "zero":
            mass[ghost] = 0.0
        elif ghost_mass == "background":
            mass[ghost] = background_mass(mesh)[ghost]
        elif ghost_mass != "unit":
            raise ValueError(f"unknown ghost_mass {ghost_mass!r}")
        self.mass = mass
        Mr = self.Phi.T @ (mass[:, None] * self.Phi)
        self.Mr = 0.5 * (Mr + Mr.T)
        self._chol = None
        self._pinv = None
        try:
            self._chol = la.cho_factor(self.Mr)
        except la.LinAlgError as exc:
            if ghost_mass != "zero":
                raise SingularReducedMass(str(exc)) from exc
            self._pinv = self._pseudo_inverse(self.Mr)

    @staticmethod
    def _pseudo_inverse(Mr):
        lam, V = np.linalg.eigh(Mr)
        if lam.size == 0 or lam[-1] <= 0.0:
            raise SingularReducedMass("reduced mass matrix has no positive eigenvalue")
        keep = lam > 1e-12 * lam[-1]
        log.info("reduced mass is singular; %d of %d directions frozen", np.count_nonzero(~keep), lam.size)
        return V[:, keep], lam[keep]

    @property
    def n_modes(self):
        return self.Phi.shape[1]

    def solve_mass(self, rhs):
        if self._chol is not None:
            return la.cho_solve(self._chol, rhs)
        V, lam = self._pinv
        return V @ ((V.T @ rhs) / lam)

    def reduced_residual(self, a, dt, dadt=None):
        dudt = None if dadt is None else self.Phi @ dadt
        return self.Phi.T @ self.fom.residual(self.Phi @ a, dt, dudt)

    def step(self, a_n, dt, n_pmc=None):
        return rom_step(self, a_n, dt, n_pmc)


def build_rom(basis, mesh, geometry, config=None, **kwargs):
    return RomOperator(basis, mesh, geometry, config, **kwargs)


def initial_coeffs(basis, U0):
    Phi = _as_matrix(basis)
    U0 = np.asarray(U0, dtype=float)
    if U0.shape[0] != Phi.shape[0]:
        raise ShapeError(f"state has {U0.shape[0]} rows, basis has {Phi.shape[0]}")
    return Phi.T @ U0


def rom_step(op, a_n, dt, n_pmc=None):
    n_pmc = op.config.n_pmc if n_pmc is None else n_pmc
    if n_pmc < 1:
        raise ValueError("n_pmc must be >= 1")
    time_term = op.config.vms_time_term
    a_k = a_n
    for _ in range(n_pmc):
        dadt = (a_k - a_n) / dt if time_term else None
        r = op.reduced_residual(0.5 * (a_n + a_k), dt, dadt)
        a_k = a_n - dt * op.solve_mass(r)
    return a_k


@dataclass
class RomTrajectory:
    coeffs: np.ndarray  # (n_modes, n_samples)
    states: np.ndarray  # reconstructed, (N_h, n_samples)
    steps: np.ndarray
    times: np.ndarray
    wall_time: float = 0.0
    failed: bool = False
    failure: Optional[str] = None
    failed_step: Optional[int] = None
    n_steps: int = 0

    def write_csv(self, path):
        with open(path, "w") as fh:
            n = self.coeffs.shape[0]
            fh.write("step,t," + ",".join(f"a_{i}" for i in range(1, n + 1)) + "\n")
            for k, (s, t) in enumerate(zip(self.steps, self.times)):
                fh.write(f"{s},{t:.17g}," + ",".join(f"{v:.17g}" for v in self.coeffs[:, k]) + "\n")


def run_rom(op, T=None, dts=None, n_freq=1, include_initial=True, U0=None, raise_on_blowup=False):
    """March the reduced model; ``dts`` defaults to a fixed-step schedule.

    On blow-up the partial trajectory is returned with ``failed=True``
    unless ``raise_on_blowup`` is set.
    """
    cfg = op.config
    if dts is None:
        T = cfg.T if T is None else T
        if cfg.dt is None:
            raise ValueError("the reduced model needs a fixed dt or an explicit schedule")
        dts = time_schedule(T, cfg.dt)
    dts = np.asarray(dts, dtype=float)
    U0 = op.fom.initial_state() if U0 is None else U0
    a = initial_coeffs(op.Phi, U0)
    ref_norm = max(np.linalg.norm(a), np.finfo(float).tiny)
    record = set(sample_steps(len(dts), n_freq, include_initial))

    coeffs, steps, times = [], [], []
    if 0 in record:
        coeffs.append(a.copy())
        steps.append(0)
        times.append(0.0)
    t = 0.0
    failure = None
    failed_step = None
    t0 = time.perf_counter()
    for k, dt in enumerate(dts, start=1):
        try:
            a_new = rom_step(op, a, dt)
            norm = np.linalg.norm(a_new)
            if not np.isfinite(norm) or norm > BLOWUP_FACTOR * ref_norm:
                raise NumericalBlowup(f"reduced state norm {norm:.3e} exceeds {BLOWUP_FACTOR:g} x initial")
        except NumericalBlowup as exc:
            failure = f"step {k}: {exc}"
            failed_step = k
            log.warning("ROM blow-up at %s", failure)
            if raise_on_blowup:
                raise NumericalBlowup(failure, step=k, time=t, state=op.Phi @ a) from None
            break
        a = a_new
        t += dt
        if k in record:
            coeffs.append(a.copy())
            steps.append(k)
            times.append(t)
    C = np.column_stack(coeffs) if coeffs else np.zeros((op.n_modes, 0))
    return RomTrajectory(
        coeffs=C,
        states=op.Phi @ C,
        steps=np.array(steps),
        times=np.array(times),
        wall_time=time.perf_counter() - t0,
        failed=failure is not None,
        failure=failure,
        failed_step=failed_step,
        n_steps=len(dts),
    )
