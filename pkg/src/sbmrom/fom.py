"""Stabilised P1 finite element discretisation of the shallow water equations
with shifted-boundary treatment of an embedded wall, and the explicit
predictor/multi-corrector time integrator.

The semi-discrete system is ``M dU/dt + R(U) = 0`` with a lumped diagonal
mass ``M``.  ``R`` collects, over the active elements only,

* the Galerkin volume term ``-(grad W, F(U))`` (edge-midpoint rule) and the
  source ``-(W, Z)``,
* the variational multiscale term ``(L* W, tau A0^-1 (L U - Z))`` with
  element-constant Jacobians linearised at the element-average state,
* weak boundary fluxes on the channel walls, inflow and outflow edges
  (two-point Gauss), and
* the shifted Neumann flux on the surrogate boundary.

States are flat vectors ``[h_0..h_{n-1}, q1_0.., q2_0..]``.  Rows of
inactive nodes carry a zero residual and unit mass so that those entries
stay exactly where they started.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import swe_core
from .embedded import GAUSS_2, classify
from .errors import InvalidMesh, NumericalBlowup
from .swe_core import PhysicsParams

log = logging.getLogger(__name__)

DEFAULT_BOUNDARY_KINDS = {"Left": "inflow", "Right": "outflow", "Top": "wall", "Bottom": "wall"}
_EDGE_SHAPE = np.column_stack([1.0 - GAUSS_2, GAUSS_2])  # (gauss point, edge node)
_NEXT = np.array([1, 2, 0])
_PREV = np.array([2, 0, 1])


@dataclass(frozen=True)
class FomConfig:
    cfl: float = 0.5
    dt: Optional[float] = None
    c_vms: float = 2.0
    n_pmc: int = 2
    n_freq: int = 1
    T: float = 0.8
    v_wall: float = 0.0
    m_inflow: float = -0.02
    m_outflow: float = 0.02
    h0: float = 0.2
    v0: tuple = (0.1, 0.0)
    physics: PhysicsParams = field(default_factory=PhysicsParams)
    boundary_kinds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDARY_KINDS))
    # use (U^(k) - U^n)/dt for the time derivative inside the VMS residual
    vms_time_term: bool = False
    include_initial: bool = False
    log_every: int = 0

    def __post_init__(self):
        if self.n_pmc < 1:
            raise ValueError("n_pmc must be >= 1")
        if self.dt is None and not self.cfl > 0:
            raise ValueError("cfl must be positive when no fixed dt is given")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("fixed dt must be positive")
        if self.n_freq < 1:
            raise ValueError("n_freq must be >= 1")
        if not self.T > 0:
            raise ValueError("terminal time must be positive")
        unknown = set(self.boundary_kinds.values()) - {"wall", "inflow", "outflow"}
        if unknown:
            raise ValueError(f"unknown boundary kinds {sorted(unknown)}")

    def with_(self, **changes):
        return replace(self, **changes)


def lumped_mass(mesh, surrogate):
    """Row-sum lumped mass over active elements, repeated for the 3 fields.

    Inactive nodes get mass 1.
    """
    act = surrogate.element_active
    m = np.bincount(
        mesh.elements[act].ravel(),
        weights=np.repeat(mesh.areas[act] / 3.0, 3),
        minlength=mesh.n_node,
    )
    m[~surrogate.node_active] = 1.0
    return np.tile(m, 3)


def background_mass(mesh):
    """Lumped mass of the full background mesh (no obstacle), per dof."""
    m = np.bincount(mesh.elements.ravel(), weights=np.repeat(mesh.areas / 3.0, 3), minlength=mesh.n_node)
    return np.tile(m, 3)


def uniform_state(mesh, node_mask, h0, v0):
    """Uniform flow on the masked nodes, zero elsewhere."""
    n = mesh.n_node
    U = np.zeros(3 * n)
    U[:n][node_mask] = h0
    U[n:2 * n][node_mask] = h0 * v0[0]
    U[2 * n:][node_mask] = h0 * v0[1]
    return U


class FomOperator:
    """Residual, mass and time-step evaluation for one mesh + obstacle."""

    def __init__(self, mesh, surrogate, config=None):
        self.mesh = mesh
        self.surrogate = surrogate
        self.config = config or FomConfig()
        phys = self.config.physics
        self.g = phys.g
        self.h_min = phys.h_min
        n = mesh.n_node
        self.n_node = n

        act = np.flatnonzero(surrogate.element_active)
        self.active_elements = act
        self.conn = mesh.elements[act]
        self.area = mesh.areas[act]
        self.grads = mesh.shape_gradients[act]
        self.inradius = mesh.inradii[act]
        if np.any(self.inradius <= 0):
            raise InvalidMesh("zero inradius element")
        self.mass = lumped_mass(mesh, surrogate)
        self.dof_active = surrogate.dof_mask()
        offsets = np.arange(3) * n
        self._vol_dofs = (self.conn[:, :, None] + offsets).ravel()
        if phys.has_source:
            x = mesh.nodes[self.conn]
            self._x_mid = 0.5 * (x + x[:, _NEXT])
            self._x_bar = x.mean(axis=1)

        owner = mesh.boundary_element_of()
        keep = surrogate.element_active[owner]
        edges = mesh.boundary_edges[keep]
        tags = mesh.boundary_tags[keep]
        a, b = mesh.nodes[edges[:, 0]], mesh.nodes[edges[:, 1]]
        length = np.linalg.norm(b - a, axis=1)
        normal = np.column_stack([(b - a)[:, 1], -(b - a)[:, 0]]) / length[:, None]
        centroid = mesh.nodes[mesh.elements[owner[keep]]].mean(axis=1)
        flip = np.einsum("ij,ij->i", 0.5 * (a + b) - centroid, normal) < 0
        normal[flip] *= -1.0
        self.bgroups = {}
        for kind in ("wall", "inflow", "outflow"):
            sel = np.isin(tags, [t for t, k in self.config.boundary_kinds.items() if k == kind])
            if sel.any():
                e = edges[sel]
                self.bgroups[kind] = (e, normal[sel], 0.5 * length[sel], (e[:, :, None] + offsets).ravel())

        sd = surrogate
        if sd.qp_edge is not None and len(sd.qp_edge):
            en = sd.edge_nodes[sd.qp_edge]
            el = sd.edge_element[sd.qp_edge]
            self.sbm = {
                "edge_nodes": en,
                "elem_nodes": mesh.elements[el],
                "grads": mesh.shape_gradients[el],
                "shape": sd.qp_shape,
                "weight": sd.qp_weight,
                "d": sd.qp_d,
                "n": sd.qp_n,
                "tau": sd.qp_tau,
                "nt": sd.edge_normal[sd.qp_edge],
                "dofs": (en[:, :, None] + offsets).ravel(),
            }
        else:
            self.sbm = None

    # -- state helpers -----------------------------------------------------
    def nodal(self, U):
        """View a flat state as an (n_node, 3) array."""
        return np.asarray(U, dtype=float).reshape(3, self.n_node).T

    def initial_state(self):
        c = self.config
        return uniform_state(self.mesh, self.surrogate.node_active, c.h0, c.v0)

    def stable_dt(self, U, cfl=None):
        """CFL time step: ``cfl * min_K inradius_K / max_{A in K} wave_speed_A``."""
        cfl = self.config.cfl if cfl is None else cfl
        if not cfl > 0:
            raise ValueError("cfl must be positive")
        speed = swe_core.wave_speed(self.nodal(U), self.g, self.h_min)
        smax = speed[self.conn].max(axis=1)
        return float(cfl * np.min(self.inradius / smax))

    # -- residual ------------------------------------------------------------
    def residual(self, U, dt, dudt=None):
        """Spatial residual R(U); ``dt`` sets the stabilisation time scale."""
        g, hmin = self.g, self.h_min
        phys = self.config.physics
        Un = self.nodal(U)
        Ue = Un[self.conn]
        area, G = self.area, self.grads

        # Galerkin volume term, midpoint-of-edges rule
        Uq = 0.5 * (Ue + Ue[:, _NEXT])
        Fbar = swe_core.flux(Uq, g, hmin).sum(axis=1) / 3.0
        contrib = -area[:, None, None] * np.einsum("mad,mdc->mac", G, Fbar)
        if phys.has_source:
            Zq = swe_core.source(Uq, phys, self._x_mid)
            contrib -= (area / 6.0)[:, None, None] * (Zq + Zq[:, _PREV])

        # VMS stabilisation
        tau = self.config.c_vms * dt / 2.0
        if tau != 0.0:
            Ubar = Ue.sum(axis=1) / 3.0
            A1, A2 = swe_core.jacobians(Ubar, g, hmin)
            gradU = np.einsum("mac,mad->mcd", Ue, G)
            res = np.einsum("mij,mj->mi", A1, gradU[:, :, 0]) + np.einsum("mij,mj->mi", A2, gradU[:, :, 1])
            if phys.has_source:
                res -= swe_core.source(Ubar, phys, self._x_bar)
            if dudt is not None:
                res += self.nodal(dudt)[self.conn].sum(axis=1) / 3.0
            r = tau * np.einsum("mij,mj->mi", swe_core.a0_inverse(Ubar, hmin), res)
            ar1 = np.einsum("mij,mj->mi", A1, r)
            ar2 = np.einsum("mij,mj->mi", A2, r)
            contrib += area[:, None, None] * (G[:, :, 0, None] * ar1[:, None, :] + G[:, :, 1, None] * ar2[:, None, :])

        weights = [contrib.ravel()]
        dofs = [self._vol_dofs]
        for kind, (e, nrm, half_len, bdofs) in self.bgroups.items():
            Ug = np.einsum("qk,bkc->bqc", _EDGE_SHAPE, Un[e])
            H = self._boundary_flux(kind, Ug, nrm[:, None, :])
            weights.append(np.einsum("b,qk,bqc->bkc", half_len, _EDGE_SHAPE, H).ravel())
            dofs.append(bdofs)
        if self.sbm is not None:
            weights.append(self._shifted_flux(Un).ravel())
            dofs.append(self.sbm["dofs"])

        R = np.bincount(np.concatenate(dofs), weights=np.concatenate(weights), minlength=3 * self.n_node)
        R[~self.dof_active] = 0.0
        if not np.all(np.isfinite(R)):
            raise NumericalBlowup("non-finite residual")
        return R

    def _boundary_flux(self, kind, Ug, nrm):
        c = self.config
        h = Ug[..., 0]
        p = 0.5 * self.g * h * h
        H = np.empty(Ug.shape)
        if kind == "wall":
            H[..., 0] = c.v_wall * h
            H[..., 1] = c.v_wall * Ug[..., 1] + p * nrm[..., 0]
            H[..., 2] = c.v_wall * Ug[..., 2] + p * nrm[..., 1]
        elif kind == "inflow":
            v = swe_core.velocity(Ug, self.h_min)
            vn = np.einsum("...i,...i->...", v, np.broadcast_to(nrm, v.shape))
            m = c.m_inflow
            H[..., 0] = m
            H[..., 1] = m * vn * nrm[..., 0] + p * nrm[..., 0]
            H[..., 2] = m * vn * nrm[..., 1] + p * nrm[..., 1]
        else:
            v = swe_core.velocity(Ug, self.h_min)
            m = c.m_outflow
            H[..., 0] = m
            H[..., 1] = m * v[..., 0] + p * nrm[..., 0]
            H[..., 2] = m * v[..., 1] + p * nrm[..., 1]
        return H

    def _shifted_flux(self, Un):
        s = self.sbm
        S = s["shape"]
        Uq = np.einsum("qk,qkc->qc", S, Un[s["edge_nodes"]])
        v_edge = swe_core.velocity(Un[s["edge_nodes"]], self.h_min)
        vq = np.einsum("qk,qki->qi", S, v_edge)
        v_elem = swe_core.velocity(Un[s["elem_nodes"]], self.h_min)
        gradv = np.einsum("qai,qaj->qij", v_elem, s["grads"])
        n, d, tau, nt = s["n"], s["d"], s["tau"], s["nt"]
        normal_v = self.config.v_wall - np.einsum("qi,qij,qj->q", n, gradv, d)
        coef = normal_v * np.einsum("qi,qi->q", n, nt) + np.einsum("qi,qi->q", vq, tau) * np.einsum("qi,qi->q", tau, nt)
        h = Uq[:, 0]
        p = 0.5 * self.g * h * h
        H = coef[:, None] * Uq
        H[:, 1] += p * nt[:, 0]
        H[:, 2] += p * nt[:, 1]
        return (s["weight"][:, None, None] * S[:, :, None]) * H[:, None, :]


def assemble_residual(U, mesh, surrogate, config, dt):
    return FomOperator(mesh, surrogate, config).residual(U, dt)


def compute_dt(U, mesh, surrogate, cfl, config=None):
    return FomOperator(mesh, surrogate, config).stable_dt(U, cfl)


def pmc_step(u_n, dt, residual, mass, n_pmc=2, time_term=False):
    """One predictor/multi-corrector step.

    ``residual(u, dt, dudt)`` evaluates R; ``mass`` is the lumped diagonal.
    With ``n_pmc=1`` this is forward Euler, with ``n_pmc=2`` the explicit
    midpoint (RK2) rule.
    """
    if n_pmc < 1:
        raise ValueError("n_pmc must be >= 1")
    u_n = np.asarray(u_n, dtype=float)
    u_k = u_n
    for _ in range(n_pmc):
        dudt = (u_k - u_n) / dt if time_term else None
        R = residual(0.5 * (u_n + u_k), dt, dudt)
        u_k = u_n - dt * (R / mass)
    return u_k


def time_schedule(T, dt):
    """Fixed-step schedule reaching exactly ``T``; a last step shorter than
    ``1e-9 * dt`` is merged into its predecessor."""
    n = int(np.ceil(T / dt - 1e-9))
    dts = np.full(n, float(dt))
    dts[-1] = T - dt * (n - 1)
    return dts


def sample_steps(n_steps, n_freq, include_initial=False):
    """Steps recorded as snapshots: every ``n_freq``-th one plus the last."""
    steps = list(range(n_freq, n_steps + 1, n_freq))
    if not steps or steps[-1] != n_steps:
        steps.append(n_steps)
    if include_initial:
        steps.insert(0, 0)
    return steps


@dataclass
class Trajectory:
    """Sampled states (columns) of one run."""

    states: np.ndarray
    steps: np.ndarray
    times: np.ndarray
    dts: np.ndarray
    wall_time: float = 0.0
    geometry: object = None

    @property
    def n_steps(self):
        return len(self.dts)

    @property
    def n_samples(self):
        return self.states.shape[1]


def run_fom(config, geometry, mesh, surrogate=None, initial_state=None):
    """March the full-order model from the uniform initial flow to ``T``."""
    surrogate = surrogate if surrogate is not None else classify(mesh, geometry)
    op = FomOperator(mesh, surrogate, config)
    U = op.initial_state() if initial_state is None else np.array(initial_state, dtype=float)
    fixed = time_schedule(config.T, config.dt) if config.dt is not None else None

    states, steps, times, dts = [], [], [], []
    if config.include_initial:
        states.append(U.copy())
        steps.append(0)
        times.append(0.0)
    t, step = 0.0, 0
    t0 = time.perf_counter()
    while True:
        if fixed is not None:
            if step == len(fixed):
                break
            dt = fixed[step]
            last = step == len(fixed) - 1
        else:
            remaining = config.T - t
            if remaining <= 1e-12 * config.T:
                break
            dt = op.stable_dt(U)
            last = dt >= remaining * (1.0 - 1e-9)
            if last:
                dt = remaining
        try:
            U_new = pmc_step(U, dt, op.residual, op.mass, config.n_pmc, config.vms_time_term)
        except NumericalBlowup as exc:
            raise NumericalBlowup(f"FOM blew up at step {step + 1}: {exc}", step=step + 1, time=t, state=U) from None
        step += 1
        t = config.T if last else t + dt
        dts.append(dt)
        if config.log_every and step % config.log_every == 0:
            log.info("step=%d t=%.6g dt=%.6g max|dU|=%.3e", step, t, dt, np.max(np.abs(U_new - U)))
        U = U_new
        if step % config.n_freq == 0 or last:
            states.append(U.copy())
            steps.append(step)
            times.append(t)
        if last:
            break
    return Trajectory(
        states=np.column_stack(states),
        steps=np.array(steps),
        times=np.array(times),
        dts=np.array(dts),
        wall_time=time.perf_counter() - t0,
        geometry=geometry,
    )
