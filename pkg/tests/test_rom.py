import numpy as np
import pytest

from sbmrom.embedded import CircleGeometry, classify, full_domain
from sbmrom.errors import EmptyBasis, NumericalBlowup, ShapeError
from sbmrom.fom import FomConfig, FomOperator, pmc_step, run_fom
from sbmrom.ghost_interp import GhostFiller
from sbmrom.pod import compute_modes
from sbmrom.rom import RomOperator, build_rom, initial_coeffs, rom_step, run_rom
from sbmrom.workbench.metrics import projection_error


@pytest.fixture(scope="module")
def setup(medium_mesh, medium_cylinder):
    g, sd = medium_cylinder
    cfg = FomConfig(dt=0.002, T=0.1, include_initial=True)
    return medium_mesh, g, sd, cfg


@pytest.mark.parametrize("ghost_mass", ["unit", "zero", "background"])
def test_identity_basis_reproduces_fom(setup, ghost_mass):
    mesh, g, sd, cfg = setup
    ref = run_fom(cfg, g, mesh, sd)
    op = build_rom(np.eye(mesh.n_dof), mesh, g, cfg, surrogate=sd, ghost_mass=ghost_mass)
    rt = run_rom(op)
    assert rt.n_steps == 50 and not rt.failed
    assert np.abs(rt.states - ref.states).max() <= 1e-10


def test_identity_basis_mass_is_full_mass(setup):
    mesh, g, sd, cfg = setup
    op = RomOperator(np.eye(mesh.n_dof), mesh, g, cfg, surrogate=sd, ghost_mass="unit")
    np.testing.assert_array_equal(op.Mr, np.diag(op.fom.mass))


def test_identity_step_matches_pmc_step(setup):
    mesh, g, sd, cfg = setup
    op = RomOperator(np.eye(mesh.n_dof), mesh, g, cfg, surrogate=sd, ghost_mass="unit")
    U = op.fom.initial_state()
    a = rom_step(op, U, 0.002)
    u = pmc_step(U, 0.002, op.fom.residual, op.fom.mass, 2)
    assert np.abs(a - u).max() <= 1e-12


def test_single_mode_mass(setup):
    mesh, g, sd, cfg = setup
    phi = np.random.default_rng(0).standard_normal((mesh.n_dof, 1))
    phi /= np.linalg.norm(phi)
    op = RomOperator(phi, mesh, g, cfg, surrogate=sd, ghost_mass="unit")
    assert op.Mr.shape == (1, 1)
    assert np.isclose(op.Mr[0, 0], phi[:, 0] @ (op.fom.mass * phi[:, 0]), rtol=1e-14)
    assert op.Mr[0, 0] > 0


def test_reduced_mass_symmetric(setup):
    mesh, g, sd, cfg = setup
    Q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((mesh.n_dof, 12)))
    for gm in ("zero", "unit", "background"):
        op = RomOperator(Q, mesh, g, cfg, surrogate=sd, ghost_mass=gm)
        assert np.abs(op.Mr - op.Mr.T).max() <= 1e-12
        np.testing.assert_allclose(op.Mr, Q.T @ (op.mass[:, None] * Q), rtol=1e-10, atol=1e-16)
    with pytest.raises(ValueError):
        RomOperator(Q, mesh, g, cfg, surrogate=sd, ghost_mass="heavy")


def test_empty_and_mismatched_basis(setup):
    mesh, g, sd, cfg = setup
    with pytest.raises(EmptyBasis):
        RomOperator(np.zeros((mesh.n_dof, 0)), mesh, g, cfg, surrogate=sd)
    with pytest.raises(ShapeError):
        RomOperator(np.eye(10), mesh, g, cfg, surrogate=sd)


def test_initial_coeffs():
    Q, _ = np.linalg.qr(np.random.default_rng(2).standard_normal((30, 4)))
    np.testing.assert_allclose(initial_coeffs(Q, Q[:, 0]), [1, 0, 0, 0], atol=1e-14)
    v = np.random.default_rng(3).standard_normal(30)
    v -= Q @ (Q.T @ v)
    assert np.abs(initial_coeffs(Q, v)).max() < 1e-14
    with pytest.raises(ShapeError):
        initial_coeffs(Q, np.ones(29))


class _ScalarOp:
    class config:
        n_pmc = 2
        vms_time_term = False

    def reduced_residual(self, a, dt, dadt=None):
        return a

    def solve_mass(self, r):
        return r


def test_rom_step_scalar_analog():
    assert rom_step(_ScalarOp(), np.array([1.0]), 0.1)[0] == pytest.approx(0.905, abs=1e-15)
    assert rom_step(_ScalarOp(), np.array([1.0]), 0.1, n_pmc=1)[0] == pytest.approx(0.9, abs=1e-15)
    with pytest.raises(ValueError):
        rom_step(_ScalarOp(), np.array([1.0]), 0.1, n_pmc=0)


def test_uniform_flow_in_span_is_steady(medium_mesh):
    cfg = FomConfig(dt=0.002, T=0.1)
    U0 = FomOperator(medium_mesh, full_domain(medium_mesh), cfg).initial_state()
    extra = np.random.default_rng(4).standard_normal((medium_mesh.n_dof, 3))
    B = compute_modes(np.column_stack([U0, extra]))
    op = RomOperator(B, medium_mesh, None, cfg)
    rt = run_rom(op)
    assert np.abs(rt.states - U0[:, None]).max() <= 1e-9
    # initial projection of a state in the span is exact
    assert np.linalg.norm(B.modes @ initial_coeffs(B, U0) - U0) <= 1e-12 * np.linalg.norm(U0)


@pytest.fixture(scope="module")
def training(setup):
    mesh, g, sd, _ = setup
    tr = run_fom(FomConfig(T=0.2, n_freq=1, include_initial=True), g, mesh, sd)
    filled = GhostFiller(mesh, sd).fill(tr.states)
    return tr, compute_modes(filled)


def test_initial_coeffs_error_equals_projection_error(setup, training):
    mesh, g, sd, cfg = setup
    tr, B = training
    Br = B.truncate(3)
    U0 = tr.states[:, [0]]
    rel = np.linalg.norm(Br.modes @ initial_coeffs(Br, U0) - U0) / np.linalg.norm(U0)
    assert np.isclose(rel, projection_error(U0, Br, None, "all"), rtol=1e-10)


def test_full_rank_basis_on_training_parameter(setup, training):
    mesh, g, sd, _ = setup
    tr, B = training
    cfg = FomConfig(dt=0.002, T=0.2, include_initial=True)
    ref = run_fom(cfg, g, mesh, sd)
    U0 = GhostFiller(mesh, sd).fill(ref.states[:, 0])
    rt = run_rom(RomOperator(B, mesh, g, cfg, surrogate=sd), U0=U0)
    mask = sd.dof_mask()
    end_err = np.linalg.norm((rt.states[:, -1] - ref.states[:, -1])[mask]) / np.linalg.norm(ref.states[mask, -1])
    proj = ref.states[:, -1] - B.modes @ np.linalg.lstsq(B.modes[mask], ref.states[mask, -1], rcond=None)[0]
    proj_err = np.linalg.norm(proj[mask]) / np.linalg.norm(ref.states[mask, -1])
    assert end_err <= 5 * proj_err


def test_reduced_norm_and_galerkin_consistency(setup, training):
    mesh, g, sd, cfg = setup
    tr, B = training
    Br = B.truncate(min(8, B.n_modes))
    op = RomOperator(Br, mesh, g, cfg, surrogate=sd)
    a_n = initial_coeffs(Br, GhostFiller(mesh, sd).fill(op.fom.initial_state()))
    dt = 0.002
    for _ in range(5):
        a = rom_step(op, a_n, dt, n_pmc=1)
        r = op.Mr @ (a - a_n) + dt * op.reduced_residual(a_n, dt)
        assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(op.Mr, 2) * np.linalg.norm(a)
        assert np.isclose(np.linalg.norm(Br.modes @ a), np.linalg.norm(a), rtol=1e-10)
        a_n = rom_step(op, a_n, dt)


def test_blowup_is_flagged(setup, training):
    mesh, g, sd, _ = setup
    tr, B = training
    cfg = FomConfig(dt=0.2, T=20.0)
    op = RomOperator(B.truncate(6), mesh, g, cfg, surrogate=sd)
    U0 = GhostFiller(mesh, sd).fill(op.fom.initial_state())
    rt = run_rom(op, U0=U0)
    assert rt.failed and rt.failed_step is not None
    assert rt.coeffs.shape[1] == rt.failed_step  # initial sample + good steps
    with pytest.raises(NumericalBlowup):
        run_rom(op, U0=U0, raise_on_blowup=True)


def test_run_rom_needs_a_schedule(setup, training):
    mesh, g, sd, _ = setup
    op = RomOperator(training[1].truncate(2), mesh, g, FomConfig(), surrogate=sd)
    with pytest.raises(ValueError):
        run_rom(op)
    rt = run_rom(op, dts=[0.001, 0.001], include_initial=False)
    assert list(rt.steps) == [1, 2]


def test_trajectory_csv(setup, training, tmp_path):
    mesh, g, sd, cfg = setup
    op = RomOperator(training[1].truncate(2), mesh, g, cfg.with_(T=0.004), surrogate=sd)
    rt = run_rom(op)
    p = tmp_path / "traj.csv"
    rt.write_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "step,t,a_1,a_2"
    assert len(lines) == 1 + 3
    assert lines[1].startswith("0,0,")


def test_rom_deterministic(setup, training):
    mesh, g, sd, cfg = setup
    op = RomOperator(training[1].truncate(8), mesh, g, cfg, surrogate=sd)
    a, b = run_rom(op), run_rom(op)
    assert np.array_equal(a.coeffs, b.coeffs)


def test_online_geometry_differs_from_training(medium_mesh, training):
    tr, B = training
    g = CircleGeometry(0.05, 0.12)
    sd = classify(medium_mesh, g)
    cfg = FomConfig(dt=0.002, T=0.05, include_initial=True)
    ref = run_fom(cfg, g, medium_mesh, sd)
    U0 = GhostFiller(medium_mesh, sd).fill(ref.states[:, 0])
    rt = run_rom(RomOperator(B, medium_mesh, g, cfg, surrogate=sd), U0=U0)
    assert not rt.failed
    assert np.all(np.isfinite(rt.states))
