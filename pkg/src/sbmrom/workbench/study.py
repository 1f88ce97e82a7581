"""Offline/online parametric studies.

Offline, each training geometry is run at a fixed CFL number and sampled
every ``n_freq`` steps plus the final one.  The snapshots are used either as
they are (``ROM``) or with their removed-region values filled by the
polyharmonic interpolant (``iROM``), and each set gets its own POD basis.

Online, every evaluation geometry is run once with the full model at the
fixed step ``dt_eval`` as reference.  For each energy threshold the report
holds the projection error of that reference onto the interpolated basis and
the errors of every reduced model, per field.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..embedded import CircleGeometry, classify
from ..errors import SbmRomError
from ..fom import FomConfig, run_fom
from ..ghost_interp import GhostFiller
from ..mesh import generate_channel_mesh
from ..pod import SnapshotMatrix, compute_modes, write_spectrum_csv
from ..rom import RomOperator, run_rom
from ..swe_core import PhysicsParams
from . import io
from .metrics import FIELDS, projection_error, spacetime_error

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MODELS = ("iROM", "ROM")
PRESETS = ("test1", "test2", "test3")


@dataclass(frozen=True)
class Case:
    R: float
    x_c: float
    T: float

    @property
    def geometry(self):
        return CircleGeometry(self.x_c, self.R)

    @property
    def label(self):
        return self.geometry.label()

    @property
    def slug(self):
        return f"R{self.R:g}_xc{self.x_c:g}"


@dataclass
class StudyConfig:
    name: str = "study"
    mesh: dict = field(default_factory=lambda: {"x_range": [-1.5, 1.5], "y_range": [-0.3, 0.3], "edge": 0.02})
    training: list = field(default_factory=list)
    evaluation: list = field(default_factory=list)
    n_freq: int = 2
    mu_pod: list = field(default_factory=lambda: [1 - 1e-6])
    models: list = field(default_factory=lambda: list(MODELS))
    dt_eval: float = 0.002
    fom: dict = field(default_factory=dict)
    rbf: dict = field(default_factory=dict)
    ghost_mass: str = "zero"
    vtk_mu: float = None
    output_dir: str = None
    plots: bool = True
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.training = [c if isinstance(c, Case) else Case(**c) for c in self.training]
        self.evaluation = [c if isinstance(c, Case) else Case(**c) for c in self.evaluation]
        self.mu_pod = [float(m) for m in self.mu_pod]
        self.validate()

    def validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported config schema version {self.schema_version}")
        if not self.training:
            raise ValueError("training list is empty")
        if not self.evaluation:
            raise ValueError("evaluation list is empty")
        if not self.mu_pod or any(not 0.0 < m <= 1.0 for m in self.mu_pod):
            raise ValueError("mu_pod values must lie in (0, 1]")
        bad = set(self.models) - set(MODELS)
        if bad or not self.models:
            raise ValueError(f"models must be a nonempty subset of {MODELS}")
        if self.n_freq < 1 or not self.dt_eval > 0:
            raise ValueError("n_freq must be >= 1 and dt_eval positive")

    def fom_config(self, **changes):
        opts = dict(self.fom)
        g = opts.pop("g", 9.81)
        if "v0" in opts:
            opts["v0"] = tuple(opts["v0"])
        cfg = FomConfig(physics=PhysicsParams(g=g), **opts)
        return cfg.with_(**changes)

    def build_mesh(self):
        m = self.mesh
        return generate_channel_mesh(tuple(m["x_range"]), tuple(m["y_range"]), m["edge"])

    def to_dict(self):
        d = asdict(self)
        order = ["schema_version", "name", "mesh", "training", "evaluation", "n_freq", "mu_pod",
                 "models", "dt_eval", "fom", "rbf", "ghost_mass", "vtk_mu", "output_dir", "plots"]
        return {k: d[k] for k in order}

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def load_preset(name):
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("sbmrom.presets").joinpath(f"{name}.json").read_text()
    return StudyConfig.from_dict(json.loads(text))


@dataclass
class ErrorReport:
    """Rows ``{param, mu_pod, model, errors, n_modes, status}``.

    ``model`` is ``projection`` for the best approximation of the reference
    in the interpolated basis, otherwise the reduced model name.  Failed
    runs have ``errors=None`` and ``status="FAILED"``.
    """

    rows: list = field(default_factory=list)
    snapshot_counts: dict = field(default_factory=dict)
    n_modes: dict = field(default_factory=dict)
    eigenvalues: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    terminal: dict = field(default_factory=dict)

    def add(self, param, mu, model, errors, n_modes, status="OK"):
        if errors is not None:
            errors = tuple(float(e) for e in errors)
            if any(not np.isfinite(e) or e < 0 for e in errors):
                errors, status = None, "FAILED"
        self.rows.append(dict(param=param, mu_pod=mu, model=model, errors=errors, n_modes=n_modes, status=status))

    def get(self, param, mu, model):
        for r in self.rows:
            if r["param"] == param and r["model"] == model and np.isclose(r["mu_pod"], mu, rtol=0, atol=1e-15):
                return r
        raise KeyError((param, mu, model))

    def error(self, param, mu, model, field="h"):
        r = self.get(param, mu, model)
        return None if r["errors"] is None else r["errors"][FIELDS.index(field)]

    def to_csv(self, path):
        io.export_csv(self, path)


def _field_errors(ref, test, sd, times):
    return [spacetime_error(ref, test, sd, f, times) for f in FIELDS]


def offline(config, mesh):
    """Training runs, snapshot matrices and POD bases per model."""
    cfg = config.fom_config(n_freq=config.n_freq, dt=None, include_initial=False)
    raw, filled, counts = [], [], {}
    for case in config.training:
        geom = case.geometry
        sd = classify(mesh, geom)
        tr = run_fom(cfg.with_(T=case.T), geom, mesh, sd)
        log.info("training %s: %d steps, %d snapshots, %.1fs", case.label, tr.n_steps, tr.n_samples, tr.wall_time)
        counts[case.label] = (tr.n_steps, tr.n_samples)
        meta = [(case.label, int(s)) for s in tr.steps]
        raw.append(SnapshotMatrix(tr.states, meta))
        if "iROM" in config.models:
            filler = GhostFiller(mesh, sd, **config.rbf)
            filled.append(SnapshotMatrix(filler.fill(tr.states), meta, interpolated=True))
    bases = {}
    if "iROM" in config.models:
        bases["iROM"] = compute_modes(SnapshotMatrix.concatenate(filled))
    if "ROM" in config.models:
        bases["ROM"] = compute_modes(SnapshotMatrix.concatenate(raw))
    return bases, counts


def online_case(config, mesh, case, bases, report, vtk_dir=None):
    geom = case.geometry
    param = case.label
    cfg = config.fom_config(dt=config.dt_eval, T=case.T, n_freq=1, include_initial=True)
    try:
        sd = classify(mesh, geom)
        ref = run_fom(cfg, geom, mesh, sd)
    except SbmRomError as exc:
        log.warning("reference run %s failed: %s", param, exc)
        for mu in config.mu_pod:
            for model in ("projection",) + tuple(bases):
                report.add(param, mu, model, None, 0, "FAILED")
        return
    filler = GhostFiller(mesh, sd, **config.rbf) if "iROM" in bases else None
    proj_basis = bases["iROM"] if "iROM" in bases else bases["ROM"]
    terminal = {"FOM": ref.states[:, -1]}
    for mu in config.mu_pod:
        Bp = proj_basis.select(mu)
        errs = [projection_error(ref, Bp, sd, f, restrict=True) for f in FIELDS]
        report.add(param, mu, "projection", errs, Bp.n_modes)
        for model, basis in bases.items():
            B = basis.select(mu)
            U0 = ref.states[:, 0]
            if model == "iROM":
                U0 = filler.fill(U0)
            try:
                op = RomOperator(B, mesh, geom, cfg, surrogate=sd, ghost_mass=config.ghost_mass)
                rt = run_rom(op, dts=ref.dts, n_freq=1, include_initial=True, U0=U0)
            except SbmRomError as exc:
                log.warning("%s %s mu=%r failed: %s", model, param, mu, exc)
                report.add(param, mu, model, None, B.n_modes, "FAILED")
                continue
            report.timings[(param, mu, model)] = rt.wall_time
            if rt.failed:
                log.warning("%s %s mu=%r: %s", model, param, mu, rt.failure)
                report.add(param, mu, model, None, B.n_modes, "FAILED")
                continue
            report.add(param, mu, model, _field_errors(ref.states, rt.states, sd, ref.times), B.n_modes)
            if config.vtk_mu is not None and np.isclose(mu, config.vtk_mu, rtol=0, atol=1e-15):
                terminal[model] = rt.states[:, -1]
    report.terminal[param] = terminal
    if vtk_dir is not None:
        for name, U in terminal.items():
            io.export_vtk(mesh, U, vtk_dir / f"{case.slug}_{name}.vtk", title=f"{name} {param} t={case.T:g}")


def run_study(config, output_dir=None, mesh=None):
    """Run the full offline/online protocol; write artifacts when an output
    directory is given (argument or ``config.output_dir``)."""
    t0 = time.perf_counter()
    out = output_dir or config.output_dir
    out = Path(out) if out else None
    vtk_dir = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        vtk_dir = out / "vtk"
        vtk_dir.mkdir(exist_ok=True)
        config.to_json(out / "config.json")
    mesh = mesh if mesh is not None else config.build_mesh()
    bases, counts = offline(config, mesh)
    report = ErrorReport(snapshot_counts=counts)
    for model, B in bases.items():
        report.eigenvalues[model] = B.eigenvalues
        report.n_modes[model] = {mu: B.select(mu).n_modes for mu in config.mu_pod}
        if out is not None:
            write_spectrum_csv(B.eigenvalues, out / f"spectrum_{model}.csv")
            io.save_matrix(B.modes, out / f"modes_{model}.bin")
    for case in config.evaluation:
        online_case(config, mesh, case, bases, report, vtk_dir)
    report.timings["total"] = time.perf_counter() - t0
    if out is not None:
        report.to_csv(out / "report.csv")
        with open(out / "snapshots.csv", "w") as fh:
            fh.write("param,n_steps,n_snapshots\n")
            for label, (ns, nsnap) in counts.items():
                fh.write(f"{label},{ns},{nsnap}\n")
        if config.plots:
            from . import plotting

            plotting.render_study(report, mesh, config, out)
    log.info("study %s finished in %.1fs", config.name, report.timings["total"])
    return report
