"""File formats: binary matrices, legacy VTK, report and trajectory CSVs.

Binary matrix layout: the 7 ASCII bytes ``SBMROM1``, two little-endian
uint64 (rows, cols), then rows*cols little-endian float64 in column-major
order.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from ..swe_core import velocity

MAGIC = b"SBMROM1"
REPORT_HEADER = ["param", "mu_pod", "model", "err_h", "err_hv1", "err_hv2", "n_modes", "status"]


def save_matrix(matrix, path):
    A = np.asarray(matrix, dtype="<f8")
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise ValueError("only 1D or 2D arrays can be stored")
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<QQ", A.shape[0], A.shape[1]))
            fh.write(A.tobytes(order="F"))
    except OSError as exc:
        raise OSError(f"cannot write matrix to {path}: {exc}") from exc


def load_matrix(path):
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read matrix from {path}: {exc}") from exc
    if raw[:7] != MAGIC:
        raise ValueError(f"{path}: not an SBMROM1 matrix file")
    rows, cols = struct.unpack_from("<QQ", raw, 7)
    body = raw[23:]
    if len(body) != 8 * rows * cols:
        raise ValueError(f"{path}: expected {rows}x{cols} values, found {len(body) // 8}")
    return np.frombuffer(body, dtype="<f8").reshape((rows, cols), order="F").astype(float)


def export_vtk(mesh, state, path, title="sbmrom state", h_min=1e-8):
    """Legacy ASCII VTK with POINT_DATA ``h`` and ``velocity``.

    Nodes with zero height (removed region) get zero velocity.
    """
    n = mesh.n_node
    U = np.asarray(state, dtype=float).reshape(3, n).T
    vel = np.where(U[:, :1] > 0.0, velocity(U, h_min), 0.0)
    out = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {n} double",
    ]
    out += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.nodes.tolist()]
    out.append(f"CELLS {mesh.n_elem} {4 * mesh.n_elem}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.elements.tolist()]
    out.append(f"CELL_TYPES {mesh.n_elem}")
    out += ["5"] * mesh.n_elem
    out.append(f"POINT_DATA {n}")
    out += ["SCALARS h double 1", "LOOKUP_TABLE default"]
    out += [f"{h:.17g}" for h in U[:, 0].tolist()]
    out.append("VECTORS velocity double")
    out += [f"{u:.17g} {v:.17g} 0" for u, v in vel.tolist()]
    path = Path(path)
    try:
        path.write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc}") from exc


def _fmt(x):
    return "" if x is None else f"{x:.6e}"


def export_csv(report, path):
    """Write an ErrorReport (or an iterable of row dicts) as CSV."""
    rows = report.rows if hasattr(report, "rows") else report
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_HEADER)
            for r in rows:
                errs = r.get("errors") or (None, None, None)
                w.writerow([
                    r["param"],
                    repr(float(r["mu_pod"])) if r.get("mu_pod") is not None else "",
                    r["model"],
                    *(_fmt(e) for e in errs),
                    r.get("n_modes", ""),
                    r["status"],
                ])
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc}") from exc


def read_report_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def save_times(times, steps, path):
    with open(path, "w") as fh:
        fh.write("step,t\n")
        for s, t in zip(steps, times):
            fh.write(f"{int(s)},{float(t):.17g}\n")


def load_times(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1], data[:, 0].astype(int)
