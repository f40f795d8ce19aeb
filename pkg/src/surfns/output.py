"""File output: legacy VTK surface snapshots and CSV tables.

The VTK writer emits version 3.0 legacy ASCII unstructured grids with
quadratic-triangle cells so the curved elements survive into standard
viewers.  All floating point numbers are written with 17 significant
digits, which round-trips IEEE doubles exactly; CSV output uses ``repr``
for the same reason.
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .errors import SurfnsError

__all__ = [
    "write_vtk",
    "read_vtk_structure",
    "write_diagnostics_csv",
    "write_convergence_csv",
    "DIAGNOSTICS_HEADER",
    "CONVERGENCE_HEADER",
]

DIAGNOSTICS_HEADER = (
    "step,t,area,volume,E_kin,E_bend,E_total,div_residual,"
    "solver_iters,solver_seconds"
)
CONVERGENCE_HEADER = (
    "level,J,h0,tau,err_surface,eoc_surface,err_pressure_raw,"
    "err_pressure_shifted,eoc_pressure"
)

# VTK cell id of the six-node quadratic triangle; its node order is the
# three corners followed by the edge midpoints (0,1), (1,2), (2,0), which
# in the local numbering used here (midnode 3 + i opposite corner i) is
# the permutation below.
VTK_QUADRATIC_TRIANGLE = 22
_VTK_LOCAL_ORDER = (0, 1, 2, 5, 3, 4)


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _midnode_pressure(state) -> np.ndarray:
    """Corner pressures extended to all nodes by averaging along edges."""
    msh = state.mesh
    values = np.empty(msh.num_nodes)
    values[: msh.num_corners] = state.pressure.data
    tris = msh.triangles
    corner = state.pressure.data
    # midnode 3 + i sits on the edge opposite corner i
    for i, (a, b) in enumerate(((1, 2), (2, 0), (0, 1))):
        values[tris[:, 3 + i]] = 0.5 * (corner[tris[:, a]] + corner[tris[:, b]])
    return values


def write_vtk(state, path) -> None:
    """Write one simulation state as a legacy ASCII VTK unstructured grid.

    Point data: velocity, pressure (P1 corner values edge-averaged onto
    midnodes, for viewing only -- flagged in the title), curvature and
    bending force.
    """
    msh = state.mesh
    lines = []
    push = lines.append
    push("# vtk DataFile Version 3.0")
    push(
        f"surface t={_fmt(state.time)} step={state.step_index} "
        "(pressure midnodes edge-averaged)"
    )
    push("ASCII")
    push("DATASET UNSTRUCTURED_GRID")
    push(f"POINTS {msh.num_nodes} double")
    for point in msh.node_coords:
        push(" ".join(_fmt(c) for c in point))
    push(f"CELLS {msh.num_elements} {msh.num_elements * 7}")
    for tri in msh.triangles:
        push("6 " + " ".join(str(tri[k]) for k in _VTK_LOCAL_ORDER))
    push(f"CELL_TYPES {msh.num_elements}")
    lines.extend([str(VTK_QUADRATIC_TRIANGLE)] * msh.num_elements)
    push(f"POINT_DATA {msh.num_nodes}")
    push("VECTORS velocity double")
    for row in state.velocity.data:
        push(" ".join(_fmt(c) for c in row))
    push("SCALARS pressure double 1")
    push("LOOKUP_TABLE default")
    for value in _midnode_pressure(state):
        push(_fmt(value))
    push("VECTORS curvature double")
    for row in state.kappa.data:
        push(" ".join(_fmt(c) for c in row))
    push("VECTORS force double")
    for row in state.force.data:
        push(" ".join(_fmt(c) for c in row))
    text = "\n".join(lines) + "\n"
    try:
        with open(path, "w", encoding="ascii") as handle:
            handle.write(text)
    except OSError as exc:
        raise SurfnsError(f"cannot write VTK file {path}: {exc}") from exc


def read_vtk_structure(path) -> dict:
    """Minimal structural reader for the files ``write_vtk`` produces."""
    with open(path, encoding="ascii") as handle:
        tokens_by_line = [line.rstrip("\n") for line in handle]
    if not tokens_by_line[0].startswith("# vtk DataFile"):
        raise SurfnsError(f"{path} is not a legacy VTK file")
    out = {"title": tokens_by_line[1]}
    i = tokens_by_line.index("DATASET UNSTRUCTURED_GRID") + 1
    header = tokens_by_line[i].split()
    n_points = int(header[1])
    out["points"] = np.array(
        [
            [float(v) for v in tokens_by_line[i + 1 + k].split()]
            for k in range(n_points)
        ]
    )
    i += 1 + n_points
    header = tokens_by_line[i].split()
    n_cells = int(header[1])
    cells = []
    for k in range(n_cells):
        entry = [int(v) for v in tokens_by_line[i + 1 + k].split()]
        cells.append(entry[1:])
    out["cells"] = np.array(cells)
    i += 1 + n_cells
    n_types = int(tokens_by_line[i].split()[1])
    out["cell_types"] = np.array(
        [int(tokens_by_line[i + 1 + k]) for k in range(n_types)]
    )
    i += 1 + n_types
    out["point_data"] = {}
    assert tokens_by_line[i].startswith("POINT_DATA")
    i += 1
    while i < len(tokens_by_line):
        head = tokens_by_line[i].split()
        if head[0] == "VECTORS":
            data = np.array(
                [
                    [float(v) for v in tokens_by_line[i + 1 + k].split()]
                    for k in range(n_points)
                ]
            )
            out["point_data"][head[1]] = data
            i += 1 + n_points
        elif head[0] == "SCALARS":
            data = np.array(
                [float(tokens_by_line[i + 2 + k]) for k in range(n_points)]
            )
            out["point_data"][head[1]] = data
            i += 2 + n_points
        else:
            raise SurfnsError(f"unexpected VTK section {head[0]!r} in {path}")
    return out


def write_diagnostics_csv(history, path) -> None:
    """One row per recorded step; floats written so they parse back exactly."""
    if not history:
        raise ValueError("diagnostics history is empty")
    try:
        with open(path, "w", newline="", encoding="ascii") as handle:
            writer = csv.writer(handle)
            writer.writerow(DIAGNOSTICS_HEADER.split(","))
            for diag in history:
                writer.writerow(
                    [
                        diag.step,
                        repr(diag.time),
                        repr(diag.area),
                        repr(diag.volume),
                        repr(diag.kinetic_energy),
                        repr(diag.bending_energy),
                        repr(diag.total_energy),
                        repr(diag.divergence_residual),
                        diag.solver_iterations,
                        repr(diag.solver_seconds),
                    ]
                )
    except OSError as exc:
        raise SurfnsError(f"cannot write diagnostics CSV {path}: {exc}") from exc


def _convergence_rows(result):
    for row in result.rows:
        yield [
            row.level,
            row.num_elements,
            repr(row.h0),
            repr(row.tau),
            repr(row.err_surface),
            repr(row.eoc_surface),
            repr(row.err_pressure_raw),
            repr(row.err_pressure_shifted),
            repr(row.eoc_pressure),
        ]


def write_convergence_csv(result, destination) -> None:
    """Write the convergence table to a path or a text stream."""
    if isinstance(destination, io.TextIOBase):
        writer = csv.writer(destination)
        writer.writerow(CONVERGENCE_HEADER.split(","))
        writer.writerows(_convergence_rows(result))
        return
    try:
        with open(destination, "w", newline="", encoding="ascii") as handle:
            writer = csv.writer(handle)
            writer.writerow(CONVERGENCE_HEADER.split(","))
            writer.writerows(_convergence_rows(result))
    except OSError as exc:
        raise SurfnsError(
            f"cannot write convergence CSV {destination}: {exc}"
        ) from exc
