"""VTK legacy ASCII output of meshes and solution fields."""

from __future__ import annotations

import numpy as np

from .mesh import Mesh

__all__ = ["write_vtk", "read_vtk_points"]

_VTK_QUAD = 9
_VTK_BIQUADRATIC_QUAD = 28


def write_vtk(path, mesh: Mesh, point_data: dict | None = None,
              cell_data: dict | None = None, title: str = "pfx4 output"):
    """Write an unstructured-grid VTK legacy ASCII file.

    Point data arrays may be scalars (n_nodes,) or vectors (n_nodes, 2|3);
    2-vectors are padded with z = 0.  Cell data arrays are scalars per
    element.

    Raises
    ------
    OSError
        On I/O failure (path included in the OS error message).
    """
    nn = mesh.elements.shape[1]
    ctype = _VTK_QUAD if nn == 4 else _VTK_BIQUADRATIC_QUAD
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.n_nodes} double\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.17e} {y:.17e} 0.0\n")
        ne = mesh.n_elements
        fh.write(f"CELLS {ne} {ne * (nn + 1)}\n")
        for conn in mesh.elements:
            fh.write(" ".join([str(nn)] + [str(int(c)) for c in conn]) + "\n")
        fh.write(f"CELL_TYPES {ne}\n")
        for _ in range(ne):
            fh.write(f"{ctype}\n")
        if point_data:
            fh.write(f"POINT_DATA {mesh.n_nodes}\n")
            for name, arr in point_data.items():
                arr = np.asarray(arr, dtype=float)
                if arr.ndim == 1:
                    fh.write(f"SCALARS {name} double 1\n")
                    fh.write("LOOKUP_TABLE default\n")
                    for v in arr:
                        fh.write(f"{v:.17e}\n")
                else:
                    fh.write(f"VECTORS {name} double\n")
                    for row in arr:
                        z = row[2] if arr.shape[1] > 2 else 0.0
                        fh.write(f"{row[0]:.17e} {row[1]:.17e} {z:.17e}\n")
        if cell_data:
            fh.write(f"CELL_DATA {ne}\n")
            for name, arr in cell_data.items():
                fh.write(f"SCALARS {name} double 1\n")
                fh.write("LOOKUP_TABLE default\n")
                for v in np.asarray(arr, dtype=float):
                    fh.write(f"{v:.17e}\n")


def read_vtk_points(path) -> np.ndarray:
    """Read back the POINTS block of a legacy ASCII file (round-trip checks)."""
    with open(path) as fh:
        lines = fh.readlines()
    for i, line in enumerate(lines):
        if line.startswith("POINTS"):
            n = int(line.split()[1])
            vals = []
            j = i + 1
            while len(vals) < 3 * n:
                vals.extend(float(v) for v in lines[j].split())
                j += 1
            return np.array(vals).reshape(n, 3)
    raise ValueError(f"no POINTS section found in {path}")


def simulation_point_data(sim) -> tuple[dict, dict]:
    """Standard output arrays for a simulation state on the PF mesh.

    Displacement (and velocity) are carried at Q4 nodes; on the congruent
    Q9 mesh the extra nodes take the bilinear interpolant (edge midpoints
    and center averages), which is exact for the Q4 field.
    """
    st = sim.state
    mesh4 = sim.problem.mesh_q4
    mesh_pf = sim.mesh_pf
    u4 = st.u.reshape(-1, 2)
    if mesh_pf.n_nodes == mesh4.n_nodes:
        u_pf = u4
    else:
        u_pf = np.zeros((mesh_pf.n_nodes, 2))
        u_pf[:mesh4.n_nodes] = u4
        conn4 = mesh4.elements
        conn9 = mesh_pf.elements
        from .fe_basis import FACE_CORNERS

        for f in range(4):
            a, b = FACE_CORNERS[f]
            mid = conn9[:, 4 + f]
            u_pf[mid] = 0.5 * (u4[conn4[:, a]] + u4[conn4[:, b]])
        u_pf[conn9[:, 8]] = 0.25 * (u4[conn4[:, 0]] + u4[conn4[:, 1]]
                                    + u4[conn4[:, 2]] + u4[conn4[:, 3]])
    point_data = {"d": st.d, "displacement": u_pf}
    if st.psi is not None:
        point_data["psi"] = st.psi
    cell_data = {"H_max": st.history.max(axis=1)}
    return point_data, cell_data
