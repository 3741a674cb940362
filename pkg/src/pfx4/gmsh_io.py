"""Reader and writer for a Gmsh v2.2 ASCII subset (quad meshes).

Supported element types: 3 (quad4), 10 (quad9), 1 (line2), 8 (line3).
Physical surface groups become element blocks; physical line groups map to
named side-sets (by matching line elements to element faces through their
corner nodes) and matching node-sets.
"""

from __future__ import annotations

import numpy as np

from .fe_basis import FACE_CORNERS
from .mesh import Mesh, MeshError

__all__ = ["read_gmsh", "write_gmsh"]

_QUAD_TYPES = {3: 4, 10: 9}
_LINE_TYPES = {1: 2, 8: 3}


def read_gmsh(path) -> Mesh:
    """Read a quadrilateral mesh with named physical groups.

    Returns a Mesh whose side_sets/node_sets carry one entry per physical
    line group; surface groups are merged into a single element block.
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    i = 0
    names: dict[int, tuple[int, str]] = {}
    raw_nodes: dict[int, tuple[float, float]] = {}
    quads = []
    line_elems = []
    while i < len(lines):
        token = lines[i]
        if token == "$MeshFormat":
            version = lines[i + 1].split()[0]
            if not version.startswith("2"):
                raise MeshError(f"unsupported Gmsh format {version}")
            i += 3
        elif token == "$PhysicalNames":
            n = int(lines[i + 1])
            for k in range(n):
                parts = lines[i + 2 + k].split(maxsplit=2)
                names[int(parts[1])] = (int(parts[0]),
                                        parts[2].strip().strip('"'))
            i += n + 3
        elif token == "$Nodes":
            n = int(lines[i + 1])
            for k in range(n):
                parts = lines[i + 2 + k].split()
                raw_nodes[int(parts[0])] = (float(parts[1]), float(parts[2]))
            i += n + 3
        elif token == "$Elements":
            n = int(lines[i + 1])
            for k in range(n):
                parts = [int(v) for v in lines[i + 2 + k].split()]
                etype, ntags = parts[1], parts[2]
                phys = parts[3] if ntags >= 1 else 0
                conn = parts[3 + ntags:]
                if etype in _QUAD_TYPES:
                    if len(conn) != _QUAD_TYPES[etype]:
                        raise MeshError("malformed quad connectivity")
                    quads.append(conn)
                elif etype in _LINE_TYPES:
                    line_elems.append((phys, conn))
                else:
                    raise MeshError(f"unsupported element type {etype}")
            i += n + 3
        else:
            i += 1
    if not quads:
        raise MeshError(f"no quadrilateral elements in {path}")
    sizes = {len(q) for q in quads}
    if len(sizes) != 1:
        raise MeshError("mixed Q4/Q9 meshes are not supported")
    order = sorted(raw_nodes)
    remap = {gid: i for i, gid in enumerate(order)}
    nodes = np.array([raw_nodes[g] for g in order])
    elements = np.array([[remap[g] for g in q] for q in quads],
                        dtype=np.int64)
    mesh = Mesh(nodes, elements)
    # match line elements to element faces through corner-node pairs
    face_of = {}
    for e, conn in enumerate(elements):
        for f in range(4):
            a, b = FACE_CORNERS[f]
            key = tuple(sorted((int(conn[a]), int(conn[b]))))
            face_of.setdefault(key, []).append((e, f))
    side_sets: dict[str, list] = {}
    node_sets: dict[str, set] = {}
    for phys, conn in line_elems:
        name = names.get(phys, (1, f"group{phys}"))[1]
        a, b = remap[conn[0]], remap[conn[1]]
        owners = face_of.get(tuple(sorted((a, b))), [])
        boundary = [of for of in owners]
        if len(boundary) == 1:
            side_sets.setdefault(name, []).append(boundary[0])
        node_sets.setdefault(name, set()).update(remap[g] for g in conn)
    mesh.side_sets = {k: np.array(v, dtype=np.int64)
                      for k, v in side_sets.items()}
    mesh.node_sets = {k: np.array(sorted(v), dtype=np.int64)
                      for k, v in node_sets.items()}
    return mesh


def write_gmsh(path, mesh: Mesh, surface_name: str = "plate"):
    """Write a mesh with its side-sets as physical line groups."""
    group_names = [surface_name] + sorted(mesh.side_sets)
    phys_of = {name: i + 1 for i, name in enumerate(group_names)}
    nn = mesh.elements.shape[1]
    qtype = 3 if nn == 4 else 10
    with open(path, "w") as fh:
        fh.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        fh.write("$PhysicalNames\n")
        fh.write(f"{len(group_names)}\n")
        fh.write(f'2 {phys_of[surface_name]} "{surface_name}"\n')
        for name in sorted(mesh.side_sets):
            fh.write(f'1 {phys_of[name]} "{name}"\n')
        fh.write("$EndPhysicalNames\n")
        fh.write("$Nodes\n")
        fh.write(f"{mesh.n_nodes}\n")
        for i, (x, y) in enumerate(mesh.nodes, start=1):
            fh.write(f"{i} {x:.16e} {y:.16e} 0\n")
        fh.write("$EndNodes\n")
        elems = []
        for name in sorted(mesh.side_sets):
            phys = phys_of[name]
            for e, f in mesh.side_sets[name]:
                a, b = FACE_CORNERS[f]
                conn = mesh.elements[e]
                ids = [int(conn[a]) + 1, int(conn[b]) + 1]
                if nn == 9:
                    ids.append(int(conn[4 + f]) + 1)
                    elems.append((8, phys, ids))
                else:
                    elems.append((1, phys, ids))
        for conn in mesh.elements:
            elems.append((qtype, phys_of[surface_name],
                          [int(c) + 1 for c in conn]))
        fh.write("$Elements\n")
        fh.write(f"{len(elems)}\n")
        for i, (etype, phys, ids) in enumerate(elems, start=1):
            fh.write(" ".join(str(v) for v in
                              [i, etype, 2, phys, phys] + ids) + "\n")
        fh.write("$EndElements\n")
