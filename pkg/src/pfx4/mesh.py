"""Unstructured 2D meshes of Q4/Q9 quadrilaterals.

Supports named boundary side-sets and node-sets, zero-width slits realized
by duplicated nodes, promotion of Q4 meshes to geometrically congruent Q9
meshes, and the interior-edge topology (with per-side normals and length
scales) required by the C/DG phase-field scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fe_basis import FACE_CORNERS, reference_element, eval_basis

__all__ = [
    "Mesh",
    "InteriorEdge",
    "TopologyError",
    "MeshError",
    "build_edge_topology",
    "generate_rectangle",
    "generate_notched_square",
    "promote_q4_to_q9",
    "graded_points",
]


class MeshError(RuntimeError):
    """Raised for invalid mesh construction requests."""


class TopologyError(RuntimeError):
    """Raised for non-manifold or mismatched face connectivity."""


@dataclass
class Mesh:
    """Container for a Q4 or Q9 quadrilateral mesh.

    Attributes
    ----------
    nodes : ndarray, shape (n_nodes, 2)
        Reference coordinates (mm).
    elements : ndarray, shape (n_elements, 4) or (n_elements, 9)
        Connectivity, counterclockwise.  Q9 ordering: 4 corners, 4 mid-edge
        nodes (faces 01, 12, 23, 30), center.
    side_sets : dict[str, ndarray]
        Named arrays of (element id, local face id) rows.
    node_sets : dict[str, ndarray]
        Named node-id arrays.
    """

    nodes: np.ndarray
    elements: np.ndarray
    side_sets: dict[str, np.ndarray] = field(default_factory=dict)
    node_sets: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        self.elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        if self.elements.shape[1] not in (4, 9):
            raise MeshError("elements must have 4 or 9 nodes")
        self.side_sets = {k: np.asarray(v, dtype=np.int64).reshape(-1, 2)
                          for k, v in self.side_sets.items()}
        self.node_sets = {k: np.asarray(v, dtype=np.int64).ravel()
                          for k, v in self.node_sets.items()}

    @property
    def kind(self) -> str:
        return "q4" if self.elements.shape[1] == 4 else "q9"

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def element_coords(self, ids=None) -> np.ndarray:
        """Node coordinates per element, shape (ne, nn, 2)."""
        conn = self.elements if ids is None else self.elements[ids]
        return self.nodes[conn]

    def element_areas(self) -> np.ndarray:
        """Exact element areas via the element quadrature rule."""
        ref = reference_element(self.kind)
        ev = eval_basis(ref, self.element_coords())
        return ev.detJ_weight.sum(axis=1)

    def boundary_faces(self) -> np.ndarray:
        """All (element, face) pairs lying on the boundary (incl. slits)."""
        count, owner = _face_registry(self)
        rows = [pair[0] for key, pair in owner.items() if count[key] == 1]
        return np.array(sorted(rows), dtype=np.int64).reshape(-1, 2)

    def nodes_of_side_set(self, name: str) -> np.ndarray:
        """Unique node ids touched by a side-set (corner and mid nodes)."""
        faces = self.side_sets[name]
        nn = self.elements.shape[1]
        ids = []
        for e, f in faces:
            conn = self.elements[e]
            a, b = FACE_CORNERS[f]
            ids.extend((conn[a], conn[b]))
            if nn == 9:
                ids.append(conn[4 + f])
        return np.unique(np.array(ids, dtype=np.int64))

    def select_nodes(self, predicate) -> np.ndarray:
        """Node ids where ``predicate(x, y)`` is True (vectorized)."""
        mask = predicate(self.nodes[:, 0], self.nodes[:, 1])
        return np.flatnonzero(mask).astype(np.int64)

    def select_faces(self, predicate) -> np.ndarray:
        """Boundary (element, face) pairs whose face midpoint satisfies
        ``predicate(x, y)``."""
        rows = []
        for e, f in self.boundary_faces():
            a, b = FACE_CORNERS[f]
            mid = 0.5 * (self.nodes[self.elements[e, a]]
                         + self.nodes[self.elements[e, b]])
            if predicate(mid[0], mid[1]):
                rows.append((e, f))
        return np.array(rows, dtype=np.int64).reshape(-1, 2)


@dataclass
class InteriorEdge:
    """One face of the edge skeleton used by the C/DG scheme.

    ``elem_minus`` is -1 for one-sided edges on the crack-insulated part of
    the exterior boundary; there the jump/average operators act one-sided.
    """

    elem_plus: int
    elem_minus: int
    local_face_plus: int
    local_face_minus: int
    normal_plus: np.ndarray
    h_avg: float
    is_boundary_d2: bool = False


def _face_key(conn, f):
    a, b = FACE_CORNERS[f]
    na, nb = int(conn[a]), int(conn[b])
    return (na, nb) if na < nb else (nb, na)


def _face_registry(mesh: Mesh):
    """Map corner-pair keys to the (element, face) pairs sharing them."""
    count: dict[tuple, int] = {}
    owner: dict[tuple, list] = {}
    for e in range(mesh.n_elements):
        conn = mesh.elements[e]
        for f in range(4):
            key = _face_key(conn, f)
            count[key] = count.get(key, 0) + 1
            owner.setdefault(key, []).append((e, f))
            if count[key] > 2:
                raise TopologyError(
                    f"face {key} shared by more than two elements")
    return count, owner


def build_edge_topology(mesh: Mesh, d2_set: str | None = None) -> list[InteriorEdge]:
    """Build the interior-edge skeleton, plus one-sided crack-insulated edges.

    Parameters
    ----------
    mesh : Mesh
    d2_set : str, optional
        Name of the side-set whose faces get one-sided edges (the weakly
        crack-insulated part of the exterior boundary).

    Returns
    -------
    list of InteriorEdge
        Two-sided edges for every face shared by two elements (the plus side
        is the element with the smaller id), then one-sided edges for the
        requested boundary faces.  ``h_avg`` is the mean of sqrt(element
        area) over the adjacent element(s); ``normal_plus`` is evaluated at
        the face midpoint.

    Raises
    ------
    TopologyError
        If a face is shared by more than two elements, if paired Q9 faces
        disagree on the mid-edge node, or if a d2 face is not on the boundary.
    """
    count, owner = _face_registry(mesh)
    h_elem = np.sqrt(mesh.element_areas())
    ref = reference_element(mesh.kind)
    edges: list[InteriorEdge] = []
    for key in sorted(k for k, c in count.items() if c == 2):
        (e1, f1), (e2, f2) = owner[key]
        if e1 > e2:
            (e1, f1), (e2, f2) = (e2, f2), (e1, f1)
        if mesh.kind == "q9":
            m1 = mesh.elements[e1, 4 + f1]
            m2 = mesh.elements[e2, 4 + f2]
            if m1 != m2:
                raise TopologyError(
                    f"mid-edge node mismatch across face {key}: {m1} vs {m2}")
        normal = _face_midpoint_normal(mesh, ref, e1, f1)
        edges.append(InteriorEdge(
            elem_plus=e1, elem_minus=e2,
            local_face_plus=f1, local_face_minus=f2,
            normal_plus=normal,
            h_avg=0.5 * (h_elem[e1] + h_elem[e2])))
    if d2_set is not None:
        for e, f in mesh.side_sets[d2_set]:
            key = _face_key(mesh.elements[e], f)
            if count.get(key, 0) != 1:
                raise TopologyError(
                    f"d2 face ({e}, {f}) is not an exterior boundary face")
            normal = _face_midpoint_normal(mesh, ref, e, f)
            edges.append(InteriorEdge(
                elem_plus=int(e), elem_minus=-1,
                local_face_plus=int(f), local_face_minus=-1,
                normal_plus=normal, h_avg=h_elem[e],
                is_boundary_d2=True))
    return edges


def _face_midpoint_normal(mesh, ref, e, f):
    from .fe_basis import eval_face_basis

    one_pt = reference_element(mesh.kind, order=ref.order, face_order=1)
    fe = eval_face_basis(one_pt, mesh.element_coords([e]), f)
    return fe.normal[0, 0].copy()


def graded_points(segments) -> np.ndarray:
    """Build a monotone 1D point array from (start, end, h_start, h_end) runs.

    Within each segment the spacing varies geometrically from ``h_start`` to
    ``h_end`` (rounded to a whole number of intervals).  Segment boundaries
    are preserved exactly; consecutive segments must be contiguous.
    """
    pts = []
    for i, (a, b, ha, hb) in enumerate(segments):
        if b <= a:
            raise MeshError("segment end must exceed start")
        L = b - a
        n = max(1, int(round(2.0 * L / (ha + hb))))
        if abs(hb - ha) < 1e-14 * max(ha, hb):
            local = np.linspace(0.0, L, n + 1)
        else:
            r = (hb / ha) ** (1.0 / max(n - 1, 1))
            steps = ha * r ** np.arange(n)
            local = np.concatenate([[0.0], np.cumsum(steps)])
            local *= L / local[-1]
        seg = a + local
        if i > 0:
            if abs(pts[-1][-1] - a) > 1e-12:
                raise MeshError("segments are not contiguous")
            seg = seg[1:]
        pts.append(seg)
    return np.concatenate(pts)


def generate_rectangle(x_coords, y_coords, side_names=True) -> Mesh:
    """Tensor-product Q4 mesh from 1D grid-line arrays.

    Side-sets ``left/right/bottom/top`` and matching node-sets are attached
    when ``side_names`` is set.
    """
    x = np.asarray(x_coords, dtype=float)
    y = np.asarray(y_coords, dtype=float)
    nx, ny = len(x) - 1, len(y) - 1
    if nx < 1 or ny < 1 or np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
        raise MeshError("grid-line arrays must be strictly increasing")
    xx, yy = np.meshgrid(x, y, indexing="ij")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])
    nid = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    elems = np.empty((nx * ny, 4), dtype=np.int64)
    k = 0
    for i in range(nx):
        for j in range(ny):
            elems[k] = (nid[i, j], nid[i + 1, j], nid[i + 1, j + 1], nid[i, j + 1])
            k += 1
    eid = np.arange(nx * ny).reshape(nx, ny)
    mesh = Mesh(nodes, elems)
    if side_names:
        mesh.side_sets = {
            "bottom": np.column_stack([eid[:, 0], np.zeros(nx, dtype=np.int64)]),
            "top": np.column_stack([eid[:, -1], np.full(nx, 2, dtype=np.int64)]),
            "left": np.column_stack([eid[0, :], np.full(ny, 3, dtype=np.int64)]),
            "right": np.column_stack([eid[-1, :], np.full(ny, 1, dtype=np.int64)]),
        }
        tol = 1e-12 * max(x[-1] - x[0], y[-1] - y[0], 1.0)
        mesh.node_sets = {
            "left": mesh.select_nodes(lambda px, py: np.abs(px - x[0]) < tol),
            "right": mesh.select_nodes(lambda px, py: np.abs(px - x[-1]) < tol),
            "bottom": mesh.select_nodes(lambda px, py: np.abs(py - y[0]) < tol),
            "top": mesh.select_nodes(lambda px, py: np.abs(py - y[-1]) < tol),
        }
    return mesh


def generate_notched_square(side: float, notch_length: float, notch_y: float,
                            h: float | None = None,
                            x_coords=None, y_coords=None) -> Mesh:
    """Square plate with a zero-width horizontal slit from the left boundary.

    The slit runs along ``y = notch_y`` from ``x = 0`` to the interior tip at
    ``x = notch_length`` and is realized by duplicating the grid nodes on the
    open segment (the tip node stays single).  Elements below the slit are
    re-wired to the duplicate (lower) copies.

    Parameters
    ----------
    side : float
        Edge length of the square (mm).
    notch_length, notch_y : float
        Slit extent and height; grid lines are required there.
    h : float, optional
        Uniform element size; alternatively pass explicit ``x_coords`` /
        ``y_coords`` grid-line arrays (must contain the slit lines).
    """
    if not 0.0 < notch_length < side:
        raise MeshError("notch must end strictly inside the plate")
    if h is not None:
        nx = int(round(side / h))
        x_coords = np.linspace(0.0, side, nx + 1)
        y_coords = np.linspace(0.0, side, nx + 1)
    x = np.asarray(x_coords, dtype=float)
    y = np.asarray(y_coords, dtype=float)
    for val, arr, label in ((notch_length, x, "x"), ((notch_y), y, "y")):
        if not np.any(np.abs(arr - val) < 1e-12 * side):
            raise MeshError(f"{label} grid lines must include the slit line")
    mesh = generate_rectangle(x, y)
    tol = 1e-12 * side
    slit = mesh.select_nodes(
        lambda px, py: (np.abs(py - notch_y) < tol) & (px < notch_length - tol))
    dup = {}
    new_nodes = [mesh.nodes]
    next_id = mesh.n_nodes
    for n in slit:
        dup[int(n)] = next_id
        new_nodes.append(mesh.nodes[n][None, :])
        next_id += 1
    nodes = np.vstack(new_nodes)
    elems = mesh.elements.copy()
    cent_y = mesh.nodes[mesh.elements, 1].mean(axis=1)
    below = cent_y < notch_y
    for e in np.flatnonzero(below):
        for a in range(4):
            elems[e, a] = dup.get(int(elems[e, a]), elems[e, a])
    out = Mesh(nodes, elems, side_sets=dict(mesh.side_sets),
               node_sets=dict(mesh.node_sets))
    # Lower duplicates on the left boundary join the left node-set.
    left_dups = [dup[int(n)] for n in slit if abs(mesh.nodes[n, 0]) < tol]
    if left_dups:
        out.node_sets["left"] = np.unique(
            np.concatenate([out.node_sets["left"], np.array(left_dups)]))
    out.node_sets["slit_upper"] = np.asarray(sorted(dup.keys()), dtype=np.int64)
    out.node_sets["slit_lower"] = np.asarray(sorted(dup.values()), dtype=np.int64)
    tip = out.select_nodes(
        lambda px, py: (np.abs(px - notch_length) < tol)
        & (np.abs(py - notch_y) < tol))
    out.node_sets["tip"] = tip
    slit_faces = out.select_faces(
        lambda mx, my: (abs(my - notch_y) < tol) & (mx < notch_length - tol))
    out.side_sets["slit"] = slit_faces
    out.side_sets["outer"] = _difference(out.boundary_faces(), slit_faces)
    return out


def _difference(faces, minus):
    drop = {tuple(r) for r in np.asarray(minus).reshape(-1, 2)}
    keep = [tuple(r) for r in faces if tuple(r) not in drop]
    return np.array(keep, dtype=np.int64).reshape(-1, 2)


def promote_q4_to_q9(mesh: Mesh) -> Mesh:
    """Promote a Q4 mesh to a geometrically congruent Q9 mesh.

    Corner node ids and coordinates are preserved; mid-edge nodes sit at
    face midpoints (shared across paired faces, duplicated across slits) and
    center nodes at the bilinear center.  Side-sets and node-sets carry over.
    """
    if mesh.kind != "q4":
        raise MeshError("promotion expects a Q4 mesh")
    nodes = [mesh.nodes]
    next_id = mesh.n_nodes
    mid_ids: dict[tuple, int] = {}
    elems = np.empty((mesh.n_elements, 9), dtype=np.int64)
    elems[:, :4] = mesh.elements
    new_pts = []
    for e in range(mesh.n_elements):
        conn = mesh.elements[e]
        for f in range(4):
            key = _face_key(conn, f)
            if key not in mid_ids:
                mid_ids[key] = next_id
                a, b = FACE_CORNERS[f]
                new_pts.append(0.5 * (mesh.nodes[conn[a]] + mesh.nodes[conn[b]]))
                next_id += 1
            elems[e, 4 + f] = mid_ids[key]
        new_pts.append(mesh.nodes[conn].mean(axis=0))
        elems[e, 8] = next_id
        next_id += 1
    nodes = np.vstack([mesh.nodes, np.array(new_pts)])
    out = Mesh(nodes, elems, side_sets=dict(mesh.side_sets),
               node_sets={k: v.copy() for k, v in mesh.node_sets.items()})
    # Extend node-sets with the new mid-edge nodes of member faces.
    for name in ("left", "right", "bottom", "top"):
        if name in out.side_sets and name in out.node_sets:
            out.node_sets[name] = np.unique(np.concatenate(
                [out.node_sets[name], out.nodes_of_side_set(name)]))
    return out
