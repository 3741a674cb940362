#!/usr/bin/env python3
"""Generate the notched branching-plate meshes (Gmsh v2 ASCII).

Geometry: a 100 x 40 mm plate with a 1 mm wide horizontal slot from the
left edge, ending in a semicircular tip of radius 0.5 mm whose rightmost
point sits at x = 50 (the stress-concentration point).  The mesh is
block-structured: graded tensor blocks left/above/below the slot, a fine
uniform band along the expected crack corridor, and a transfinite O-grid
collar between the tip semicircle and a surrounding square, so the rounded
tip is meshed with well-shaped quads.  The mesh is exactly symmetric about
y = 0.

Levels: coarse (desk-scale runs), medium, paper (resolution comparable to
the published study; generated on demand because of file size).

Usage:
    python tools/make_branching_mesh.py --level coarse
    python tools/make_branching_mesh.py --h-fine 0.2 --out custom.msh
"""

from __future__ import annotations

import argparse
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from pfx4.fe_basis import eval_basis, reference_element  # noqa: E402
from pfx4.gmsh_io import write_gmsh  # noqa: E402
from pfx4.mesh import Mesh, build_edge_topology, graded_points  # noqa: E402

WIDTH = 100.0
HALF_HEIGHT = 20.0
TIP_CENTER_X = 49.5
SLOT_HALF = 0.5

LEVELS = {
    "coarse": dict(h_fine=0.30, h_coarse=2.5, box=2.0, band=8.0, h_band=0.8),
    "medium": dict(h_fine=0.15, h_coarse=2.0, box=2.0, band=8.0, h_band=0.5),
    "paper": dict(h_fine=0.0625, h_coarse=1.5, box=2.0, band=8.0, h_band=0.3),
}


class _NodeStore:
    """Coordinate-keyed node accumulator; interface nodes merge exactly."""

    def __init__(self):
        self.coords: list[tuple[float, float]] = []
        self._ids: dict[tuple[int, int], int] = {}

    def add(self, x: float, y: float) -> int:
        key = (round(x * 1e9), round(y * 1e9))
        nid = self._ids.get(key)
        if nid is None:
            nid = len(self.coords)
            self._ids[key] = nid
            self.coords.append((x, y))
        return nid


def _add_grid(store, quads, xs, ys):
    ids = np.array([[store.add(x, y) for y in ys] for x in xs])
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            quads.append((ids[i, j], ids[i + 1, j],
                          ids[i + 1, j + 1], ids[i, j + 1]))


def _add_point_grid(store, quads, pts):
    """Quadrilateralize a logically rectangular point array (ni, nj, 2)."""
    ni, nj = pts.shape[:2]
    ids = np.array([[store.add(*pts[i, j]) for j in range(nj)]
                    for i in range(ni)])
    for i in range(ni - 1):
        for j in range(nj - 1):
            quads.append((ids[i, j], ids[i + 1, j],
                          ids[i + 1, j + 1], ids[i, j + 1]))


def branching_plate_mesh(h_fine: float, h_coarse: float, box: float = 2.0,
                         band: float = 8.0, h_band: float = 0.8) -> Mesh:
    """Build the Q4 mesh; see the module docstring for the block layout."""
    B = box
    ydist_mid = graded_points([(SLOT_HALF, B, h_fine, h_fine)])
    ydist_top = graded_points([(B, band, h_fine, h_band),
                               (band, HALF_HEIGHT, h_band, h_coarse)])
    xdist_left = graded_points([(0.0, TIP_CENTER_X, h_coarse, h_fine)])
    xdist_box = graded_points([(TIP_CENTER_X, TIP_CENTER_X + B,
                                h_fine, h_fine)])
    xdist_far = graded_points([(TIP_CENTER_X + B, WIDTH, h_fine, h_fine)])
    half = graded_points([(0.0, B, h_fine, h_fine)])
    ydist_rm = np.concatenate([-half[::-1][:-1], half])

    store = _NodeStore()
    quads: list[tuple] = []

    ys_upper = np.concatenate([ydist_mid, ydist_top[1:]])
    _add_grid(store, quads, xdist_left, ys_upper)            # upper-left
    _add_grid(store, quads, xdist_left, -ys_upper[::-1])     # lower-left
    xs_right = np.concatenate([xdist_box, xdist_far[1:]])
    _add_grid(store, quads, xs_right, ydist_top)             # upper-right
    _add_grid(store, quads, xs_right, -ydist_top[::-1])      # lower-right
    _add_grid(store, quads, xdist_far, ydist_rm)             # fine corridor

    # O-grid collar: transfinite interpolation between the tip semicircle
    # and the right half of the surrounding box.  The 90-degree spokes
    # coincide with the box's left-edge segments, so every boundary node
    # of the collar matches a neighboring block node exactly.
    top = np.stack([xdist_box, np.full_like(xdist_box, B)], axis=1)
    right = np.stack([np.full(len(ydist_rm), TIP_CENTER_X + B),
                      ydist_rm[::-1]], axis=1)
    bottom = np.stack([xdist_box[::-1], np.full_like(xdist_box, -B)], axis=1)
    outer = np.vstack([top, right[1:], bottom[1:]])
    seg = np.linalg.norm(np.diff(outer, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    theta = 0.5 * np.pi - np.pi * s / s[-1]
    inner = np.stack([TIP_CENTER_X + SLOT_HALF * np.cos(theta),
                      SLOT_HALF * np.sin(theta)], axis=1)
    tau = (ydist_mid - SLOT_HALF) / (B - SLOT_HALF)
    collar = ((1.0 - tau[None, :, None]) * inner[:, None, :]
              + tau[None, :, None] * outer[:, None, :])
    # enforce exact mirror symmetry of the collar about y = 0
    collar[:, :, 1] = 0.5 * (collar[:, :, 1] - collar[::-1, :, 1])
    _add_point_grid(store, quads, collar)

    mesh = Mesh(np.array(store.coords), np.array(quads, dtype=np.int64))
    # validate: positive Jacobians everywhere, manifold topology
    eval_basis(reference_element("q4"), mesh.element_coords())
    build_edge_topology(mesh)

    tol = 1e-6
    mesh.side_sets = {
        "top": mesh.select_faces(lambda x, y: abs(y - HALF_HEIGHT) < tol),
        "bottom": mesh.select_faces(lambda x, y: abs(y + HALF_HEIGHT) < tol),
        "left": mesh.select_faces(lambda x, y: abs(x) < tol),
        "right": mesh.select_faces(lambda x, y: abs(x - WIDTH) < tol),
        "notch": mesh.select_faces(
            lambda x, y: (abs(abs(y) - SLOT_HALF) < tol

                          and x < TIP_CENTER_X + tol)
            or (x >= TIP_CENTER_X - tol
                and abs(np.hypot(x - TIP_CENTER_X, y) - SLOT_HALF) < 0.05)),
    }
    for name in ("top", "bottom", "left", "right"):
        mesh.node_sets[name] = mesh.nodes_of_side_set(name)
    mesh.node_sets["tip"] = mesh.select_nodes(
        lambda x, y: (np.abs(x - (TIP_CENTER_X + SLOT_HALF)) < 1e-6)
        & (np.abs(y) < 1e-6))
    covered = sum(len(v) for v in mesh.side_sets.values())
    n_bnd = len(mesh.boundary_faces())
    if covered != n_bnd:
        raise RuntimeError(
            f"side-sets cover {covered} of {n_bnd} boundary faces")
    if len(mesh.node_sets["tip"]) != 1:
        raise RuntimeError("expected a single node at the notch tip")
    return mesh


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--level", choices=sorted(LEVELS), default=None)
    ap.add_argument("--h-fine", type=float, default=None)
    ap.add_argument("--h-coarse", type=float, default=2.5)
    ap.add_argument("--out", type=pathlib.Path, default=None)
    args = ap.parse_args(argv)
    if args.level is None and args.h_fine is None:
        ap.error("pass --level or --h-fine")
    if args.level is not None:
        params = LEVELS[args.level]
        out = args.out or (pathlib.Path(__file__).resolve().parents[1]
                           / "src" / "pfx4" / "data"
                           / f"branching_{args.level}.msh")
    else:
        params = dict(h_fine=args.h_fine, h_coarse=args.h_coarse,
                      box=2.0, band=8.0, h_band=max(args.h_fine * 2.5, 0.3))
        out = args.out or pathlib.Path("branching_custom.msh")
    mesh = branching_plate_mesh(**params)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_gmsh(out, mesh)
    print(f"{out}: {mesh.n_elements} quads, {mesh.n_nodes} nodes")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
