"""Point and line sampling of nodal fields, probe records and CSV output."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .fe_basis import reference_element
from .mesh import Mesh

__all__ = [
    "FieldSampler",
    "PointProbe",
    "LineProbe",
    "ReactionProbe",
    "ProbeRecorder",
    "sample_line",
    "write_probe_csv",
    "write_line_csv",
]


class FieldSampler:
    """Locates physical points in a mesh and interpolates nodal fields.

    Location is a brute-force bounding-box prefilter followed by a Newton
    inversion of the isoparametric map; points outside the mesh fall back
    to the nearest element (with a warning), per the probing contract.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.ref = reference_element(mesh.kind)
        coords = mesh.element_coords()
        self._lo = coords.min(axis=1)
        self._hi = coords.max(axis=1)
        self._centroids = coords.mean(axis=1)

    def locate(self, point) -> tuple[int, float, float]:
        """Element id and reference coordinates containing ``point``."""
        p = np.asarray(point, dtype=float)
        pad = 1e-9 * max(1.0, float(np.abs(self.mesh.nodes).max()))
        cand = np.flatnonzero(np.all((p >= self._lo - pad)
                                     & (p <= self._hi + pad), axis=1))
        best = None
        for e in cand:
            xi = self._invert(int(e), p)
            if xi is not None and np.max(np.abs(xi)) <= 1.0 + 1e-8:
                return int(e), float(xi[0]), float(xi[1])
            if xi is not None:
                slack = float(np.max(np.abs(xi)))
                if best is None or slack < best[1]:
                    best = ((int(e), xi), slack)
        # nearest-element fallback
        e = int(np.argmin(np.sum((self._centroids - p) ** 2, axis=1)))
        xi = self._invert(e, p)
        if best is not None and best[1] < 1.2:
            (e, xi), _ = best
        else:
            xi = np.clip(xi if xi is not None else np.zeros(2), -1.0, 1.0)
        warnings.warn(f"point {tuple(p)} lies outside the mesh; "
                      f"using nearest element {e}", stacklevel=2)
        xi = np.clip(xi, -1.0, 1.0)
        return e, float(xi[0]), float(xi[1])

    def _invert(self, e: int, p: np.ndarray):
        X = self.mesh.element_coords([e])[0]
        xi = np.zeros(2)
        for _ in range(30):
            N, dN, _ = self.ref.shape(xi[0], xi[1])
            r = N @ X - p
            if np.linalg.norm(r) < 1e-12 * max(1.0, np.abs(X).max()):
                return xi
            J = np.einsum("na,nk->ka", dN, X)
            try:
                xi = xi - np.linalg.solve(J.T, r)
            except np.linalg.LinAlgError:
                return None
            if np.max(np.abs(xi)) > 3.0:
                return None
        return xi

    def weights(self, points):
        """Interpolation table (element ids, shape values) for fixed points.

        Locating is the expensive part; probes evaluated repeatedly at the
        same coordinates should build this once and use ``eval_weights``.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        elems = np.empty(len(pts), dtype=np.int64)
        weights = np.empty((len(pts), self.ref.n_nodes))
        for k, p in enumerate(pts):
            e, xi, eta = self.locate(p)
            elems[k] = e
            weights[k], _, _ = self.ref.shape(xi, eta)
        return elems, weights

    def eval_weights(self, values: np.ndarray, table) -> np.ndarray:
        elems, weights = table
        return np.einsum("pn,pn->p", weights, values[self.mesh.elements[elems]])

    def eval_nodal(self, values: np.ndarray, points) -> np.ndarray:
        """Interpolate a nodal field at physical points, shape (npts,)."""
        return self.eval_weights(values, self.weights(points))


def sample_line(sampler: FieldSampler, values: np.ndarray, p0, p1,
                n_samples: int):
    """Sample a nodal field at equally spaced points of a segment.

    Returns (arclength, samples); the segment should lie inside the domain
    (outside points use the nearest element and warn).
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    s = np.linspace(0.0, np.linalg.norm(p1 - p0), n_samples)
    pts = p0 + np.linspace(0.0, 1.0, n_samples)[:, None] * (p1 - p0)
    return s, sampler.eval_nodal(values, pts)


@dataclass
class PointProbe:
    """Time series of one field component at a fixed point."""

    name: str
    point: tuple
    fieldname: str = "d"  # d | psi | ux | uy | umag


@dataclass
class LineProbe:
    """Per-frame snapshots of a field along a fixed segment."""

    name: str
    p0: tuple
    p1: tuple
    n_samples: int = 200
    fieldname: str = "d"


@dataclass
class ReactionProbe:
    """Time series of a reaction-force component through a node set."""

    name: str
    node_set: str
    comp: int = 0


class ProbeRecorder:
    """Evaluates probes against a Simulation at a fixed step cadence.

    Results live in ``series`` (one column per point/reaction probe,
    monotone time stamps) and ``lines`` (per-probe list of (t, values)).
    """

    def __init__(self, sim, probes, every: int = 1):
        self.sim = sim
        self.every = max(int(every), 1)
        self.point_probes = [p for p in probes if isinstance(p, PointProbe)]
        self.line_probes = [p for p in probes if isinstance(p, LineProbe)]
        self.reaction_probes = [p for p in probes
                                if isinstance(p, ReactionProbe)]
        self._pf_sampler = FieldSampler(sim.mesh_pf)
        self._u_sampler = FieldSampler(sim.problem.mesh_q4)
        self.times: list[float] = []
        self.series: dict[str, list[float]] = {
            p.name: [] for p in self.point_probes + self.reaction_probes}
        self.lines: dict[str, list] = {p.name: [] for p in self.line_probes}
        self.line_arclength = {}
        self._tables = {}
        for p in self.point_probes:
            sampler = self._sampler_for(p.fieldname)
            self._tables[p.name] = (sampler, sampler.weights([p.point]))
        for p in self.line_probes:
            sampler = self._sampler_for(p.fieldname)
            pts = (np.asarray(p.p0, dtype=float)
                   + np.linspace(0.0, 1.0, p.n_samples)[:, None]
                   * (np.asarray(p.p1, dtype=float) - np.asarray(p.p0)))
            self._tables[p.name] = (sampler, sampler.weights(pts))
            self.line_arclength[p.name] = np.linspace(
                0.0, np.linalg.norm(np.asarray(p.p1, dtype=float)
                                    - np.asarray(p.p0)), p.n_samples)

    def _sampler_for(self, fieldname):
        return (self._pf_sampler if fieldname in ("d", "psi")
                else self._u_sampler)

    def _field_values(self, state, fieldname):
        if fieldname == "d":
            return state.d
        if fieldname == "psi":
            if state.psi is None:
                raise ValueError("psi is only available for mixed schemes")
            return state.psi
        u = state.u.reshape(-1, 2)
        if fieldname == "ux":
            return u[:, 0]
        if fieldname == "uy":
            return u[:, 1]
        if fieldname == "umag":
            return np.linalg.norm(u, axis=1)
        raise ValueError(f"unknown probe field {fieldname!r}")

    def __call__(self, state):
        if state.step % self.every:
            return
        self.times.append(state.time)
        for p in self.point_probes:
            sampler, table = self._tables[p.name]
            vals = self._field_values(state, p.fieldname)
            self.series[p.name].append(
                float(sampler.eval_weights(vals, table)[0]))
        for p in self.reaction_probes:
            r = self.sim.reaction(p.node_set)
            self.series[p.name].append(float(r[p.comp]))
        for p in self.line_probes:
            sampler, table = self._tables[p.name]
            vals = self._field_values(state, p.fieldname)
            snap = sampler.eval_weights(vals, table)
            self.lines[p.name].append((state.time, snap))


def write_probe_csv(path, times, series: dict):
    """Write the scalar probe series as a stable-schema CSV.

    Header row, fixed column order (time first, then probe names sorted),
    full-precision scientific notation.
    """
    names = sorted(series)
    with open(path, "w") as fh:
        fh.write(",".join(["time"] + names) + "\n")
        for i, t in enumerate(times):
            row = [f"{t:.17e}"] + [f"{series[n][i]:.17e}" for n in names]
            fh.write(",".join(row) + "\n")


def write_line_csv(path, arclength, frames):
    """Write line-probe frames: first row the arclength grid, then one row
    of samples per recorded time."""
    with open(path, "w") as fh:
        fh.write(",".join(["time\\arclength"]
                          + [f"{s:.17e}" for s in arclength]) + "\n")
        for t, snap in frames:
            fh.write(",".join([f"{t:.17e}"]
                              + [f"{v:.17e}" for v in snap]) + "\n")
