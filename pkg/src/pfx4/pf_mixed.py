"""Mixed two-field solve of the split second-order phase-field system.

The fourth-order equation is recast in the pair (d, psi) with
psi = lap(d) / lambda0; both fields share one equal-order Lagrange space
(Q9Q9 or Q4Q4).  The auxiliary field carries a homogeneous essential
condition on a configurable node set (the full exterior boundary for the
benchmark problems, section cuts excluded for strip tests), and the
d-equation picks up a Robin boundary term on a configurable side-set.
The block system is solved monolithically; the d-solution is invariant
under rescaling of lambda0 while psi scales inversely.
"""

from __future__ import annotations

import numpy as np

from .fe_basis import eval_basis, eval_face_basis, reference_element
from .linsys import FactorCache, SparsePattern, SparseSystem
from .mesh import Mesh
from .pf_cdg import PFCoefficients

__all__ = ["MixedScheme", "assemble_mixed_system", "extract_d"]


class MixedScheme:
    """Monolithic (d, psi) phase-field solver on equal-order spaces.

    Parameters
    ----------
    mesh : Mesh
        Q9 or Q4 mesh; both fields use its nodes.
    coeffs : PFCoefficients
        Operator coefficients including the splitting scale lambda0.
    eta0 : float
        Residual stiffness of the degradation function.
    psi_dirichlet : ndarray, optional
        Nodes where psi = 0 is imposed essentially.  Defaults to every
        boundary node of the mesh.
    robin_set : str, optional
        Side-set carrying the Robin boundary term of the d-equation.
    dirichlet_nodes : ndarray, optional
        Nodes with prescribed d = ``dirichlet_value`` (profile tests).
    """

    n_fields = 2

    def __init__(self, mesh: Mesh, coeffs: PFCoefficients, eta0: float,
                 psi_dirichlet=None, robin_set: str | None = None,
                 dirichlet_nodes=None, dirichlet_value: float = 1.0):
        self.mesh = mesh
        self.coeffs = coeffs
        self.eta0 = eta0
        self.ref = reference_element(mesh.kind)
        n = mesh.n_nodes
        self.n_nodes = n
        if psi_dirichlet is None:
            psi_dirichlet = _boundary_nodes(mesh)
        self.psi_dirichlet = np.asarray(psi_dirichlet, dtype=np.int64)
        self.dirichlet_nodes = (None if dirichlet_nodes is None
                                else np.asarray(dirichlet_nodes, np.int64))
        self.dirichlet_value = dirichlet_value
        self.robin_set = robin_set

        ev = eval_basis(self.ref, mesh.element_coords())
        self.N = np.ascontiguousarray(ev.N)
        self.dN = ev.dN_dX
        self.w = ev.detJ_weight

        conn = mesh.elements
        both = np.concatenate([conn, conn + n], axis=1)
        self.pattern = SparsePattern(2 * n, [both])
        self.system = SparseSystem(self.pattern)
        self._cache = FactorCache(symmetric=False, rtol=1e-10, max_krylov=100, refresh_iters=70)
        self._assemble_fixed()
        rows = np.repeat(conn[:, :, None] + n, conn.shape[1], axis=2)
        cols = np.repeat(conn[:, None, :], conn.shape[1], axis=1)
        self._hist_pos = self.pattern.positions(rows.ravel(), cols.ravel())

    def _assemble_fixed(self):
        c, mesh, n = self.coeffs, self.mesh, self.n_nodes
        conn = mesh.elements
        K_grad = np.einsum("eqna,eqma,eq->enm", self.dN, self.dN, self.w)
        M = np.einsum("eqa,eqb,eq->eab", self.N, self.N, self.w)
        sy = self.system
        sy.reset()
        # d-equation rows: (grad c, grad d) + lambda0 (c, psi) [+ Robin]
        sy.scatter_add(K_grad, conn)
        sy.scatter_add(c.lambda0 * M, conn, conn + n)
        # psi-equation rows: -l0 a2 (grad chi, grad psi) + l0 a1 (chi, psi)
        #                    + a0 (chi, d)  [+ history term per step]
        sy.scatter_add(-c.lambda0 * c.alpha2 * K_grad, conn + n, conn + n)
        sy.scatter_add(c.lambda0 * c.alpha1 * M, conn + n, conn + n)
        sy.scatter_add(c.alpha0 * M, conn + n, conn)
        if self.robin_set is not None:
            self._assemble_robin()
        self._fixed_data = sy.data.copy()

    def _assemble_robin(self):
        """Robin term (alpha2/alpha1) lambda0 <c, grad(psi).N> on the set."""
        c, mesh, n = self.coeffs, self.mesh, self.n_nodes
        faces = mesh.side_sets[self.robin_set]
        fac = c.alpha2 / c.alpha1 * c.lambda0
        for f in np.unique(faces[:, 1]):
            els = faces[faces[:, 1] == f, 0]
            fb = eval_face_basis(self.ref, mesh.element_coords(els), int(f))
            gn = np.einsum("eqni,eqi->eqn", fb.dN_dX, fb.normal)
            E = fac * np.einsum("eqa,eqb,eq->eab", fb.N, gn, fb.detJ_weight)
            self.system.scatter_add(E, mesh.elements[els],
                                    mesh.elements[els] + n)

    def assemble(self, history) -> None:
        """Rebuild the block system for the given history field."""
        fac = 2.0 * (1.0 - self.eta0)
        H = np.broadcast_to(np.asarray(history, dtype=float), self.w.shape)
        sy = self.system
        sy.data[:] = self._fixed_data
        wH = self.w * (fac * H)
        K_H = np.einsum("eqa,eqb,eq->eab", self.N, self.N, wH)
        np.add.at(sy.data, self._hist_pos, K_H.ravel())
        sy.rhs[:] = 0.0
        f = np.einsum("eqa,eq->ea", self.N, wH)
        sy.add_rhs(f, self.mesh.elements + self.n_nodes)
        sy.clear_constraints()
        sy.constrain(self.psi_dirichlet + self.n_nodes, 0.0)
        if self.dirichlet_nodes is not None and self.dirichlet_nodes.size:
            # A prescribed phase-field value sacrifices the evolution
            # equation at that node (where its reaction lives), not the
            # auxiliary definition lap(d) = lambda0 psi, which must keep
            # holding at the clamp.
            sy.constrain(self.dirichlet_nodes, self.dirichlet_value,
                         rows=self.dirichlet_nodes + self.n_nodes)

    def solve(self, history) -> np.ndarray:
        """Assemble for ``history`` and return the stacked (d, psi) vector.

        A vanishing load with no prescribed phase-field values has the
        exact solution (0, 0); the solve is skipped then.
        """
        if self.dirichlet_nodes is None and \
                np.max(np.abs(history)) * 2.0 < 1e-12 * self.coeffs.alpha0:
            return np.zeros(2 * self.n_nodes)
        self.assemble(history)
        return self.system.solve(cache=self._cache)

    def split(self, solution: np.ndarray):
        """Split a stacked solution into (d, psi)."""
        return solution[:self.n_nodes], solution[self.n_nodes:]

    def extract_d(self, solution: np.ndarray) -> np.ndarray:
        """Nodal phase field from a stacked solution (scheme-agnostic API)."""
        return solution[:self.n_nodes]

    def quad_points_physical(self) -> np.ndarray:
        return np.einsum("eqn,enk->eqk", self.N, self.mesh.element_coords())


def _boundary_nodes(mesh: Mesh) -> np.ndarray:
    from .fe_basis import FACE_CORNERS

    ids = []
    nn = mesh.elements.shape[1]
    for e, f in mesh.boundary_faces():
        conn = mesh.elements[e]
        a, b = FACE_CORNERS[f]
        ids.extend((conn[a], conn[b]))
        if nn == 9:
            ids.append(conn[4 + f])
    return np.unique(np.asarray(ids, dtype=np.int64))


def assemble_mixed_system(mesh: Mesh, coeffs: PFCoefficients, history,
                          eta0: float, **kwargs):
    """One-shot functional wrapper: returns the constrained (K, f) pair."""
    scheme = MixedScheme(mesh, coeffs, eta0, **kwargs)
    scheme.assemble(history)
    return scheme.system.matrix(), scheme.system.rhs.copy()


def extract_d(scheme: MixedScheme, solution: np.ndarray) -> np.ndarray:
    """Nodal phase field of a mixed solution (PFSolution-compatible)."""
    return scheme.extract_d(solution)
