"""Finite-strain momentum balance on Q4 elements with Newton/Newmark.

Total Lagrangian formulation: residual from the second PK stress of the
degraded hyperelastic law, consistent tangent from the closed-form
elasticity tensor plus the initial-stress term, consistent mass matrix,
implicit Newmark time discretization.  Essential boundary conditions are
imposed by symmetric elimination so reactions are read directly off the
assembled residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import constitutive as con
from .fe_basis import ElementInversionError, eval_basis, eval_face_basis, reference_element
from .linsys import FactorCache, SparsePattern, SparseSystem, element_dof_blocks
from .mesh import Mesh

__all__ = [
    "NewmarkParams",
    "DirichletBC",
    "TractionBC",
    "NewtonError",
    "MomentumSolver",
    "newmark_update",
]


class NewtonError(RuntimeError):
    """Newton iteration failed to converge (drives time-step rejection)."""


@dataclass(frozen=True)
class NewmarkParams:
    """Implicit Newmark parameters, beta in (0, 0.5], gamma in (0, 1]."""

    beta: float = 0.25
    gamma: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.beta <= 0.5:
            raise ValueError("beta must lie in (0, 0.5]")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")


def newmark_update(nm: NewmarkParams, dt: float, u_new, u0, v0, a0):
    """Acceleration and velocity at the end of a step from displacements."""
    b, g = nm.beta, nm.gamma
    a_new = ((u_new - u0) / (b * dt ** 2) - v0 / (b * dt)
             - (1.0 - 2.0 * b) / (2.0 * b) * a0)
    v_new = (g / (b * dt) * (u_new - u0) + (1.0 - g / b) * v0
             + dt * (1.0 - 0.5 * g / b) * a0)
    return v_new, a_new


@dataclass
class DirichletBC:
    """Prescribed displacement component on a node set.

    ``value`` is a constant or a callable of time.
    """

    nodes: np.ndarray
    comp: int
    value: float | object = 0.0

    def dofs(self) -> np.ndarray:
        return 2 * np.asarray(self.nodes, dtype=np.int64) + self.comp

    def value_at(self, t: float) -> float:
        return self.value(t) if callable(self.value) else float(self.value)


@dataclass
class TractionBC:
    """Reference traction s* on a side-set; the applied load is F s*.

    ``value`` maps time to the 2-vector s* (MPa), constant vectors allowed.
    """

    side_set: str
    value: object = (0.0, 0.0)

    def value_at(self, t: float) -> np.ndarray:
        v = self.value(t) if callable(self.value) else self.value
        return np.asarray(v, dtype=float)


class MomentumSolver:
    """Newton solver for the Newmark-discretized momentum residual.

    Parameters
    ----------
    mesh : Mesh
        Q4 mesh carrying the displacement field.
    material : constitutive.MaterialParams
    dirichlet : list of DirichletBC
    tractions : list of TractionBC, optional
    body_force : callable or array, optional
        Reference body force b*(t) per unit volume (N/mm^3).
    newmark : NewmarkParams
    tol_rel, max_iter : float, int
        Newton controls; the absolute tolerance is
        ``tol_abs_scale * E * sqrt(domain area)``.
    """

    def __init__(self, mesh: Mesh, material: con.MaterialParams,
                 dirichlet: list[DirichletBC],
                 tractions: list[TractionBC] | None = None,
                 body_force=None,
                 newmark: NewmarkParams = NewmarkParams(),
                 tol_rel: float = 1e-8, tol_abs_scale: float = 1e-10,
                 max_iter: int = 12):
        if mesh.kind != "q4":
            raise ValueError("the momentum solve runs on the Q4 mesh")
        self.mesh = mesh
        self.material = material
        self.dirichlet = dirichlet
        self.tractions = tractions or []
        self.body_force = body_force
        self.newmark = newmark
        self.tol_rel = tol_rel
        self.max_iter = max_iter
        self.ndof = 2 * mesh.n_nodes

        self.ref = reference_element("q4")
        ev = eval_basis(self.ref, mesh.element_coords())
        self.N = np.ascontiguousarray(ev.N)
        self.dN = ev.dN_dX
        self.w = ev.detJ_weight
        area = float(self.w.sum())
        self.tol_abs = tol_abs_scale * material.e_young * np.sqrt(area)

        self.dof_blocks = element_dof_blocks(mesh.elements, 2)
        self.pattern = SparsePattern(self.ndof, [self.dof_blocks])
        self.system = SparseSystem(self.pattern)
        self.system.symmetric_hint = True
        rows = np.repeat(self.dof_blocks[:, :, None], 8, axis=2)
        cols = np.repeat(self.dof_blocks[:, None, :], 8, axis=1)
        self._kpos = self.pattern.positions(rows.ravel(), cols.ravel())
        self._newton_cache = None
        self._stiff_data = None
        self._mass = self._assemble_mass()
        # face data per traction side-set, grouped by local face id
        self._face_groups = {}
        for tr in self.tractions:
            faces = mesh.side_sets[tr.side_set]
            groups = []
            for f in np.unique(faces[:, 1]):
                els = faces[faces[:, 1] == f, 0]
                fb = eval_face_basis(self.ref, mesh.element_coords(els), int(f))
                groups.append((els, fb))
            self._face_groups[tr.side_set] = groups

    def _assemble_mass(self):
        Me = self.material.rho0 * np.einsum(
            "eqa,eqb,eq->eab", self.N, self.N, self.w)
        block = np.zeros((Me.shape[0], 8, 8))
        block[:, 0::2, 0::2] = Me
        block[:, 1::2, 1::2] = Me
        sy = SparseSystem(self.pattern)
        sy.scatter_add(block, self.dof_blocks)
        self._mass_data = sy.data.copy()
        return sy.matrix()

    # -- kinematics helpers ------------------------------------------------

    def deformation_gradient(self, u: np.ndarray) -> np.ndarray:
        """F at every volume quadrature point, shape (ne, nq, 2, 2)."""
        ue = u.reshape(-1, 2)[self.mesh.elements]
        F = np.einsum("eai,eqaJ->eqiJ", ue, self.dN)
        F[..., 0, 0] += 1.0
        F[..., 1, 1] += 1.0
        return F

    def interpolate_d(self, d_corner: np.ndarray) -> np.ndarray:
        """Phase field at the Q4 quadrature points from corner-node values."""
        return np.einsum("eqa,ea->eq", self.N, d_corner[self.mesh.elements])

    # -- residual and tangent ----------------------------------------------

    def residual_jacobian(self, u, d_qp, t, accel_coef=0.0, accel_rhs=None,
                          want_jacobian=True, as_matrix=True):
        """Assemble R(u) and optionally J = dR/du.

        ``accel_coef`` is 1/(beta dt^2) (zero for statics) and ``accel_rhs``
        the Newmark history vector so that u_dd = accel_coef * u - accel_rhs.

        Returns (R, K) with K a CSR matrix or None; ``as_matrix=False``
        leaves the assembled Jacobian in ``self.system`` without copying it
        out.  Raises ElementInversionError if det F <= 0 at any quadrature
        point.
        """
        mesh = self.mesh
        try:
            F = self.deformation_gradient(u)
            C3, Cinv, J, trC = con.plane_strain_state(F)
        except FloatingPointError as exc:
            raise ElementInversionError(str(exc)) from exc
        st = con.stress_tangent(self.material, C3, d_qp, J=J, Cinv=Cinv,
                                tangent=want_jacobian, inplane=True)
        S2 = st.S[..., :2, :2]
        P = F @ S2
        f_int = np.einsum("eqiJ,eqaJ,eq->eai", P, self.dN, self.w,
                          optimize=True)
        R = np.zeros(self.ndof)
        np.add.at(R, self.dof_blocks.reshape(-1, 4, 2), f_int)

        if accel_coef:
            R += self._mass @ (accel_coef * u - accel_rhs)
        if self.body_force is not None:
            b = (self.body_force(t) if callable(self.body_force)
                 else np.asarray(self.body_force, dtype=float))
            fb = np.einsum("eqa,i,eq->eai", self.N, b, self.w)
            np.add.at(R, self.dof_blocks.reshape(-1, 4, 2), -fb)
        for tr in self.tractions:
            s_star = tr.value_at(t)
            if not np.any(s_star):
                continue
            for els, fb in self._face_groups[tr.side_set]:
                ue = u.reshape(-1, 2)[mesh.elements[els]]
                Ff = np.einsum("eai,eqaJ->eqiJ", ue, fb.dN_dX)
                Ff[..., 0, 0] += 1.0
                Ff[..., 1, 1] += 1.0
                tvec = np.einsum("eqiJ,J->eqi", Ff, s_star)
                ft = np.einsum("eqa,eqi,eq->eai", fb.N, tvec, fb.detJ_weight)
                dofs = element_dof_blocks(mesh.elements[els], 2)
                np.add.at(R, dofs.reshape(-1, 4, 2), -ft)

        K = None
        if want_jacobian:
            # material part in reduced (Voigt) form: symmetric index pairs
            # (11, 22, 12) with the off-diagonal weight folded into B
            C4 = st.C_tensor
            ne, nq = self.w.shape
            # Bv[e,q,(a,i),m]: symmetric strain-displacement rows in the
            # reduced pair ordering (11, 22, 12-doubled)
            FA = F[:, :, None, :, :]      # e,q,1,i,I
            dNa = self.dN[:, :, :, None, :]  # e,q,a,1,J
            Bv = np.empty((ne, nq, 4, 2, 3))
            Bv[..., 0] = FA[..., 0] * dNa[..., 0]
            Bv[..., 1] = FA[..., 1] * dNa[..., 1]
            Bv[..., 2] = (FA[..., 0] * dNa[..., 1]
                          + FA[..., 1] * dNa[..., 0])
            Bv = Bv.reshape(ne, nq, 8, 3)
            Cv = np.empty((ne, nq, 3, 3))
            pairs = ((0, 0), (1, 1), (0, 1))
            for m, (i, j) in enumerate(pairs):
                for n_, (k, l) in enumerate(pairs):
                    Cv[..., m, n_] = C4[..., i, j, k, l]
            X = Bv.reshape(ne * nq, 8, 3)
            K_mat = (X @ (Cv.reshape(ne * nq, 3, 3)) @ X.transpose(0, 2, 1))
            K_mat = (K_mat.reshape(ne, nq, 8, 8)
                     * self.w[..., None, None]).sum(axis=1)
            K_geo = np.einsum("eqaJ,eqJL,eqbL,eq->eab",
                              self.dN, S2, self.dN, self.w, optimize=True)
            K_e = K_mat
            K_e[:, 0::2, 0::2] += K_geo
            K_e[:, 1::2, 1::2] += K_geo
            sy = self.system
            sy.reset(rhs=False)
            np.add.at(sy.data, self._kpos, K_e.ravel())
            self._stiff_data = sy.data.copy()
            if accel_coef:
                sy.data += accel_coef * self._mass_data
            if as_matrix:
                K = sy.matrix()
        return R, K

    # -- solves --------------------------------------------------------------

    def apply_dirichlet(self, u: np.ndarray, t: float) -> np.ndarray:
        out = u.copy()
        for bc in self.dirichlet:
            out[bc.dofs()] = bc.value_at(t)
        return out

    def constrained_dofs(self) -> np.ndarray:
        if not self.dirichlet:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate([bc.dofs() for bc in self.dirichlet]))

    def newton_solve(self, u_guess, d_qp, t, accel_coef=0.0, accel_rhs=None):
        """Solve R(u) = 0 at time t for the free dofs.

        The convergence check runs on a residual-only evaluation; the
        tangent (the expensive part) is assembled only for iterations that
        actually take a step, and the linear solves reuse a stale-LU
        preconditioned Krylov cache.

        Returns (u, n_iter).  Raises NewtonError on non-convergence and
        ElementInversionError if a trial state inverts an element.
        """
        u = self.apply_dirichlet(u_guess, t)
        fixed = self.constrained_dofs()
        free = np.setdiff1d(np.arange(self.ndof), fixed, assume_unique=True)
        if self._newton_cache is None:
            self._newton_cache = FactorCache(symmetric=True, rtol=1e-10,
                                             max_krylov=60, refresh_iters=12)
        r0 = None
        inherited = self._stiff_data is not None
        fresh_done = False
        for it in range(self.max_iter + 1):
            R, _ = self.residual_jacobian(u, d_qp, t, accel_coef, accel_rhs,
                                          want_jacobian=False)
            rnorm = np.linalg.norm(R[free])
            if r0 is None:
                r0 = rnorm
            if rnorm <= max(self.tol_rel * r0, self.tol_abs):
                return u, it
            if not np.isfinite(rnorm) or rnorm > 1e4 * r0 + self.tol_abs:
                raise NewtonError(f"residual diverged (|R| = {rnorm:.3e})")
            if it == self.max_iter:
                if inherited and not fresh_done:
                    # only a stale tangent was used; retry once from the
                    # current iterate with a fresh one before giving up
                    self._stiff_data = None
                    return self.newton_solve(u, d_qp, t, accel_coef,
                                             accel_rhs)
                break
            sy = self.system
            if inherited and not fresh_done and it < 2:
                # modified Newton: reuse the stiffness of the previous solve
                # (the mass term is rebuilt for the current step size);
                # smooth steps converge in a couple of iterations regardless
                sy.data[:] = self._stiff_data
                if accel_coef:
                    sy.data += accel_coef * self._mass_data
            else:
                self.residual_jacobian(u, d_qp, t, accel_coef, accel_rhs,
                                       want_jacobian=True, as_matrix=False)
                fresh_done = True
            sy.rhs[:] = -R
            sy.clear_constraints()
            if fixed.size:
                sy.constrain(fixed, 0.0)
            u = u + sy.solve(cache=self._newton_cache)
        raise NewtonError(
            f"no convergence in {self.max_iter} iterations "
            f"(|R| = {rnorm:.3e}, target {max(self.tol_rel * r0, self.tol_abs):.3e})")

    def reaction_force(self, u, d_qp, t, node_set, accel_coef=0.0,
                       accel_rhs=None) -> np.ndarray:
        """Net force transmitted through the constrained nodes of a set.

        Sums the full (unconstrained) residual, i.e. internal plus inertial
        minus applied forces, over the given nodes; per component (N).
        """
        R, _ = self.residual_jacobian(u, d_qp, t, accel_coef, accel_rhs,
                                      want_jacobian=False)
        nodes = (self.mesh.node_sets[node_set]
                 if isinstance(node_set, str) else np.asarray(node_set))
        return np.array([R[2 * nodes].sum(), R[2 * nodes + 1].sum()])

