"""Staggered time stepping of the coupled momentum / phase-field problem.

Each accepted step performs, in order: an implicit Newmark/Newton momentum
solve with the phase field frozen, an irreversibility update of the history
field at the phase-field quadrature points, and one linear phase-field
solve with the history frozen.  Newton failures (non-convergence or element
inversion) reject the step and halve the time step; accepted steps may grow
it again up to the configured ceiling.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import constitutive as con
from .fe_basis import ElementInversionError, reference_element
from .mesh import Mesh, promote_q4_to_q9
from .momentum import MomentumSolver, NewmarkParams, NewtonError, newmark_update
from .pf_cdg import CdgScheme, PFCoefficients
from .pf_mixed import MixedScheme

__all__ = [
    "SCHEMES",
    "TimeControls",
    "SchemeConfig",
    "CoupledProblem",
    "SimulationState",
    "SimulationAborted",
    "Simulation",
]

SCHEMES = ("CDG_Q9", "MIXED_Q9Q9", "MIXED_Q4Q4")


class SimulationAborted(RuntimeError):
    """Time step fell below the configured floor; carries the last state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class TimeControls:
    """Time-step controls; adaptive runs halve on failure and regrow."""

    dt_initial: float
    t_final: float
    dt_min: float = 1e-15
    dt_max: float | None = None
    adaptive: bool = True
    growth: float = 1.2

    def __post_init__(self):
        if self.t_final < 0:
            raise ValueError("t_final must be non-negative")
        dt_max = self.dt_max if self.dt_max is not None else self.dt_initial
        if not self.dt_min <= self.dt_initial <= dt_max:
            raise ValueError("need dt_min <= dt_initial <= dt_max")


@dataclass(frozen=True)
class SchemeConfig:
    """Selected phase-field scheme plus shared discretization controls."""

    scheme: str = "CDG_Q9"
    beta_s2: float = 2e-4
    lambda0: float = 1.0
    newmark: NewmarkParams = field(default_factory=NewmarkParams)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")


@dataclass
class CoupledProblem:
    """Mesh, material and boundary data defining one coupled problem."""

    mesh_q4: Mesh
    material: con.MaterialParams
    dirichlet: list = field(default_factory=list)
    tractions: list = field(default_factory=list)
    body_force: object = None
    pf_d2_set: str | None = None
    pf_psi_dirichlet: str | None = None  # node-set name; default all boundary
    name: str = "problem"


@dataclass
class SimulationState:
    """Complete solver state at one accepted time level."""

    time: float
    step: int
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    d: np.ndarray
    history: np.ndarray
    dt: float
    psi: np.ndarray | None = None
    newton_iters: int = 0
    rejections: int = 0


class Simulation:
    """Owns the momentum solver, the selected phase-field scheme and state.

    Parameters
    ----------
    problem : CoupledProblem
    config : SchemeConfig
    time : TimeControls
    mesh_q9 : Mesh, optional
        Congruent Q9 mesh; promoted from the Q4 mesh when omitted.
    """

    def __init__(self, problem: CoupledProblem, config: SchemeConfig,
                 time: TimeControls, mesh_q9: Mesh | None = None):
        self.problem = problem
        self.config = config
        self.time_controls = time
        mesh4 = problem.mesh_q4
        self.momentum = MomentumSolver(
            mesh4, problem.material, problem.dirichlet, problem.tractions,
            problem.body_force, newmark=config.newmark)
        coeffs = PFCoefficients.from_material(
            problem.material.gc, problem.material.l0,
            beta_s2=config.beta_s2, lambda0=config.lambda0)

        if config.scheme == "MIXED_Q4Q4":
            self.mesh_pf = mesh4
        else:
            self.mesh_pf = mesh_q9 if mesh_q9 is not None else promote_q4_to_q9(mesh4)
        eta0 = problem.material.eta0
        psi_nodes = (None if problem.pf_psi_dirichlet is None
                     else self.mesh_pf.node_sets[problem.pf_psi_dirichlet])
        if config.scheme == "CDG_Q9":
            self.pf = CdgScheme(self.mesh_pf, coeffs, eta0,
                                d2_set=problem.pf_d2_set)
        else:
            self.pf = MixedScheme(self.mesh_pf, coeffs, eta0,
                                  psi_dirichlet=psi_nodes)
        # Q4 displacement basis at the phase-field quadrature points of the
        # congruent element (identical reference coordinates), used to
        # recompute kinematics where the history variable lives.
        from .fe_basis import eval_basis_at

        ref4 = reference_element("q4")
        pts = self.pf.ref.quad_points
        self._dN4_at_pf = eval_basis_at(ref4, mesh4.element_coords(),
                                        pts).dN_dX
        nq = pts.shape[0]
        self.state = SimulationState(
            time=0.0, step=0,
            u=np.zeros(self.momentum.ndof),
            v=np.zeros(self.momentum.ndof),
            a=np.zeros(self.momentum.ndof),
            d=np.zeros(self.mesh_pf.n_nodes),
            history=np.zeros((mesh4.n_elements, nq)),
            dt=time.dt_initial,
            psi=(np.zeros(self.mesh_pf.n_nodes)
                 if config.scheme != "CDG_Q9" else None),
        )

    # -- staggered pieces ---------------------------------------------------

    def d_at_q4_quadrature(self, d: np.ndarray) -> np.ndarray:
        """Phase field at the momentum quadrature points.

        Corner node ids of the congruent Q9 mesh coincide with the Q4 node
        ids, so corner values interpolate with the Q4 basis directly.
        """
        return self.momentum.interpolate_d(d[:self.problem.mesh_q4.n_nodes])

    def tensile_energy_at_pf_quadrature(self, u: np.ndarray) -> np.ndarray:
        """Undegraded tensile energy at the PF quadrature points."""
        ue = u.reshape(-1, 2)[self.problem.mesh_q4.elements]
        F = np.einsum("eai,eqaJ->eqiJ", ue, self._dN4_at_pf)
        F[..., 0, 0] += 1.0
        F[..., 1, 1] += 1.0
        return con.tensile_energy_from_F(self.problem.material, F)

    def step(self) -> SimulationState:
        """Advance one accepted step; may shrink dt on Newton failures.

        Order of operations: momentum solve with frozen d, history update
        at the PF quadrature points, linear PF solve with frozen history.

        Raises
        ------
        SimulationAborted
            When dt would fall below ``dt_min``.
        """
        st = self.state
        tc = self.time_controls
        nm = self.config.newmark
        d_qp = self.d_at_q4_quadrature(st.d)
        dt = st.dt
        rejections = 0
        while True:
            t_new = st.time + dt
            coef = 1.0 / (nm.beta * dt * dt)
            accel_rhs = (coef * st.u + st.v / (nm.beta * dt)
                         + (1.0 - 2.0 * nm.beta) / (2.0 * nm.beta) * st.a)
            try:
                u_new, iters = self.momentum.newton_solve(
                    st.u, d_qp, t_new, coef, accel_rhs)
                break
            except (NewtonError, ElementInversionError) as exc:
                rejections += 1
                dt = 0.5 * dt
                if dt < tc.dt_min:
                    raise SimulationAborted(
                        f"time step fell below dt_min at t = {st.time:.6e}: "
                        f"{exc}", state=st) from exc
        v_new, a_new = newmark_update(nm, dt, u_new, st.u, st.v, st.a)
        psi_plus = self.tensile_energy_at_pf_quadrature(u_new)
        history = con.update_history(st.history, psi_plus)
        sol = self.pf.solve(history)
        d_new = self.pf.extract_d(sol)
        psi_new = None
        if self.config.scheme != "CDG_Q9":
            psi_new = sol[self.mesh_pf.n_nodes:]
        dt_next = dt
        if tc.adaptive:
            dt_max = tc.dt_max if tc.dt_max is not None else tc.dt_initial
            dt_next = min(tc.growth * dt, dt_max)
        self.state = SimulationState(
            time=t_new, step=st.step + 1,
            u=u_new, v=v_new, a=a_new, d=d_new, history=history,
            dt=dt_next, psi=psi_new, newton_iters=iters,
            rejections=rejections)
        return self.state

    def run(self, callback=None, report_every: int = 0) -> SimulationState:
        """Advance to t_final; ``callback(state)`` fires after each step.

        The final step is clipped so the run lands on ``t_final`` exactly.
        """
        tc = self.time_controls
        if callback is not None:
            callback(self.state)
        while self.state.time < tc.t_final - 1e-15 * max(tc.t_final, 1.0):
            remaining = tc.t_final - self.state.time
            if self.state.dt > remaining:
                self.state = replace(self.state, dt=remaining)
            st = self.step()
            if callback is not None:
                callback(st)
            if report_every and st.step % report_every == 0:
                print(f"  step {st.step:5d}  t = {st.time:.4e}  "
                      f"dt = {st.dt:.2e}  max d = {st.d.max():.3f}",
                      flush=True)
        return self.state

    def reaction(self, node_set) -> np.ndarray:
        """Force applied through a node set for the current state (N).

        Sums the internal-force residual of the converged state over the
        set; positive components point along the applied displacement.
        """
        st = self.state
        d_qp = self.d_at_q4_quadrature(st.d)
        return self.momentum.reaction_force(st.u, d_qp, st.time, node_set)
