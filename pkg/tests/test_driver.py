import numpy as np
import numpy.testing as npt
import pytest

from pfx4.constitutive import MaterialParams
from pfx4.driver import (CoupledProblem, SchemeConfig, Simulation,
                         SimulationAborted, TimeControls)
from pfx4.mesh import generate_rectangle
from pfx4.momentum import DirichletBC, NewmarkParams


@pytest.fixture
def small_problem():
    mesh = generate_rectangle(np.linspace(0, 1, 4), np.linspace(0, 1, 4))
    mesh.side_sets["outer"] = mesh.boundary_faces()
    mat = MaterialParams(e_young=210e3, nu=0.3, rho0=8e-9,
                         gc=2.7, l0=0.05, eta0=1e-6)

    def make(ramp_rate=0.0):
        bcs = [DirichletBC(mesh.node_sets["bottom"], 0, 0.0),
               DirichletBC(mesh.node_sets["bottom"], 1, 0.0),
               DirichletBC(mesh.node_sets["top"], 1, 0.0),
               DirichletBC(mesh.node_sets["top"], 0,
                           (lambda t: ramp_rate * t) if ramp_rate else 0.0)]
        return CoupledProblem(mesh_q4=mesh, material=mat, dirichlet=bcs,
                              pf_d2_set="outer")

    return make


def config(scheme="CDG_Q9", **kw):
    return SchemeConfig(scheme=scheme, beta_s2=2e-4, lambda0=1.0,
                        newmark=NewmarkParams(0.3025, 0.6), **kw)


def controls(**kw):
    base = dict(dt_initial=1e-8, t_final=1e-7, dt_min=1e-13, dt_max=1e-7)
    base.update(kw)
    return TimeControls(**base)


def test_zero_load_is_fixed_point(small_problem):
    sim = Simulation(small_problem(0.0), config(), controls())
    st = sim.step()
    assert st.time > 0
    npt.assert_allclose(st.u, 0.0, atol=1e-12)
    npt.assert_allclose(st.d, 0.0, atol=1e-12)
    npt.assert_allclose(st.history, 0.0, atol=1e-15)


def test_schemes_share_momentum_solution_before_damage(small_problem):
    # one early step during the ramp: d ~ 0, so the Q4 momentum solve is
    # scheme independent
    fields = []
    for scheme in ("CDG_Q9", "MIXED_Q9Q9", "MIXED_Q4Q4"):
        sim = Simulation(small_problem(ramp_rate=50.0), config(scheme),
                         controls())
        fields.append(sim.step().u)
    scale = np.abs(fields[0]).max()
    assert scale > 0
    for u in fields[1:]:
        assert np.abs(u - fields[0]).max() < 1e-10 * scale


def test_newton_failure_halves_dt(small_problem):
    problem = small_problem(ramp_rate=2e5)  # huge pull in one step
    tc = controls(dt_initial=1e-4, dt_max=1e-4, t_final=2e-4)
    sim = Simulation(problem, config(), tc)
    st = sim.step()
    assert st.rejections > 0
    # the accepted dt is the halved one; adaptive growth applies after
    assert st.time < 1e-4


def test_dt_floor_aborts_with_state(small_problem):
    problem = small_problem(ramp_rate=5e6)
    tc = controls(dt_initial=1e-4, dt_max=1e-4, dt_min=9e-5, t_final=2e-4)
    sim = Simulation(problem, config(), tc)
    with pytest.raises(SimulationAborted) as err:
        sim.step()
    assert err.value.state is not None
    assert err.value.state.time == 0.0


def test_adaptive_growth_caps_at_dt_max(small_problem):
    tc = controls(dt_initial=1e-8, dt_max=3e-8, t_final=4e-7)
    sim = Simulation(small_problem(50.0), config(), tc)
    for _ in range(12):
        st = sim.step()
    assert st.dt <= 3e-8 + 1e-20


def test_history_monotone_under_load_cycle(small_problem):
    # drive up then back down: H never decreases even as the load unloads
    mesh_rate = 400.0
    problem = small_problem(0.0)
    problem.dirichlet[-1] = DirichletBC(
        problem.mesh_q4.node_sets["top"], 0,
        lambda t: mesh_rate * (t if t <= 1e-7 else max(2e-7 - t, 0.0)))
    sim = Simulation(problem, config(), controls(t_final=2e-7))
    H_prev = sim.state.history.copy()
    d_max_prev = -1.0
    while sim.state.time < 2e-7 - 1e-15:
        st = sim.step()
        assert np.all(st.history >= H_prev - 1e-15)
        H_prev = st.history.copy()
        assert st.d.max() >= d_max_prev - 1e-8
        d_max_prev = st.d.max()


def test_run_hits_t_final_exactly(small_problem):
    tc = controls(dt_initial=3e-8, dt_max=3e-8, t_final=1e-7)
    sim = Simulation(small_problem(50.0), config(), tc)
    times = []
    sim.run(lambda st: times.append(st.time))
    npt.assert_allclose(sim.state.time, 1e-7, rtol=1e-12)
    assert times[0] == 0.0


def test_zero_length_run_only_initial_state(small_problem):
    tc = controls(t_final=0.0)
    sim = Simulation(small_problem(50.0), config(), tc)
    seen = []
    sim.run(lambda st: seen.append(st.step))
    assert seen == [0]


def test_deterministic_repeat(small_problem):
    def one_run():
        sim = Simulation(small_problem(100.0), config(), controls(t_final=2e-7))
        sim.run()
        return sim.state

    a = one_run()
    b = one_run()
    assert np.array_equal(a.u, b.u)
    assert np.array_equal(a.d, b.d)
    assert np.array_equal(a.history, b.history)


def test_mixed_scheme_state_carries_psi(small_problem):
    sim = Simulation(small_problem(100.0), config("MIXED_Q9Q9"),
                     controls(t_final=3e-8))
    st = sim.run()
    assert st.psi is not None and st.psi.shape == st.d.shape
    cdg = Simulation(small_problem(100.0), config(), controls(t_final=3e-8))
    assert cdg.run().psi is None
