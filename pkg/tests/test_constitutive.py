import numpy as np
import numpy.testing as npt
import pytest

from pfx4.constitutive import (MaterialParams, degradation, energy_density,
                               kinematics_from_F, plane_strain_state,
                               stress_tangent, tensile_energy,
                               tensile_energy_from_F, update_history)


def random_states(n, rng, j_lo=0.8, j_hi=1.3):
    """Random plane-strain states with controlled volume ratio."""
    Fs = []
    while len(Fs) < n:
        F = np.eye(2) + 0.25 * rng.uniform(-1, 1, (2, 2))
        J = np.linalg.det(F)
        if J <= 0:
            continue
        target = rng.uniform(j_lo, j_hi)
        F *= np.sqrt(target / J)
        Fs.append(F)
    return Fs


def test_derived_moduli(steel):
    npt.assert_allclose(steel.kappa, 175.0e3, rtol=1e-12)
    npt.assert_allclose(steel.mu, 210.0e3 / 2.6, rtol=1e-12)


def test_parameter_validation():
    with pytest.raises(ValueError):
        MaterialParams(e_young=-1.0, nu=0.3)
    with pytest.raises(ValueError):
        MaterialParams(e_young=1.0, nu=0.5)
    with pytest.raises(ValueError):
        MaterialParams(e_young=1.0, nu=0.3, eta0=0.0)


def test_undeformed_state_is_stress_free(steel):
    C3, J = kinematics_from_F(np.eye(2))
    for d in (0.0, 0.37, 1.0):
        st = stress_tangent(steel, C3, d, J=J)
        npt.assert_allclose(st.S, 0.0, atol=1e-9)
        npt.assert_allclose(st.psi_plus, 0.0, atol=1e-14)


def test_degradation_values():
    g, gp = degradation(0.0, 1e-6)
    npt.assert_allclose([g, gp], [1.0, -2.0 * (1.0 - 1e-6)], rtol=1e-14)
    g, gp = degradation(1.0, 1e-6)
    npt.assert_allclose([g, gp], [1e-6, 0.0], atol=1e-16)
    g, _ = degradation(0.5, 1e-6)
    npt.assert_allclose(g, 0.25000075, rtol=1e-12)


def test_contraction_keeps_volumetric_stiffness(steel):
    # J < 1: the volumetric branch must not degrade, the deviatoric part
    # scales down to the residual stiffness
    F = 0.9 * np.eye(2)
    C3, J = kinematics_from_F(F)
    assert J < 1
    broken = stress_tangent(steel, C3, 1.0, J=J)
    intact = stress_tangent(steel, C3, 0.0, J=J)
    kappa = steel.kappa
    Cinv = np.linalg.inv(C3)
    S_circ = 0.5 * kappa * (J ** 2 - 1.0) * Cinv
    S_dev_b = broken.S - S_circ
    S_dev_i = intact.S - S_circ
    npt.assert_allclose(S_dev_b, steel.eta0 * S_dev_i, atol=1e-8)
    assert broken.psi_plus == pytest.approx(
        0.5 * steel.mu * (J ** (-2 / 3) * np.trace(C3) - 3.0), rel=1e-12)


def test_deviatoric_stress_is_traceless_against_C(steel):
    rng = np.random.default_rng(4)
    for F in random_states(10, rng):
        C3, J = kinematics_from_F(F)
        st = stress_tangent(steel, C3, 0.0, J=J)
        Cinv = np.linalg.inv(C3)
        S_circ = 0.5 * steel.kappa * (J ** 2 - 1.0) * Cinv
        S_dev = st.S - S_circ
        scale = np.abs(S_dev * C3).max()
        assert abs(np.tensordot(S_dev, C3)) <= 1e-10 * max(scale, 1.0)


def test_stress_matches_energy_derivative(steel):
    rng = np.random.default_rng(12)
    h = 1e-6
    for F in random_states(20, rng):
        C3, J = kinematics_from_F(F)
        for d in (0.0, 0.5, 1.0):
            st = stress_tangent(steel, C3, d, J=J, tangent=False)
            Sfd = np.zeros((3, 3))
            for i in range(3):
                for j in range(i, 3):
                    dC = np.zeros((3, 3))
                    dC[i, j] += 0.5 * h
                    dC[j, i] += 0.5 * h
                    Wp = energy_density(steel, C3 + dC, d)
                    Wm = energy_density(steel, C3 - dC, d)
                    Sfd[i, j] = Sfd[j, i] = (Wp - Wm) / h
            denom = max(np.abs(st.S).max(), 1.0)
            assert np.abs(2.0 * Sfd - 2.0 * st.S).max() / (2 * denom) < 1e-6


def test_tangent_matches_stress_derivative(steel):
    rng = np.random.default_rng(21)
    h = 1e-6
    for F in random_states(20, rng):
        C3, J = kinematics_from_F(F)
        for d in (0.0, 0.5, 1.0):
            st = stress_tangent(steel, C3, d, J=J)
            Cfd = np.zeros((3, 3, 3, 3))
            for k in range(3):
                for l in range(k, 3):
                    dC = np.zeros((3, 3))
                    dC[k, l] += 0.5 * h
                    dC[l, k] += 0.5 * h
                    Sp = stress_tangent(steel, C3 + dC, d,
                                        tangent=False).S
                    Sm = stress_tangent(steel, C3 - dC, d,
                                        tangent=False).S
                    Cfd[:, :, k, l] = Cfd[:, :, l, k] = (Sp - Sm) / h
            denom = np.abs(st.C_tensor).max()
            assert np.abs(st.C_tensor - Cfd).max() / denom < 1e-5


def test_tangent_symmetries(steel):
    rng = np.random.default_rng(30)
    for F in random_states(5, rng):
        C3, J = kinematics_from_F(F)
        C4 = stress_tangent(steel, C3, 0.3, J=J).C_tensor
        npt.assert_allclose(C4, C4.transpose(1, 0, 2, 3), atol=1e-8)
        npt.assert_allclose(C4, C4.transpose(0, 1, 3, 2), atol=1e-8)
        npt.assert_allclose(C4, C4.transpose(2, 3, 0, 1), atol=1e-8)


def test_inplane_tangent_matches_full(steel):
    rng = np.random.default_rng(33)
    for F in random_states(5, rng):
        C3, J = kinematics_from_F(F)
        full = stress_tangent(steel, C3, 0.4, J=J).C_tensor
        fast = stress_tangent(steel, C3, 0.4, J=J, inplane=True).C_tensor
        npt.assert_allclose(fast, full[:2, :2, :2, :2], rtol=1e-13)


def test_objectivity(steel):
    rng = np.random.default_rng(9)
    for F in random_states(10, rng):
        th = rng.uniform(0, 2 * np.pi)
        Q = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        C_a, _ = kinematics_from_F(F)
        C_b, _ = kinematics_from_F(Q @ F)
        Wa = energy_density(steel, C_a, 0.3)
        Wb = energy_density(steel, C_b, 0.3)
        assert abs(Wa - Wb) <= 1e-12 * max(abs(Wa), 1.0)


def test_continuity_across_heaviside_switch(steel):
    # U+ is C1 at J = 1: stress and tensile energy are continuous for any
    # damage level.  U+ is not C2, so the tangent is continuous only at
    # d = 0; for d > 0 it jumps by exactly (g - 1) kappa Cinv x Cinv (the
    # switched volumetric curvature), which the branch-based evaluation
    # reproduces.
    eps = 1e-8
    for d in (0.0, 0.5, 1.0):
        Fp = np.eye(2) * np.sqrt(1.0 + eps)
        Fm = np.eye(2) * np.sqrt(1.0 - eps)
        Cp, Jp = kinematics_from_F(Fp)
        Cm, Jm = kinematics_from_F(Fm)
        sp = stress_tangent(steel, Cp, d, J=Jp)
        sm = stress_tangent(steel, Cm, d, J=Jm)
        assert np.abs(sp.S - sm.S).max() < 10 * eps * steel.kappa
        assert abs(sp.psi_plus - sm.psi_plus) < 10 * eps * steel.kappa
        jump = sp.C_tensor - sm.C_tensor
        g, _ = degradation(d, steel.eta0)
        Cinv = np.linalg.inv(Cp)
        expected = (g - 1.0) * steel.kappa * np.einsum(
            "ij,kl->ijkl", Cinv, Cinv)
        npt.assert_allclose(jump, expected,
                            atol=100 * eps * steel.kappa
                            + 1e-10 * steel.kappa)


def test_history_irreversible():
    h = 0.0
    rng = np.random.default_rng(17)
    trace = []
    for _ in range(50):
        psi = rng.uniform(0, 10.0)
        h_new = update_history(h, psi)
        assert h_new >= h
        assert h_new == max(h, psi)
        h = h_new
        trace.append(psi)
    assert h == pytest.approx(max(trace))
    assert update_history(2.0, 1.0) == 2.0
    assert update_history(0.0, 3.0) == 3.0


def test_plane_strain_state_matches_generic(steel):
    rng = np.random.default_rng(40)
    F = np.stack(random_states(6, rng))
    C3a, Cinv, Ja, trC = plane_strain_state(F)
    C3b, Jb = kinematics_from_F(F)
    npt.assert_allclose(C3a, C3b, rtol=1e-14)
    npt.assert_allclose(Ja, Jb, rtol=1e-14)
    npt.assert_allclose(Cinv, np.linalg.inv(C3b), rtol=1e-10)
    npt.assert_allclose(trC, np.trace(C3b, axis1=-2, axis2=-1), rtol=1e-14)
    npt.assert_allclose(tensile_energy_from_F(steel, F),
                        tensile_energy(steel, C3b, J=Jb), rtol=1e-12)


def test_cbar_determinant_is_one(steel):
    rng = np.random.default_rng(14)
    for F in random_states(10, rng):
        C3, J = kinematics_from_F(F)
        Cbar = J ** (-2.0 / 3.0) * C3
        npt.assert_allclose(np.linalg.det(Cbar), 1.0, rtol=1e-10)
