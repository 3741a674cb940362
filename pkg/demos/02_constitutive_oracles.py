"""Check the material law against finite-difference oracles.

The second PK stress must equal 2 dW/dC and the tangent 2 dS/dC for random
states spanning contraction and dilation and the whole damage range; the
tension-only volumetric split is visible in the J < 1 states, where the
volumetric stress keeps its full stiffness while the deviatoric part drops
to the residual level.

Run:  python demos/02_constitutive_oracles.py
"""

import numpy as np

from pfx4.constitutive import (MaterialParams, energy_density,
                               kinematics_from_F, stress_tangent)


def main():
    mat = MaterialParams(e_young=210e3, nu=0.3, gc=2.7, l0=3.75e-3)
    rng = np.random.default_rng(2024)
    h = 1e-6
    print(f"kappa = {mat.kappa:.6g} MPa, mu = {mat.mu:.6g} MPa")
    worst_s, worst_c = 0.0, 0.0
    for k in range(20):
        F = np.eye(2) + 0.25 * rng.uniform(-1, 1, (2, 2))
        J = np.linalg.det(F)
        if J <= 0:
            continue
        F *= np.sqrt(rng.uniform(0.8, 1.3) / J)
        C3, J = kinematics_from_F(F)
        for d in (0.0, 0.5, 1.0):
            st = stress_tangent(mat, C3, d, J=J)
            Sfd = np.zeros((3, 3))
            Cfd = np.zeros((3, 3, 3, 3))
            for i in range(3):
                for j in range(i, 3):
                    dC = np.zeros((3, 3))
                    dC[i, j] += 0.5 * h
                    dC[j, i] += 0.5 * h
                    Sfd[i, j] = Sfd[j, i] = (
                        energy_density(mat, C3 + dC, d)
                        - energy_density(mat, C3 - dC, d)) / h
                    dS = (stress_tangent(mat, C3 + dC, d, tangent=False).S
                          - stress_tangent(mat, C3 - dC, d,
                                           tangent=False).S) / h
                    Cfd[:, :, i, j] = Cfd[:, :, j, i] = dS
            worst_s = max(worst_s, np.abs(2 * Sfd - st.S).max()
                          / max(np.abs(st.S).max(), 1.0))
            worst_c = max(worst_c, np.abs(Cfd - st.C_tensor).max()
                          / np.abs(st.C_tensor).max())
    print(f"stress  vs finite differences: worst rel err {worst_s:.2e}")
    print(f"tangent vs finite differences: worst rel err {worst_c:.2e}")

    # tension-only volumetric degradation, fully broken material
    for Fdiag, label in ((1.1, "dilation J>1"), (0.9, "contraction J<1")):
        C3, J = kinematics_from_F(Fdiag * np.eye(2))
        st = stress_tangent(mat, C3, 1.0, J=J, tangent=False)
        p = np.trace(st.S) / 3.0
        print(f"  d=1, {label}: mean stress {p:+.4g} MPa, "
              f"psi+ = {st.psi_plus:.4g} mJ/mm^3")


if __name__ == "__main__":
    main()
