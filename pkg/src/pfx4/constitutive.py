"""Hyperelastic volumetric/deviatoric material law with damage degradation.

The undamaged energy splits into a volumetric part U(J) and a deviatoric
part Wbar(Cbar); only the dilative branch of U (J >= 1) and Wbar soften
with the phase field through the quadratic degradation function.  Stress
and consistent tangent are returned as full 3D tensors; plane strain is
realized upstream by fixing the out-of-plane stretch to one.

All routines are vectorized over arbitrary leading axes of C / F.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MaterialParams",
    "StressTangent",
    "degradation",
    "update_history",
    "energy_density",
    "tensile_energy",
    "tensile_energy_from_F",
    "stress_tangent",
    "kinematics_from_F",
    "plane_strain_state",
]

_I3 = np.eye(3)


@dataclass(frozen=True)
class MaterialParams:
    """Elastic and fracture parameters (units: MPa, mm, s, Mg).

    Attributes
    ----------
    e_young : float
        Young's modulus (MPa).
    nu : float
        Poisson's ratio.
    rho0 : float
        Mass density (Mg/mm^3).
    gc : float
        Critical energy release rate (mJ/mm^2).
    l0 : float
        Regularization length scale (mm).
    eta0 : float
        Residual stiffness parameter.
    rho_mu, zeta_mu : float
        Micro-inertia and micro-viscosity; both zero in this model
        (the phase-field equation is elliptic).
    """

    e_young: float
    nu: float
    rho0: float = 0.0
    gc: float = 1.0
    l0: float = 1.0
    eta0: float = 1e-6
    rho_mu: float = 0.0
    zeta_mu: float = 0.0

    def __post_init__(self):
        if self.e_young <= 0:
            raise ValueError("Young's modulus must be positive")
        if not 0.0 <= self.nu < 0.5:
            raise ValueError("Poisson's ratio must lie in [0, 0.5)")
        if self.gc <= 0 or self.l0 <= 0:
            raise ValueError("Gc and l0 must be positive")
        if not 0.0 < self.eta0 < 1.0:
            raise ValueError("eta0 must lie in (0, 1)")

    @property
    def kappa(self) -> float:
        """Bulk modulus E / (3 (1 - 2 nu))."""
        return self.e_young / (3.0 * (1.0 - 2.0 * self.nu))

    @property
    def mu(self) -> float:
        """Shear modulus E / (2 (1 + nu))."""
        return self.e_young / (2.0 * (1.0 + self.nu))


@dataclass
class StressTangent:
    """Second PK stress, degraded tangent and tensile energy density.

    ``S`` has shape (..., 3, 3); ``C_tensor`` (..., 3, 3, 3, 3) with minor
    and major symmetries; ``psi_plus`` (...,) is the undegraded tensile
    energy density driving the phase field.
    """

    S: np.ndarray
    C_tensor: np.ndarray
    psi_plus: np.ndarray


def degradation(d, eta0):
    """Quadratic degradation g = (1-eta0)(1-d)^2 + eta0 and its derivative."""
    d = np.asarray(d, dtype=float)
    one_md = 1.0 - d
    g = (1.0 - eta0) * one_md ** 2 + eta0
    gp = -2.0 * (1.0 - eta0) * one_md
    return g, gp


def update_history(h_old, psi_plus):
    """Irreversibility update: running maximum of the tensile energy."""
    return np.maximum(h_old, psi_plus)


def _inv_det_sym3(C):
    """Inverse and determinant of symmetric 3x3 tensors (batched)."""
    detC = np.linalg.det(C)
    Cinv = np.linalg.inv(C)
    return Cinv, detC


def _split_quantities(params: MaterialParams, C, J=None, Cinv=None):
    C = np.asarray(C, dtype=float)
    if Cinv is None:
        Cinv, detC = _inv_det_sym3(C)
        if J is None:
            J = np.sqrt(detC)
    trC = np.trace(C, axis1=-2, axis2=-1)
    return Cinv, J, trC


def plane_strain_state(F2):
    """Kinematic bundle (C3, Cinv3, J, trC) for in-plane F, analytically.

    Plane strain makes C block diagonal with unit out-of-plane stretch, so
    the inverse reduces to the closed-form 2x2 formula; avoids batched
    linear algebra in the hot assembly paths.
    """
    F2 = np.asarray(F2, dtype=float)
    J = F2[..., 0, 0] * F2[..., 1, 1] - F2[..., 0, 1] * F2[..., 1, 0]
    if np.any(J <= 0.0):
        raise FloatingPointError("non-positive det F (element inversion)")
    C2 = np.einsum("...ki,...kj->...ij", F2, F2)
    detC2 = J * J
    shape = F2.shape[:-2]
    C3 = np.zeros(shape + (3, 3))
    C3[..., :2, :2] = C2
    C3[..., 2, 2] = 1.0
    Cinv = np.zeros(shape + (3, 3))
    Cinv[..., 0, 0] = C2[..., 1, 1] / detC2
    Cinv[..., 1, 1] = C2[..., 0, 0] / detC2
    Cinv[..., 0, 1] = -C2[..., 0, 1] / detC2
    Cinv[..., 1, 0] = -C2[..., 1, 0] / detC2
    Cinv[..., 2, 2] = 1.0
    trC = C2[..., 0, 0] + C2[..., 1, 1] + 1.0
    return C3, Cinv, J, trC


def tensile_energy_from_F(params: MaterialParams, F2):
    """Undegraded tensile energy from in-plane F, without any inverse.

    tr C is the squared Frobenius norm of F (plus one out of plane), and
    the volumetric branch needs only J, so the history update stays cheap.
    """
    F2 = np.asarray(F2, dtype=float)
    J = F2[..., 0, 0] * F2[..., 1, 1] - F2[..., 0, 1] * F2[..., 1, 0]
    if np.any(J <= 0.0):
        raise FloatingPointError("non-positive det F (element inversion)")
    trC = np.sum(F2 ** 2, axis=(-2, -1)) + 1.0
    U = 0.5 * params.kappa * (0.5 * (J ** 2 - 1.0) - np.log(J))
    Wbar = 0.5 * params.mu * (J ** (-2.0 / 3.0) * trC - 3.0)
    return np.where(J >= 1.0, U, 0.0) + Wbar


def energy_density(params: MaterialParams, C, d, J=None):
    """Degraded elastic energy W_e(C, d) = W_e + (g-1)(U+ + Wbar).

    Evaluated branchwise as g (U + Wbar) for J >= 1 and U + g Wbar
    otherwise, which is the same function without the catastrophic
    cancellation the compact form suffers near full degradation.
    """
    Cinv, J, trC = _split_quantities(params, C, J)
    U = 0.5 * params.kappa * (0.5 * (J ** 2 - 1.0) - np.log(J))
    Wbar = 0.5 * params.mu * (J ** (-2.0 / 3.0) * trC - 3.0)
    heav = (J >= 1.0).astype(float)
    g, _ = degradation(d, params.eta0)
    return (1.0 - heav) * U + g * (heav * U + Wbar)


def tensile_energy(params: MaterialParams, C, J=None):
    """Undegraded tensile energy density U+(J) + Wbar(Cbar)."""
    Cinv, J, trC = _split_quantities(params, C, J)
    U = 0.5 * params.kappa * (0.5 * (J ** 2 - 1.0) - np.log(J))
    Wbar = 0.5 * params.mu * (J ** (-2.0 / 3.0) * trC - 3.0)
    return np.where(J >= 1.0, U, 0.0) + Wbar


def _outer4(A, B):
    """O[..., i, j, k, l] = A[..., i, j] B[..., k, l]."""
    return A[..., :, :, None, None] * B[..., None, None, :, :]


def _sym_identity4(A):
    """I_A[..., i, j, k, l] = (A[i,k] A[j,l] + A[i,l] A[j,k]) / 2."""
    return 0.5 * (A[..., :, None, :, None] * A[..., None, :, None, :]
                  + A[..., :, None, None, :] * A[..., None, :, :, None])


def stress_tangent(params: MaterialParams, C, d, J=None,
                   tangent: bool = True,
                   inplane: bool = False, Cinv=None) -> StressTangent:
    """Second PK stress and consistent degraded elasticity tensor.

    Parameters
    ----------
    params : MaterialParams
    C : ndarray, shape (..., 3, 3)
        Right Cauchy-Green tensor (symmetric positive definite).
    d : ndarray or float
        Phase-field value(s), broadcast against the leading axes of C.
    J : ndarray, optional
        Precomputed det F; derived from det C when omitted.
    tangent : bool
        Skip the fourth-order tensor when False (stress-only evaluations).
    inplane : bool
        Return only the in-plane (..., 2, 2, 2, 2) tangent block; that is
        all the plane-strain assembly contracts with, and the block depends
        only on the in-plane components of Cinv and the deviatoric stress.

    Notes
    -----
    The volumetric tangent uses the closed form
    ``kappa J^2 Cinv x Cinv - kappa (J^2 - 1) I_{Cinv}``, i.e. the general
    expression ``(J U' + J^2 U'') Cinv x Cinv - 2 J U' I_{Cinv}`` evaluated
    for this U; at J = 1 the Heaviside factor takes the tension branch.
    """
    kappa, mu, eta0 = params.kappa, params.mu, params.eta0
    C = np.asarray(C, dtype=float)
    Cinv, J, trC = _split_quantities(params, C, J, Cinv=Cinv)
    if np.any(J <= 0.0):
        raise FloatingPointError("non-positive volume ratio J")
    Jm23 = J ** (-2.0 / 3.0)
    heav = (J >= 1.0).astype(float)
    g, _ = degradation(d, eta0)
    g = np.asarray(g, dtype=float)

    S_vol = 0.5 * kappa * (J ** 2 - 1.0)
    S_circ = S_vol[..., None, None] * Cinv
    S_dev = mu * Jm23[..., None, None] * (_I3 - (trC / 3.0)[..., None, None] * Cinv)
    # branchwise form of S_e + (g - 1)(S+ + S_dev): cancellation-free when
    # the degradation has driven the stress down to the residual level
    hb = heav[..., None, None]
    gb = g[..., None, None]
    S = (1.0 - hb) * S_circ + gb * (hb * S_circ + S_dev)

    U = 0.5 * kappa * (0.5 * (J ** 2 - 1.0) - np.log(J))
    psi_plus = heav * U + 0.5 * mu * (Jm23 * trC - 3.0)

    C_tensor = None
    if tangent:
        Ci = Cinv[..., :2, :2] if inplane else Cinv
        Sd = S_dev[..., :2, :2] if inplane else S_dev
        CiCi = _outer4(Ci, Ci)
        Ih = _sym_identity4(Ci)
        C_circ = (kappa * J ** 2)[..., None, None, None, None] * CiCi \
            - (kappa * (J ** 2 - 1.0))[..., None, None, None, None] * Ih
        C_dev = (-2.0 / 3.0) * (_outer4(Ci, Sd) + _outer4(Sd, Ci)) \
            - (2.0 / 3.0 * mu * Jm23 * trC)[..., None, None, None, None] \
            * (CiCi / 3.0 - Ih)
        hb4 = heav[..., None, None, None, None]
        gb4 = g[..., None, None, None, None]
        C_tensor = (1.0 - hb4) * C_circ + gb4 * (hb4 * C_circ + C_dev)
    return StressTangent(S, C_tensor, psi_plus)


def kinematics_from_F(F2):
    """Plane-strain kinematics from in-plane deformation gradients.

    Parameters
    ----------
    F2 : ndarray, shape (..., 2, 2)

    Returns
    -------
    C3 : ndarray, shape (..., 3, 3)
        Right Cauchy-Green tensor with the out-of-plane stretch fixed to 1.
    J : ndarray
        det F (equals the in-plane determinant under plane strain).

    Raises
    ------
    FloatingPointError
        If det F <= 0 anywhere (element inversion at a material point).
    """
    F2 = np.asarray(F2, dtype=float)
    J = F2[..., 0, 0] * F2[..., 1, 1] - F2[..., 0, 1] * F2[..., 1, 0]
    if np.any(J <= 0.0):
        raise FloatingPointError("non-positive det F (element inversion)")
    C2 = np.einsum("...ki,...kj->...ij", F2, F2)
    C3 = np.zeros(F2.shape[:-2] + (3, 3))
    C3[..., :2, :2] = C2
    C3[..., 2, 2] = 1.0
    return C3, J
