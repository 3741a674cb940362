"""Closed-form phase-field profiles and manufactured solutions.

The optimal one-dimensional profile of the fourth-order model and the crack
surface density it minimizes serve as independent oracles for all three
spatial schemes; a smooth manufactured solution with an exact source term
drives the convergence-rate measurements.
"""

from __future__ import annotations

import numpy as np

from .fe_basis import eval_basis, reference_element

__all__ = [
    "profile_fourth_order",
    "profile_fourth_order_derivatives",
    "profile_second_order",
    "crack_density",
    "regularized_crack_length",
    "SmoothBump",
]


def profile_fourth_order(x, l0):
    """Optimal 1D profile (1 + |x|/l0) exp(-|x|/l0) of the 4th-order model."""
    t = np.abs(np.asarray(x, dtype=float)) / l0
    return (1.0 + t) * np.exp(-t)


def profile_fourth_order_derivatives(x, l0):
    """First and second derivative of the 1D profile (w.r.t. x)."""
    x = np.asarray(x, dtype=float)
    t = np.abs(x) / l0
    s = np.sign(x)
    d1 = -s * t / l0 * np.exp(-t)
    d2 = (t - 1.0) / l0 ** 2 * np.exp(-t)
    return d1, d2


def profile_second_order(x, l0):
    """1D profile exp(-|x| / (2 l0)) of the second-order model."""
    return np.exp(-np.abs(np.asarray(x, dtype=float)) / (2.0 * l0))


def crack_density(d, grad_d, lap_d, l0):
    """Fourth-order crack surface density per unit reference volume.

    gamma = [d^2 + 2 l0^2 |grad d|^2 + l0^4 (lap d)^2] / (4 l0)
    """
    g2 = np.sum(np.asarray(grad_d) ** 2, axis=-1)
    return (np.asarray(d) ** 2 + 2.0 * l0 ** 2 * g2
            + l0 ** 4 * np.asarray(lap_d) ** 2) / (4.0 * l0)


def regularized_crack_length(mesh, d, l0) -> float:
    """Integrate the crack surface density of a nodal field over a Q9 mesh.

    Uses the element rule with exact physical second derivatives, so the
    (lap d)^2 term is evaluated consistently with the C/DG discretization.
    """
    ref = reference_element(mesh.kind)
    ev = eval_basis(ref, mesh.element_coords(), second=True)
    de = d[mesh.elements]
    dq = np.einsum("eqn,en->eq", ev.N, de)
    gq = np.einsum("eqni,en->eqi", ev.dN_dX, de)
    lq = np.einsum("eqnii,en->eq", ev.d2N_dX2, de)
    gamma = crack_density(dq, gq, lq, l0)
    return float(np.sum(gamma * ev.detJ_weight))


class SmoothBump:
    """Manufactured field sin^4(pi x) sin^4(pi y) on the unit square.

    All of its normal derivatives up to third order vanish on the boundary,
    so it is compatible with every weakly imposed boundary condition of the
    C/DG and mixed schemes (insulation, vanishing Laplacian, and the Robin
    combination).  Internally the field is a short cosine series, which
    makes Laplacian, bilaplacian and the forcing of the fourth-order
    operator exact.
    """

    _coef = np.array([0.375, -0.5, 0.125])
    _freq = np.array([0.0, 2.0, 4.0])

    def __init__(self):
        k = np.pi * self._freq
        a = self._coef
        self._terms = [(a[i] * a[j], k[i], k[j])
                       for i in range(3) for j in range(3)]

    def _sum(self, x, y, scale):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for (c, kx, ky) in self._terms:
            out += scale(c, kx, ky) * np.cos(kx * x) * np.cos(ky * y)
        return out

    def value(self, x, y):
        return self._sum(x, y, lambda c, kx, ky: c)

    def laplacian(self, x, y):
        return self._sum(x, y, lambda c, kx, ky: -c * (kx ** 2 + ky ** 2))

    def bilaplacian(self, x, y):
        return self._sum(x, y, lambda c, kx, ky: c * (kx ** 2 + ky ** 2) ** 2)

    def gradient(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gx = np.zeros(np.broadcast(x, y).shape)
        gy = np.zeros_like(gx)
        for (c, kx, ky) in self._terms:
            gx += -c * kx * np.sin(kx * x) * np.cos(ky * y)
            gy += -c * ky * np.cos(kx * x) * np.sin(ky * y)
        return np.stack([gx, gy], axis=-1)

    def source(self, x, y, coeffs):
        """Forcing alpha2 lap^2 d + alpha1 lap d + alpha0 d of this field."""
        return (coeffs.alpha2 * self.bilaplacian(x, y)
                + coeffs.alpha1 * self.laplacian(x, y)
                + coeffs.alpha0 * self.value(x, y))
