"""Lagrange bases, Gauss quadrature and isoparametric mappings for Q4/Q9.

All evaluation routines are vectorized over a leading element axis so that
assembly loops run as batched numpy operations.  Physical second derivatives
(needed for the Laplacian of the phase field on general, non-affine quads)
are obtained from the full second-order chain rule, solving a 3x3 system per
quadrature point for the Hessian transform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ElementInversionError",
    "ReferenceElement",
    "MappedBasisEval",
    "FaceBasisEval",
    "reference_element",
    "eval_basis",
    "eval_basis_at",
    "eval_face_basis",
    "FACE_CORNERS",
]


class ElementInversionError(RuntimeError):
    """Raised when the isoparametric map has a non-positive Jacobian."""


# Local corner pairs bounding each face, CCW.  Valid for Q4 and Q9 elements
# (Q9 additionally carries mid-edge node 4 + f on face f).
FACE_CORNERS = ((0, 1), (1, 2), (2, 3), (3, 0))

# Reference-space direction of increasing face parameter t, per face.  The
# parameterization runs CCW around the element, so the outward normal is the
# tangent rotated by -90 degrees.
_FACE_DIRS = np.array([(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)])


def _gauss_1d(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Return points and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    if not 1 <= n <= 4:
        raise ValueError(f"unsupported 1D Gauss order {n}")
    return np.polynomial.legendre.leggauss(n)


def _q4_shape(xi: np.ndarray, eta: np.ndarray):
    """Bilinear shape values/derivatives at (xi, eta); arrays broadcast."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    sx = np.array([-1.0, 1.0, 1.0, -1.0])
    sy = np.array([-1.0, -1.0, 1.0, 1.0])
    # shape (..., 4)
    N = 0.25 * (1.0 + xi[..., None] * sx) * (1.0 + eta[..., None] * sy)
    dN = np.empty(N.shape + (2,))
    dN[..., 0] = 0.25 * sx * (1.0 + eta[..., None] * sy)
    dN[..., 1] = 0.25 * sy * (1.0 + xi[..., None] * sx)
    d2N = np.zeros(N.shape + (2, 2))
    d2N[..., 0, 1] = 0.25 * sx * sy
    d2N[..., 1, 0] = 0.25 * sx * sy
    return N, dN, d2N


def _lag3(t: np.ndarray):
    """1D quadratic Lagrange basis on nodes (-1, 0, 1) with derivatives."""
    t = np.asarray(t, dtype=float)
    v = np.stack([0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)], axis=-1)
    dv = np.stack([t - 0.5, -2.0 * t, t + 0.5], axis=-1)
    ddv = np.broadcast_to(np.array([1.0, -2.0, 1.0]), v.shape).copy()
    return v, dv, ddv

# Q9 node ordering: 4 corners CCW, 4 mid-edge (01, 12, 23, 30), center.
# Index of the 1D basis function in xi / eta per node.
_Q9_IX = np.array([0, 2, 2, 0, 1, 2, 1, 0, 1])
_Q9_IY = np.array([0, 0, 2, 2, 0, 1, 2, 1, 1])


def _q9_shape(xi: np.ndarray, eta: np.ndarray):
    """Biquadratic shape values/derivatives at (xi, eta); arrays broadcast."""
    vx, dvx, ddvx = _lag3(np.asarray(xi, dtype=float))
    vy, dvy, ddvy = _lag3(np.asarray(eta, dtype=float))
    N = vx[..., _Q9_IX] * vy[..., _Q9_IY]
    dN = np.empty(N.shape + (2,))
    dN[..., 0] = dvx[..., _Q9_IX] * vy[..., _Q9_IY]
    dN[..., 1] = vx[..., _Q9_IX] * dvy[..., _Q9_IY]
    d2N = np.empty(N.shape + (2, 2))
    d2N[..., 0, 0] = ddvx[..., _Q9_IX] * vy[..., _Q9_IY]
    d2N[..., 1, 1] = vx[..., _Q9_IX] * ddvy[..., _Q9_IY]
    mixed = dvx[..., _Q9_IX] * dvy[..., _Q9_IY]
    d2N[..., 0, 1] = mixed
    d2N[..., 1, 0] = mixed
    return N, dN, d2N


_SHAPE_FUNCS = {"q4": _q4_shape, "q9": _q9_shape}
_N_NODES = {"q4": 4, "q9": 9}


@dataclass(frozen=True)
class ReferenceElement:
    """Reference quadrilateral with tensor-product volume and face rules.

    Attributes
    ----------
    kind : str
        ``'q4'`` or ``'q9'``.
    quad_points : ndarray, shape (nq, 2)
        Gauss points of the volume rule.
    quad_weights : ndarray, shape (nq,)
    face_points : ndarray, shape (nfq,)
        1D Gauss points of the face rule.
    face_weights : ndarray, shape (nfq,)
    """

    kind: str
    order: int
    face_order: int
    quad_points: np.ndarray = field(repr=False)
    quad_weights: np.ndarray = field(repr=False)
    face_points: np.ndarray = field(repr=False)
    face_weights: np.ndarray = field(repr=False)
    # reference basis tables at the volume rule, shapes (nq, nn[, 2[, 2]])
    N: np.ndarray = field(repr=False)
    dN: np.ndarray = field(repr=False)
    d2N: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return _N_NODES[self.kind]

    @property
    def n_quad(self) -> int:
        return self.quad_points.shape[0]

    def shape(self, xi, eta):
        """Evaluate (N, dN_dxi, d2N_dxi2) at arbitrary reference points."""
        return _SHAPE_FUNCS[self.kind](xi, eta)

    def face_ref_points(self, face: int, flip: bool = False) -> np.ndarray:
        """Reference coordinates of the face quadrature points.

        ``flip=True`` traverses the face with the parameter negated, which
        co-locates the points with the neighboring element traversing the
        shared face in its own CCW sense.
        """
        t = -self.face_points if flip else self.face_points
        return _face_param_to_ref(face, t)


def _face_param_to_ref(face: int, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape + (2,))
    if face == 0:
        out[..., 0], out[..., 1] = t, -1.0
    elif face == 1:
        out[..., 0], out[..., 1] = 1.0, t
    elif face == 2:
        out[..., 0], out[..., 1] = -t, 1.0
    elif face == 3:
        out[..., 0], out[..., 1] = -1.0, -t
    else:
        raise ValueError(f"face index {face} out of range")
    return out


_REF_CACHE: dict[tuple, ReferenceElement] = {}


def reference_element(kind: str, order: int | None = None,
                      face_order: int = 3) -> ReferenceElement:
    """Build (and cache) a reference element with its quadrature tables.

    Parameters
    ----------
    kind : str
        ``'q4'`` or ``'q9'``.
    order : int, optional
        Number of Gauss points per direction for the volume rule; defaults
        to 2 for Q4 and 3 for Q9.
    face_order : int
        Number of Gauss points on each face.
    """
    kind = kind.lower()
    if kind not in _SHAPE_FUNCS:
        raise ValueError(f"unknown element kind {kind!r}")
    if order is None:
        order = 2 if kind == "q4" else 3
    key = (kind, order, face_order)
    if key in _REF_CACHE:
        return _REF_CACHE[key]

    p1, w1 = _gauss_1d(order)
    xi, eta = np.meshgrid(p1, p1, indexing="ij")
    qp = np.column_stack([xi.ravel(), eta.ravel()])
    qw = np.outer(w1, w1).ravel()
    fp, fw = _gauss_1d(face_order)
    N, dN, d2N = _SHAPE_FUNCS[kind](qp[:, 0], qp[:, 1])
    ref = ReferenceElement(kind, order, face_order, qp, qw, fp, fw, N, dN, d2N)
    _REF_CACHE[key] = ref
    return ref


@dataclass
class MappedBasisEval:
    """Basis data mapped to physical space, batched over elements.

    Attributes
    ----------
    N : ndarray, shape (ne, nq, nn)
    dN_dX : ndarray, shape (ne, nq, nn, 2)
    d2N_dX2 : ndarray, shape (ne, nq, nn, 2, 2)
        Physical Hessian of each shape function (``None`` if not requested).
    detJ_weight : ndarray, shape (ne, nq)
        Quadrature weight times map Jacobian determinant.
    """

    N: np.ndarray
    dN_dX: np.ndarray
    detJ_weight: np.ndarray
    d2N_dX2: np.ndarray | None = None


@dataclass
class FaceBasisEval(MappedBasisEval):
    """Face-restricted basis data; adds unit outward normals per point."""

    normal: np.ndarray | None = None  # (ne, nfq, 2)


def _map_points(ref: ReferenceElement, coords: np.ndarray, pts: np.ndarray,
                second: bool, weights: np.ndarray | None):
    """Map basis tables at reference points ``pts`` through element geometry.

    coords: (ne, nn, 2); pts: (np, 2).  Returns N (np, nn) broadcast over
    elements, plus per-element physical derivatives and detJ (times weights
    when given).
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 2:
        coords = coords[None]
    N, dN, d2N = ref.shape(pts[:, 0], pts[:, 1])
    # Jacobian J[e,q,i,a] = d x_i / d xi_a
    J = np.einsum("enk,qna->eqka", coords, dN)
    detJ = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if np.any(detJ <= 0.0):
        bad = np.argwhere(detJ <= 0.0)
        e, q = bad[0]
        raise ElementInversionError(
            f"non-positive Jacobian {detJ[e, q]:.3e} in element {e}, point {q}")
    Jinv = np.empty_like(J)
    Jinv[..., 0, 0] = J[..., 1, 1]
    Jinv[..., 1, 1] = J[..., 0, 0]
    Jinv[..., 0, 1] = -J[..., 0, 1]
    Jinv[..., 1, 0] = -J[..., 1, 0]
    Jinv /= detJ[..., None, None]
    # dN_dX[e,q,n,i] = dN[q,n,a] * Jinv[e,q,a,i]  (Jinv = d xi_a / d x_i)
    dN_dX = np.einsum("qna,eqai->eqni", dN, Jinv)

    d2N_dX2 = None
    if second:
        # Map Hessian: x_{i,ab} = coords[e,n,i] d2N[q,n,a,b]
        Hmap = np.einsum("eni,qnab->eqiab", coords, d2N)
        ne, nq = J.shape[:2]
        # 3x3 system per (e, q) for [N_XX, N_XY, N_YY] of every shape fn.
        A = np.empty((ne, nq, 3, 3))
        rows = ((0, 0), (0, 1), (1, 1))  # (a, b) pairs xi-xi, xi-eta, eta-eta
        for r, (a, b) in enumerate(rows):
            x1a, x2a = J[..., 0, a], J[..., 1, a]
            x1b, x2b = J[..., 0, b], J[..., 1, b]
            A[..., r, 0] = x1a * x1b
            A[..., r, 1] = x1a * x2b + x2a * x1b
            A[..., r, 2] = x2a * x2b
        rhs = np.empty((ne, nq, 3, N.shape[-1]))
        for r, (a, b) in enumerate(rows):
            rhs[..., r, :] = (d2N[None, :, :, a, b]
                              - np.einsum("eqi,eqni->eqn",
                                          Hmap[..., a, b], dN_dX))
        sol = np.linalg.solve(A, rhs)  # (ne, nq, 3, nn)
        d2N_dX2 = np.empty((ne, nq, N.shape[-1], 2, 2))
        d2N_dX2[..., 0, 0] = sol[..., 0, :]
        d2N_dX2[..., 0, 1] = sol[..., 1, :]
        d2N_dX2[..., 1, 0] = sol[..., 1, :]
        d2N_dX2[..., 1, 1] = sol[..., 2, :]

    w = detJ if weights is None else detJ * weights
    return N, dN_dX, d2N_dX2, w, J


def eval_basis(ref: ReferenceElement, coords: np.ndarray,
               second: bool = False) -> MappedBasisEval:
    """Evaluate the mapped basis at the element volume quadrature points.

    Parameters
    ----------
    ref : ReferenceElement
    coords : ndarray, shape (nn, 2) or (ne, nn, 2)
        Physical node coordinates of one element or a batch of elements.
    second : bool
        Also compute physical second derivatives (required by the C/DG
        scheme; skipped otherwise for speed).

    Raises
    ------
    ElementInversionError
        If the map Jacobian is non-positive at any quadrature point.
    """
    N, dN_dX, d2N_dX2, w, _ = _map_points(
        ref, coords, ref.quad_points, second, ref.quad_weights)
    ne = dN_dX.shape[0]
    Nb = np.broadcast_to(N, (ne,) + N.shape)
    return MappedBasisEval(Nb, dN_dX, w, d2N_dX2)


def eval_basis_at(ref: ReferenceElement, coords: np.ndarray, points,
                  second: bool = False) -> MappedBasisEval:
    """Evaluate the mapped basis at arbitrary reference points.

    Like :func:`eval_basis` but at caller-chosen (xi, eta) points with unit
    quadrature weights (detJ_weight carries the bare Jacobian determinant).
    Used for congruent-mesh transfer, where one element family is evaluated
    at another's quadrature points.
    """
    pts = np.asarray(points, dtype=float)
    N, dN_dX, d2N_dX2, w, _ = _map_points(ref, coords, pts, second, None)
    ne = dN_dX.shape[0]
    Nb = np.broadcast_to(N, (ne,) + N.shape)
    return MappedBasisEval(Nb, dN_dX, w, d2N_dX2)


def eval_face_basis(ref: ReferenceElement, coords: np.ndarray, face: int,
                    flip: bool = False, second: bool = False) -> FaceBasisEval:
    """Evaluate the element basis restricted to one face.

    The face is traversed CCW with respect to the element (reversed when
    ``flip`` is set, which matches the quadrature points of the neighbor
    sharing the face).  Weights are 1D Gauss weights times the face metric;
    normals are the outward unit normals of this element.

    Parameters
    ----------
    ref : ReferenceElement
    coords : ndarray, shape (nn, 2) or (ne, nn, 2)
    face : int
        Local face index 0..3.
    flip : bool
        Traverse with negated parameter (neighbor orientation).
    second : bool
        Also compute physical second derivatives on the face.
    """
    coords = np.asarray(coords, dtype=float)
    squeeze = coords.ndim == 2
    if squeeze:
        coords = coords[None]
    pts = ref.face_ref_points(face, flip=flip)
    N, dN_dX, d2N_dX2, _, J = _map_points(ref, coords, pts, second, None)
    # The normal is outward for this element whichever way the face is
    # traversed; flip only reorders the points to match the neighbor.
    tangent = np.einsum("eqia,a->eqi", J, _FACE_DIRS[face])
    tlen = np.linalg.norm(tangent, axis=-1)
    normal = np.stack([tangent[..., 1], -tangent[..., 0]], axis=-1)
    normal /= tlen[..., None]
    w = tlen * ref.face_weights
    ne = dN_dX.shape[0]
    Nb = np.broadcast_to(N, (ne,) + N.shape)
    return FaceBasisEval(Nb, dN_dX, w, d2N_dX2, normal)
