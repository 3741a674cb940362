"""Sparse system construction, constraints and linear-solver contract.

A :class:`SparseSystem` is built on a preallocated sparsity pattern (from
mesh connectivity plus any edge couplings), accumulated into by vectorized
``scatter_add`` calls, constrained by symmetric elimination, and solved by a
sparse direct factorization (default) or CG.  Assembly is deterministic:
contributions are added in the caller's order with unbuffered accumulation,
so repeated runs produce bitwise-identical matrices.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = ["SparsePattern", "SparseSystem", "SolverError", "PatternError"]


class PatternError(RuntimeError):
    """Scatter target outside the preallocated sparsity pattern."""


class SolverError(RuntimeError):
    """Factorization breakdown or iterative non-convergence."""


class SparsePattern:
    """Fixed CSR sparsity pattern over ``ndof`` unknowns.

    Built from dof-block adjacency: every (row, col) pair within each block
    is admitted.  Blocks are element dof lists and, for edge-coupled
    schemes, the union of the two neighboring elements' dofs.
    """

    def __init__(self, ndof: int, blocks):
        rows = []
        cols = []
        for block in blocks:
            b = np.asarray(block, dtype=np.int64)
            if b.ndim == 1:
                b = b[None, :]
            b = b.reshape(b.shape[0], -1)
            n = b.shape[1]
            rows.append(np.repeat(b, n, axis=1).ravel())
            cols.append(np.tile(b, (1, n)).ravel())
        if rows:
            rows = np.concatenate(rows)
            cols = np.concatenate(cols)
        else:
            rows = np.empty(0, dtype=np.int64)
            cols = np.empty(0, dtype=np.int64)
        coo = sp.coo_matrix((np.ones(len(rows)), (rows, cols)),
                            shape=(ndof, ndof))
        csr = coo.tocsr()
        csr.sum_duplicates()
        csr.sort_indices()
        self.ndof = ndof
        self.indptr = csr.indptr.copy()
        self.indices = csr.indices.astype(np.int64)
        # Row-major keys of every admitted entry; sorted by construction.
        row_of = np.repeat(np.arange(ndof, dtype=np.int64),
                           np.diff(self.indptr))
        self._keys = row_of * ndof + self.indices

    @property
    def nnz(self) -> int:
        return self.indices.size

    def positions(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Flat data positions of (row, col) entries; raises if absent."""
        keys = rows.astype(np.int64) * self.ndof + cols
        pos = np.searchsorted(self._keys, keys)
        bad = (pos >= self._keys.size) | (self._keys[np.minimum(
            pos, self._keys.size - 1)] != keys)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise PatternError(
                f"entry ({rows.ravel()[i]}, {cols.ravel()[i]}) "
                "is outside the preallocated pattern")
        return pos


class FactorCache:
    """Krylov solves of slowly varying systems with a stale factorization.

    The preconditioner is a direct factorization of an earlier matrix with
    the same pattern; it is refreshed whenever the Krylov solve stops
    converging quickly.  Results match a direct solve to the requested
    residual tolerance, and the iteration is deterministic.
    """

    def __init__(self, symmetric: bool = True, rtol: float = 1e-12,
                 max_krylov: int = 60, refresh_iters: int = 40):
        self.symmetric = symmetric
        self.rtol = rtol
        self.max_krylov = max_krylov
        self.refresh_iters = refresh_iters
        self._lu = None
        self.refactor_count = 0

    def _refactor(self, K):
        self._lu = spla.splu(K)
        self.refactor_count += 1

    def _direct(self, K, b):
        self._refactor(K)
        x = self._lu.solve(b)
        return x + self._lu.solve(b - K @ x)

    def solve(self, K, b):
        """Solve K x = b (K in CSC form) to near machine residual.

        Uses Krylov iterations preconditioned by the last factorization.
        A factorization costs as much as many preconditioner applications,
        so drift is tolerated until the iteration count crosses
        ``refresh_iters``; then the factorization is rebuilt lazily (the
        current solve still finishes iteratively once converged).
        """
        nb = np.linalg.norm(b)
        if nb == 0.0:
            return np.zeros_like(b)
        if self._lu is None:
            return self._direct(K, b)
        M = spla.LinearOperator(K.shape, matvec=self._lu.solve)
        iters = [0]

        def count(_):
            iters[0] += 1

        if self.symmetric:
            x, info = spla.cg(K, b, M=M, rtol=self.rtol, atol=0.0,
                              maxiter=self.max_krylov, callback=count)
        else:
            x, info = spla.gmres(K, b, M=M, rtol=self.rtol, atol=0.0,
                                 restart=self.max_krylov, maxiter=1,
                                 callback=count, callback_type="pr_norm")
        if info != 0 or np.linalg.norm(b - K @ x) > 1e-10 * nb:
            return self._direct(K, b)
        if iters[0] > self.refresh_iters:
            self._lu = None
        return x


class SparseSystem:
    """Linear system K x = b on a fixed pattern with Dirichlet constraints."""

    def __init__(self, pattern: SparsePattern):
        self.pattern = pattern
        self.data = np.zeros(pattern.nnz)
        self.rhs = np.zeros(pattern.ndof)
        self._constrained: dict[int, float] = {}
        self._reduced = None
        # owners may declare the (reduced) matrix symmetric, enabling a
        # zero-copy CSR-as-CSC reinterpretation for the factorizations
        self.symmetric_hint = False

    def reset(self, matrix: bool = True, rhs: bool = True):
        if matrix:
            self.data[:] = 0.0
        if rhs:
            self.rhs[:] = 0.0

    def scatter_add(self, local: np.ndarray, dofs: np.ndarray,
                    col_dofs: np.ndarray | None = None):
        """Accumulate batched local matrices into the global matrix.

        Parameters
        ----------
        local : ndarray, shape (..., n, m)
        dofs : ndarray, shape (..., n)
            Global row dofs per local matrix.
        col_dofs : ndarray, optional
            Global column dofs, shape (..., m); defaults to ``dofs``.

        Duplicated (row, col) pairs inside one call accumulate (unbuffered
        addition), so local dof lists may repeat global ids.
        """
        if col_dofs is None:
            col_dofs = dofs
        local = np.asarray(local)
        rows = np.repeat(dofs[..., :, None], col_dofs.shape[-1], axis=-1)
        cols = np.repeat(col_dofs[..., None, :], dofs.shape[-1], axis=-2)
        pos = self.pattern.positions(rows.ravel(), cols.ravel())
        np.add.at(self.data, pos, local.ravel())

    def add_rhs(self, local: np.ndarray, dofs: np.ndarray):
        """Accumulate batched local vectors into the right-hand side."""
        np.add.at(self.rhs, np.asarray(dofs).ravel(),
                  np.asarray(local).ravel())

    def constrain(self, dofs, values, rows=None):
        """Record Dirichlet constraints (applied at solve time).

        Parameters
        ----------
        dofs : array-like
            Constrained unknowns (matrix columns).
        values : array-like or float
            Prescribed values, broadcast against ``dofs``.
        rows : array-like, optional
            Equation rows sacrificed for each constraint.  Defaults to the
            dof itself (symmetric elimination); multi-field schemes may pair
            a constrained unknown with the equation carrying its reaction.
        """
        dofs = np.asarray(dofs, dtype=np.int64).ravel()
        values = np.broadcast_to(np.asarray(values, dtype=float), dofs.shape)
        rows = dofs if rows is None else np.asarray(rows, np.int64).ravel()
        if rows.shape != dofs.shape:
            raise ValueError("rows must match dofs")
        for d, v, r in zip(dofs, values, rows):
            self._constrained[int(d)] = (float(v), int(r))

    def clear_constraints(self):
        self._constrained.clear()

    @property
    def constrained_dofs(self) -> np.ndarray:
        return np.array(sorted(self._constrained), dtype=np.int64)

    def matrix(self) -> sp.csr_matrix:
        """Current matrix as CSR (shares no state with the system)."""
        return sp.csr_matrix(
            (self.data.copy(), self.pattern.indices.copy(),
             self.pattern.indptr.copy()),
            shape=(self.pattern.ndof, self.pattern.ndof))

    def eliminated(self) -> tuple[sp.csr_matrix, np.ndarray]:
        """Full-size system with constraints eliminated symmetrically.

        Constrained rows/columns are zeroed, the diagonal set to 1 and the
        RHS to the prescribed value; the coupling K[:, c] x_c moves to the
        free right-hand side.  Only valid for same-index (symmetric)
        constraints.
        """
        K = self.matrix().tolil()
        b = self.rhs.copy()
        cd = self.constrained_dofs
        if cd.size:
            vals, rows = self._constraint_arrays(cd)
            if not np.array_equal(rows, cd):
                raise ValueError("eliminated() requires symmetric constraints")
            b -= self.matrix()[:, cd] @ vals
            K[cd, :] = 0.0
            K[:, cd] = 0.0
            K[cd, cd] = 1.0
            b[cd] = vals
        return K.tocsr(), b

    def _constraint_arrays(self, cd):
        vals = np.array([self._constrained[int(d)][0] for d in cd])
        rows = np.array([self._constrained[int(d)][1] for d in cd],
                        dtype=np.int64)
        if np.unique(rows).size != rows.size:
            raise ValueError("constraint rows must be distinct")
        return vals, rows

    def _reduced_view(self, cd, rows):
        """Precompute the positions mapping the full data array onto the
        reduced system K[keep_rows][:, free]; reused while the constraint
        index sets stay unchanged."""
        ndof = self.pattern.ndof
        sig = (cd.tobytes(), rows.tobytes())
        if self._reduced is not None and self._reduced["sig"] == sig:
            return self._reduced
        all_idx = np.arange(ndof)
        free = np.setdiff1d(all_idx, cd, assume_unique=True)
        keep = np.setdiff1d(all_idx, rows, assume_unique=True)
        keep_mask = np.zeros(ndof, dtype=bool)
        keep_mask[keep] = True
        col_renum = np.full(ndof, -1, dtype=np.int64)
        col_renum[free] = np.arange(free.size)
        row_renum = np.full(ndof, -1, dtype=np.int64)
        row_renum[keep] = np.arange(keep.size)
        indptr, indices = self.pattern.indptr, self.pattern.indices
        row_of = np.repeat(all_idx, np.diff(indptr))
        in_red = keep_mask[row_of] & (col_renum[indices] >= 0)
        pos = np.flatnonzero(in_red)
        red_rows = row_renum[row_of[pos]]
        red_cols = col_renum[indices[pos]]
        red_indptr = np.zeros(keep.size + 1, dtype=np.int64)
        np.cumsum(np.bincount(red_rows, minlength=keep.size), out=red_indptr[1:])
        # constrained-column entries in kept rows feed the RHS correction
        cd_pos = np.flatnonzero(~(col_renum[indices] >= 0))
        cd_col = np.searchsorted(cd, indices[cd_pos])
        self._reduced = dict(
            sig=sig, free=free, keep=keep, pos=pos,
            indices=red_cols.astype(np.int32), indptr=red_indptr,
            cd_pos=cd_pos, cd_rows=row_of[cd_pos], cd_col=cd_col)
        return self._reduced

    def solve(self, method: str = "direct", rtol: float = 1e-12,
              refine: int = 1, cache: FactorCache | None = None) -> np.ndarray:
        """Solve the constrained system.

        Parameters
        ----------
        method : str
            ``'direct'`` (sparse LU, default) or ``'cg'``.
        rtol : float
            Relative residual target for the CG path.
        refine : int
            Iterative-refinement sweeps after the direct solve (cheap; keeps
            the free-dof residual near machine precision).
        cache : FactorCache, optional
            Stale-factorization cache for repeated solves of slowly varying
            systems with identical pattern and constraint sets.

        Returns
        -------
        ndarray
            Solution satisfying the constraints exactly.
        """
        cd = self.constrained_dofs
        if cd.size:
            vals, rows = self._constraint_arrays(cd)
        else:
            vals = np.empty(0)
            rows = cd
        view = self._reduced_view(cd, rows)
        free, keep_rows = view["free"], view["keep"]
        x = np.zeros(self.pattern.ndof)
        b = self.rhs
        if cd.size:
            x[cd] = vals
            b = b.copy()
            np.subtract.at(b, view["cd_rows"],
                           self.data[view["cd_pos"]] * vals[view["cd_col"]])
        if self.symmetric_hint and keep_rows.size == free.size:
            Kff = sp.csc_matrix(
                (self.data[view["pos"]], view["indices"], view["indptr"]),
                shape=(keep_rows.size, free.size))
        else:
            Kff = sp.csr_matrix(
                (self.data[view["pos"]], view["indices"], view["indptr"]),
                shape=(keep_rows.size, free.size)).tocsc()
        bf = b[keep_rows]
        if cache is not None:
            xf = cache.solve(Kff, bf)
            x[free] = xf
            return x
        if method == "direct":
            try:
                lu = spla.splu(Kff)
            except RuntimeError as exc:
                raise SolverError(f"sparse factorization failed: {exc}") from exc
            xf = lu.solve(bf)
            for _ in range(max(refine, 0)):
                r = bf - Kff @ xf
                xf = xf + lu.solve(r)
        elif method == "cg":
            if keep_rows is not free and not np.array_equal(keep_rows, free):
                raise SolverError("CG requires symmetric constraints")
            xf, info = spla.cg(Kff, bf, rtol=rtol, maxiter=20 * bf.size)
            if info != 0:
                raise SolverError(f"CG failed to converge (info={info})")
        else:
            raise ValueError(f"unknown solve method {method!r}")
        nb = np.linalg.norm(bf)
        if nb > 0:
            rel = np.linalg.norm(bf - Kff @ xf) / nb
            if not np.isfinite(rel) or rel > 1e-6:
                raise SolverError(
                    f"linear solve residual {rel:.3e}; system is likely "
                    "singular or severely ill-conditioned")
        x[free] = xf
        return x

    def dump_matrix_market(self, path):
        """Write the (unconstrained) matrix in MatrixMarket coordinate form."""
        from scipy.io import mmwrite

        mmwrite(str(path), self.matrix().tocoo())


def element_dof_blocks(conn: np.ndarray, n_comp: int = 1) -> np.ndarray:
    """Dof blocks for pattern construction: (node, comp) -> node*n_comp+comp."""
    conn = np.asarray(conn, dtype=np.int64)
    if n_comp == 1:
        return conn
    blocks = (conn[..., None] * n_comp
              + np.arange(n_comp, dtype=np.int64)).reshape(conn.shape[0], -1)
    return blocks
