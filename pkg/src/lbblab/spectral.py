"""Symmetric linear algebra for the pressure Schur eigenproblem.

Three routes to the same spectrum:

* ``smallest_generalized_eigs`` -- production path: dense generalized
  eigensolve below the dense cap, shift-invert Lanczos (ARPACK) on the
  augmented saddle-point factorization above it.
* ``mixed_block_eigs`` -- cross-check path solving the structured block
  pencil directly with QZ.
* ``dense_schur`` -- explicit Schur matrix, the oracle building block.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import LinAlgError, cho_factor, cho_solve, cho_solve_banded, cholesky_banded, eig, eigh
from scipy.sparse.csgraph import reverse_cuthill_mckee
from scipy.sparse.linalg import LinearOperator, eigsh, splu

__all__ = [
    "EigenSolverError",
    "GenEigResult",
    "NotPositiveDefinite",
    "SchurOperator",
    "SolverOptions",
    "SymFactorization",
    "dense_schur",
    "factorize_spd",
    "mixed_block_eigs",
    "smallest_generalized_eigs",
]

_DENSE_FACTOR_LIMIT = 600  # below this, plain dense Cholesky beats banded


class NotPositiveDefinite(ArithmeticError):
    """A pivot <= 0 turned up: BC elimination bug or singular mesh."""


class EigenSolverError(RuntimeError):
    """Eigensolver failed to meet its residual contract."""


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and caps with documented defaults.

    dense_cap defaults to 4000 pressure dofs and may be overridden by the
    LBBLAB_DENSE_CAP environment variable.
    """

    residual_tol: float = 1e-10
    symmetry_tol: float = 1e-10
    dense_cap: int | None = None
    mixed_cap: int = 3000
    seed: int = 0
    max_iterations: int = 2000
    lanczos_vectors: int | None = None  # ARPACK basis size (auto if None)
    lanczos_tol: float = 1e-12

    def __post_init__(self):
        if self.dense_cap is None:
            object.__setattr__(
                self, "dense_cap", int(os.environ.get("LBBLAB_DENSE_CAP", "4000"))
            )


class SymFactorization:
    """Cholesky-type factorization of an SPD matrix.

    Small matrices use dense Cholesky; larger sparse ones are permuted with
    reverse Cuthill-McKee and factorized in banded form.  Either way a
    non-positive pivot raises NotPositiveDefinite.
    """

    def __init__(self, A):
        A = sparse.csr_matrix(A)
        n = A.shape[0]
        if A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        scale = abs(A).max() if A.nnz else 0.0
        asym = abs(A - A.T).max() if A.nnz else 0.0
        if asym > 1e-10 * max(scale, 1e-300):
            raise ValueError("matrix is not symmetric")
        self.matrix = A
        self.n = n
        if n <= _DENSE_FACTOR_LIMIT:
            try:
                self._dense = cho_factor(A.toarray())
            except LinAlgError as exc:
                raise NotPositiveDefinite(str(exc)) from exc
            self._perm = None
            return
        self._dense = None
        perm = reverse_cuthill_mckee(A, symmetric_mode=True)
        Ap = A[perm][:, perm].tocoo()
        bw = int(np.abs(Ap.row - Ap.col).max()) if Ap.nnz else 0
        ab = np.zeros((bw + 1, n))
        upper = Ap.col >= Ap.row
        i, j, v = Ap.row[upper], Ap.col[upper], Ap.data[upper]
        np.add.at(ab, (bw + i - j, j), v)
        try:
            self._banded = cholesky_banded(ab, lower=False)
        except LinAlgError as exc:
            raise NotPositiveDefinite(str(exc)) from exc
        self._perm = np.asarray(perm)
        self._iperm = np.argsort(self._perm)

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if self._dense is not None:
            return cho_solve(self._dense, b)
        x = cho_solve_banded((self._banded, False), b[self._perm])
        return x[self._iperm]


def factorize_spd(A) -> SymFactorization:
    return SymFactorization(A)


class SchurOperator:
    """q -> B A^{-1} B^T q on the pressure space."""

    def __init__(self, B, factor: SymFactorization):
        self.B = sparse.csr_matrix(B)
        self.factor = factor
        if self.B.shape[1] != factor.n:
            raise ValueError("B column count does not match the factorization")
        self.shape = (self.B.shape[0], self.B.shape[0])

    def apply(self, q: np.ndarray) -> np.ndarray:
        return self.B @ self.factor.solve(self.B.T @ q)

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator(self.shape, matvec=self.apply, dtype=float)


@dataclass(frozen=True)
class GenEigResult:
    """Ascending eigenvalues of S q = sigma Mp q with Mp-orthonormal vectors."""

    values: np.ndarray
    vectors: np.ndarray = field(repr=False)
    residuals: np.ndarray
    method: str


def dense_schur(op: SchurOperator, cap: int | None = None, batch: int = 256) -> np.ndarray:
    """Explicit Schur matrix from nP solves A z = B^T e_p (desk scale only)."""
    n = op.shape[0]
    cap = SolverOptions().dense_cap if cap is None else cap
    if n > cap:
        raise EigenSolverError(f"dense Schur matrix of size {n} exceeds cap {cap}")
    BT = op.B.T.tocsc()
    S = np.empty((n, n))
    for j0 in range(0, n, batch):
        j1 = min(j0 + batch, n)
        S[:, j0:j1] = op.B @ op.factor.solve(BT[:, j0:j1].toarray())
    scale = np.abs(S).max() or 1.0
    if np.abs(S - S.T).max() > 1e-10 * scale:
        raise EigenSolverError("dense Schur matrix failed its symmetry contract")
    return 0.5 * (S + S.T)


def _householder_to_e1(m: np.ndarray) -> np.ndarray:
    """Unit vector w with (I - 2 w w^T) m proportional to e_1."""
    w = np.array(m, dtype=float)
    nrm = np.linalg.norm(w)
    if nrm == 0:
        raise ValueError("deflation vector is zero")
    w[0] += np.copysign(nrm, w[0] if w[0] != 0 else 1.0)
    return w / np.linalg.norm(w)


def _reflect_matrix(M: np.ndarray, w: np.ndarray) -> np.ndarray:
    """(I-2ww^T) M (I-2ww^T) without forming the reflector."""
    Mw = M @ w
    wMw = w @ Mw
    out = M - 2.0 * np.outer(w, Mw) - 2.0 * np.outer(Mw, w) + 4.0 * wMw * np.outer(w, w)
    return out


def _expand_deflated(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Map reduced coordinates back: q = H [0; y]."""
    full = np.concatenate([np.zeros((1, *y.shape[1:])), y])
    return full - 2.0 * np.outer(w, w @ full)


def _canonical_sign(vectors: np.ndarray) -> np.ndarray:
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        idx = np.nonzero(np.abs(col) > 1e-12 * np.abs(col).max())[0]
        if len(idx) and col[idx[0]] < 0:
            out[:, j] = -col
    return out


def _rayleigh_refine(op, Mp, vectors) -> np.ndarray:
    """Rayleigh quotients of the computed eigenvectors.

    Quadratically accurate in the eigenvector error, and exactly
    nonnegative for the Schur operator (the numerator is a squared
    A^{-1}-norm), so near-null modes come out at the roundoff floor
    instead of the eigensolver's backward-error level.
    """
    out = np.empty(vectors.shape[1])
    for j, q in enumerate(vectors.T):
        out[j] = float(q @ op.apply(q)) / float(q @ (Mp @ q))
    return out


def _residuals(op, Mp, values, vectors) -> np.ndarray:
    res = np.empty(len(values))
    for j, (sig, q) in enumerate(zip(values, vectors.T)):
        r = op.apply(q) - sig * (Mp @ q)
        qn = float(np.sqrt(q @ (Mp @ q)))
        res[j] = np.linalg.norm(r) / max(qn, 1e-300)
    return res


def _dense_eig_path(op, Mp, k, deflate, options):
    S = dense_schur(op, cap=max(options.dense_cap, op.shape[0]))
    Mpd = Mp.toarray() if sparse.issparse(Mp) else np.asarray(Mp)
    if deflate is not None:
        w = _householder_to_e1(deflate)
        S_red = _reflect_matrix(S, w)[1:, 1:]
        M_red = _reflect_matrix(Mpd, w)[1:, 1:]
    else:
        w = None
        S_red, M_red = S, Mpd
    if k > S_red.shape[0]:
        raise EigenSolverError(
            f"requested {k} eigenvalues from a space of dimension {S_red.shape[0]}"
        )
    vals, vecs = eigh(S_red, M_red, subset_by_index=(0, k - 1))
    if w is not None:
        vecs = _expand_deflated(vecs, w)
    return vals, vecs


def _arpack_eig_path(op, Mp, k, deflate, options):
    n = op.shape[0]
    A = op.factor.matrix
    B = op.B
    nv = A.shape[0]
    # dimensionless shift left of the spectrum of the (S, Mp) pencil
    tau = 0.05
    K = sparse.bmat([[A, B.T], [B, -tau * Mp]], format="csc")
    lu = splu(K)
    zeros_v = np.zeros(nv)

    def solve_shifted(b):
        sol = lu.solve(np.concatenate([zeros_v, -np.asarray(b, dtype=float)]))
        return sol[nv:]

    opinv = LinearOperator((n, n), matvec=solve_shifted, dtype=float)
    want = min(k + (2 if deflate is not None else 1), n - 1)
    if want < k + (1 if deflate is not None else 0):
        raise EigenSolverError("problem too small for the iterative path")
    rng = np.random.default_rng(options.seed)
    v0 = rng.standard_normal(n)
    # a roomy Lanczos basis keeps clustered near-degenerate modes (one per
    # symmetry orbit on symmetric meshes) from stalling the restarts
    ncv = options.lanczos_vectors or min(n, max(6 * want, 60))
    vals, vecs = eigsh(
        op.as_linear_operator(),
        k=want,
        M=Mp,
        sigma=-tau,
        which="LM",
        OPinv=opinv,
        v0=v0,
        ncv=ncv,
        tol=options.lanczos_tol,
        maxiter=options.max_iterations,
    )
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    if deflate is not None:
        m = np.asarray(deflate, dtype=float)
        # drop the constant-pressure mode, then project any remnant exactly
        const_idx = int(np.argmax(np.abs(m @ vecs)))
        keep = [j for j in range(vecs.shape[1]) if j != const_idx]
        vals, vecs = vals[keep], vecs[:, keep]
        c = _constant_coefficients(Mp, m)
        vecs = vecs - np.outer(c, (m @ vecs) / (m @ c))
        norms = np.sqrt(np.einsum("ij,ij->j", vecs, Mp @ vecs))
        vecs = vecs / norms
    vals, vecs = vals[:k], vecs[:, :k]
    return vals, vecs


def _constant_coefficients(Mp, m: np.ndarray) -> np.ndarray:
    """Coefficient vector of the constant function: solves Mp c = m."""
    if sparse.issparse(Mp):
        return splu(Mp.tocsc()).solve(m)
    return np.linalg.solve(Mp, m)


def smallest_generalized_eigs(
    op: SchurOperator,
    Mp,
    k: int,
    deflate: np.ndarray | None = None,
    options: SolverOptions | None = None,
) -> GenEigResult:
    """k smallest eigenvalues of S q = sigma Mp q, ascending.

    With `deflate` (the mean vector m), the problem is restricted to the
    zero-mean subspace {q : m.q = 0}, removing the trivial constant mode.
    Deterministic for a fixed options.seed.
    """
    options = options or SolverOptions()
    Mp = sparse.csr_matrix(Mp)
    n = op.shape[0]
    if Mp.shape != (n, n):
        raise ValueError("Mp dimension mismatch")
    dim = n - (1 if deflate is not None else 0)
    if k < 1 or k > dim:
        raise EigenSolverError(f"k={k} outside the available dimension {dim}")
    if n <= options.dense_cap:
        vals, vecs = _dense_eig_path(op, Mp, k, deflate, options)
        method = "dense"
    else:
        vals, vecs = _arpack_eig_path(op, Mp, k, deflate, options)
        method = "arpack"
    vecs = _canonical_sign(vecs)
    vals = _rayleigh_refine(op, Mp, vecs)
    order = np.argsort(vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    res = _residuals(op, Mp, vals, vecs)
    if (res > options.residual_tol).any():
        raise EigenSolverError(
            f"eigen residuals {res.max():.3e} exceed tolerance {options.residual_tol:.1e}"
        )
    return GenEigResult(values=vals, vectors=vecs, residuals=res, method=method)


def mixed_block_eigs(
    A,
    B,
    Mp,
    k: int,
    deflate: np.ndarray | None = None,
    options: SolverOptions | None = None,
) -> GenEigResult:
    """Same spectrum via the block saddle pencil, solved densely with QZ.

    This is the cross-check route: it never forms the Schur complement.
    Desk-scale only (guarded by options.mixed_cap on the total dimension).
    """
    options = options or SolverOptions()
    A = sparse.csr_matrix(A)
    B = sparse.csr_matrix(B)
    Mp = sparse.csr_matrix(Mp)
    nv, n = A.shape[0], Mp.shape[0]
    if nv + n > options.mixed_cap:
        raise EigenSolverError(
            f"mixed pencil of size {nv + n} exceeds the desk-scale cap {options.mixed_cap}"
        )
    Bd = B.toarray()
    if deflate is not None:
        w = _householder_to_e1(np.asarray(deflate, dtype=float))
        Bd = (Bd - 2.0 * np.outer(w, w @ Bd))[1:, :]
        Mpd = _reflect_matrix(Mp.toarray(), w)[1:, 1:]
    else:
        w = None
        Mpd = Mp.toarray()
    m_red = Bd.shape[0]
    if k > m_red:
        raise EigenSolverError(f"k={k} outside the available dimension {m_red}")
    # equilibrate the two diagonal blocks before QZ
    sa = 1.0 / np.sqrt(abs(A).max())
    sp_ = 1.0 / np.sqrt(np.abs(Mpd).max())
    K = np.zeros((nv + m_red, nv + m_red))
    K[:nv, :nv] = sa * sa * A.toarray()
    K[:nv, nv:] = -(sa * sp_) * Bd.T
    K[nv:, :nv] = (sa * sp_) * Bd
    M = np.zeros_like(K)
    M[nv:, nv:] = sp_ * sp_ * Mpd
    wvals, vr = eig(K, M, right=True)
    finite = np.isfinite(wvals)
    real = np.abs(wvals.imag) <= 1e-8 * (1.0 + np.abs(wvals.real))
    idx = np.nonzero(finite & real)[0]
    order = idx[np.argsort(wvals.real[idx])]
    take = order[:k]
    vals = wvals.real[take]
    y = vr[:, take].real[nv:, :]
    vecs = _expand_deflated(y, w) if w is not None else y
    norms = np.sqrt(np.abs(np.einsum("ij,ij->j", vecs, Mp @ vecs)))
    vecs = vecs / np.where(norms > 0, norms, 1.0)
    vecs = _canonical_sign(vecs)
    op = SchurOperator(B, factorize_spd(A))
    vals = _rayleigh_refine(op, Mp, vecs)
    order2 = np.argsort(vals, kind="stable")
    vals, vecs = vals[order2], vecs[:, order2]
    res = _residuals(op, Mp, vals, vecs)
    if (res > options.residual_tol).any():
        raise EigenSolverError(
            f"mixed-path residuals {res.max():.3e} exceed tolerance {options.residual_tol:.1e}"
        )
    return GenEigResult(values=vals, vectors=vecs, residuals=res, method="qz")
