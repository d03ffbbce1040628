"""Complex linear-algebra kernels: vectorization identities, Kronecker-sum
operators, dense/banded/sparse direct solves, QR and SVD.

Conventions fixed for the whole library: vec() stacks columns
(column-major), and all Kronecker identities below assume it.
Systems arising from exterior complex scaling are complex symmetric, not
Hermitian, so every solver uses general LU, never Cholesky.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    BandStructureError,
    ParameterError,
    ResourceLimitError,
    SingularSystemError,
)

DENSE_ASSEMBLY_CAP = 4096
FULL_SOLVE_CAP = 300_000


def vec(matrix: np.ndarray) -> np.ndarray:
    """Column-major stacking of a matrix or tensor into a vector."""
    return np.asarray(matrix).ravel(order="F")


def unvec(vector: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec` for matrices."""
    vector = np.asarray(vector)
    if vector.size != rows * cols:
        raise ParameterError(
            f"cannot reshape length-{vector.size} vector to {rows}x{cols}"
        )
    return vector.reshape((rows, cols), order="F")


@dataclass
class KronSumOperator:
    """Sum of Kronecker products plus an optional Hadamard diagonal.

    Each term is a tuple of per-mode factors ordered (last mode, ..., first
    mode), i.e. term (B, A) represents B kron A acting on vec(X) with X of
    shape (A.cols, B.cols).  ``None`` stands for an identity factor; its
    size is taken from ``mode_sizes`` (listed first mode first).
    ``diagonal_part`` is the vec of the Hadamard field, added elementwise.
    """

    mode_sizes: tuple
    terms: list = field(default_factory=list)
    diagonal_part: np.ndarray | None = None

    @property
    def dimension(self) -> int:
        return int(np.prod(self.mode_sizes))

    def _factor(self, term, position) -> np.ndarray:
        # position counts from the left of the Kronecker product, i.e.
        # position 0 is the last mode.
        f = term[position]
        if f is None:
            mode = len(self.mode_sizes) - 1 - position
            return np.eye(self.mode_sizes[mode], dtype=complex)
        return np.asarray(f, dtype=complex)

    def validate(self):
        d = len(self.mode_sizes)
        for term in self.terms:
            if len(term) != d:
                raise ParameterError(
                    f"term has {len(term)} factors, operator has {d} modes"
                )
            for pos, f in enumerate(term):
                if f is None:
                    continue
                mode = d - 1 - pos
                f = np.asarray(f)
                if f.shape != (self.mode_sizes[mode], self.mode_sizes[mode]):
                    raise ParameterError(
                        f"factor at mode {mode} has shape {f.shape}, "
                        f"expected square of size {self.mode_sizes[mode]}"
                    )
        if self.diagonal_part is not None and self.diagonal_part.size != self.dimension:
            raise ParameterError("diagonal_part length does not match operator size")


def kron_apply(op: KronSumOperator, x: np.ndarray) -> np.ndarray:
    """Apply a Kronecker-sum operator without forming any Kronecker product.

    Uses the identity (B kron A) vec(X) = vec(A X B^T), generalized to d
    modes through per-mode tensor contractions.
    """
    op.validate()
    x = np.asarray(x, dtype=complex)
    if x.size != op.dimension:
        raise ParameterError(
            f"operand length {x.size} does not match operator size {op.dimension}"
        )
    shape = tuple(op.mode_sizes)
    tensor = x.reshape(shape, order="F")
    out = np.zeros_like(tensor)
    d = len(shape)
    for term in op.terms:
        partial = tensor
        for pos in range(d):
            f = term[pos]
            if f is None:
                continue
            mode = d - 1 - pos
            f = np.asarray(f, dtype=complex)
            partial = np.moveaxis(
                np.tensordot(f, partial, axes=([1], [mode])), 0, mode
            )
        out = out + partial
    if op.diagonal_part is not None:
        out = out + (op.diagonal_part.reshape(shape, order="F") * tensor)
    return out.ravel(order="F")


def assemble_dense(op: KronSumOperator, cap: int = DENSE_ASSEMBLY_CAP) -> np.ndarray:
    """Materialize the operator as a dense matrix (oracle use only)."""
    op.validate()
    n = op.dimension
    if n > cap:
        raise ResourceLimitError(
            f"dense assembly of size {n} exceeds cap {cap}"
        )
    out = np.zeros((n, n), dtype=complex)
    for term in op.terms:
        block = None
        for pos in range(len(op.mode_sizes)):
            f = op._factor(term, pos)
            block = f if block is None else np.kron(block, f)
        out += block
    if op.diagonal_part is not None:
        out += np.diag(op.diagonal_part.astype(complex))
    return out


def assemble_sparse(op: KronSumOperator) -> sp.csc_matrix:
    """Sparse CSC assembly of the operator for full-grid solves."""
    op.validate()
    n = op.dimension
    total = sp.csc_matrix((n, n), dtype=complex)
    d = len(op.mode_sizes)
    for term in op.terms:
        block = None
        for pos in range(d):
            f = term[pos]
            if f is None:
                mode = d - 1 - pos
                f = sp.identity(op.mode_sizes[mode], dtype=complex, format="csr")
            else:
                f = sp.csr_matrix(np.asarray(f, dtype=complex))
            block = f if block is None else sp.kron(block, f, format="csr")
        total = total + block.tocsc()
    if op.diagonal_part is not None:
        total = total + sp.diags(op.diagonal_part.astype(complex), format="csc")
    return total.tocsc()


def solve_dense(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """LU solve with partial pivoting and a singularity guard."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError(f"matrix must be square, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ParameterError("right-hand side does not conform to the matrix")
    lu, piv = sla.lu_factor(a, check_finite=False)
    diag = np.abs(np.diag(lu))
    scale = max(np.abs(a).max(), 1.0)
    if diag.min() <= scale * np.finfo(float).eps * a.shape[0]:
        raise SingularSystemError(
            "dense LU found a negligible pivot", pivot=float(diag.min())
        )
    return sla.lu_solve((lu, piv), b, check_finite=False)


class BandedMatrix:
    """Banded complex matrix with declared lower/upper bandwidths.

    Entries are assembled into LAPACK band storage; writing outside the
    declared band raises :class:`BandStructureError`.
    """

    def __init__(self, n: int, lower: int, upper: int):
        if n < 1 or lower < 0 or upper < 0:
            raise ParameterError("invalid band dimensions")
        self.n = n
        self.lower = lower
        self.upper = upper
        self.ab = np.zeros((lower + upper + 1, n), dtype=complex)

    def add(self, rows, cols, values):
        rows = np.atleast_1d(np.asarray(rows, dtype=int))
        cols = np.atleast_1d(np.asarray(cols, dtype=int))
        values = np.atleast_1d(np.asarray(values, dtype=complex))
        offs = rows - cols
        if (offs > self.lower).any() or (-offs > self.upper).any():
            raise BandStructureError(
                "assembly entry outside the declared band"
            )
        if (rows < 0).any() or (rows >= self.n).any() or (cols < 0).any() or (cols >= self.n).any():
            raise ParameterError("banded index out of range")
        np.add.at(self.ab, (self.upper + offs, cols), values)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=complex)
        for off in range(-self.upper, self.lower + 1):
            js = np.arange(max(0, -off), min(self.n, self.n - off))
            out[js + off, js] = self.ab[self.upper + off, js]
        return out


def solve_banded(banded: BandedMatrix, b: np.ndarray) -> np.ndarray:
    """Direct banded LU solve (cost O(n * w^2))."""
    b = np.asarray(b, dtype=complex)
    if b.shape[0] != banded.n:
        raise ParameterError("right-hand side does not conform to the band matrix")
    try:
        x = sla.solve_banded(
            (banded.lower, banded.upper), banded.ab, b, check_finite=False
        )
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"banded LU failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("banded LU produced non-finite values")
    return x


def thin_qr(a: np.ndarray):
    """Economy QR factorization, A = Q R with orthonormal Q columns.

    Rank-deficient input still yields a valid factorization; use
    :func:`is_rank_deficient` on R to detect near-zero diagonal entries.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise ParameterError(f"thin_qr expects n >= r, got shape {a.shape}")
    q, r = np.linalg.qr(a)
    return q, r


def is_rank_deficient(r: np.ndarray, rtol: float = 1e-12) -> bool:
    """Diagnostic flag for a (near) rank-deficient triangular factor."""
    d = np.abs(np.diag(r))
    if d.size == 0:
        return False
    return bool(d.min() <= rtol * max(d.max(), 1e-300))


def svd(a: np.ndarray):
    """Singular value decomposition A = U diag(s) Vh with s descending."""
    a = np.asarray(a, dtype=complex)
    return np.linalg.svd(a, full_matrices=False)


def full_solve(op: KronSumOperator, rhs: np.ndarray, cap: int = FULL_SOLVE_CAP) -> np.ndarray:
    """Full-grid sparse direct solve; the reference oracle for every
    low-rank path.

    ``rhs`` is given in grid shape (matrix or tensor); the solution is
    returned in the same shape.  Raises :class:`ResourceLimitError` above
    the unknown-count cap, where the low-rank solvers are the way to go.
    """
    op.validate()
    rhs = np.asarray(rhs, dtype=complex)
    n = op.dimension
    if rhs.size != n:
        raise ParameterError("right-hand side does not match operator size")
    if n > cap:
        raise ResourceLimitError(
            f"full-grid solve with {n} unknowns exceeds cap {cap}; "
            "use a low-rank solver instead"
        )
    matrix = assemble_sparse(op)
    b = rhs.ravel(order="F")
    try:
        lu = spla.splu(matrix)
        x = lu.solve(b)
    except RuntimeError as exc:
        raise SingularSystemError(f"sparse LU failed: {exc}") from exc
    resid = np.linalg.norm(matrix @ x - b)
    bnorm = np.linalg.norm(b)
    if bnorm > 0 and resid > 1e-8 * bnorm:
        raise SingularSystemError(
            f"full-grid solve residual {resid:.3e} exceeds 1e-8 * |rhs|"
        )
    return x.reshape(rhs.shape, order="F")


def lowrank_frobenius_norm(lefts, rights) -> float:
    """Frobenius norm of sum_i L_i R_i^H without forming the product.

    ``lefts``/``rights`` are lists of conforming (n x k_i) blocks.
    """
    lcat = np.hstack([np.asarray(l, dtype=complex) for l in lefts])
    rcat = np.hstack([np.asarray(r, dtype=complex) for r in rights])
    if lcat.shape[1] != rcat.shape[1]:
        raise ParameterError("left and right factor widths disagree")
    if lcat.shape[0] <= lcat.shape[1]:
        return float(np.linalg.norm(lcat @ rcat.conj().T))
    _, rl = np.linalg.qr(lcat)
    _, rr = np.linalg.qr(rcat)
    return float(np.linalg.norm(rl @ rr.conj().T))
