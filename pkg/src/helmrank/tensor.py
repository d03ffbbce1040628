"""Tucker and canonical-polyadic tensor formats and their algebra.

Unfolding convention: mode-k fibers become columns and the remaining
indices are ordered with the smaller mode index varying fastest.  A Tucker
value reconstructs with conjugated factors, so that

    unfold(dense, 0) == conj(U_1) @ unfold(core, 0) @ kron(U_3, U_2).conj().T

holds for order-3 tensors.  Kernels are written for general order d; the
solvers use d = 3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

__all__ = [
    "unfold", "fold", "mode_product", "hadamard",
    "TuckerTensor", "CpTensor", "hosvd", "cp_als", "CpAlsResult",
    "tucker_to_dense", "cp_to_dense", "cp_from_terms",
]


def unfold(tensor: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization (0-based mode index)."""
    tensor = np.asarray(tensor)
    if not 0 <= mode < tensor.ndim:
        raise ParameterError(f"mode {mode} out of range for order-{tensor.ndim} tensor")
    return np.moveaxis(tensor, mode, 0).reshape(
        (tensor.shape[mode], -1), order="F"
    )


def fold(matrix: np.ndarray, mode: int, shape) -> np.ndarray:
    """Inverse of :func:`unfold` for a tensor of the given shape."""
    shape = tuple(shape)
    matrix = np.asarray(matrix)
    if not 0 <= mode < len(shape):
        raise ParameterError(f"mode {mode} out of range for shape {shape}")
    moved = (shape[mode],) + tuple(s for k, s in enumerate(shape) if k != mode)
    if matrix.size != int(np.prod(shape)):
        raise ParameterError(f"matrix of size {matrix.size} cannot fold to shape {shape}")
    return np.moveaxis(matrix.reshape(moved, order="F"), 0, mode)


def apply_mode(tensor: np.ndarray, matrix: np.ndarray, mode: int) -> np.ndarray:
    """Multiply mode-``mode`` fibers by ``matrix`` (no conjugation)."""
    tensor = np.asarray(tensor)
    matrix = np.asarray(matrix)
    if matrix.shape[1] != tensor.shape[mode]:
        raise ParameterError(
            f"matrix with {matrix.shape[1]} columns cannot contract mode of "
            f"extent {tensor.shape[mode]}"
        )
    return np.moveaxis(np.tensordot(matrix, tensor, axes=([1], [mode])), 0, mode)


def mode_product(tensor: np.ndarray, matrix: np.ndarray, mode: int) -> np.ndarray:
    """Tensor-times-matrix product in the convention where stored factors
    enter the reconstruction conjugated: fibers are multiplied by the
    conjugate of ``matrix``."""
    return apply_mode(tensor, np.conj(np.asarray(matrix, dtype=complex)), mode)


def hadamard(t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    """Elementwise tensor product; commutes with every unfolding."""
    t1 = np.asarray(t1)
    t2 = np.asarray(t2)
    if t1.shape != t2.shape:
        raise ParameterError(f"shape mismatch {t1.shape} vs {t2.shape}")
    return t1 * t2


@dataclass
class TuckerTensor:
    """Core tensor plus one factor matrix per mode (orthonormal columns)."""

    core: np.ndarray
    factors: list

    def __post_init__(self):
        self.core = np.asarray(self.core, dtype=complex)
        self.factors = [np.asarray(u, dtype=complex) for u in self.factors]
        if self.core.ndim != len(self.factors):
            raise ParameterError("factor count must match core order")
        for k, u in enumerate(self.factors):
            if u.shape[1] != self.core.shape[k]:
                raise ParameterError(
                    f"factor {k} has {u.shape[1]} columns, core extent is {self.core.shape[k]}"
                )

    @property
    def shape(self):
        return tuple(u.shape[0] for u in self.factors)

    @property
    def ranks(self):
        return self.core.shape

    def to_dense(self) -> np.ndarray:
        return tucker_to_dense(self)

    def orthonormality_defect(self) -> float:
        return max(
            float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[1])))
            for u in self.factors
        )

    def copy(self) -> "TuckerTensor":
        return TuckerTensor(self.core.copy(), [u.copy() for u in self.factors])


def tucker_to_dense(t: TuckerTensor) -> np.ndarray:
    dense = t.core
    for mode, u in enumerate(t.factors):
        dense = apply_mode(dense, np.conj(u), mode)
    return dense


@dataclass
class CpTensor:
    """Weighted sum of rank-1 outer products with unit-norm factor vectors.

    ``factor_matrices[j][:, i]`` is the mode-j vector of the i-th rank-1
    term; weights are sorted by decreasing magnitude.
    """

    weights: np.ndarray
    factor_matrices: list

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=complex)
        self.factor_matrices = [np.asarray(v, dtype=complex) for v in self.factor_matrices]
        s = self.weights.size
        for j, v in enumerate(self.factor_matrices):
            if v.shape[1] != s:
                raise ParameterError(
                    f"mode-{j} factor matrix has {v.shape[1]} columns, expected {s}"
                )

    @property
    def rank(self) -> int:
        return self.weights.size

    @property
    def shape(self):
        return tuple(v.shape[0] for v in self.factor_matrices)

    def to_dense(self) -> np.ndarray:
        return cp_to_dense(self)

    def term_vectors(self, i: int):
        """Weighted rank-1 term i as (weight, [v^(1), ..., v^(d)])."""
        return self.weights[i], [v[:, i] for v in self.factor_matrices]


def cp_to_dense(c: CpTensor) -> np.ndarray:
    d = len(c.factor_matrices)
    shape = c.shape
    out = np.zeros(shape, dtype=complex)
    for i in range(c.rank):
        term = c.weights[i]
        block = c.factor_matrices[0][:, i]
        for j in range(1, d):
            block = np.multiply.outer(block, c.factor_matrices[j][:, i])
        out = out + term * block
    return out


def cp_from_terms(terms) -> CpTensor:
    """Build a CP value from explicit (weight, [vector per mode]) terms,
    normalizing each vector and absorbing norms into the weights."""
    if not terms:
        raise ParameterError("at least one rank-1 term is required")
    d = len(terms[0][1])
    normalized = []
    for w, vectors in terms:
        if len(vectors) != d:
            raise ParameterError("inconsistent term order")
        w = complex(w)
        unit_vectors = []
        for v in vectors:
            v = np.asarray(v, dtype=complex)
            norm = float(np.linalg.norm(v))
            if norm == 0.0:
                w = 0.0
                unit = np.zeros_like(v)
                unit[0] = 1.0
            else:
                w *= norm
                unit = v / norm
            unit_vectors.append(unit)
        normalized.append((w, unit_vectors))
    weights = np.array([w for w, _ in normalized], dtype=complex)
    order = np.argsort(-np.abs(weights), kind="stable")
    mats = [
        np.column_stack([normalized[i][1][j] for i in order])
        for j in range(d)
    ]
    return CpTensor(weights=weights[order], factor_matrices=mats)


def hosvd(tensor: np.ndarray, ranks) -> TuckerTensor:
    """Higher-order SVD truncated to the given per-mode ranks.

    Factors are the leading left singular vectors of each unfolding
    (conjugated to match the reconstruction convention); the core is the
    tensor contracted with the factor adjoints.
    """
    tensor = np.asarray(tensor, dtype=complex)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != tensor.ndim:
        raise ParameterError("one rank per mode is required")
    bases = []
    for mode, r in enumerate(ranks):
        if not 1 <= r <= tensor.shape[mode]:
            raise ParameterError(
                f"rank {r} invalid for mode {mode} of extent {tensor.shape[mode]}"
            )
        w, _, _ = np.linalg.svd(unfold(tensor, mode), full_matrices=False)
        bases.append(w[:, :r])
    core = tensor
    for mode, w in enumerate(bases):
        core = apply_mode(core, w.conj().T, mode)
    return TuckerTensor(core=core, factors=[np.conj(w) for w in bases])


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Columnwise Kronecker product with a's row index varying fastest,
    matching the unfolding convention."""
    if a.shape[1] != b.shape[1]:
        raise ParameterError("column counts must agree")
    return (a[:, None, :] * b[None, :, :]).reshape(-1, a.shape[1], order="F")


@dataclass
class CpAlsResult:
    tensor: CpTensor
    fit_history: list
    converged: bool
    iterations: int


def cp_als(
    tensor: np.ndarray,
    rank: int,
    max_iters: int = 200,
    tol: float = 1e-10,
    seed: int = 0,
) -> CpAlsResult:
    """Alternating least squares for a rank-``rank`` CP approximation.

    Factors start from seeded complex Gaussian noise.  The relative
    reconstruction error is recorded each sweep and is non-increasing up to
    round-off; if it fails to reach ``tol`` within ``max_iters`` the best
    iterate is returned with ``converged=False``.
    """
    tensor = np.asarray(tensor, dtype=complex)
    if rank < 1:
        raise ParameterError(f"cp rank must be >= 1, got {rank}")
    d = tensor.ndim
    shape = tensor.shape
    rng = np.random.default_rng(seed)
    factors = [
        rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
        for n in shape
    ]
    factors = [f / np.linalg.norm(f, axis=0, keepdims=True) for f in factors]
    weights = np.ones(rank, dtype=complex)
    tnorm = np.linalg.norm(tensor)
    if tnorm == 0.0:
        zero = CpTensor(np.zeros(rank, dtype=complex), factors)
        return CpAlsResult(zero, [0.0], True, 0)

    unfoldings = [unfold(tensor, mode) for mode in range(d)]
    fits = []
    for iteration in range(max_iters):
        for mode in range(d):
            others = [factors[j] for j in range(d) if j != mode]
            # Khatri-Rao over the other modes, smallest mode index fastest.
            kr = others[0]
            for f in others[1:]:
                kr = khatri_rao(kr, f)
            gram = np.ones((rank, rank), dtype=complex)
            for j in range(d):
                if j == mode:
                    continue
                gram = gram * (factors[j].conj().T @ factors[j])
            rhs = unfoldings[mode] @ np.conj(kr)
            # Least squares against conj(gram); SVD-based to survive the
            # rank-degenerate case where the target rank exceeds the
            # tensor's true CP rank.
            updated = np.linalg.lstsq(np.conj(gram).T, rhs.T, rcond=None)[0].T
            norms = np.linalg.norm(updated, axis=0)
            norms[norms == 0.0] = 1.0
            factors[mode] = updated / norms
            weights = norms.astype(complex)
        rec = cp_to_dense(CpTensor(weights, factors))
        fit = float(np.linalg.norm(tensor - rec) / tnorm)
        fits.append(fit)
        if fit <= tol:
            break
        if len(fits) >= 2 and abs(fits[-2] - fits[-1]) <= 1e-14 + 1e-9 * fits[-2]:
            break

    order = np.argsort(-np.abs(weights))
    result = CpTensor(
        weights=np.asarray(weights)[order],
        factor_matrices=[f[:, order] for f in factors],
    )
    return CpAlsResult(
        tensor=result,
        fit_history=fits,
        converged=bool(fits and fits[-1] <= tol),
        iterations=len(fits),
    )
