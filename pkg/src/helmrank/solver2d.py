"""Alternating low-rank solver for the 2D Helmholtz problem.

The grid solution is sought as A ~ U V^H with tall orthonormal factors.
With one factor frozen, projecting the matrix equation

    -Dxx A - A Dyy^T - K o A = F        (o = Hadamard product)

onto that factor yields a small square system for the other factor; the
factors are updated in an alternating sequence with re-orthonormalization
after every solve.  Each half-step equals applying an (idempotent)
projector to the residual, which is what the verification suite checks.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kron
from .errors import ParameterError, SingularSystemError
from .report import SolveReport

DENSE_SYSTEM_CAP = 2400


@dataclass
class Helmholtz2D:
    """Discrete 2D problem: second-derivative matrices, wave-number grid
    samples K (entries of k^2), and right-hand side F.

    ``k_separable`` optionally lists (a, b) column pairs with
    K = sum_s outer(a_s, b_s); the reduced-system assembly and the
    low-rank residual use it to avoid touching dense K.
    """

    dxx: np.ndarray
    dyy: np.ndarray
    K: np.ndarray
    F: np.ndarray
    k_separable: list | None = None

    def __post_init__(self):
        self.dxx = np.asarray(self.dxx, dtype=complex)
        self.dyy = np.asarray(self.dyy, dtype=complex)
        self.K = np.asarray(self.K, dtype=complex)
        self.F = np.asarray(self.F, dtype=complex)
        n1, n2 = self.shape
        if self.dxx.shape != (n1, n1) or self.dyy.shape != (n2, n2):
            raise ParameterError("derivative matrices do not match the grid")
        if self.F.shape != (n1, n2):
            raise ParameterError("right-hand side does not match the grid")

    @property
    def shape(self):
        return self.K.shape

    def operator(self) -> kron.KronSumOperator:
        """Full-grid operator L = I x (-Dxx) + (-Dyy) x I - diag(vec K)."""
        return kron.KronSumOperator(
            mode_sizes=self.shape,
            terms=[(None, -self.dxx), (-self.dyy, None)],
            diagonal_part=-kron.vec(self.K),
        )

    def apply(self, a: np.ndarray) -> np.ndarray:
        """Apply the operator to a grid matrix."""
        return -self.dxx @ a - a @ self.dyy.T - self.K * a

    def residual_matrix(self, a: np.ndarray) -> np.ndarray:
        return self.F - self.apply(a)


@dataclass
class LowRankWave2D:
    """Factored solution A ~ U R^H V^H with orthonormal U, V."""

    U: np.ndarray
    V: np.ndarray
    R: np.ndarray

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def to_dense(self) -> np.ndarray:
        return self.U @ self.R.conj().T @ self.V.conj().T

    def coupling_singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.R, compute_uv=False)


def _hadamard_blocks_right(problem: Helmholtz2D, v: np.ndarray) -> np.ndarray:
    """W[i, p, q] = [K (v_p o conj v_q)]_i for the right-projected system."""
    if problem.k_separable is not None:
        n = problem.shape[0]
        r = v.shape[1]
        w = np.zeros((n, r, r), dtype=complex)
        for a, b in problem.k_separable:
            coeff = np.einsum("jp,j,jq->pq", v, b, v.conj())
            w += np.multiply.outer(np.asarray(a, dtype=complex), coeff)
        return w
    return np.einsum("ij,jp,jq->ipq", problem.K, v, v.conj(), optimize=True)


def _hadamard_blocks_left(problem: Helmholtz2D, u: np.ndarray) -> np.ndarray:
    """M[j, p, q] = [U^H diag(K[:, j]) U]_{pq} for the left-projected system."""
    if problem.k_separable is not None:
        n = problem.shape[1]
        r = u.shape[1]
        m = np.zeros((n, r, r), dtype=complex)
        for a, b in problem.k_separable:
            coeff = np.einsum("ip,i,iq->pq", u.conj(), a, u)
            m += np.multiply.outer(np.asarray(b, dtype=complex), coeff)
        return m
    return np.einsum("ip,ij,iq->jpq", u.conj(), problem.K, u, optimize=True)


def _solve_right_system(problem: Helmholtz2D, v: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve the projected system for the left factor against an arbitrary
    right-hand side matrix of shape (n1, r)."""
    n = problem.shape[0]
    r = v.shape[1]
    coupling = v.T @ (-problem.dyy) @ v.conj()
    w = _hadamard_blocks_right(problem, v)
    if n * r <= DENSE_SYSTEM_CAP:
        system = np.kron(np.eye(r), -problem.dxx) + np.kron(coupling, np.eye(n))
        for p in range(r):
            for q in range(r):
                idx = np.arange(n)
                system[p * n + idx, q * n + idx] -= w[:, p, q]
        x = kron.solve_dense(system, rhs.ravel(order="F"))
        return x.reshape((n, r), order="F")
    return _banded_channel_solve(-problem.dxx, coupling, -w, rhs)


def _solve_left_system(problem: Helmholtz2D, u: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve the projected system for the conjugate-transposed right factor
    against an arbitrary right-hand side matrix of shape (r, n2)."""
    n = problem.shape[1]
    r = u.shape[1]
    reduced_dxx = u.conj().T @ (-problem.dxx) @ u
    m = _hadamard_blocks_left(problem, u)
    if n * r <= DENSE_SYSTEM_CAP:
        system = np.kron(np.eye(n), reduced_dxx) + np.kron(-problem.dyy, np.eye(r))
        for j in range(n):
            sl = slice(j * r, (j + 1) * r)
            system[sl, sl] -= m[j]
        x = kron.solve_dense(system, rhs.ravel(order="F"))
        return x.reshape((r, n), order="F")
    sol = _banded_channel_solve(-problem.dyy, reduced_dxx, -m, rhs.T)
    return sol.T


def _banded_channel_solve(tri: np.ndarray, coupling: np.ndarray,
                          diag_blocks: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Banded LU for systems of the form

        [I_r x tri + coupling x I_n + blockdiag-in-i(diag_blocks[i])] x = rhs

    in the channel-interleaved ordering (channel index fastest), which has
    bandwidth r.  ``rhs`` and the returned solution have shape (n, r).
    """
    n = tri.shape[0]
    r = coupling.shape[0]
    size = n * r
    band = kron.BandedMatrix(size, r, r)
    cols_all = np.arange(size)
    band.ab[band.upper, :] += np.repeat(np.diag(tri), r)
    if n > 1:
        super_vals = np.repeat(np.diag(tri, 1), r)
        band.ab[band.upper - r, r:] += super_vals
        sub_vals = np.repeat(np.diag(tri, -1), r)
        band.ab[band.upper + r, : size - r] += sub_vals
    i_idx = np.arange(n)
    for p in range(r):
        for q in range(r):
            values = np.full(n, coupling[p, q], dtype=complex) + diag_blocks[:, p, q]
            cols = q + i_idx * r
            band.ab[band.upper + (p - q), cols] += values
    x = kron.solve_banded(band, rhs.reshape(size, order="C"))
    return x.reshape((n, r), order="C")


def solve_for_U(problem: Helmholtz2D, v: np.ndarray) -> np.ndarray:
    """Solve the right-projected equation for the left factor.

    ``v`` must have orthonormal columns; the Hadamard coupling is applied
    through its vectorization identity, never forming diag(vec K).
    """
    _check_orthonormal(v, "V")
    return _solve_right_system(problem, v, problem.F @ v)


def solve_for_V(problem: Helmholtz2D, u: np.ndarray) -> np.ndarray:
    """Solve the left-projected equation; returns the new (non-orthonormal)
    right factor V such that A ~ U V^H."""
    _check_orthonormal(u, "U")
    x = _solve_left_system(problem, u, u.conj().T @ problem.F)
    return x.conj().T


def _check_orthonormal(basis: np.ndarray, name: str, tol: float = 1e-8):
    r = basis.shape[1]
    defect = np.linalg.norm(basis.conj().T @ basis - np.eye(r))
    if defect > tol:
        raise ParameterError(
            f"{name} must have orthonormal columns (defect {defect:.2e})"
        )


def galerkin_matrix_right(problem: Helmholtz2D, v: np.ndarray) -> np.ndarray:
    """Dense assembled reduced operator (V^T x I) L (conj(V) x I)."""
    n = problem.shape[0]
    r = v.shape[1]
    coupling = v.T @ (-problem.dyy) @ v.conj()
    w = _hadamard_blocks_right(problem, v)
    system = np.kron(np.eye(r), -problem.dxx) + np.kron(coupling, np.eye(n))
    idx = np.arange(n)
    for p in range(r):
        for q in range(r):
            system[p * n + idx, q * n + idx] -= w[:, p, q]
    return system


def galerkin_matrix_left(problem: Helmholtz2D, u: np.ndarray) -> np.ndarray:
    """Dense assembled reduced operator (I x U^H) L (I x U)."""
    n = problem.shape[1]
    r = u.shape[1]
    reduced_dxx = u.conj().T @ (-problem.dxx) @ u
    m = _hadamard_blocks_left(problem, u)
    system = np.kron(np.eye(n), reduced_dxx) + np.kron(-problem.dyy, np.eye(r))
    for j in range(n):
        sl = slice(j * r, (j + 1) * r)
        system[sl, sl] -= m[j]
    return system


def projector_apply(problem: Helmholtz2D, side: str, basis: np.ndarray,
                    x: np.ndarray) -> np.ndarray:
    """Apply the residual projector for the given frozen subspace to a
    full-grid vector, using reduced solves only.

    side='right' freezes the right factor (the projector annihilating
    residual components correctable by a left-factor update); side='left'
    mirrors it.  An empty basis gives the identity.
    """
    n1, n2 = problem.shape
    x = np.asarray(x, dtype=complex)
    if x.size != n1 * n2:
        raise ParameterError("projector operand does not match the grid")
    basis = np.asarray(basis, dtype=complex)
    if basis.size == 0 or basis.shape[1] == 0:
        return x.copy()
    _check_orthonormal(basis, "basis")
    xm = kron.unvec(x, n1, n2)
    if side == "right":
        y = _solve_right_system(problem, basis, xm @ basis)
        corr = y @ basis.conj().T
    elif side == "left":
        y = _solve_left_system(problem, basis, basis.conj().T @ xm)
        corr = basis @ y
    else:
        raise ParameterError(f"side must be 'left' or 'right', got {side!r}")
    return x - kron.vec(problem.apply(corr))


def residual(problem: Helmholtz2D, wave) -> tuple:
    """Residual matrix and its Frobenius norm for a factored or dense wave.

    Dense evaluation is used below the materialization cap; above it the
    norm is computed in factored arithmetic (requires separable K) and the
    matrix slot of the return value is None.
    """
    if isinstance(wave, LowRankWave2D):
        return _residual_factored(problem, wave.U @ wave.R.conj().T, wave.V)
    a = np.asarray(wave, dtype=complex)
    r = problem.residual_matrix(a)
    return r, float(np.linalg.norm(r))


def _residual_factored(problem: Helmholtz2D, uc: np.ndarray, v: np.ndarray,
                       dense_cap: int = 4_000_000) -> tuple:
    n1, n2 = problem.shape
    if n1 * n2 <= dense_cap or problem.k_separable is None:
        a = uc @ v.conj().T
        r = problem.residual_matrix(a)
        return r, float(np.linalg.norm(r))
    # Factored norm: R = F + Dxx A + A Dyy^T + K o A, each term L R^H.
    lefts = [problem.F, problem.dxx @ uc, uc]
    rights = [np.eye(n2, dtype=complex), v, np.conj(problem.dyy) @ v]
    for a_vec, b_vec in problem.k_separable:
        lefts.append(np.asarray(a_vec)[:, None] * uc)
        rights.append(np.conj(np.asarray(b_vec))[:, None] * v)
    return None, kron.lowrank_frobenius_norm(lefts, rights)


def initial_basis(problem: Helmholtz2D, rank: int, init: str = "random",
                  seed: int = 0) -> np.ndarray:
    """Orthonormal starting guess for the right factor."""
    n2 = problem.shape[1]
    if not 1 <= rank <= min(problem.shape):
        raise ParameterError(f"rank {rank} out of range for grid {problem.shape}")
    if init == "random":
        rng = np.random.default_rng(seed)
        guess = rng.standard_normal((n2, rank)) + 1j * rng.standard_normal((n2, rank))
        q, _ = kron.thin_qr(guess)
        return q
    if init == "rhs":
        # Right singular subspace of the excitation.
        _, _, vh = np.linalg.svd(problem.F, full_matrices=False)
        basis = vh[:rank].conj().T
        if basis.shape[1] < rank:
            raise ParameterError("rhs initializer cannot reach the requested rank")
        return basis
    raise ParameterError(f"unknown initializer {init!r}")


def alternate(problem: Helmholtz2D, rank: int, initial_v: np.ndarray | None = None,
              max_iters: int = 30, tol: float = 1e-6, seed: int = 0,
              init: str = "random", iterate_log: list | None = None) -> tuple:
    """Alternating factor updates until the relative residual drops below
    ``tol`` or the iteration budget runs out.

    Returns (LowRankWave2D, SolveReport).  Stagnating residuals (relative
    change below 1e-3 across three sweeps) stop the iteration early with
    the appropriate report flag; non-convergence is a flag, not an error.
    Passing a list as ``iterate_log`` records a factored snapshot of every
    sweep's iterate.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    if initial_v is not None:
        v = np.asarray(initial_v, dtype=complex)
        v, _ = kron.thin_qr(v)
    else:
        v = initial_basis(problem, rank, init=init, seed=seed)

    report = SolveReport(final_rank=rank)
    fnorm = float(np.linalg.norm(problem.F))
    u = np.zeros((problem.shape[0], rank), dtype=complex)
    coupling = np.zeros((rank, rank), dtype=complex)
    for iteration in range(1, max_iters + 1):
        t0 = time.perf_counter()
        u_raw = solve_for_U(problem, v)
        report.add_time("solve_u", time.perf_counter() - t0)

        t0 = time.perf_counter()
        u, _ = kron.thin_qr(u_raw)
        report.add_time("qr", time.perf_counter() - t0)

        t0 = time.perf_counter()
        v_raw = solve_for_V(problem, u)
        report.add_time("solve_v", time.perf_counter() - t0)

        t0 = time.perf_counter()
        v, coupling = kron.thin_qr(v_raw)
        report.add_time("qr", time.perf_counter() - t0)

        t0 = time.perf_counter()
        wave = LowRankWave2D(U=u, V=v, R=coupling)
        _, rnorm = residual(problem, wave)
        report.add_time("residual", time.perf_counter() - t0)
        rel = rnorm / fnorm if fnorm > 0 else 0.0
        report.residual_history.append(rel)
        report.iterations = iteration
        if iterate_log is not None:
            iterate_log.append(LowRankWave2D(U=u.copy(), V=v.copy(), R=coupling.copy()))

        if rel <= tol:
            report.converged = True
            report.stop_reason = "tolerance reached"
            break
        hist = report.residual_history
        if len(hist) >= 4 and hist[-4] > 0 and abs(hist[-4] - hist[-1]) < 1e-3 * hist[-4]:
            report.stop_reason = "residual stagnated"
            break
    else:
        report.stop_reason = "iteration budget exhausted"

    return LowRankWave2D(U=u, V=v, R=coupling), report
