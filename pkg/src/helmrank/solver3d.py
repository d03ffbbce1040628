"""Tucker-format alternating solvers for the 3D Helmholtz problem.

Three sweep layouts over the same per-mode reduced systems:

  version 1: solve the full mode unfolding (n x r^2 unknowns) for every
             mode, truncating back to rank r by QR;
  version 2: pre-project each mode system onto a QR basis of the core
             unfolding (n x r unknowns per mode), then recover the core
             once at the end from a dense r^3 x r^3 solve;
  version 3: version-2 solves for the first two modes and one version-1
             solve for the last mode, which refreshes the core every sweep
             without the expensive final solve.

Space-dependent wave numbers enter through a canonical polyadic
decomposition; the Hadamard coupling then projects onto small per-term
Kronecker triples applied matrix-free.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import kron
from .errors import ParameterError, ResourceLimitError, SingularSystemError
from .report import SolveReport
from .tensor import (
    CpTensor,
    TuckerTensor,
    apply_mode,
    cp_to_dense,
    fold,
    hosvd,
    unfold,
)

CORE_SOLVE_CAP = 4096
DENSE_RESIDUAL_CAP = 8_000_000
_FAST_PATH_RESIDUAL_TOL = 1e-9


@dataclass
class Helmholtz3D:
    """Discrete 3D problem on an n1 x n2 x n3 grid.

    ``wavenumber`` is either a complex scalar (constant k^2) or a
    :class:`CpTensor` holding the full k^2 field; the CP form defines the
    discrete operator, and dense samples are derived from it on demand.
    """

    dxx: np.ndarray
    dyy: np.ndarray
    dzz: np.ndarray
    wavenumber: object
    F: np.ndarray

    def __post_init__(self):
        self.dxx = np.asarray(self.dxx, dtype=complex)
        self.dyy = np.asarray(self.dyy, dtype=complex)
        self.dzz = np.asarray(self.dzz, dtype=complex)
        self.F = np.asarray(self.F, dtype=complex)
        if self.F.shape != self.shape:
            raise ParameterError("right-hand side does not match the grid")
        if not self.is_constant and self.wavenumber.shape != self.shape:
            raise ParameterError("wave-number field does not match the grid")

    @property
    def shape(self):
        return (self.dxx.shape[0], self.dyy.shape[0], self.dzz.shape[0])

    @property
    def is_constant(self) -> bool:
        return np.isscalar(self.wavenumber) or isinstance(self.wavenumber, complex)

    @property
    def derivatives(self):
        return (self.dxx, self.dyy, self.dzz)

    def k_dense(self) -> np.ndarray:
        if self.is_constant:
            return np.full(self.shape, complex(self.wavenumber))
        return cp_to_dense(self.wavenumber)

    def operator(self) -> kron.KronSumOperator:
        return kron.KronSumOperator(
            mode_sizes=self.shape,
            terms=[
                (None, None, -self.dxx),
                (None, -self.dyy, None),
                (-self.dzz, None, None),
            ],
            diagonal_part=-kron.vec(self.k_dense()),
        )

    def apply_dense(self, m: np.ndarray) -> np.ndarray:
        out = -apply_mode(m, self.dxx, 0)
        out -= apply_mode(m, self.dyy, 1)
        out -= apply_mode(m, self.dzz, 2)
        out -= self.k_dense() * m
        return out

    def residual_dense(self, m: np.ndarray) -> np.ndarray:
        return self.F - self.apply_dense(m)


@dataclass
class KOperator:
    """Projected Hadamard coupling for one mode's reduced system.

    Stores, per CP term, the two projected channel matrices for the frozen
    modes and the raw diagonal vector for the free mode; the action on the
    unfolded unknown is applied matrix-free.
    """

    mode: int
    weights: np.ndarray
    channel_matrices: list  # per term: (fast r x r, slow r x r)
    free_vectors: list      # per term: length n_i diagonal

    def channel_kron(self, term: int) -> np.ndarray:
        fast, slow = self.channel_matrices[term]
        return np.kron(slow, fast)

    def apply_matrix(self, x: np.ndarray, ranks_other) -> np.ndarray:
        """Apply to the mode unfolding x of shape (n_i, r_fast * r_slow)."""
        n = x.shape[0]
        rf, rs = ranks_other
        xt = x.reshape((n, rf, rs), order="F")
        out = np.zeros_like(xt)
        for t in range(self.weights.size):
            fast, slow = self.channel_matrices[t]
            contrib = np.einsum("ibc,Bb,Cc->iBC", xt, fast, slow, optimize=True)
            out += self.weights[t] * self.free_vectors[t][:, None, None] * contrib
        return out.reshape((n, rf * rs), order="F")

    def dense(self, n: int) -> np.ndarray:
        """Dense oracle assembly (small instances only)."""
        blocks = sum(
            self.weights[t]
            * np.kron(self.channel_kron(t), np.diag(self.free_vectors[t]))
            for t in range(self.weights.size)
        )
        return blocks


def build_k_operators(k_cp: CpTensor, factors) -> tuple:
    """Projected Hadamard operators for all three modes.

    Factor matrices enter as U^T diag(v) conj(U) per frozen mode; the free
    mode keeps its raw CP vector.  Cost per apply stays linear in the CP
    rank.
    """
    if len(factors) != 3 or len(k_cp.factor_matrices) != 3:
        raise ParameterError("three modes are required")
    for j in range(3):
        if k_cp.factor_matrices[j].shape[0] != factors[j].shape[0]:
            raise ParameterError("CP factors do not conform to the grid")

    def projected(j: int, t: int) -> np.ndarray:
        u = factors[j]
        v = k_cp.factor_matrices[j][:, t]
        return u.T @ (v[:, None] * np.conj(u))

    ops = []
    for mode in range(3):
        others = [j for j in range(3) if j != mode]
        fast, slow = others
        channel = []
        free = []
        for t in range(k_cp.rank):
            channel.append((projected(fast, t), projected(slow, t)))
            free.append(k_cp.factor_matrices[mode][:, t].astype(complex))
        ops.append(
            KOperator(
                mode=mode,
                weights=k_cp.weights.copy(),
                channel_matrices=channel,
                free_vectors=free,
            )
        )
    return tuple(ops)


def _mode_pieces(problem: Helmholtz3D, factors, mode: int):
    """Tridiagonal part T, channel coupling C, and Hadamard summands for
    the reduced system of one mode."""
    others = [j for j in range(3) if j != mode]
    fast, slow = others
    derivs = problem.derivatives
    b_fast = factors[fast].T @ derivs[fast] @ np.conj(factors[fast])
    b_slow = factors[slow].T @ derivs[slow] @ np.conj(factors[slow])
    rf = factors[fast].shape[1]
    rs = factors[slow].shape[1]
    coupling = -np.kron(np.eye(rs), b_fast) - np.kron(b_slow, np.eye(rf))
    t_part = -derivs[mode]
    summands = []
    if problem.is_constant:
        t_part = t_part - complex(problem.wavenumber) * np.eye(problem.shape[mode])
    else:
        k_op = build_k_operators(problem.wavenumber, factors)[mode]
        for t in range(k_op.weights.size):
            summands.append(
                (k_op.weights[t], k_op.channel_kron(t), k_op.free_vectors[t])
            )
    return t_part, coupling, summands, (rf, rs)


def _tridiag_bands(t: np.ndarray) -> np.ndarray:
    n = t.shape[0]
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = np.diag(t, 1)
    ab[1, :] = np.diag(t)
    ab[2, :-1] = np.diag(t, -1)
    return ab


def _sylvester_channel_solve(t_part, coupling, rhs):
    """Solve [I x T + C x I] x = vec(rhs) by diagonalizing the channel
    coupling and back-substituting shifted tridiagonal systems."""
    n, m = rhs.shape
    lam, p = np.linalg.eig(coupling.T)
    rhs_t = np.linalg.solve(p.T, rhs.T).T  # rhs @ p^{-T}: transform channels
    x_t = np.empty_like(rhs_t)
    base = _tridiag_bands(t_part)
    for j in range(m):
        ab = base.copy()
        ab[1, :] += lam[j]
        x_t[:, j] = sla.solve_banded((1, 1), ab, rhs_t[:, j], check_finite=False)
    return x_t @ p.T


def _block_thomas_solve(t_part, coupling, summands, rhs):
    """Block-tridiagonal elimination over the grid index for systems

        [I_m x T + C x I_n + sum_s w_s (N_s x diag(v_s))] x = vec(rhs)

    with rhs of shape (n, m).  Off-diagonal blocks are scalar multiples of
    the identity, so only the diagonal blocks need factoring.
    """
    n, m = rhs.shape
    tdiag = np.diag(t_part)
    tsup = np.diag(t_part, 1) if n > 1 else np.array([])
    tsub = np.diag(t_part, -1) if n > 1 else np.array([])

    def diag_block(i):
        block = coupling + tdiag[i] * np.eye(m)
        for weight, channel, free in summands:
            block = block - weight * free[i] * channel
        return block

    w_blocks = [None] * n
    g = np.empty((n, m), dtype=complex)
    run = diag_block(0)
    lu = sla.lu_factor(run, check_finite=False)
    g[0] = sla.lu_solve(lu, rhs[0], check_finite=False)
    if n > 1:
        w_blocks[0] = sla.lu_solve(lu, tsup[0] * np.eye(m), check_finite=False)
    for i in range(1, n):
        run = diag_block(i) - tsub[i - 1] * w_blocks[i - 1]
        lu = sla.lu_factor(run, check_finite=False)
        g[i] = sla.lu_solve(lu, rhs[i] - tsub[i - 1] * g[i - 1], check_finite=False)
        if i < n - 1:
            w_blocks[i] = sla.lu_solve(lu, tsup[i] * np.eye(m), check_finite=False)
    x = np.empty((n, m), dtype=complex)
    x[n - 1] = g[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = g[i] - w_blocks[i] @ x[i + 1]
    return x


def _channel_system_apply(t_part, coupling, summands, x):
    out = t_part @ x + x @ coupling.T
    for weight, channel, free in summands:
        out -= weight * (free[:, None] * (x @ channel.T))
    return out


def _reduced_solve(t_part, coupling, summands, rhs):
    """Direct solve of one reduced per-mode system; rhs shape (n, m)."""
    rnorm = np.linalg.norm(rhs)
    if rnorm == 0.0:
        return np.zeros_like(rhs)
    if not summands:
        try:
            x = _sylvester_channel_solve(t_part, coupling, rhs)
            resid = np.linalg.norm(_channel_system_apply(t_part, coupling, summands, x) - rhs)
            if resid <= _FAST_PATH_RESIDUAL_TOL * rnorm:
                return x
        except np.linalg.LinAlgError:
            pass
    x = _block_thomas_solve(t_part, coupling, summands, rhs)
    resid = np.linalg.norm(_channel_system_apply(t_part, coupling, summands, x) - rhs)
    if not np.isfinite(resid) or resid > 1e-6 * rnorm:
        raise SingularSystemError(
            f"reduced mode system solve failed (relative residual {resid / rnorm:.2e})"
        )
    return x


def _contract_rhs(problem: Helmholtz3D, factors, mode: int) -> np.ndarray:
    """unfold(F, mode) @ kron(U_slow, U_fast) as an (n_i, r_f * r_s) matrix."""
    others = [j for j in range(3) if j != mode]
    fast, slow = others
    contracted = apply_mode(problem.F, factors[fast].T, fast)
    contracted = apply_mode(contracted, factors[slow].T, slow)
    return unfold(contracted, mode)


def solve_factor_v1(problem: Helmholtz3D, tucker: TuckerTensor, mode: int) -> np.ndarray:
    """Solve the full mode-``mode`` unfolding with the other two factors
    frozen; returns X of shape (n_i, r_fast * r_slow)."""
    _check_factors(tucker, skip=mode)
    t_part, coupling, summands, _ = _mode_pieces(problem, tucker.factors, mode)
    rhs = _contract_rhs(problem, tucker.factors, mode)
    return _reduced_solve(t_part, coupling, summands, rhs)


def solve_factor_v2(problem: Helmholtz3D, tucker: TuckerTensor, mode: int):
    """Projected mode solve with n_i * r_i unknowns.

    Returns (X, Q) where Q is the orthonormal basis of the core unfolding
    used for the projection and X has shape (n_i, r_i).
    """
    _check_factors(tucker, skip=mode)
    g_unf = unfold(tucker.core, mode)
    q, _ = np.linalg.qr(g_unf.conj().T)
    t_part, coupling, summands, ranks_other = _mode_pieces(problem, tucker.factors, mode)
    coupling_p = q.T @ coupling @ np.conj(q)
    summands_p = [
        (weight, q.T @ channel @ np.conj(q), free)
        for weight, channel, free in summands
    ]
    rhs = _contract_rhs(problem, tucker.factors, mode) @ q
    x = _reduced_solve(t_part, coupling_p, summands_p, rhs)
    return x, q


def factor_update_from_X(x: np.ndarray, rank: int):
    """Orthonormalize the leading columns of a solved unfolding.

    Returns (U, core_unfolding) where U is the new (conjugated-convention)
    factor and core_unfolding = Q^H X; a rank-deficient leading block falls
    back to column-pivoted QR over all columns.
    """
    x = np.asarray(x, dtype=complex)
    if x.shape[1] < rank:
        raise ParameterError(f"solved unfolding has {x.shape[1]} columns, rank {rank} requested")
    norm = np.linalg.norm(x)
    if norm == 0.0:
        raise SingularSystemError("cannot orthonormalize a zero unfolding (rank collapse)")
    q, r = np.linalg.qr(x[:, :rank])
    if kron.is_rank_deficient(r, rtol=1e-10):
        qp, _, _ = sla.qr(x, mode="economic", pivoting=True)
        q = qp[:, :rank]
    return np.conj(q), q.conj().T @ x


def reconstruct_core(core_unfolding: np.ndarray, mode: int, ranks) -> np.ndarray:
    """Fold an updated mode unfolding back into the core tensor."""
    return fold(core_unfolding, mode, ranks)


def solve_core(problem: Helmholtz3D, factors, cap: int = CORE_SOLVE_CAP) -> np.ndarray:
    """Solve the dense core system with all three factors frozen.

    The system couples every core entry to every other one, so it is
    assembled densely; the unknown count r1*r2*r3 is capped.
    """
    _check_factors(factors)
    ranks = tuple(u.shape[1] for u in factors)
    size = int(np.prod(ranks))
    if size > cap:
        raise ResourceLimitError(
            f"core solve with {size} unknowns exceeds cap {cap}"
        )
    derivs = problem.derivatives
    b = [factors[j].T @ derivs[j] @ np.conj(factors[j]) for j in range(3)]
    eye = [np.eye(r, dtype=complex) for r in ranks]
    system = (
        -np.kron(eye[2], np.kron(eye[1], b[0]))
        - np.kron(eye[2], np.kron(b[1], eye[0]))
        - np.kron(b[2], np.kron(eye[1], eye[0]))
    )
    if problem.is_constant:
        system -= complex(problem.wavenumber) * np.eye(size)
    else:
        cp = problem.wavenumber
        for t in range(cp.rank):
            ms = [
                factors[j].T @ (cp.factor_matrices[j][:, t][:, None] * np.conj(factors[j]))
                for j in range(3)
            ]
            system -= cp.weights[t] * np.kron(ms[2], np.kron(ms[1], ms[0]))
    rhs = problem.F
    for j in range(3):
        rhs = apply_mode(rhs, factors[j].T, j)
    g1 = kron.solve_dense(system, unfold(rhs, 0).ravel(order="F"))
    return fold(g1.reshape((ranks[0], ranks[1] * ranks[2]), order="F"), 0, ranks)


def residual_tensor(problem: Helmholtz3D, tucker: TuckerTensor,
                    dense_cap: int = DENSE_RESIDUAL_CAP) -> tuple:
    """Residual F - L(M) and its Frobenius norm.

    Below the cap the residual is materialized; above it only the norm is
    returned (matrix slot None), computed from factored Gram contractions.
    """
    size = int(np.prod(problem.shape))
    if size <= dense_cap:
        r = problem.residual_dense(tucker.to_dense())
        return r, float(np.linalg.norm(r))
    return None, _residual_norm_factored(problem, tucker)


def _operator_terms(problem: Helmholtz3D, tucker: TuckerTensor):
    """L(M) as a list of Tucker terms sharing the core of M."""
    terms = []
    for mode, deriv in enumerate(problem.derivatives):
        factors = [u.copy() for u in tucker.factors]
        # Mode fibers of the dense value are multiplied by conj(U); applying
        # the (unconjugated) derivative matrix means the stored factor
        # becomes conj(D) U.
        factors[mode] = np.conj(deriv) @ factors[mode]
        terms.append((-1.0, TuckerTensor(tucker.core, factors)))
    if problem.is_constant:
        terms.append((-complex(problem.wavenumber), tucker.copy()))
    else:
        cp = problem.wavenumber
        for t in range(cp.rank):
            factors = [
                np.conj(cp.factor_matrices[j][:, t])[:, None] * tucker.factors[j]
                for j in range(3)
            ]
            terms.append((-cp.weights[t], TuckerTensor(tucker.core, factors)))
    return terms


def _residual_norm_factored(problem: Helmholtz3D, tucker: TuckerTensor) -> float:
    """|F - L(M)| via Gram contractions of the Tucker terms of L(M).

    Loses accuracy once the residual is many orders below |F| (squared
    quantities cancel); intended for scales where dense evaluation is not
    affordable.
    """
    terms = _operator_terms(problem, tucker)
    total = float(np.vdot(problem.F, problem.F).real)
    inner_fl = 0.0 + 0.0j
    for w, term in terms:
        dense_contract = problem.F
        for j in range(3):
            dense_contract = apply_mode(dense_contract, term.factors[j].T, j)
        inner_fl += w * np.vdot(dense_contract, term.core)
    total -= 2.0 * inner_fl.real
    for wa, ta in terms:
        for wb, tb in terms:
            core = tb.core
            for j in range(3):
                core = apply_mode(core, ta.factors[j].T @ np.conj(tb.factors[j]), j)
            total += (np.conj(wa) * wb * np.vdot(ta.core, core)).real
    return float(np.sqrt(max(total, 0.0)))


def _check_factors(factors, skip: int | None = None, tol: float = 1e-8):
    if isinstance(factors, TuckerTensor):
        factors = factors.factors
    for j, u in enumerate(factors):
        if j == skip:
            continue
        defect = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[1]))
        if defect > tol:
            raise ParameterError(
                f"factor {j} must have orthonormal columns (defect {defect:.2e})"
            )


def initial_tucker(problem: Helmholtz3D, ranks, init: str = "rhs", seed: int = 0) -> TuckerTensor:
    """Starting guess: truncated higher-order SVD of the right-hand side, or
    a seeded random Tucker value."""
    ranks = tuple(int(r) for r in ranks)
    for j, r in enumerate(ranks):
        if not 1 <= r <= problem.shape[j]:
            raise ParameterError(f"rank {r} out of range for mode {j}")
    if init == "rhs":
        return hosvd(problem.F, ranks)
    if init == "random":
        rng = np.random.default_rng(seed)
        factors = []
        for j, r in enumerate(ranks):
            guess = rng.standard_normal((problem.shape[j], r)) + 1j * rng.standard_normal(
                (problem.shape[j], r)
            )
            q, _ = np.linalg.qr(guess)
            factors.append(q)
        core = rng.standard_normal(ranks) + 1j * rng.standard_normal(ranks)
        return TuckerTensor(core, factors)
    raise ParameterError(f"unknown initializer {init!r}")


def run(problem: Helmholtz3D, version: int, ranks, initial: TuckerTensor | None = None,
        max_iters: int = 10, tol: float = 0.0, seed: int = 0, init: str = "rhs",
        full_solve_mode: int = 2, residual_every: int = 1,
        iterate_log: list | None = None) -> tuple:
    """Run one alternating sweep schedule (versions 1, 2, 3).

    ``tol`` = 0 keeps the fixed sweep count; a positive value enables early
    exit on the relative residual.  ``residual_every`` = 0 skips
    per-iteration residuals (timing runs) and records only the final one.
    ``full_solve_mode`` selects which mode version 3 updates with the
    version-1 style solve; ``iterate_log`` (a list) records per-sweep
    snapshots.
    """
    if version not in (1, 2, 3):
        raise ParameterError(f"unknown version {version}")
    ranks = tuple(int(r) for r in ranks)
    tucker = initial.copy() if initial is not None else initial_tucker(problem, ranks, init=init, seed=seed)
    report = SolveReport(final_rank=ranks)
    fnorm = float(np.linalg.norm(problem.F))

    def record_residual():
        t0 = time.perf_counter()
        _, rnorm = residual_tensor(problem, tucker)
        report.add_time("residual", time.perf_counter() - t0)
        rel = rnorm / fnorm if fnorm > 0 else 0.0
        report.residual_history.append(rel)
        return rel

    if fnorm == 0.0:
        zero = TuckerTensor(np.zeros(ranks, dtype=complex), tucker.factors)
        report.residual_history.append(0.0)
        report.converged = True
        report.iterations = 1
        report.stop_reason = "zero right-hand side"
        return zero, report

    v2_modes = {1: (), 2: (0, 1, 2), 3: tuple(j for j in range(3) if j != full_solve_mode)}[version]
    v1_modes = {1: (0, 1, 2), 2: (), 3: (full_solve_mode,)}[version]

    for iteration in range(1, max_iters + 1):
        for mode in range(3):
            if mode in v2_modes:
                t0 = time.perf_counter()
                x, q = solve_factor_v2(problem, tucker, mode)
                report.add_time("factor_solve_v2", time.perf_counter() - t0)
                t0 = time.perf_counter()
                qhat, r_small = np.linalg.qr(x)
                tucker.factors[mode] = np.conj(qhat)
                core_unf = r_small @ q.conj().T
                tucker.core = reconstruct_core(core_unf, mode, ranks)
                report.add_time("qr_update", time.perf_counter() - t0)
            elif mode in v1_modes:
                t0 = time.perf_counter()
                x = solve_factor_v1(problem, tucker, mode)
                report.add_time("factor_solve_v1", time.perf_counter() - t0)
                t0 = time.perf_counter()
                u_new, core_unf = factor_update_from_X(x, ranks[mode])
                tucker.factors[mode] = u_new
                tucker.core = reconstruct_core(core_unf, mode, ranks)
                report.add_time("qr_update", time.perf_counter() - t0)
        report.iterations = iteration
        if iterate_log is not None:
            iterate_log.append(tucker.copy())
        if residual_every:
            rel = record_residual()
            if tol > 0 and rel <= tol:
                report.converged = True
                report.stop_reason = "tolerance reached"
                break
    if version == 2:
        t0 = time.perf_counter()
        tucker.core = solve_core(problem, tucker.factors)
        report.add_time("core_solve", time.perf_counter() - t0)
        if residual_every:
            record_residual()

    if not residual_every:
        record_residual()
    if tol > 0 and report.residual_history and report.residual_history[-1] <= tol:
        report.converged = True
        if not report.stop_reason:
            report.stop_reason = "tolerance reached"
    if not report.stop_reason:
        report.stop_reason = "sweep budget exhausted"
    return tucker, report


def projector_apply_3d(problem: Helmholtz3D, factors, fixed_pair,
                       x: np.ndarray) -> np.ndarray:
    """Apply the residual projector for one frozen factor pair to a
    full-grid vector (oracle scales only).

    ``fixed_pair`` lists the two frozen modes (0-based); the remaining mode
    is the one whose reduced system is solved.  Factors with zero columns
    give the identity.
    """
    fixed_pair = tuple(sorted(int(j) for j in fixed_pair))
    if len(fixed_pair) != 2 or fixed_pair[0] == fixed_pair[1] or not all(
        0 <= j <= 2 for j in fixed_pair
    ):
        raise ParameterError(f"fixed_pair must name two distinct modes, got {fixed_pair}")
    free = ({0, 1, 2} - set(fixed_pair)).pop()
    x = np.asarray(x, dtype=complex)
    shape = problem.shape
    if x.size != int(np.prod(shape)):
        raise ParameterError("projector operand does not match the grid")
    if any(factors[j].shape[1] == 0 for j in fixed_pair):
        return x.copy()
    _check_factors(factors, skip=free)
    fast, slow = [j for j in range(3) if j != free]
    xt = x.reshape(shape, order="F")
    contracted = apply_mode(xt, factors[fast].T, fast)
    contracted = apply_mode(contracted, factors[slow].T, slow)
    rhs = unfold(contracted, free)
    t_part, coupling, summands, _ = _mode_pieces(problem, factors, free)
    y = _reduced_solve(t_part, coupling, summands, rhs)
    # Expand the reduced solution to the grid and subtract its image.
    rf = factors[fast].shape[1]
    rs = factors[slow].shape[1]
    yt = fold(y, free, [shape[j] if j == free else (rf if j == fast else rs) for j in range(3)])
    expanded = apply_mode(yt, np.conj(factors[fast]), fast)
    expanded = apply_mode(expanded, np.conj(factors[slow]), slow)
    return x - problem.apply_dense(expanded).ravel(order="F")
