"""A small dense semidefinite-programming solver.

Problems are linear matrix inequalities in primal form

    minimize    c . x                 over x in R^m
    subject to  F_b(x) = A0_b + sum_k x_k A_{b,k}  >=  0   (PSD, per block b)

with a block-diagonal constraint matrix; scalar inequalities are 1x1 blocks.
The conic dual searched alongside is

    maximize   -sum_b <A0_b, Z_b>     over symmetric Z_b >= 0
    subject to  sum_b <A_{b,k}, Z_b> = c_k   for every variable k,

and the duality gap of a feasible pair is sum_b <F_b(x), Z_b> >= 0.

The algorithm is an infeasible-start primal-dual path-following method with
Nesterov-Todd scaling and a Mehrotra-style predictor-corrector.  Iterates
are (x, S, Z) with S tracking F(x); each step solves the Newton system

    A(dZ) = -r_Z + A(R3) - A(W R_S W)          (Schur system M dx = rhs)
    dS    = R_S + sum_k dx_k A_k
    dZ    = R3 - W dS W

where W is the per-block NT scaling point (W S W = Z), R_S = F(x) - S,
r_Z[k] = c_k - A(Z)[k], R3 = sigma*mu*S^-1 - Z (+ second-order corrector),
and M[k,j] = sum_b <A_{b,k}, W_b A_{b,j} W_b> is symmetric positive
definite.  Steps take a fixed fraction of the largest cone-preserving step.
The solver is deterministic: identical inputs produce identical outputs.

Two internal representations are compiled per block.  Small blocks keep a
dense coefficient stack.  Large blocks factor every coefficient matrix into
signed rank-one terms (via an exact eigendecomposition on its support), so
the Schur matrix assembles from squared inner products of scaled columns
instead of full congruences; this is what makes networks of a few hundred
variables cheap.  All 1x1 blocks are fused into one diagonal "linear" block.

``dump_problem`` writes a plain-text sparse listing for cross-checking
against external tools: one line per structural nonzero,

    <var> <block> <i> <j> <value>

with var 0 denoting the constant matrix A0, variables numbered from 1,
blocks numbered from 1, and 1-based upper-triangle indices i <= j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

Triplet = Tuple[int, int, float]

_DENSE_DIM_LIMIT = 12  # blocks at most this wide skip the rank-one machinery
_EIG_FLOOR = 1e-9  # PSD tolerance scale used by certificate checks
_JITTER = 1e-12


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolverConfig:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iters: int = 200
    step_fraction: float = 0.98


@dataclass
class Block:
    """One PSD block ``A0 + sum_k x_k A_k >= 0``.

    Matrices are stored as lower-triangle triplets (i, j, value) with
    i >= j; an off-diagonal triplet stands for the symmetric pair.
    Duplicate positions are summed and exact zeros dropped on construction.
    """

    dim: int
    const: List[Triplet] = field(default_factory=list)
    coeffs: Dict[int, List[Triplet]] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("block dimension must be positive")
        self.const = _canonical(self.const, self.dim)
        self.coeffs = {
            k: v
            for k, v in ((k, _canonical(t, self.dim)) for k, t in self.coeffs.items())
            if v
        }

    @classmethod
    def from_dense(cls, a0: np.ndarray, coeffs: Dict[int, np.ndarray]) -> "Block":
        a0 = np.asarray(a0, dtype=float)
        dim = a0.shape[0]
        return cls(
            dim,
            _dense_to_triplets(a0),
            {k: _dense_to_triplets(np.asarray(m, dtype=float)) for k, m in coeffs.items()},
        )

    def dense_const(self) -> np.ndarray:
        return _triplets_to_dense(self.const, self.dim)

    def dense_coeff(self, k: int) -> np.ndarray:
        return _triplets_to_dense(self.coeffs.get(k, []), self.dim)


def scalar_block(const: float, coeffs: Dict[int, float]) -> Block:
    """1x1 block encoding ``const + sum_k coeffs[k] * x_k >= 0``."""
    return Block(
        1,
        [(0, 0, float(const))] if const else [],
        {k: [(0, 0, float(v))] for k, v in coeffs.items() if v},
    )


def _canonical(triplets: Sequence[Triplet], dim: int) -> List[Triplet]:
    acc: Dict[Tuple[int, int], float] = {}
    for i, j, v in triplets:
        if not (0 <= i < dim and 0 <= j < dim):
            raise ValueError(f"triplet index ({i}, {j}) outside block of dim {dim}")
        key = (i, j) if i >= j else (j, i)
        acc[key] = acc.get(key, 0.0) + float(v)
    return [(i, j, v) for (i, j), v in sorted(acc.items()) if v != 0.0]


def _dense_to_triplets(m: np.ndarray) -> List[Triplet]:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(m, m.T, atol=1e-12, rtol=0.0):
        raise ValueError("matrix must be symmetric")
    out = []
    for i in range(m.shape[0]):
        for j in range(i + 1):
            if m[i, j] != 0.0:
                out.append((i, j, float(m[i, j])))
    return out


def _triplets_to_dense(triplets: Sequence[Triplet], dim: int) -> np.ndarray:
    m = np.zeros((dim, dim))
    for i, j, v in triplets:
        m[i, j] += v
        if i != j:
            m[j, i] += v
    return m


@dataclass
class SdpProblem:
    num_vars: int
    objective: np.ndarray
    blocks: List[Block]

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (self.num_vars,):
            raise ValueError(
                f"objective has shape {self.objective.shape}, expected ({self.num_vars},)"
            )
        for b in self.blocks:
            for k in b.coeffs:
                if not 0 <= k < self.num_vars:
                    raise ValueError(f"coefficient for unknown variable {k}")


@dataclass(frozen=True)
class Residuals:
    primal: float
    dual: float


@dataclass
class SdpSolution:
    x: np.ndarray
    objective_value: float
    dual_blocks: List[np.ndarray]
    status: SolveStatus
    gap: float
    residuals: Residuals
    iterations: int


def dump_problem(problem: SdpProblem) -> str:
    """Sparse text listing of the problem (format in the module docstring)."""
    lines = [f"{problem.num_vars} {len(problem.blocks)}"]
    lines.append(" ".join(repr(float(v)) for v in problem.objective))
    entries = []
    for bi, block in enumerate(problem.blocks, start=1):
        for i, j, v in block.const:
            entries.append((0, bi, j + 1, i + 1, v))
        for k in sorted(block.coeffs):
            for i, j, v in block.coeffs[k]:
                entries.append((k + 1, bi, j + 1, i + 1, v))
    entries.sort(key=lambda e: e[:4])
    for var, bi, i, j, v in entries:
        lines.append(f"{var} {bi} {i} {j} {v!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# compiled internal representation


class _LinBlock:
    """All 1x1 blocks fused: rows d0 + D x >= 0."""

    def __init__(self, blocks: List[Tuple[int, Block]], num_vars: int):
        self.src = [bi for bi, _ in blocks]
        q = len(blocks)
        self.q = q
        self.d0 = np.zeros(q)
        rows, cols, vals = [], [], []
        for r, (_, blk) in enumerate(blocks):
            for _, _, v in blk.const:
                self.d0[r] += v
            for k, trips in blk.coeffs.items():
                coef = sum(v for _, _, v in trips)
                rows.append(r)
                cols.append(k)
                vals.append(coef)
        self.D = sp.csr_matrix((vals, (rows, cols)), shape=(q, num_vars))
        self.Dt = self.D.T.tocsr()
        self.norm_a0 = float(np.linalg.norm(self.d0))
        col_norms = np.sqrt(np.asarray(self.D.multiply(self.D).sum(axis=0)).ravel())
        self.coeff_scale = float(col_norms.max()) if q else 0.0

    def combine(self, y: np.ndarray) -> np.ndarray:
        return self.D @ y

    def adjoint(self, u: np.ndarray) -> np.ndarray:
        return self.Dt @ u


class _DenseBlock:
    def __init__(self, src: int, block: Block, num_vars: int):
        self.src = src
        self.dim = d = block.dim
        self.a0 = block.dense_const()
        self.vars = np.array(sorted(block.coeffs), dtype=np.intp)
        mb = len(self.vars)
        self.norm_a0 = float(np.linalg.norm(self.a0))
        self.rank1 = d > _DENSE_DIM_LIMIT
        if not self.rank1:
            self.stack = np.zeros((mb, d, d))
            for t, k in enumerate(self.vars):
                self.stack[t] = block.dense_coeff(k)
            self.coeff_scale = (
                float(max(np.linalg.norm(self.stack[t]) for t in range(mb))) if mb else 0.0
            )
            return

        # Factor each coefficient matrix into signed rank-one terms on its
        # support: A_k = sum_r sign_r u_r u_r^T exactly (eigendecomposition).
        term_var: List[int] = []
        term_sign: List[float] = []
        term_vecs: List[np.ndarray] = []
        term_idx: List[np.ndarray] = []
        scale = 0.0
        for t, k in enumerate(self.vars):
            trips = block.coeffs[k]
            support = sorted({i for i, _, _ in trips} | {j for _, j, _ in trips})
            pos = {g: l for l, g in enumerate(support)}
            a = np.zeros((len(support), len(support)))
            for i, j, v in trips:
                a[pos[i], pos[j]] += v
                if i != j:
                    a[pos[j], pos[i]] += v
            scale = max(scale, float(np.linalg.norm(a)))
            w, v = np.linalg.eigh(a)
            top = float(np.abs(w).max())
            for r in range(len(w)):
                if abs(w[r]) > 1e-14 * max(top, 1.0):
                    term_var.append(t)
                    term_sign.append(1.0 if w[r] > 0 else -1.0)
                    term_vecs.append(v[:, r] * math.sqrt(abs(w[r])))
                    term_idx.append(np.asarray(support, dtype=np.intp))
        self.coeff_scale = scale

        nterms = len(term_var)
        smax = max((len(ix) for ix in term_idx), default=1)
        self.term_var = np.asarray(term_var, dtype=np.intp)
        self.term_sign = np.asarray(term_sign)
        self.u_idx = np.zeros((nterms, smax), dtype=np.intp)
        self.u_val = np.zeros((nterms, smax))
        for r in range(nterms):
            s = len(term_idx[r])
            self.u_idx[r, :s] = term_idx[r]
            self.u_val[r, :s] = term_vecs[r]
        # terms are grouped by variable already (built in ascending order)
        self.group_starts = np.searchsorted(self.term_var, np.arange(mb + 1))
        rows = self.u_idx.ravel()
        cols = np.repeat(np.arange(nterms), smax)
        self.U = sp.csc_matrix(
            (self.u_val.ravel(), (rows, cols)), shape=(d, nterms)
        )
        self.Ut = self.U.T.tocsr()

    def combine(self, y: np.ndarray) -> np.ndarray:
        """sum_k y_k A_k as a dense matrix (y indexed by problem variable)."""
        ysub = y[self.vars]
        if not self.rank1:
            m = np.tensordot(ysub, self.stack, axes=1)
        else:
            w = ysub[self.term_var] * self.term_sign
            m = (self.U.multiply(w) @ self.Ut).toarray()
        return 0.5 * (m + m.T)

    def adjoint(self, u: np.ndarray) -> np.ndarray:
        """<A_k, U> for each local variable, as a dense (mb,) vector."""
        if not self.rank1:
            return np.einsum("kij,ij->k", self.stack, u)
        g = u[self.u_idx[:, :, None], self.u_idx[:, None, :]]
        t = np.einsum("ras,ra,rs->r", g, self.u_val, self.u_val)
        return np.add.reduceat(t * self.term_sign, self.group_starts[:-1])

    def schur(self, w: np.ndarray) -> np.ndarray:
        """M_sub[k, j] = <A_k, W A_j W> over the block's local variables."""
        if not self.rank1:
            p = self.stack @ w  # (mb, d, d)
            g = np.matmul(w, p)
            mb, d = self.stack.shape[0], self.dim
            return g.reshape(mb, d * d) @ self.stack.reshape(mb, d * d).T
        wu = (self.Ut @ w).T  # (d, R) dense
        h = self.Ut @ wu  # (R, R)
        np.square(h, out=h)
        h *= self.term_sign[:, None]
        h *= self.term_sign[None, :]
        t1 = np.add.reduceat(h, self.group_starts[:-1], axis=0)
        return np.add.reduceat(t1, self.group_starts[:-1], axis=1)


def _compile(problem: SdpProblem):
    lin_parts: List[Tuple[int, Block]] = []
    dense: List[_DenseBlock] = []
    for bi, blk in enumerate(problem.blocks):
        if blk.dim == 1:
            lin_parts.append((bi, blk))
        else:
            dense.append(_DenseBlock(bi, blk, problem.num_vars))
    lin = _LinBlock(lin_parts, problem.num_vars) if lin_parts else None
    return dense, lin, _abs_adjoint(problem, dense, lin)


def _abs_adjoint(problem: SdpProblem, dense, lin) -> sp.csr_matrix:
    """Sparse map from stacked |Z| entries to sum_entries |A_k| * |Z| per var.

    The dual residual c - A(Z) is computed with exactly these products, so
    this per-variable absolute sum is the natural scale of its floating-point
    roundoff.  Feasibility would otherwise look unattainable on problems
    whose dual variables are huge with cancelling contributions.
    """
    offsets = {}
    total = 0
    for b in dense:
        offsets[b.src] = total
        total += b.dim * b.dim
    lin_offset = {}
    if lin is not None:
        for r, src in enumerate(lin.src):
            lin_offset[src] = total + r
        total += lin.q
    rows, cols, vals = [], [], []
    for bi, blk in enumerate(problem.blocks):
        if blk.dim == 1:
            col = lin_offset[bi]
            for k, trips in blk.coeffs.items():
                rows.append(k)
                cols.append(col)
                vals.append(abs(sum(v for _, _, v in trips)))
        else:
            off = offsets[bi]
            for k, trips in blk.coeffs.items():
                for i, j, v in trips:
                    rows.append(k)
                    cols.append(off + i * blk.dim + j)
                    vals.append(abs(v))
                    if i != j:
                        rows.append(k)
                        cols.append(off + j * blk.dim + i)
                        vals.append(abs(v))
    return sp.csr_matrix((vals, (rows, cols)), shape=(problem.num_vars, total))


# ---------------------------------------------------------------------------
# interior-point iteration helpers


def _nt_scaling(s_mat: np.ndarray, z_mat: np.ndarray) -> np.ndarray:
    """NT scaling point W with W S W = Z (eigendecomposition route)."""
    w_s, v_s = np.linalg.eigh(s_mat)
    if w_s[0] <= 0:
        raise FloatingPointError("slack block lost positive definiteness")
    rt = np.sqrt(w_s)
    s_half = (v_s * rt) @ v_s.T
    s_ihalf = (v_s / rt) @ v_s.T
    b = s_half @ z_mat @ s_half
    b = 0.5 * (b + b.T)
    w_b, v_b = np.linalg.eigh(b)
    w_b = np.clip(w_b, 0.0, None)
    b_half = (v_b * np.sqrt(w_b)) @ v_b.T
    w = s_ihalf @ b_half @ s_ihalf
    return 0.5 * (w + w.T)


def _max_step(mat: np.ndarray, delta: np.ndarray) -> float:
    """Largest alpha with mat + alpha*delta >= 0 (mat must be PD)."""
    chol = np.linalg.cholesky(mat)
    y = sla.solve_triangular(chol, delta, lower=True)
    t = sla.solve_triangular(chol, y.T, lower=True)
    t = 0.5 * (t + t.T)
    lam = np.linalg.eigvalsh(t)[0]
    if lam >= -1e-14:
        return np.inf
    return -1.0 / lam


def _max_step_vec(s: np.ndarray, ds: np.ndarray) -> float:
    neg = ds < 0
    if not neg.any():
        return np.inf
    return float(np.min(-s[neg] / ds[neg]))


class _State:
    """One interior-point iterate: x plus per-block slack/dual matrices."""

    def __init__(self, x, s_dense, z_dense, s_lin, z_lin):
        self.x = x
        self.s_dense = s_dense
        self.z_dense = z_dense
        self.s_lin = s_lin
        self.z_lin = z_lin

    def copy(self):
        return _State(
            self.x.copy(),
            [m.copy() for m in self.s_dense],
            [m.copy() for m in self.z_dense],
            None if self.s_lin is None else self.s_lin.copy(),
            None if self.z_lin is None else self.z_lin.copy(),
        )


def solve(
    problem: SdpProblem,
    config: Optional[SolverConfig] = None,
    callback: Optional[Callable[[dict], None]] = None,
) -> SdpSolution:
    """Run the interior-point method on ``problem``.

    Returns the best iterate found together with a status:

    * OPTIMAL: relative gap and both feasibility residuals within tolerance;
    * MAX_ITERATIONS: iteration budget exhausted first;
    * INFEASIBLE: the dual objective diverged with vanishing dual residual,
      which certifies (numerically) that no PSD point exists;
    * NUMERICAL_FAILURE: a factorization broke down or progress stalled.

    ``callback`` (if given) receives a dict of per-iteration scalars; tests
    use it to check weak duality along the whole path.
    """
    cfg = config or SolverConfig()
    dense, lin, abs_adj = _compile(problem)
    if not dense and lin is None:
        raise ValueError("problem has no blocks")
    c = problem.objective
    m = problem.num_vars
    nu = sum(b.dim for b in dense) + (lin.q if lin is not None else 0)

    data_scale = 1.0 + max(
        [b.norm_a0 for b in dense]
        + [b.coeff_scale for b in dense]
        + ([lin.norm_a0, lin.coeff_scale] if lin is not None else [0.0])
    )
    c_scale = 1.0 + float(np.linalg.norm(c))

    x = np.zeros(m)
    s_dense = [np.eye(b.dim) * (1.0 + b.norm_a0 + b.coeff_scale) for b in dense]
    z_dense = [np.eye(b.dim) for b in dense]
    s_lin = z_lin = None
    if lin is not None:
        s_lin = np.full(lin.q, 1.0 + lin.norm_a0 + lin.coeff_scale)
        z_lin = np.ones(lin.q)

    state = _State(x, s_dense, z_dense, s_lin, z_lin)
    best: Tuple[float, _State, dict] = (np.inf, state.copy(), {})
    status = SolveStatus.MAX_ITERATIONS
    iters_done = 0
    stall = 0
    last_step: dict = {}

    for it in range(cfg.max_iters):
        iters_done = it
        # residuals and merit ------------------------------------------------
        r_s = [b.a0 + b.combine(state.x) - s for b, s in zip(dense, state.s_dense)]
        r_lin = (
            lin.d0 + lin.combine(state.x) - state.s_lin if lin is not None else None
        )
        a_z = np.zeros(m)
        for b, z in zip(dense, state.z_dense):
            a_z[b.vars] += b.adjoint(z)
        if lin is not None:
            a_z += lin.adjoint(state.z_lin)
        r_z = c - a_z

        gap = sum(float(np.tensordot(s, z)) for s, z in zip(state.s_dense, state.z_dense))
        if lin is not None:
            gap += float(state.s_lin @ state.z_lin)
        mu = gap / nu

        pobj = float(c @ state.x)
        dobj = -sum(float(np.tensordot(b.a0, z)) for b, z in zip(dense, state.z_dense))
        if lin is not None:
            dobj -= float(lin.d0 @ state.z_lin)

        pinf = math.sqrt(
            sum(float(np.linalg.norm(r) ** 2) for r in r_s)
            + (float(np.linalg.norm(r_lin) ** 2) if r_lin is not None else 0.0)
        ) / data_scale
        # Dual residual measured componentwise against the magnitudes that
        # actually entered its computation (backward-error style); a plain
        # norm over c_scale has an unreachable floor when Z is huge.
        zabs = [np.abs(z).ravel() for z in state.z_dense]
        if lin is not None:
            zabs.append(np.abs(state.z_lin))
        abs_prod = abs_adj @ np.concatenate(zabs)
        dinf = float(np.max(np.abs(r_z) / (1.0 + np.abs(c) + abs_prod)))
        relgap = abs(gap) / (1.0 + abs(pobj) + abs(dobj))
        merit = max(relgap, pinf, dinf)

        if callback is not None:
            info = {
                "iteration": it,
                "pobj": pobj,
                "dobj": dobj,
                "gap": gap,
                "mu": mu,
                "pinf": pinf,
                "dinf": dinf,
            }
            info.update(last_step)
            callback(info)

        if merit < best[0]:
            best = (
                merit,
                state.copy(),
                {"gap": relgap, "pinf": pinf, "dinf": dinf, "pobj": pobj},
            )

        if relgap <= cfg.gap_tol and pinf <= cfg.feas_tol and dinf <= cfg.feas_tol:
            status = SolveStatus.OPTIMAL
            best = (merit, state.copy(), {"gap": relgap, "pinf": pinf, "dinf": dinf, "pobj": pobj})
            break

        # A diverging dual along a ray with A(Z) ~ 0 and improving objective
        # is a Farkas certificate that no PSD point exists.  The comparison
        # with pobj guards against healthy problems that simply have large
        # dual values: at any near-optimum dobj cannot exceed pobj.
        dual_ray = (
            dobj > 100.0 * (1.0 + c_scale)
            and dobj > 100.0 * abs(pobj)
            and float(np.linalg.norm(a_z)) <= 1e-3 * (1.0 + dobj)
        )
        iterate_scale = max(
            float(np.abs(state.x).max(initial=0.0)),
            max(float(np.abs(z).max()) for z in state.z_dense) if dense else 0.0,
            float(np.abs(state.z_lin).max()) if lin is not None else 0.0,
        )
        if iterate_scale > 1e14 * data_scale or not math.isfinite(merit):
            status = SolveStatus.INFEASIBLE if dual_ray else SolveStatus.NUMERICAL_FAILURE
            break

        # scaling and Schur matrix -------------------------------------------
        fail_status = (
            SolveStatus.INFEASIBLE if dual_ray else SolveStatus.NUMERICAL_FAILURE
        )
        try:
            w_dense = [
                _nt_scaling(s, z) for s, z in zip(state.s_dense, state.z_dense)
            ]
        except FloatingPointError:
            status = fail_status
            break
        w2_lin = state.z_lin / state.s_lin if lin is not None else None

        schur = np.zeros((m, m))
        for b, w in zip(dense, w_dense):
            sub = b.schur(w)
            schur[np.ix_(b.vars, b.vars)] += sub
        if lin is not None:
            dw = lin.D.multiply(w2_lin[:, None])
            schur += (lin.Dt @ dw).toarray()

        chol = None
        jitter = _JITTER * (1.0 + float(np.trace(schur)) / max(m, 1))
        for attempt in range(4):
            try:
                chol = sla.cho_factor(
                    schur + (jitter * (10.0**attempt) if attempt else 0.0) * np.eye(m),
                    lower=True,
                )
                break
            except np.linalg.LinAlgError:
                continue
            except ValueError:
                break
        if chol is None:
            status = fail_status
            break

        s_inv = []
        for s in state.s_dense:
            w_e, v_e = np.linalg.eigh(s)
            if w_e[0] <= 0:
                break
            s_inv.append((v_e / w_e) @ v_e.T)
        if len(s_inv) != len(dense):
            status = fail_status
            break

        def newton(sigma_mu: float, corr_dense, corr_lin):
            """Solve one Newton system; returns (dx, dS..., dZ...)."""
            r3 = []
            for bi in range(len(dense)):
                r = sigma_mu * s_inv[bi] - state.z_dense[bi]
                if corr_dense is not None:
                    r = r + corr_dense[bi]
                r3.append(r)
            r3_lin = None
            if lin is not None:
                r3_lin = sigma_mu / state.s_lin - state.z_lin
                if corr_lin is not None:
                    r3_lin = r3_lin + corr_lin

            rhs = -r_z.copy()
            for bi, b in enumerate(dense):
                w = w_dense[bi]
                rhs[b.vars] += b.adjoint(r3[bi])
                rhs[b.vars] -= b.adjoint(w @ r_s[bi] @ w)
            if lin is not None:
                rhs += lin.adjoint(r3_lin)
                rhs -= lin.adjoint(w2_lin * r_lin)

            dx = sla.cho_solve(chol, rhs)
            # one round of iterative refinement keeps the dual residual from
            # flooring at the Schur matrix's condition-number noise
            dx += sla.cho_solve(chol, rhs - schur @ dx)
            ds_dense, dz_dense = [], []
            for bi, b in enumerate(dense):
                ds = r_s[bi] + b.combine(dx)
                ds = 0.5 * (ds + ds.T)
                dz = r3[bi] - w_dense[bi] @ ds @ w_dense[bi]
                dz = 0.5 * (dz + dz.T)
                ds_dense.append(ds)
                dz_dense.append(dz)
            ds_lin = dz_lin = None
            if lin is not None:
                ds_lin = r_lin + lin.combine(dx)
                dz_lin = r3_lin - w2_lin * ds_lin
            return dx, ds_dense, dz_dense, ds_lin, dz_lin

        def step_length(ds_dense, dz_dense, ds_lin, dz_lin):
            # a single step length for primal and dual keeps the iterate
            # near the central path; separate lengths let one side race
            # ahead, which poisons the NT scaling and stalls the other
            a = np.inf
            for bi in range(len(dense)):
                a = min(a, _max_step(state.s_dense[bi], ds_dense[bi]))
                a = min(a, _max_step(state.z_dense[bi], dz_dense[bi]))
            if lin is not None:
                a = min(a, _max_step_vec(state.s_lin, ds_lin))
                a = min(a, _max_step_vec(state.z_lin, dz_lin))
            return min(1.0, cfg.step_fraction * a)

        try:
            # predictor
            dxa, dsa, dza, dsla, dzla = newton(0.0, None, None)
            a_aff = step_length(dsa, dza, dsla, dzla)
            gap_aff = sum(
                float(np.tensordot(state.s_dense[bi] + a_aff * dsa[bi],
                                   state.z_dense[bi] + a_aff * dza[bi]))
                for bi in range(len(dense))
            )
            if lin is not None:
                gap_aff += float(
                    (state.s_lin + a_aff * dsla) @ (state.z_lin + a_aff * dzla)
                )
            sigma = min(1.0, max((gap_aff / gap) ** 3 if gap > 0 else 0.0, 0.0))

            # corrector: second-order term -sym(S^-1 dS_a dZ_a), the scalar
            # case of which is the familiar -ds*dz/s
            corr_dense = []
            for bi in range(len(dense)):
                p = s_inv[bi] @ dsa[bi] @ dza[bi]
                corr_dense.append(-0.5 * (p + p.T))
            corr_lin = -dsla * dzla / state.s_lin if lin is not None else None
            dx, dsd, dzd, dsl, dzl = newton(sigma * mu, corr_dense, corr_lin)
            alpha = step_length(dsd, dzd, dsl, dzl)
            if alpha < 0.05:
                # off-center iterates block the Mehrotra direction almost
                # immediately; fall back to a plain centering step, which
                # always points into the cone and restores balance
                sigma = max(sigma, 0.8)
                dx, dsd, dzd, dsl, dzl = newton(sigma * mu, None, None)
                alpha = step_length(dsd, dzd, dsl, dzl)
        except (np.linalg.LinAlgError, FloatingPointError):
            status = fail_status
            break
        last_step = {"alpha": alpha, "sigma": sigma}

        if alpha < 1e-10:
            stall += 1
            if stall >= 3:
                status = fail_status
                break
        else:
            stall = 0

        state.x = state.x + alpha * dx
        for bi in range(len(dense)):
            s_new = state.s_dense[bi] + alpha * dsd[bi]
            z_new = state.z_dense[bi] + alpha * dzd[bi]
            state.s_dense[bi] = 0.5 * (s_new + s_new.T)
            state.z_dense[bi] = 0.5 * (z_new + z_new.T)
        if lin is not None:
            state.s_lin = state.s_lin + alpha * dsl
            state.z_lin = state.z_lin + alpha * dzl
    else:
        iters_done = cfg.max_iters

    _, bstate, binfo = best
    dual_blocks: List[np.ndarray] = [np.zeros((0, 0))] * len(problem.blocks)
    for bi, b in enumerate(dense):
        dual_blocks[b.src] = bstate.z_dense[bi]
    if lin is not None:
        for r, src in enumerate(lin.src):
            dual_blocks[src] = np.array([[bstate.z_lin[r]]])

    return SdpSolution(
        x=bstate.x,
        objective_value=float(problem.objective @ bstate.x),
        dual_blocks=dual_blocks,
        status=status,
        gap=float(binfo.get("gap", np.inf)),
        residuals=Residuals(
            primal=float(binfo.get("pinf", np.inf)),
            dual=float(binfo.get("dinf", np.inf)),
        ),
        iterations=iters_done,
    )


# ---------------------------------------------------------------------------
# independent certificate check


@dataclass(frozen=True)
class CertificateReport:
    psd_ok: bool
    dual_feasible: bool
    gap_ok: bool
    slack_eig_min: float
    dual_eig_min: float
    dual_residual: float
    gap_value: float

    @property
    def ok(self) -> bool:
        return self.psd_ok and self.dual_feasible and self.gap_ok


def check_certificate(
    problem: SdpProblem, solution: SdpSolution, config: Optional[SolverConfig] = None
) -> CertificateReport:
    """Re-derive optimality evidence from the raw problem data.

    Everything is recomputed from the triplet storage through the dense
    helpers, sharing no state with the solver's compiled representation:

    * PSD: every slack block F_b(x) and dual block Z_b must have smallest
      eigenvalue >= -1e-9 * (1 + ||block||_F);
    * dual feasibility: each |c_k - A_k(Z)| <= feas_tol * 10 relative to
      1 + |c_k| plus the absolute sum of the products forming A_k(Z),
      the same backward-error scale the solver converges against;
    * gap: |c.x - dual objective| within gap_tol plus the slack the
      feasibility tolerances themselves allow (residuals enter the gap
      through <R_S, Z> and x . r_Z, so their budget is added in).
    """
    cfg = config or SolverConfig()
    c = problem.objective
    x = solution.x

    slack_eig = np.inf
    dual_eig = np.inf
    a_z = np.zeros(problem.num_vars)
    abs_prod = np.zeros(problem.num_vars)
    dobj = 0.0
    z_norm = 0.0
    for block, z in zip(problem.blocks, solution.dual_blocks):
        slack = block.dense_const()
        for k, _ in block.coeffs.items():
            slack = slack + x[k] * block.dense_coeff(k)
        floor = -_EIG_FLOOR * (1.0 + float(np.linalg.norm(slack)))
        emin = float(np.linalg.eigvalsh(0.5 * (slack + slack.T))[0])
        slack_eig = min(slack_eig, emin - floor)
        zfloor = -_EIG_FLOOR * (1.0 + float(np.linalg.norm(z)))
        zmin = float(np.linalg.eigvalsh(0.5 * (z + z.T))[0])
        dual_eig = min(dual_eig, zmin - zfloor)
        for k in block.coeffs:
            coeff = block.dense_coeff(k)
            a_z[k] += float(np.tensordot(coeff, z))
            abs_prod[k] += float(np.abs(coeff * z).sum())
        dobj -= float(np.tensordot(block.dense_const(), z))
        z_norm += float(np.linalg.norm(z) ** 2)
    z_norm = math.sqrt(z_norm)

    r_z = c - a_z
    dual_res = float(np.max(np.abs(r_z) / (1.0 + np.abs(c) + abs_prod)))
    pobj = float(c @ x)
    gap_val = abs(pobj - dobj)
    gap_budget = cfg.gap_tol * (1.0 + abs(pobj) + abs(dobj)) + cfg.feas_tol * (
        1.0 + float(np.linalg.norm(c))
    ) * (1.0 + float(np.linalg.norm(x))) + cfg.feas_tol * (1.0 + z_norm) * 10.0

    return CertificateReport(
        psd_ok=slack_eig >= 0.0 and dual_eig >= 0.0,
        dual_feasible=dual_res <= cfg.feas_tol * 10.0,
        gap_ok=gap_val <= gap_budget,
        slack_eig_min=slack_eig,
        dual_eig_min=dual_eig,
        dual_residual=dual_res,
        gap_value=gap_val,
    )
