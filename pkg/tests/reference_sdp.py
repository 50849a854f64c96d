"""Independent reference solver used only by the test suite.

Solves the same block-LMI problems as ``minmaxloc.sdp`` by a completely
different route: Kelley's cutting-plane method.  Feasibility of
``F_b(x) >= 0`` is approximated from outside by linear cuts
``u^T F_b(x) u >= 0`` collected from eigenvectors of violated blocks, each
relaxation being an ordinary LP (scipy's HiGHS).  Upper bounds come from
restoring feasibility along the segment toward a known strictly interior
point: the smallest eigenvalue is concave along a line, so bisection finds
the feasible end reliably.  The method brackets the optimum between the LP
lower bound and the best feasible value; we run until the bracket closes.

Slow but simple, and it shares no linear algebra with the production
solver, which is the point.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog

from minmaxloc.sdp import SdpProblem


@dataclass
class ReferenceResult:
    value: float
    x: np.ndarray
    lower: float
    upper: float
    rounds: int
    converged: bool


def _block_matrices(problem: SdpProblem) -> List[Tuple[np.ndarray, List[np.ndarray]]]:
    out = []
    for block in problem.blocks:
        a0 = block.dense_const()
        coeffs = [block.dense_coeff(k) for k in range(problem.num_vars)]
        out.append((a0, coeffs))
    return out


def _eval_block(a0, coeffs, x):
    f = a0.copy()
    for k, c in enumerate(coeffs):
        if x[k] != 0.0:
            f = f + x[k] * c
    return f


def _min_eig(mats, x) -> float:
    worst = np.inf
    for a0, coeffs in mats:
        f = _eval_block(a0, coeffs, x)
        worst = min(worst, float(np.linalg.eigvalsh(0.5 * (f + f.T))[0]))
    return worst


def reference_solve(
    problem: SdpProblem,
    interior_x: np.ndarray,
    tol: float = 1e-7,
    box: float = 1e3,
    max_rounds: int = 3000,
) -> ReferenceResult:
    """Bracket the optimum of ``problem`` between LP relaxations and
    feasible points.  ``interior_x`` must be strictly feasible."""
    mats = _block_matrices(problem)
    m = problem.num_vars
    c = np.asarray(problem.objective, dtype=float)
    interior_x = np.asarray(interior_x, dtype=float)
    if _min_eig(mats, interior_x) <= 0:
        raise ValueError("interior point is not strictly feasible")

    rows: List[np.ndarray] = []
    rhs: List[float] = []

    def add_cut(a0, coeffs, u):
        rows.append(np.array([-float(u @ ck @ u) for ck in coeffs]))
        rhs.append(float(u @ a0 @ u))

    for a0, coeffs in mats:
        for i in range(a0.shape[0]):
            e = np.zeros(a0.shape[0])
            e[i] = 1.0
            add_cut(a0, coeffs, e)

    best_x: Optional[np.ndarray] = None
    upper = np.inf
    lower = -np.inf
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        res = linprog(
            c,
            A_ub=np.vstack(rows),
            b_ub=np.array(rhs),
            bounds=[(-box, box)] * m,
            method="highs",
        )
        if not res.success:
            break
        x_lp = res.x
        lower = max(lower, float(res.fun))

        violated = False
        for a0, coeffs in mats:
            f = _eval_block(a0, coeffs, x_lp)
            w, v = np.linalg.eigh(0.5 * (f + f.T))
            scale = 1.0 + float(np.abs(w).max())
            for r in range(min(3, len(w))):
                if w[r] < -1e-12 * scale:
                    add_cut(a0, coeffs, v[:, r])
                    violated = True
        if not violated:
            if float(c @ x_lp) < upper:
                upper = float(c @ x_lp)
                best_x = x_lp.copy()
        else:
            # restore feasibility along the segment toward the interior point
            lo_t, hi_t = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo_t + hi_t)
                x_mid = x_lp + mid * (interior_x - x_lp)
                if _min_eig(mats, x_mid) >= 0.0:
                    hi_t = mid
                else:
                    lo_t = mid
            x_feas = x_lp + hi_t * (interior_x - x_lp)
            val = float(c @ x_feas)
            if val < upper:
                upper = val
                best_x = x_feas.copy()

        if upper - lower <= tol * (1.0 + abs(upper)):
            return ReferenceResult(
                value=upper, x=best_x, lower=lower, upper=upper,
                rounds=rounds, converged=True,
            )

    return ReferenceResult(
        value=upper,
        x=best_x if best_x is not None else interior_x,
        lower=lower,
        upper=upper,
        rounds=rounds,
        converged=False,
    )


def random_bounded_instance(seed: int, num_vars: Optional[int] = None):
    """Random LMI problem that is strictly feasible and bounded below.

    Construction: pick an interior point x0 and per-block PD matrices S0,
    then set A0 = S0 - sum_k x0_k A_k so F(x0) = S0 > 0.  The objective is
    c_k = sum_b <A_{b,k}, Z0_b> for PD Z0 blocks, which makes Z0 strictly
    dual feasible, so the primal value is bounded below.  Returns
    (problem, x0).
    """
    from minmaxloc.sdp import Block, scalar_block

    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(77,)))
    m = int(num_vars if num_vars is not None else rng.integers(2, 7))
    dims = [int(rng.integers(2, 5)) for _ in range(int(rng.integers(1, 3)))]
    n_scalar = int(rng.integers(0, 3))
    x0 = rng.uniform(-1.0, 1.0, size=m)

    blocks = []
    c = np.zeros(m)
    for d in dims:
        coeffs = {}
        for k in range(m):
            a = rng.standard_normal((d, d))
            coeffs[k] = 0.5 * (a + a.T)
        q = np.linalg.qr(rng.standard_normal((d, d)))[0]
        s0 = q @ np.diag(rng.uniform(0.5, 2.0, size=d)) @ q.T
        a0 = 0.5 * (s0 + s0.T)
        for k in range(m):
            a0 = a0 - x0[k] * coeffs[k]
        q = np.linalg.qr(rng.standard_normal((d, d)))[0]
        z0 = q @ np.diag(rng.uniform(0.2, 1.5, size=d)) @ q.T
        z0 = 0.5 * (z0 + z0.T)
        for k in range(m):
            c[k] += float(np.tensordot(coeffs[k], z0))
        blocks.append(Block.from_dense(a0, coeffs))
    for _ in range(n_scalar):
        coeffs = {k: float(rng.standard_normal()) for k in range(m)}
        margin = float(rng.uniform(0.5, 2.0))
        const = margin - sum(coeffs[k] * x0[k] for k in range(m))
        z0 = float(rng.uniform(0.2, 1.5))
        for k in range(m):
            c[k] += coeffs[k] * z0
        blocks.append(scalar_block(const, coeffs))

    return SdpProblem(num_vars=m, objective=c, blocks=blocks), x0
