"""Dense primal-dual interior-point solver for block-diagonal semidefinite programs.

Problems are stated in equality form

    minimize    sum_k <C_k, X_k> + c_f' f
    subject to  sum_k <A_ik, X_k> + F_i' f = b_i,    X_k >= 0,  f free,

with dense symmetric data.  Free variables are eliminated up front through an
SVD of F (the problem is rejected as unbounded if the objective moves along a
null direction of F), redundant equality rows are whitened away through an
eigendecomposition of the constraint Gram matrix, and the remaining system is
solved by an infeasible-start Mehrotra predictor-corrector using the
XZ (HKM) direction with a dense Schur complement.

Feasibility problems are handled by `solve_feasibility`, which maximizes a
uniform eigenvalue shift t (X_k = G_k - t I) capped at 1; the optimal shift is
the feasibility margin, and a certified negative margin is the infeasibility
report.  Everything at this scale (blocks up to ~60x60, a few hundred rows)
is comfortably dense.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GAP_TOL = 1e-8
FEAS_TOL = 1e-9
MAX_ITERS = 200
INFEASIBILITY_MARGIN = 1e-6
STEP_FRACTION = 0.98


@dataclass
class SdpProblem:
    """Block-diagonal SDP in equality form; see the module docstring.

    block_A[k] has shape (m, q_k, q_k) with symmetric slices; block_C[k] is
    (q_k, q_k).  free_F is (m, nf) and free_c is (nf,); both may be empty.
    """

    block_names: list[str]
    block_A: list[np.ndarray]
    block_C: list[np.ndarray]
    b: np.ndarray
    free_names: list[str] = field(default_factory=list)
    free_F: np.ndarray | None = None
    free_c: np.ndarray | None = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        m = len(self.b)
        for name, A, C in zip(self.block_names, self.block_A, self.block_C):
            if A.shape[0] != m or A.shape[1] != A.shape[2]:
                raise ValueError(f"block {name}: A has shape {A.shape}, expected ({m}, q, q)")
            if C.shape != A.shape[1:]:
                raise ValueError(f"block {name}: C shape {C.shape} mismatches A")
        if self.free_F is None:
            self.free_F = np.zeros((m, 0))
        if self.free_c is None:
            self.free_c = np.zeros(self.free_F.shape[1])

    @property
    def num_rows(self) -> int:
        return len(self.b)

    def block_sizes(self) -> list[int]:
        return [A.shape[1] for A in self.block_A]


@dataclass
class SdpSolution:
    status: str  # "optimal", "infeasible", "max-iters"
    blocks: dict  # name -> (q, q) ndarray
    free_values: dict  # name -> float
    y: np.ndarray | None
    objective: float | None
    iterations: int
    primal_residual: float
    dual_residual: float
    rel_gap: float
    margin: float | None = None  # feasibility margin when solved in margin mode
    message: str = ""

    def min_eigenvalue(self) -> float:
        vals = [np.linalg.eigvalsh(B)[0] for B in self.blocks.values() if B.size]
        return float(min(vals)) if vals else 0.0


class _Reduced:
    """Problem after free-variable elimination and row whitening."""

    def __init__(self, problem: SdpProblem):
        self.problem = problem
        m = problem.num_rows
        if m == 0:
            raise ValueError("solver requires at least one equality row")

        # Row scaling by max absolute entry keeps very differently scaled
        # coefficient-matching rows comparable.
        scale = np.zeros(m)
        for A in problem.block_A:
            if A.shape[1]:
                scale = np.maximum(scale, np.abs(A).max(axis=(1, 2)))
        if problem.free_F.shape[1]:
            scale = np.maximum(scale, np.abs(problem.free_F).max(axis=1))
        scale = np.maximum(scale, 1e-12)
        self.row_scale = scale

        A_sc = [A / scale[:, None, None] for A in problem.block_A]
        b_sc = problem.b / scale
        F_sc = problem.free_F / scale[:, None] if problem.free_F.shape[1] else problem.free_F

        # Free-variable elimination: f = pinv(F)(b - A(X)) on the row space,
        # zero on the null space.  Objective along null(F) means unbounded.
        self.inconsistent = False
        self.farkas = None
        nf = F_sc.shape[1]
        C_eff = [C.copy() for C in problem.block_C]
        self.obj_const = 0.0
        if nf:
            U, sv, Vt = np.linalg.svd(F_sc, full_matrices=True)
            tol = max(F_sc.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
            r = int(np.sum(sv > max(tol, 1e-12)))
            self.F_U, self.F_sv, self.F_Vt, self.F_rank = U[:, :r], sv[:r], Vt[:r], r
            null_comp = problem.free_c - self.F_Vt.T @ (self.F_Vt @ problem.free_c)
            if np.linalg.norm(null_comp) > 1e-9 * (1 + np.linalg.norm(problem.free_c)):
                raise ValueError("objective is unbounded along a free-variable null direction")
            # h'(b - A(X)) contribution: shift C and add a constant.
            h = self.F_U @ ((self.F_Vt @ problem.free_c) / self.F_sv)
            self.obj_const = float(h @ b_sc)
            for k, A in enumerate(A_sc):
                if A.shape[1]:
                    C_eff[k] = C_eff[k] - np.einsum("i,iab->ab", h, A)
            W = U[:, r:]  # complement of range(F)
        else:
            self.F_U = self.F_sv = self.F_Vt = None
            self.F_rank = 0
            W = np.eye(m)

        A_proj = []
        for A in A_sc:
            if A.shape[1]:
                A_proj.append(np.einsum("ij,iab->jab", W, A))
            else:
                A_proj.append(np.zeros((W.shape[1], 0, 0)))
        b_proj = W.T @ b_sc
        mp = len(b_proj)

        if mp == 0:
            self.A = A_proj
            self.b = b_proj
            self.C = C_eff
            self.keepQ = np.zeros((m, 0))
            self.A_sc, self.b_sc, self.F_sc = A_sc, b_sc, F_sc
            self.W = W
            return

        # Whiten rows: eigendecompose the constraint Gram matrix, keep the
        # well-conditioned combinations and test dropped ones for consistency.
        G = np.zeros((mp, mp))
        for A in A_proj:
            if A.shape[1]:
                flat = A.reshape(mp, -1)
                G += flat @ flat.T
        evals, evecs = np.linalg.eigh(G)
        gmax = max(float(evals[-1]), 1e-300)
        keep = evals > 1e-24 * gmax
        dropped = evecs[:, ~keep]
        if dropped.size:
            mism = dropped.T @ b_proj
            if np.any(np.abs(mism) > 1e-8 * (1 + np.abs(b_proj).max())):
                # A zero combination of constraint matrices with nonzero rhs:
                # the affine system has no solution at all.
                self.inconsistent = True
                j = int(np.argmax(np.abs(mism)))
                self.farkas = W @ dropped[:, j]
        Q = evecs[:, keep] / np.sqrt(evals[keep])  # rows become orthonormal
        self.A = [
            np.einsum("ij,iab->jab", Q, A) if A.shape[1] else np.zeros((Q.shape[1], 0, 0))
            for A in A_proj
        ]
        self.b = Q.T @ b_proj
        self.C = C_eff
        self.keepQ = Q
        self.A_sc, self.b_sc, self.F_sc = A_sc, b_sc, F_sc
        self.W = W

    def recover_free(self, blocks: list[np.ndarray]) -> np.ndarray:
        if self.F_rank == 0:
            return np.zeros(0)
        resid = self.b_sc.copy()
        for A, X in zip(self.A_sc, blocks):
            if A.shape[1]:
                resid -= np.einsum("iab,ab->i", A, X)
        return self.F_Vt.T @ ((self.F_U.T @ resid) / self.F_sv)

    def polish(self, blocks: list[np.ndarray]) -> list[np.ndarray]:
        """Project block values onto the reduced equality manifold.

        Rows are orthonormal after whitening, so the least-norm correction is
        a single adjoint application.
        """
        m = len(self.b)
        if m == 0:
            return blocks
        r = self.b.copy()
        for A, X in zip(self.A, blocks):
            if A.shape[1]:
                r -= np.einsum("iab,ab->i", A, X)
        out = []
        for A, X in zip(self.A, blocks):
            if A.shape[1]:
                out.append(X + np.einsum("i,iab->ab", r, A))
            else:
                out.append(X)
        return out


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest alpha with X + alpha dX still positive semidefinite."""
    L = np.linalg.cholesky(X)
    Li = np.linalg.inv(L)
    W = Li @ dX @ Li.T
    lam = float(np.linalg.eigvalsh(_sym(W))[0])
    if lam >= -1e-14:
        return np.inf
    return -1.0 / lam


def solve_sdp(problem: SdpProblem, max_iters: int = MAX_ITERS,
              gap_tol: float = GAP_TOL, feas_tol: float = FEAS_TOL) -> SdpSolution:
    """Mehrotra predictor-corrector on the reduced problem."""
    red = _Reduced(problem)
    if red.inconsistent:
        return SdpSolution(
            status="infeasible", blocks={}, free_values={}, y=None, objective=None,
            iterations=0, primal_residual=np.inf, dual_residual=np.inf, rel_gap=np.inf,
            message="equality constraints are inconsistent (Farkas combination found)",
        )

    A, b, C = red.A, red.b, red.C
    sizes = [blk.shape[1] for blk in A]
    active = [k for k, q in enumerate(sizes) if q > 0]
    m = len(b)
    total_dim = sum(sizes)
    if total_dim == 0:
        # No matrix variables at all; equalities already decided consistency.
        blocks = [np.zeros((0, 0)) for _ in sizes]
        return _package(problem, red, blocks, np.zeros(m), 0, 0.0, 0.0, 0.0, "optimal")

    norm_b = 1.0 + float(np.linalg.norm(b))
    norm_C = 1.0 + max(float(np.linalg.norm(C[k])) for k in active)
    init = max(10.0, np.sqrt(total_dim), float(np.abs(b).max()) if m else 1.0)
    X = [init * np.eye(q) for q in sizes]
    S = [init * np.eye(q) for q in sizes]
    y = np.zeros(m)

    best = None
    status = "max-iters"
    iters_done = max_iters
    message = ""

    for it in range(max_iters):
        Sinv = []
        for k in active:
            try:
                Ls = np.linalg.cholesky(S[k])
            except np.linalg.LinAlgError:
                S[k] = _sym(S[k]) + 1e-12 * np.eye(sizes[k])
                Ls = np.linalg.cholesky(S[k])
            Li = np.linalg.inv(Ls)
            Sinv.append(Li.T @ Li)
        Sinv_full = [None] * len(sizes)
        for idx, k in enumerate(active):
            Sinv_full[k] = Sinv[idx]

        r_p = b.copy()
        for k in active:
            r_p -= np.einsum("iab,ab->i", A[k], X[k])
        R_d = [None] * len(sizes)
        for k in active:
            R_d[k] = C[k] - np.einsum("i,iab->ab", y, A[k]) - S[k]

        mu = sum(float(np.tensordot(X[k], S[k])) for k in active) / total_dim
        pobj = sum(float(np.tensordot(C[k], X[k])) for k in active)
        dobj = float(b @ y)
        pinf = float(np.linalg.norm(r_p)) / norm_b
        dinf = max(float(np.linalg.norm(R_d[k])) for k in active) / norm_C
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))

        score = max(relgap, pinf, dinf)
        if best is None or score < best[0]:
            best = (score, [Xk.copy() for Xk in X], y.copy(), pinf, dinf, relgap, it)

        if pinf <= feas_tol and dinf <= feas_tol and relgap <= gap_tol:
            status = "optimal"
            iters_done = it
            break

        # Schur complement M_ij = sum_k tr(A_i X A_j S^{-1}).
        M = np.zeros((m, m))
        AXRS = np.zeros(m)
        ASinv = np.zeros(m)
        AX = np.zeros(m)
        for idx, k in enumerate(active):
            T = np.einsum("ab,ibc,cd->iad", X[k], A[k], Sinv[idx], optimize=True)
            M += T.reshape(m, -1) @ A[k].reshape(m, -1).T
            AXRS += np.einsum("iab,ab->i", A[k], X[k] @ R_d[k] @ Sinv[idx])
            ASinv += np.einsum("iab,ab->i", A[k], Sinv[idx])
            AX += np.einsum("iab,ab->i", A[k], X[k])
        M = _sym(M)

        ridge = 0.0
        for attempt in range(4):
            try:
                Lm = np.linalg.cholesky(M + ridge * np.eye(m))
                break
            except np.linalg.LinAlgError:
                ridge = max(1e-13 * np.trace(M) / m, ridge * 100, 1e-13)
        else:
            message = "Schur complement factorization failed"
            iters_done = it
            break

        def newton(nu: float, corr=None):
            rhs = r_p - nu * ASinv + AXRS + AX
            if corr is not None:
                for idx, k in enumerate(active):
                    rhs += np.einsum("iab,ab->i", A[k], corr[idx] @ Sinv[idx])
            dy = np.linalg.solve(Lm.T, np.linalg.solve(Lm, rhs))
            dS = [None] * len(sizes)
            dX = [None] * len(sizes)
            for idx, k in enumerate(active):
                dS[k] = R_d[k] - np.einsum("i,iab->ab", dy, A[k])
                base = nu * Sinv[idx] - X[k] - X[k] @ dS[k] @ Sinv[idx]
                if corr is not None:
                    base = base - corr[idx] @ Sinv[idx]
                dX[k] = _sym(base)
            return dy, dX, dS

        # Predictor.
        dy_a, dX_a, dS_a = newton(0.0)
        ap = min(min((_max_step(X[k], dX_a[k]) for k in active), default=np.inf), 1.0)
        ad = min(min((_max_step(S[k], dS_a[k]) for k in active), default=np.inf), 1.0)
        mu_aff = sum(
            float(np.tensordot(X[k] + ap * dX_a[k], S[k] + ad * dS_a[k])) for k in active
        ) / total_dim
        sigma = min(1.0, max(0.0, (mu_aff / mu)) ** 3) if mu > 0 else 0.1

        # Corrector with the Mehrotra second-order term.
        corr = [dX_a[k] @ dS_a[k] for k in active]
        dy, dX, dS = newton(sigma * mu, corr)

        ap = _max_step_all(X, dX, active)
        ad = _max_step_all(S, dS, active)
        alpha_p = min(1.0, STEP_FRACTION * ap)
        alpha_d = min(1.0, STEP_FRACTION * ad)

        for trial in range(8):
            ok = True
            for k in active:
                try:
                    np.linalg.cholesky(X[k] + alpha_p * dX[k] + 0 * np.eye(sizes[k]))
                    np.linalg.cholesky(S[k] + alpha_d * dS[k])
                except np.linalg.LinAlgError:
                    ok = False
                    break
            if ok:
                break
            alpha_p *= 0.8
            alpha_d *= 0.8
        else:
            message = "no positive step available"
            iters_done = it
            break

        for k in active:
            X[k] = _sym(X[k] + alpha_p * dX[k])
            S[k] = _sym(S[k] + alpha_d * dS[k])
        y = y + alpha_d * dy
    else:
        iters_done = max_iters

    if status != "optimal" and best is not None:
        _, Xb, yb, pinf, dinf, relgap, _ = best
        X, y = Xb, yb

    return _package(problem, red, X, y, iters_done, pinf, dinf, relgap, status, message)


def _max_step_all(V, dV, active) -> float:
    out = np.inf
    for k in active:
        out = min(out, _max_step(V[k], dV[k]))
    return out


def _package(problem, red, X, y, iters, pinf, dinf, relgap, status, message="") -> SdpSolution:
    X = red.polish(X)
    f = red.recover_free(X)
    blocks = {name: Xk for name, Xk in zip(problem.block_names, X)}
    free_values = {name: float(v) for name, v in zip(problem.free_names, f)}
    obj = sum(float(np.tensordot(C, Xk)) for C, Xk in zip(problem.block_C, X))
    obj += float(problem.free_c @ f) if len(f) else 0.0
    if red.keepQ.shape[1]:
        y_full = red.W @ (red.keepQ @ y)
    else:
        y_full = np.zeros(problem.num_rows)
    y_orig = y_full / red.row_scale if y_full.size else y_full
    return SdpSolution(
        status=status,
        blocks=blocks,
        free_values=free_values,
        y=y_orig,
        objective=obj,
        iterations=iters,
        primal_residual=pinf,
        dual_residual=dinf,
        rel_gap=relgap,
        message=message,
    )


def solve_feasibility(problem: SdpProblem, margin_cap: float = 1.0) -> SdpSolution:
    """Decide feasibility of {A(X) + Ff = b, X >= 0} via the max-eigenvalue-shift
    phase-I program; the optimal shift is returned as ``margin``.

    A margin below -1e-6 (duality-gap certified) reports infeasibility; the
    caller should treat small |margin| outcomes conservatively.
    """
    m = problem.num_rows
    sizes = problem.block_sizes()

    t_col = np.zeros(m)
    for A in problem.block_A:
        if A.shape[1]:
            t_col += np.einsum("iaa->i", A)

    mA = [np.concatenate([A, np.zeros((1,) + A.shape[1:])], axis=0) for A in problem.block_A]
    slack_A = np.zeros((m + 1, 1, 1))
    slack_A[m, 0, 0] = 1.0
    F = np.concatenate([problem.free_F, np.zeros((1, problem.free_F.shape[1]))], axis=0)
    F = np.concatenate([F, np.concatenate([t_col, [1.0]])[:, None]], axis=1)
    aug = SdpProblem(
        block_names=problem.block_names + ["_margin_slack"],
        block_A=mA + [slack_A],
        block_C=[np.zeros((q, q)) for q in sizes] + [np.zeros((1, 1))],
        b=np.concatenate([problem.b, [margin_cap]]),
        free_names=problem.free_names + ["_margin"],
        free_F=F,
        free_c=np.concatenate([np.zeros(problem.free_F.shape[1]), [-1.0]]),
    )
    sol = solve_sdp(aug)
    if sol.status == "infeasible":
        sol.margin = -np.inf
        return sol
    t = sol.free_values.get("_margin", 0.0)
    blocks = {}
    for name, q in zip(problem.block_names, sizes):
        blocks[name] = sol.blocks[name] + t * np.eye(q)
    free_values = {n: v for n, v in sol.free_values.items() if n != "_margin"}
    gap_pad = sol.rel_gap * (1 + abs(t))
    if sol.status == "optimal" and t + gap_pad < -INFEASIBILITY_MARGIN:
        status = "infeasible"
        message = f"feasibility margin {t:.3e} certified below -{INFEASIBILITY_MARGIN:g}"
    elif sol.status == "optimal" and t >= -1e-8:
        # Boundary-feasible Grams (margin ~ 0) still verify within the
        # -1e-8 eigenvalue tolerance.
        status = "optimal"
        message = ""
    else:
        status = "max-iters"
        message = sol.message or f"marginal feasibility (shift {t:.3e})"
    return SdpSolution(
        status=status,
        blocks=blocks,
        free_values=free_values,
        y=sol.y[:m] if sol.y is not None else None,
        objective=sol.objective,
        iterations=sol.iterations,
        primal_residual=sol.primal_residual,
        dual_residual=sol.dual_residual,
        rel_gap=sol.rel_gap,
        margin=t,
        message=message,
    )
