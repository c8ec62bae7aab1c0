"""Sum-of-squares programs and their reduction to semidefinite problems.

A program collects named unknowns (SOS polynomials carried as Gram matrices,
polynomials with free coefficients, plain scalars) and polynomial identities
that must vanish and are affine in those unknowns.  Compilation matches
coefficients monomial by monomial: every monomial occurring anywhere in an
identity contributes one linear equality over Gram entries and free
coefficients.

Certificates extracted from a solve are re-checked independently of the
solver: the identities are re-expanded with exact sparse polynomial
arithmetic and the Gram blocks are eigen-checked.  A certificate passes with
identity residual <= 1e-7 and minimum Gram eigenvalue >= -1e-8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ipm import SdpProblem, SdpSolution, solve_feasibility, solve_sdp
from .poly import (
    Monomial,
    Polynomial,
    grlex_key,
    monomial_basis,
    monomial_basis_range,
    monomial_mul,
)

RESIDUAL_TOL = 1e-7
GRAM_EIG_TOL = -1e-8


@dataclass(frozen=True)
class Unknown:
    name: str
    kind: str  # "sos", "free", "scalar"
    basis: tuple[Monomial, ...] = ()  # Gram basis (sos) or support (free)
    upper: float | None = None  # optional cap, scalar unknowns only


@dataclass
class Identity:
    """const + sum_j coef_j * unknown_j == 0 as polynomials."""

    name: str
    const: Polynomial
    terms: list[tuple[Polynomial, str]] = field(default_factory=list)

    def degree_span(self, unknowns: dict[str, Unknown]) -> tuple[int, int]:
        lows, highs = [], []
        if not self.const.is_zero():
            lows.append(self.const.min_degree())
            highs.append(self.const.degree())
        for coef, name in self.terms:
            if coef.is_zero():
                continue
            u = unknowns[name]
            if u.kind == "scalar":
                lows.append(coef.min_degree())
                highs.append(coef.degree())
            elif u.kind == "free":
                degs = [sum(m) for m in u.basis]
                lows.append(coef.min_degree() + min(degs))
                highs.append(coef.degree() + max(degs))
            else:
                degs = [sum(m) for m in u.basis]
                lows.append(coef.min_degree() + 2 * min(degs))
                highs.append(coef.degree() + 2 * max(degs))
        return (min(lows), max(highs)) if lows else (0, 0)


class SosProgram:
    def __init__(self, dim: int):
        self.dim = dim
        self.unknowns: dict[str, Unknown] = {}
        self.identities: list[Identity] = []
        self.objective: str | None = None  # scalar unknown to maximize

    # -- unknown declarations -------------------------------------------------

    def add_sos(self, name: str, basis: list[Monomial]) -> str:
        if name in self.unknowns:
            raise ValueError(f"unknown {name!r} already declared")
        if not basis:
            raise ValueError(f"SOS unknown {name!r} needs a nonempty basis")
        self.unknowns[name] = Unknown(name, "sos", tuple(basis))
        return name

    def add_sos_by_degree(self, name: str, degree: int) -> str:
        """SOS unknown of degree 2*ceil(degree/2) over the full monomial basis."""
        half = max(0, (degree + 1) // 2)
        return self.add_sos(name, monomial_basis(self.dim, half))

    def add_free_poly(self, name: str, support: list[Monomial]) -> str:
        if name in self.unknowns:
            raise ValueError(f"unknown {name!r} already declared")
        if not support:
            raise ValueError(f"free unknown {name!r} needs a nonempty support")
        self.unknowns[name] = Unknown(name, "free", tuple(support))
        return name

    def add_scalar(self, name: str, upper: float | None = None) -> str:
        if name in self.unknowns:
            raise ValueError(f"unknown {name!r} already declared")
        self.unknowns[name] = Unknown(name, "scalar", (), upper)
        return name

    def maximize(self, scalar_name: str) -> None:
        if self.unknowns.get(scalar_name, Unknown("", "")).kind != "scalar":
            raise ValueError(f"{scalar_name!r} is not a scalar unknown")
        self.objective = scalar_name

    # -- constraints -----------------------------------------------------------

    def add_identity(self, name: str, const: Polynomial,
                     terms: list[tuple[Polynomial, str]]) -> None:
        """Require const + sum coef*unknown == 0.

        Coefficients must be plain polynomials: a product of two unknowns has
        no affine compilation and is rejected by name.
        """
        for coef, unk in terms:
            if not isinstance(coef, Polynomial):
                raise TypeError(
                    f"identity {name!r}: coefficient of {unk!r} is {type(coef).__name__}; "
                    f"a product of unknowns (e.g. {coef!r} * {unk!r}) is not affine"
                )
            if unk not in self.unknowns:
                raise KeyError(f"identity {name!r} references undeclared unknown {unk!r}")
            if coef.dim != self.dim:
                raise ValueError(f"identity {name!r}: coefficient dimension mismatch")
        if const.dim != self.dim:
            raise ValueError(f"identity {name!r}: constant dimension mismatch")
        self.identities.append(Identity(name, const, list(terms)))

    def require_sos(self, name: str, expr_const: Polynomial,
                    expr_terms: list[tuple[Polynomial, str]] | None = None,
                    basis: list[Monomial] | None = None) -> str:
        """Constrain expr (a constant polynomial plus affine unknown terms) to
        be a sum of squares, introducing the Gram unknown ``name``.

        The Gram basis defaults to the degree interval halving of the static
        span of the expression (Newton polytope box heuristic).
        """
        expr_terms = expr_terms or []
        if basis is None:
            probe = Identity(name, expr_const, expr_terms)
            lo, hi = probe.degree_span(self.unknowns)
            basis = monomial_basis_range(self.dim, (lo + 1) // 2, hi // 2)
            if not basis:
                basis = [(0,) * self.dim]
        self.add_sos(name, basis)
        # name - expr == 0
        one = Polynomial.constant(self.dim, 1.0)
        terms = [(one, name)] + [(c.scale(-1.0), u) for c, u in expr_terms]
        self.add_identity(f"{name}=sos", expr_const.scale(-1.0), terms)
        return name


@dataclass
class SosSolution:
    status: str  # "optimal", "infeasible", "max-iters"
    values: dict[str, Polynomial | float]
    grams: dict[str, tuple[list[Monomial], np.ndarray]]
    margin: float | None
    objective: float | None
    sdp: SdpSolution | None
    verification: dict | None = None

    @property
    def feasible(self) -> bool:
        return (
            self.status == "optimal"
            and self.verification is not None
            and self.verification["pass"]
        )


def compile_program(program: SosProgram) -> tuple[SdpProblem, dict]:
    """Lower a program to block-diagonal SDP data plus an extraction map."""
    sos_names = [n for n, u in program.unknowns.items() if u.kind == "sos"]
    free_entries: list[tuple[str, Monomial | None]] = []
    for n, u in program.unknowns.items():
        if u.kind == "free":
            free_entries.extend((n, mono) for mono in u.basis)
        elif u.kind == "scalar":
            free_entries.append((n, None))

    # Row bookkeeping: one equality per (identity, monomial) pair.
    rows: dict[tuple[int, Monomial], int] = {}

    def row_of(ident_idx: int, mono: Monomial) -> int:
        key = (ident_idx, mono)
        if key not in rows:
            rows[key] = len(rows)
        return rows[key]

    # First pass: enumerate rows so arrays can be allocated densely.
    for idx, ident in enumerate(program.identities):
        for mono in ident.const.terms:
            row_of(idx, mono)
        for coef, unk_name in ident.terms:
            u = program.unknowns[unk_name]
            if u.kind == "scalar":
                for mono in coef.terms:
                    row_of(idx, mono)
            elif u.kind == "free":
                for mono in coef.terms:
                    for sup in u.basis:
                        row_of(idx, monomial_mul(mono, sup))
            else:
                basis = u.basis
                for mono in coef.terms:
                    for a in range(len(basis)):
                        for bidx in range(a, len(basis)):
                            row_of(idx, monomial_mul(mono, monomial_mul(basis[a], basis[bidx])))

    m = len(rows)
    block_A = {n: np.zeros((m, len(program.unknowns[n].basis),
                            len(program.unknowns[n].basis))) for n in sos_names}
    free_index = {key: j for j, key in enumerate(free_entries)}
    F = np.zeros((m, len(free_entries)))
    b = np.zeros(m)

    for idx, ident in enumerate(program.identities):
        for mono, c in ident.const.terms.items():
            b[rows[(idx, mono)]] -= c
        for coef, unk_name in ident.terms:
            u = program.unknowns[unk_name]
            if u.kind == "scalar":
                j = free_index[(unk_name, None)]
                for mono, c in coef.terms.items():
                    F[rows[(idx, mono)], j] += c
            elif u.kind == "free":
                for mono, c in coef.terms.items():
                    for sup in u.basis:
                        j = free_index[(unk_name, sup)]
                        F[rows[(idx, monomial_mul(mono, sup))], j] += c
            else:
                A = block_A[unk_name]
                basis = u.basis
                for mono, c in coef.terms.items():
                    for a in range(len(basis)):
                        for bi in range(len(basis)):
                            r = rows[(idx, monomial_mul(mono, monomial_mul(basis[a], basis[bi])))]
                            A[r, a, bi] += c

    block_names = list(sos_names)
    blocks = [block_A[n] for n in sos_names]
    Cs = [np.zeros((B.shape[1], B.shape[1])) for B in blocks]
    free_names = [f"{n}" if mono is None else f"{n}[{','.join(map(str, mono))}]"
                  for n, mono in free_entries]
    free_c = np.zeros(len(free_entries))

    # Scalar caps become extra rows with 1x1 slack blocks.
    extra_rows = []
    for n, u in program.unknowns.items():
        if u.kind == "scalar" and u.upper is not None:
            extra_rows.append((n, u.upper))
    if extra_rows:
        total = m + len(extra_rows)
        blocks = [np.concatenate([B, np.zeros((len(extra_rows),) + B.shape[1:])])
                  for B in blocks]
        F = np.concatenate([F, np.zeros((len(extra_rows), F.shape[1]))])
        b = np.concatenate([b, np.zeros(len(extra_rows))])
        for i, (n, cap) in enumerate(extra_rows):
            r = m + i
            slack = np.zeros((total, 1, 1))
            slack[r, 0, 0] = 1.0
            block_names.append(f"_cap[{n}]")
            blocks.append(slack)
            Cs.append(np.zeros((1, 1)))
            F[r, free_index[(n, None)]] = 1.0
            b[r] = cap

    if program.objective is not None:
        free_c[free_index[(program.objective, None)]] = -1.0  # maximize

    problem = SdpProblem(
        block_names=block_names,
        block_A=blocks,
        block_C=Cs,
        b=b,
        free_names=free_names,
        free_F=F,
        free_c=free_c,
        notes={"rows": len(b), "gram_blocks": len(sos_names)},
    )
    extraction = {"free_entries": free_entries, "sos_names": sos_names}
    return problem, extraction


def gram_polynomial(basis: tuple[Monomial, ...], gram: np.ndarray, dim: int) -> Polynomial:
    """Expand z' Q z exactly into a polynomial."""
    terms: dict[Monomial, float] = {}
    for a in range(len(basis)):
        for bi in range(len(basis)):
            mono = monomial_mul(basis[a], basis[bi])
            terms[mono] = terms.get(mono, 0.0) + gram[a, bi]
    return Polynomial(dim, terms)


def gram_decomposition(basis: tuple[Monomial, ...], gram: np.ndarray,
                       dim: int) -> list[tuple[float, Polynomial]]:
    """Square-root factors (weight, q_j) with sum weight * q_j^2 = z'Qz."""
    vals, vecs = np.linalg.eigh(0.5 * (gram + gram.T))
    out = []
    for lam, vec in zip(vals, vecs.T):
        if lam <= 0.0:
            continue
        q = Polynomial(dim, {mono: float(v) for mono, v in zip(basis, vec) if v != 0.0})
        out.append((float(lam), q))
    return out


def extract_solution(program: SosProgram, sdp_sol: SdpSolution,
                     extraction: dict) -> SosSolution:
    values: dict[str, Polynomial | float] = {}
    grams: dict[str, tuple[list[Monomial], np.ndarray]] = {}
    if not sdp_sol.blocks:
        return SosSolution(
            status=sdp_sol.status, values={}, grams={}, margin=sdp_sol.margin,
            objective=None, sdp=sdp_sol,
        )
    for name in extraction["sos_names"]:
        u = program.unknowns[name]
        G = sdp_sol.blocks[name]
        G = 0.5 * (G + G.T)
        grams[name] = (list(u.basis), G)
        values[name] = gram_polynomial(u.basis, G, program.dim)
    free_vals = sdp_sol.free_values
    for n, u in program.unknowns.items():
        if u.kind == "free":
            terms = {}
            for mono in u.basis:
                key = f"{n}[{','.join(map(str, mono))}]"
                c = free_vals.get(key, 0.0)
                if c != 0.0:
                    terms[mono] = c
            values[n] = Polynomial(program.dim, terms)
        elif u.kind == "scalar":
            values[n] = float(free_vals.get(n, 0.0))
    return SosSolution(
        status=sdp_sol.status,
        values=values,
        grams=grams,
        margin=sdp_sol.margin,
        objective=(-sdp_sol.objective if sdp_sol.objective is not None
                   and program.objective is not None else sdp_sol.objective),
        sdp=sdp_sol,
    )


def verify_certificate(program: SosProgram, solution: SosSolution) -> dict:
    """Re-expand every identity with the solved values and eigen-check Grams.

    Pure recomputation: nothing from the solver run is trusted beyond the
    numbers being checked.
    """
    reports = []
    max_residual = 0.0
    for ident in program.identities:
        acc = ident.const
        for coef, unk_name in ident.terms:
            val = solution.values[unk_name]
            if isinstance(val, Polynomial):
                acc = acc + coef * val
            else:
                acc = acc + coef.scale(float(val))
        residual = acc.max_abs_coeff()
        max_residual = max(max_residual, residual)
        reports.append({"identity": ident.name, "residual": residual})

    min_eig = 0.0
    eigs = {}
    for name, (basis, G) in solution.grams.items():
        lam = float(np.linalg.eigvalsh(G)[0]) if len(basis) else 0.0
        eigs[name] = lam
        min_eig = min(min_eig, lam)

    ok = max_residual <= RESIDUAL_TOL and min_eig >= GRAM_EIG_TOL
    return {
        "identities": reports,
        "max_residual": max_residual,
        "gram_min_eigenvalues": eigs,
        "min_gram_eigenvalue": min_eig,
        "residual_tol": RESIDUAL_TOL,
        "eig_tol": GRAM_EIG_TOL,
        "pass": bool(ok),
    }


def solve_sos(program: SosProgram) -> SosSolution:
    """Compile, solve (phase-I margin mode unless an objective is declared),
    extract and re-verify."""
    problem, extraction = compile_program(program)
    if program.objective is None:
        sdp_sol = solve_feasibility(problem)
    else:
        sdp_sol = solve_sdp(problem)
    sol = extract_solution(program, sdp_sol, extraction)
    if sol.status == "optimal":
        sol.verification = verify_certificate(program, sol)
        if not sol.verification["pass"]:
            sol.status = "max-iters"
    return sol
