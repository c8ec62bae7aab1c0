"""Certified polynomial enclosures of transcendental terms.

Writing phi(x) = phi(0) + psi(x) * x^g with x^g the minimal monomial, we
interpolate psi on a mesh and bound the interpolation residual r = psi - p
through the gradient estimate

    |r(x)| <= n/(n+1) * sup||grad r|| * spacing        on every mesh cell,

so the whole function is trapped in p(x) + u * x^g with |u| <= bound on the
box.  The Taylor-with-Lagrange-remainder construction is kept alongside as
the baseline the interpolation route is measured against.

The gradient sup is estimated by adaptive dense sampling with a 10% safety
factor; each enclosure records the estimate, the final grid density and the
factor so the bound can be audited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .functions import Box, ElementaryFunction
from .mesh import Mesh, build_mesh, _vandermonde
from .poly import Monomial, Polynomial, monomial_basis

SAFETY_FACTOR = 1.1
_REFINE_LIMIT = 6
_REFINE_RTOL = 0.01


@dataclass(frozen=True)
class Enclosure:
    """phi(x) = poly(x) + u * x^mono with |u| <= bound, valid on ``domain``."""

    func: ElementaryFunction
    poly: Polynomial
    remainder_monomial: Monomial
    bound: float
    domain: Box
    degree: int
    method: str  # "interpolation" or "taylor"
    grad_sup: float | None = None
    spacing: float | None = None
    grid_points: int | None = None
    safety_factor: float | None = None
    converged: bool = True

    def quotient_poly(self) -> Polynomial:
        """The interpolant of psi, i.e. (poly - phi(0)) / x^mono."""
        shift = {}
        for mono, coeff in self.poly.terms.items():
            if sum(mono) == 0:
                continue
            reduced = tuple(e - g for e, g in zip(mono, self.remainder_monomial))
            if any(e < 0 for e in reduced):
                raise ValueError("enclosure polynomial is not divisible by its monomial")
            shift[reduced] = coeff
        return Polynomial(self.poly.dim, shift)

    def report(self) -> dict:
        return {
            "function": self.func.describe(),
            "domain": [list(self.domain.interval(i)) for i in range(self.domain.dim)],
            "degree": self.degree,
            "gamma": list(self.remainder_monomial),
            "coefficients": {
                " ".join(map(str, m)): c for m, c in self.poly.sorted_terms()
            },
            "bound": self.bound,
            "lambda": self.grad_sup,
            "spacing": self.spacing,
            "method": self.method,
        }


def minimal_monomial(func: ElementaryFunction) -> Monomial:
    """Least grlex monomial with nonzero limit of (phi - phi(0)) / x^mono at 0."""
    return func.minimal_monomial()


def interpolate(psi_values, mesh: Mesh, degree: int) -> Polynomial:
    """Degree-``degree`` polynomial through (node, value) pairs of the mesh.

    The node count must equal the basis size C(n + degree, n); a singular
    system means the mesh is not unisolvent and is rejected.
    """
    nodes = mesh.node_array()
    n = nodes.shape[1]
    basis = monomial_basis(n, degree)
    values = np.asarray(list(psi_values), dtype=float)
    if len(values) != len(nodes):
        raise ValueError(f"{len(values)} values for {len(nodes)} nodes")
    if len(nodes) != len(basis):
        raise ValueError(
            f"{len(nodes)} nodes cannot determine a degree-{degree} polynomial "
            f"({len(basis)} coefficients)"
        )
    V = _vandermonde(nodes, basis)
    try:
        coeffs = np.linalg.solve(V, values)
    except np.linalg.LinAlgError as exc:
        raise ValueError("mesh nodes are not unisolvent (singular system)") from exc
    resid = float(np.max(np.abs(V @ coeffs - values))) if len(values) else 0.0
    if not np.all(np.isfinite(coeffs)) or resid > 1e-6 * max(1.0, float(np.max(np.abs(values)))):
        raise ValueError("mesh nodes are not unisolvent (ill-conditioned system)")
    return Polynomial(n, {m: float(c) for m, c in zip(basis, coeffs) if c != 0.0})


def estimate_gradient_sup(residual_grad, domain: Box,
                          base_resolution: int | None = None) -> tuple[float, int, bool]:
    """Adaptive sup estimate of ||grad r|| over the box.

    ``residual_grad`` maps an (N, dim) array of points to an (N,) array of
    gradient norms.  The grid is refined (density doubled) until the observed
    max moves by less than 1% or the refinement budget runs out; the returned
    value carries the 1.1 safety factor.  Returns (estimate, grid points used,
    converged flag).
    """
    dim = domain.dim
    if base_resolution is None:
        base_resolution = 2000 if dim == 1 else 33
    res = base_resolution
    prev = None
    converged = False
    total = 0
    for _ in range(_REFINE_LIMIT + 1):
        axes = [np.linspace(lo, hi, res) for lo, hi in zip(domain.lower, domain.upper)]
        if dim == 1:
            pts = axes[0][:, None]
        else:
            pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
        total = len(pts)
        cur = float(np.max(residual_grad(pts)))
        if prev is not None and abs(cur - prev) <= _REFINE_RTOL * max(prev, 1e-300):
            converged = True
            prev = max(cur, prev)
            break
        prev = cur if prev is None else max(cur, prev)
        res = 2 * res - 1
    return SAFETY_FACTOR * prev, total, converged


def enclose(func: ElementaryFunction, domain: Box, degree: int,
            node_rule: str = "equispaced") -> Enclosure:
    """Certified interpolation enclosure of a catalog term on a box.

    The catalog argument is univariate, so the enclosure is built over the
    interval of that variable; effective dimension 1 gives the bound factor
    n/(n+1) = 1/2.
    """
    g_mono = func.minimal_monomial()
    g = sum(g_mono)
    if degree < g:
        raise ValueError(f"degree must be at least |gamma| = {g}, got {degree}")
    lo, hi = domain.interval(func.var)
    if func.kind == "log1p" and func.scale * (lo if func.scale > 0 else hi) <= -1.0:
        raise ValueError("log1p argument leaves (-1, inf) on this box")
    interval = Box((lo,), (hi,))
    k = degree - g + 1  # C(1 + degree - g, 1)
    if k >= 2:
        mesh = build_mesh(interval, k, node_rule=node_rule)
        psi_at = np.array([func.quotient_at(t[0]) for t in mesh.nodes])
        p_tilde_1d = interpolate(psi_at, mesh, degree - g)
    else:
        # Degenerate degree = |gamma| case: one node at the origin, whose
        # single cell is the whole interval.
        mesh = Mesh(((0.0,),), hi - lo, ((0,),), "rectangular")
        p_tilde_1d = Polynomial.constant(1, func.quotient_at(0.0))
    dptilde = p_tilde_1d.partial(0)

    def grad_norm(pts):
        ts = pts[:, 0]
        exact = np.array([func.quotient_derivative_at(t) for t in ts])
        approx = dptilde.eval_batch(pts)
        return np.abs(exact - approx)

    grad_sup, grid_points, converged = estimate_gradient_sup(grad_norm, interval)
    bound = 0.5 * grad_sup * mesh.spacing  # n/(n+1) with n = 1 effective variable

    poly = _lift_quotient(func, p_tilde_1d, g_mono)
    return Enclosure(
        func=func,
        poly=poly,
        remainder_monomial=g_mono,
        bound=bound,
        domain=domain,
        degree=degree,
        method="interpolation",
        grad_sup=grad_sup,
        spacing=mesh.spacing,
        grid_points=grid_points,
        safety_factor=SAFETY_FACTOR,
        converged=converged,
    )


def taylor_enclose(func: ElementaryFunction, domain: Box, degree: int) -> Enclosure:
    """Baseline enclosure from the series at 0 with the Lagrange remainder.

    p is the degree-(d-1) series polynomial; the remainder term
    sup |phi^(d)| / d! * x^d is folded onto x^gamma, so the bound carries a
    factor max |x|^(d - |gamma|) over the box.
    """
    g_mono = func.minimal_monomial()
    g = sum(g_mono)
    if degree < g:
        raise ValueError(f"degree must be at least |gamma| = {g}, got {degree}")
    lo, hi = domain.interval(func.var)
    poly = func.taylor_polynomial(degree - 1)
    sup_d = func.derivative_sup_on(degree, lo, hi)
    reach = max(abs(lo), abs(hi))
    bound = sup_d / math.factorial(degree) * reach ** (degree - g)
    return Enclosure(
        func=func,
        poly=poly,
        remainder_monomial=g_mono,
        bound=bound,
        domain=domain,
        degree=degree,
        method="taylor",
    )


def check_soundness(enc: Enclosure, samples: int = 10_000, rng=None) -> float:
    """Max violation of |phi(x) - p(x)| <= bound * |x^gamma| over random samples.

    Non-positive return means no violation was observed.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    pts = enc.domain.sample(rng, samples)
    var = enc.func.var
    ts = pts[:, var]
    phi = np.array([enc.func.value_at(t) for t in ts])
    approx = enc.poly.eval_batch(pts)
    weight = np.ones(len(pts))
    for axis, e in enumerate(enc.remainder_monomial):
        if e:
            weight = weight * np.abs(pts[:, axis]) ** e
    return float(np.max(np.abs(phi - approx) - enc.bound * weight))


def _lift_quotient(func: ElementaryFunction, p_tilde_1d: Polynomial,
                   g_mono: Monomial) -> Polynomial:
    """Assemble phi(0) + p_tilde(x_var) * x^gamma in the full state space."""
    dim = func.dim
    var = func.var
    g = sum(g_mono)
    terms = {}
    const = func.value_at_zero()
    if const != 0.0:
        terms[(0,) * dim] = const
    for mono_1d, coeff in p_tilde_1d.terms.items():
        exps = [0] * dim
        exps[var] = mono_1d[0] + g
        key = tuple(exps)
        terms[key] = terms.get(key, 0.0) + coeff
    return Polynomial(dim, {m: c for m, c in terms.items() if c != 0.0})
