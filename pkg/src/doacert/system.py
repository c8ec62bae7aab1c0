"""System definitions and their substitution into uncertain polynomial systems.

A system is dx_i/dt = base_i(x, theta) + sum_j coef_ij(x, theta) * phi_ij(x)
with polynomial base and coefficients (affine in theta) and catalog terms phi.
Replacing each phi by a certified enclosure p + u * x^g, |u| <= b, gives an
uncertain polynomial system whose trajectory set contains the original's
wherever the enclosures are valid.  Extreme combinations of the interval
parameters (u at +/-b, theta at box corners) give the finite family of vertex
polynomial systems that certification works against; the dependence of the
vector field on (u, theta) is biaffine, so vertex values bound the whole box.

State variables occupy indices 0..n-1, uncertainty parameters n..n+t-1 in the
joint polynomial space.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .enclosure import Enclosure, enclose
from .functions import Box, ElementaryFunction
from .poly import Polynomial, PolyVector


@dataclass(frozen=True)
class SystemTerm:
    """coef(x, theta) * phi(x) with coef affine in theta."""

    coef: Polynomial  # over n + t variables
    func: ElementaryFunction  # over the n state variables


@dataclass
class SystemDef:
    state_dim: int
    theta_dim: int
    domain: Box  # working region for the state
    base: list[Polynomial]  # one per equation, over n + t variables
    terms: list[list[SystemTerm]]  # per equation
    theta_intervals: tuple[tuple[float, float], ...] = ()
    theta_constraint: Polynomial | None = None  # optional description psi(theta) >= 0
    name: str = ""

    def __post_init__(self):
        n, t = self.state_dim, self.theta_dim
        if self.domain.dim != n:
            raise ValueError("domain dimension mismatch")
        if len(self.base) != n or len(self.terms) != n:
            raise ValueError("need one equation per state variable")
        if len(self.theta_intervals) != t:
            raise ValueError("need one interval per uncertainty parameter")
        for p in self.base:
            if p.dim != n + t:
                raise ValueError("base polynomials must live over state + theta variables")
            self._check_theta_affine(p)
        for eq in self.terms:
            for term in eq:
                if term.coef.dim != n + t:
                    raise ValueError("term coefficients must live over state + theta variables")
                if term.func.dim != n:
                    raise ValueError("catalog term must map state variables")
                self._check_theta_affine(term.coef)
        self._check_equilibrium()

    def _check_theta_affine(self, p: Polynomial) -> None:
        n = self.state_dim
        for mono in p.terms:
            if sum(mono[n:]) > 1:
                raise ValueError(
                    "coefficients must be affine in the uncertainty parameters; "
                    f"monomial {mono} is not"
                )

    def _check_equilibrium(self, tol: float = 1e-10) -> None:
        for theta in self.theta_vertices():
            f0 = self.eval_true([0.0] * self.state_dim, theta)
            worst = max(abs(v) for v in f0)
            if worst > tol:
                raise ValueError(
                    f"the origin is not an equilibrium: |f(0, theta={theta})| = {worst:.3e}"
                )

    def theta_vertices(self) -> list[tuple[float, ...]]:
        if self.theta_dim == 0:
            return [()]
        return [
            tuple(c)
            for c in itertools.product(*[(lo, hi) for lo, hi in self.theta_intervals])
        ]

    def theta_center(self) -> tuple[float, ...]:
        return tuple(0.5 * (lo + hi) for lo, hi in self.theta_intervals)

    def eval_true(self, x, theta=()) -> list[float]:
        """The genuine non-polynomial vector field at a point."""
        point = tuple(x) + tuple(theta)
        out = []
        for base, eq_terms in zip(self.base, self.terms):
            v = base.eval(point)
            for term in eq_terms:
                v += term.coef.eval(point) * term.func.eval_state(x)
            out.append(v)
        return out

    def eval_true_batch(self, xs: np.ndarray, theta=()) -> np.ndarray:
        """Vectorized vector field over an (N, n) batch of states."""
        n = self.state_dim
        pts = np.concatenate(
            [xs, np.tile(np.asarray(theta, dtype=float), (len(xs), 1))], axis=1
        ) if self.theta_dim else xs
        out = np.empty((len(xs), n))
        for i, (base, eq_terms) in enumerate(zip(self.base, self.terms)):
            v = base.eval_batch(pts)
            for term in eq_terms:
                phi = np.array([term.func.value_at(t) for t in xs[:, term.func.var]])
                v = v + term.coef.eval_batch(pts) * phi
            out[:, i] = v
        return out

    def jacobian_origin(self, theta=()) -> np.ndarray:
        """State Jacobian of the true dynamics at the origin."""
        n = self.state_dim
        point = (0.0,) * n + tuple(theta)
        J = np.zeros((n, n))
        for i, (base, eq_terms) in enumerate(zip(self.base, self.terms)):
            for j in range(n):
                entry = base.partial(j).eval(point)
                for term in eq_terms:
                    phi0 = term.func.value_at_zero()
                    entry += term.coef.partial(j).eval(point) * phi0
                    if j == term.func.var:
                        entry += term.coef.eval(point) * term.func.derivative_at(1, 0.0)
                J[i, j] = entry
        return J

    def num_transcendental_terms(self) -> int:
        return sum(len(eq) for eq in self.terms)


@dataclass(frozen=True)
class UncertainTerm:
    """u * weight(x, theta) with |u| <= bound; weight = coef * x^gamma."""

    weight: Polynomial  # over n + t variables
    bound: float
    enclosure_index: int


@dataclass
class UncertainPolySystem:
    state_dim: int
    theta_dim: int
    domain: Box
    base: list[Polynomial]  # f_i0 + sum coef_ij * p_ij, over n + t variables
    uncertain: list[list[UncertainTerm]]  # per equation
    enclosures: list[Enclosure]
    theta_intervals: tuple[tuple[float, float], ...]
    theta_constraint: Polynomial | None = None
    source: SystemDef | None = None

    def num_uncertain(self) -> int:
        return sum(len(eq) for eq in self.uncertain)

    def theta_vertices(self) -> list[tuple[float, ...]]:
        if self.theta_dim == 0:
            return [()]
        return [
            tuple(c)
            for c in itertools.product(*[(lo, hi) for lo, hi in self.theta_intervals])
        ]

    def interval_hull(self, x, theta=()) -> list[tuple[float, float]]:
        """Per-equation [min, max] of the vertex fields over u in [-b, b]."""
        point = tuple(x) + tuple(theta)
        out = []
        for base, terms in zip(self.base, self.uncertain):
            mid = base.eval(point)
            rad = sum(t.bound * abs(t.weight.eval(point)) for t in terms)
            out.append((mid - rad, mid + rad))
        return out


def substitute(sys: SystemDef, degrees: int | dict | list = 6,
               method: str = "interpolation") -> UncertainPolySystem:
    """Replace every transcendental term by a certified enclosure.

    ``degrees`` is either one degree for all terms or a map keyed by the term
    description (e.g. "sin(2*x1)").
    """
    n, t = sys.state_dim, sys.theta_dim

    def degree_for(func: ElementaryFunction) -> int:
        if isinstance(degrees, int):
            return degrees
        key = func.describe()
        if isinstance(degrees, dict):
            return degrees[key] if key in degrees else degrees.get("default", 6)
        raise TypeError("degrees must be an int or a mapping")

    cache: dict[tuple, Enclosure] = {}
    enclosures: list[Enclosure] = []
    base_out: list[Polynomial] = []
    uncertain_out: list[list[UncertainTerm]] = []

    for base, eq_terms in zip(sys.base, sys.terms):
        acc = base
        u_terms: list[UncertainTerm] = []
        for term in eq_terms:
            d = degree_for(term.func)
            key = (term.func.kind, term.func.scale, term.func.var, d, method)
            if key not in cache:
                builder = enclose if method == "interpolation" else _taylor
                cache[key] = builder(term.func, sys.domain, d)
            enc = cache[key]
            if enc not in enclosures:
                enclosures.append(enc)
            idx = enclosures.index(enc)
            acc = acc + term.coef * enc.poly.extend_dims(n + t)
            gamma_poly = Polynomial.monomial(n, enc.remainder_monomial).extend_dims(n + t)
            u_terms.append(
                UncertainTerm(term.coef * gamma_poly, enc.bound, idx)
            )
        base_out.append(acc)
        uncertain_out.append(u_terms)

    return UncertainPolySystem(
        state_dim=n,
        theta_dim=t,
        domain=sys.domain,
        base=base_out,
        uncertain=uncertain_out,
        enclosures=enclosures,
        theta_intervals=sys.theta_intervals,
        theta_constraint=sys.theta_constraint,
        source=sys,
    )


def _taylor(func, domain, degree):
    from .enclosure import taylor_enclose

    return taylor_enclose(func, domain, degree)


@dataclass(frozen=True)
class VertexSystem:
    """One polynomial vector field at an extreme (u, theta) combination."""

    field: PolyVector  # over the n state variables
    u_signs: tuple[int, ...]
    theta: tuple[float, ...]

    def label(self) -> str:
        us = "".join("+" if s > 0 else "-" for s in self.u_signs) or "."
        th = ",".join(f"{v:g}" for v in self.theta) or "."
        return f"u[{us}]theta[{th}]"


def vertex_systems(usys: UncertainPolySystem) -> list[VertexSystem]:
    """All polynomial fields with u_ij = +/-b_ij and theta at box corners.

    Count is 2^{#uncertain terms} * 2^{theta dim}.  Requires affine theta
    dependence (validated at SystemDef construction); for semialgebraic
    uncertainty descriptions use the multiplier route on theta_constraint
    instead of vertex enumeration.
    """
    n, t = usys.state_dim, usys.theta_dim
    nu = usys.num_uncertain()
    out = []
    theta_idx = {n + j: j for j in range(t)}
    for signs in itertools.product((-1, 1), repeat=nu):
        for theta in usys.theta_vertices():
            comps = []
            pos = 0
            for base, terms in zip(usys.base, usys.uncertain):
                p = base
                for term in terms:
                    p = p + term.weight.scale(signs[pos] * term.bound)
                    pos += 1
                if t:
                    p = p.substitute({n + j: theta[j] for j in range(t)})
                    p = p.drop_vars(list(theta_idx))
                comps.append(p)
            out.append(VertexSystem(PolyVector(comps), signs, theta))
    return out


def lie_derivative(V: Polynomial, field: PolyVector) -> Polynomial:
    """d/dt V along the field: grad(V) . f."""
    return V.gradient().dot(field)
