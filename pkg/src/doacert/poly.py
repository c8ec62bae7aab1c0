"""Sparse multivariate polynomial arithmetic with graded lexicographic ordering.

A monomial is an exponent tuple, one non-negative integer per variable.  A
polynomial maps monomials to float coefficients; zero coefficients are never
stored.  All values are immutable after construction, so they can be shared
freely across threads.

Coefficients are doubles on purpose: everything downstream (interpolation,
semidefinite solves) is floating point, and soundness claims carry explicit
residual tolerances instead of exact arithmetic.
"""

from __future__ import annotations

import math
from typing import Iterable, Iterator, Mapping, Sequence

Monomial = tuple[int, ...]


def total_degree(mono: Monomial) -> int:
    return sum(mono)


def grlex_key(mono: Monomial) -> tuple:
    """Sort key realizing graded lexicographic order (degree first, then lex)."""
    return (sum(mono), mono)


def grlex_compare(a: Monomial, b: Monomial) -> int:
    """Return -1, 0 or 1 comparing two monomials in grlex order."""
    if len(a) != len(b):
        raise ValueError(f"monomial dimensions differ: {len(a)} vs {len(b)}")
    ka, kb = grlex_key(a), grlex_key(b)
    if ka < kb:
        return -1
    if ka > kb:
        return 1
    return 0


def monomial_mul(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


def monomial_basis(nvars: int, max_degree: int) -> list[Monomial]:
    """All monomials in ``nvars`` variables of total degree <= ``max_degree``,
    grlex-sorted ascending.  Length is C(nvars + max_degree, nvars)."""
    if nvars < 1:
        raise ValueError("need at least one variable")
    if max_degree < 0:
        raise ValueError("degree must be non-negative")
    out: list[Monomial] = []

    def fill(prefix: list[int], remaining: int, pos: int) -> None:
        if pos == nvars - 1:
            out.append(tuple(prefix + [remaining]))
            return
        for e in range(remaining + 1):
            fill(prefix + [e], remaining - e, pos + 1)

    for deg in range(max_degree + 1):
        block: list[Monomial] = []
        saved = out
        out = block
        fill([], deg, 0)
        block.sort(key=grlex_key)
        out = saved
        out.extend(block)
    return out


def monomial_basis_range(nvars: int, min_degree: int, max_degree: int) -> list[Monomial]:
    """Monomials with total degree in [min_degree, max_degree], grlex ascending."""
    return [m for m in monomial_basis(nvars, max_degree) if sum(m) >= min_degree]


class Polynomial:
    """Sparse polynomial over float coefficients.

    ``terms`` maps exponent tuples to nonzero coefficients.  Treat instances
    as immutable: arithmetic always builds a new polynomial.
    """

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: Mapping[Monomial, float] | None = None):
        if dim < 1:
            raise ValueError("polynomial dimension must be >= 1")
        self.dim = dim
        clean: dict[Monomial, float] = {}
        if terms:
            for mono, coeff in terms.items():
                if len(mono) != dim:
                    raise ValueError(f"monomial {mono} does not have dimension {dim}")
                c = float(coeff)
                if c != 0.0:
                    clean[tuple(int(e) for e in mono)] = clean.get(tuple(mono), 0.0) + c
            clean = {m: c for m, c in clean.items() if c != 0.0}
        self.terms = clean

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(dim: int) -> "Polynomial":
        return Polynomial(dim)

    @staticmethod
    def constant(dim: int, value: float) -> "Polynomial":
        return Polynomial(dim, {(0,) * dim: value})

    @staticmethod
    def variable(dim: int, index: int, power: int = 1) -> "Polynomial":
        if not 0 <= index < dim:
            raise ValueError(f"variable index {index} out of range for dimension {dim}")
        exps = [0] * dim
        exps[index] = power
        return Polynomial(dim, {tuple(exps): 1.0})

    @staticmethod
    def monomial(dim: int, mono: Monomial, coeff: float = 1.0) -> "Polynomial":
        return Polynomial(dim, {tuple(mono): coeff})

    # -- basic queries ------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self.terms:
            return -1
        return max(sum(m) for m in self.terms)

    def min_degree(self) -> int:
        if not self.terms:
            return -1
        return min(sum(m) for m in self.terms)

    def coefficient(self, mono: Monomial) -> float:
        return self.terms.get(tuple(mono), 0.0)

    def constant_term(self) -> float:
        return self.terms.get((0,) * self.dim, 0.0)

    def max_abs_coeff(self) -> float:
        if not self.terms:
            return 0.0
        return max(abs(c) for c in self.terms.values())

    def sorted_terms(self) -> list[tuple[Monomial, float]]:
        """Terms grlex-descending (leading term first)."""
        return sorted(self.terms.items(), key=lambda kv: grlex_key(kv[0]), reverse=True)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Polynomial)
            and self.dim == other.dim
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.dim, frozenset(self.terms.items())))

    # -- arithmetic ---------------------------------------------------------

    def _check_dim(self, other: "Polynomial") -> None:
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._check_dim(other)
        terms = dict(self.terms)
        for mono, coeff in other.terms.items():
            s = terms.get(mono, 0.0) + coeff
            if s == 0.0:
                terms.pop(mono, None)
            else:
                terms[mono] = s
        return Polynomial(self.dim, terms)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + other.scale(-1.0)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        self._check_dim(other)
        terms: dict[Monomial, float] = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                m = monomial_mul(ma, mb)
                s = terms.get(m, 0.0) + ca * cb
                if s == 0.0:
                    terms.pop(m, None)
                else:
                    terms[m] = s
        return Polynomial(self.dim, terms)

    def __neg__(self) -> "Polynomial":
        return self.scale(-1.0)

    def scale(self, factor: float) -> "Polynomial":
        if factor == 0.0:
            return Polynomial(self.dim)
        return Polynomial(self.dim, {m: c * factor for m, c in self.terms.items()})

    def power(self, exponent: int) -> "Polynomial":
        if exponent < 0:
            raise ValueError("negative powers are not polynomials")
        result = Polynomial.constant(self.dim, 1.0)
        for _ in range(exponent):
            result = result * self
        return result

    # -- evaluation and calculus --------------------------------------------

    def __call__(self, point: Sequence[float]) -> float:
        return self.eval(point)

    def eval(self, point: Sequence[float]) -> float:
        if len(point) != self.dim:
            raise ValueError(f"point dimension {len(point)} != {self.dim}")
        total = 0.0
        for mono, coeff in self.terms.items():
            v = coeff
            for x, e in zip(point, mono):
                if e:
                    v *= x**e
            total += v
        return total

    def eval_batch(self, points) -> "object":
        """Vectorized evaluation; ``points`` is an (N, dim) array."""
        import numpy as np

        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[0])
        for mono, coeff in self.terms.items():
            v = np.full(pts.shape[0], coeff)
            for j, e in enumerate(mono):
                if e:
                    v = v * pts[:, j] ** e
            out += v
        return out

    def partial(self, index: int) -> "Polynomial":
        """Formal partial derivative with respect to variable ``index``."""
        if not 0 <= index < self.dim:
            raise ValueError(f"variable index {index} out of range")
        terms: dict[Monomial, float] = {}
        for mono, coeff in self.terms.items():
            e = mono[index]
            if e == 0:
                continue
            m = list(mono)
            m[index] = e - 1
            terms[tuple(m)] = terms.get(tuple(m), 0.0) + coeff * e
        return Polynomial(self.dim, terms)

    def gradient(self) -> "PolyVector":
        return PolyVector([self.partial(i) for i in range(self.dim)])

    # -- substitution --------------------------------------------------------

    def substitute(self, assignments: Mapping[int, float]) -> "Polynomial":
        """Plug numeric values into a subset of variables; dimension unchanged."""
        terms: dict[Monomial, float] = {}
        for mono, coeff in self.terms.items():
            c = coeff
            m = list(mono)
            for idx, value in assignments.items():
                e = m[idx]
                if e:
                    c *= value**e
                    m[idx] = 0
            if c != 0.0:
                key = tuple(m)
                s = terms.get(key, 0.0) + c
                if s == 0.0:
                    terms.pop(key, None)
                else:
                    terms[key] = s
        return Polynomial(self.dim, terms)

    def drop_vars(self, indices: Iterable[int]) -> "Polynomial":
        """Remove variables that no term uses (after substitution)."""
        drop = set(indices)
        keep = [i for i in range(self.dim) if i not in drop]
        terms: dict[Monomial, float] = {}
        for mono, coeff in self.terms.items():
            for idx in drop:
                if mono[idx] != 0:
                    raise ValueError(f"variable {idx} still occurs with exponent {mono[idx]}")
            terms[tuple(mono[i] for i in keep)] = coeff
        return Polynomial(len(keep), terms)

    def extend_dims(self, new_dim: int) -> "Polynomial":
        """Embed into a larger variable space (new variables appended)."""
        if new_dim < self.dim:
            raise ValueError("cannot shrink via extend_dims")
        pad = (0,) * (new_dim - self.dim)
        return Polynomial(new_dim, {m + pad: c for m, c in self.terms.items()})

    def homogeneous_part(self, degree: int) -> "Polynomial":
        return Polynomial(
            self.dim, {m: c for m, c in self.terms.items() if sum(m) == degree}
        )

    def max_degree_in(self, index: int) -> int:
        if not self.terms:
            return 0
        return max(m[index] for m in self.terms)

    # -- printing -------------------------------------------------------------

    def format(self, var_names: Sequence[str] | None = None) -> str:
        """Canonical text form: grlex-descending sum of coeff * x1^a1 ... terms."""
        if not self.terms:
            return "0"
        names = var_names or [f"x{i + 1}" for i in range(self.dim)]
        parts = []
        for mono, coeff in self.sorted_terms():
            factors = [repr(coeff)]
            for name, e in zip(names, mono):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            parts.append("*".join(factors))
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"Polynomial({self.format()})"


class PolyVector:
    """A vector of polynomials over the same variables (a polynomial map)."""

    __slots__ = ("components",)

    def __init__(self, components: Sequence[Polynomial]):
        comps = list(components)
        if not comps:
            raise ValueError("empty polynomial vector")
        dim = comps[0].dim
        for p in comps:
            if p.dim != dim:
                raise ValueError("all components must share the ambient dimension")
        self.components = tuple(comps)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self) -> Iterator[Polynomial]:
        return iter(self.components)

    def __getitem__(self, i: int) -> Polynomial:
        return self.components[i]

    def eval(self, point: Sequence[float]) -> list[float]:
        return [p.eval(point) for p in self.components]

    def dot(self, other: "PolyVector") -> Polynomial:
        if len(self) != len(other):
            raise ValueError("length mismatch in dot product")
        acc = Polynomial.zero(self.dim)
        for a, b in zip(self.components, other.components):
            acc = acc + a * b
        return acc

    def __repr__(self) -> str:
        inner = ", ".join(p.format() for p in self.components)
        return f"PolyVector([{inner}])"


def poly_add(p: Polynomial, q: Polynomial) -> Polynomial:
    return p + q


def poly_mul(p: Polynomial, q: Polynomial) -> Polynomial:
    return p * q


def poly_scale(p: Polynomial, factor: float) -> Polynomial:
    return p.scale(factor)


def poly_eval(p: Polynomial, point: Sequence[float]) -> float:
    return p.eval(point)


def poly_grad(p: Polynomial) -> PolyVector:
    return p.gradient()


def basis_size(nvars: int, degree: int) -> int:
    return math.comb(nvars + degree, nvars)
