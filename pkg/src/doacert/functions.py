"""Catalog of elementary transcendental terms and the boxes they live on.

Each catalog entry is a function of one scaled state variable, phi(c * x_i).
The catalog knows, for every kind, the power-series coefficients at 0, exact
derivative evaluators of any order, a sup bound for the d-th derivative on an
interval, and the order of the first non-constant series term.  That last
number is what places the minimal monomial x^gamma used by the enclosure
machinery: the quotient psi(t) = (phi(t) - phi(0)) / t^g has a finite nonzero
limit at 0.

psi and its derivative are evaluated through the series near zero (the direct
quotient cancels catastrophically there) and through the closed form away
from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .poly import Monomial, Polynomial

CATALOG_KINDS = ("sin", "cos", "exp", "expm1", "log1p")

# Below this argument magnitude psi is summed from the series; 40 terms put
# the truncation error far below double precision for |u| <= 1.
_SERIES_SWITCH = 1.0
_SERIES_TERMS = 40


def taylor_coefficient(kind: str, order: int) -> float:
    """Coefficient of t^order in the series of the unscaled catalog function."""
    if kind == "sin":
        if order % 2 == 0:
            return 0.0
        return (-1.0) ** ((order - 1) // 2) / math.factorial(order)
    if kind == "cos":
        if order % 2 == 1:
            return 0.0
        return (-1.0) ** (order // 2) / math.factorial(order)
    if kind == "exp":
        return 1.0 / math.factorial(order)
    if kind == "expm1":
        return 0.0 if order == 0 else 1.0 / math.factorial(order)
    if kind == "log1p":
        return 0.0 if order == 0 else (-1.0) ** (order + 1) / order
    raise ValueError(f"unknown catalog function {kind!r}")


def value(kind: str, u: float) -> float:
    if kind == "sin":
        return math.sin(u)
    if kind == "cos":
        return math.cos(u)
    if kind == "exp":
        return math.exp(u)
    if kind == "expm1":
        return math.expm1(u)
    if kind == "log1p":
        return math.log1p(u)
    raise ValueError(f"unknown catalog function {kind!r}")


def derivative(kind: str, order: int, u: float) -> float:
    """Exact order-th derivative of the unscaled catalog function at u."""
    if order == 0:
        return value(kind, u)
    if kind == "sin":
        return (math.sin, math.cos, lambda t: -math.sin(t), lambda t: -math.cos(t))[
            order % 4
        ](u)
    if kind == "cos":
        return (math.cos, lambda t: -math.sin(t), lambda t: -math.cos(t), math.sin)[
            order % 4
        ](u)
    if kind in ("exp", "expm1"):
        return math.exp(u)
    if kind == "log1p":
        return (-1.0) ** (order + 1) * math.factorial(order - 1) / (1.0 + u) ** order
    raise ValueError(f"unknown catalog function {kind!r}")


def derivative_sup(kind: str, order: int, lo: float, hi: float) -> float:
    """Upper bound for |d^order/du^order phi| over [lo, hi] (unscaled argument)."""
    if order == 0:
        return max(abs(value(kind, lo)), abs(value(kind, hi)))
    if kind in ("sin", "cos"):
        return 1.0
    if kind in ("exp", "expm1"):
        return math.exp(hi)
    if kind == "log1p":
        if lo <= -1.0:
            raise ValueError("log1p needs arguments above -1")
        return math.factorial(order - 1) / (1.0 + lo) ** order
    raise ValueError(f"unknown catalog function {kind!r}")


def minimal_order(kind: str) -> int:
    """Order of the first nonzero non-constant series coefficient."""
    return {"sin": 1, "cos": 2, "exp": 1, "expm1": 1, "log1p": 1}[kind]


@dataclass(frozen=True)
class ElementaryFunction:
    """A catalog term phi(scale * x_var) inside an n-dimensional state space."""

    kind: str
    scale: float
    var: int
    dim: int

    def __post_init__(self):
        if self.kind not in CATALOG_KINDS:
            raise ValueError(
                f"unknown catalog function {self.kind!r}; "
                f"available: {', '.join(CATALOG_KINDS)}"
            )
        if self.scale == 0.0:
            raise ValueError("catalog argument scale must be nonzero")
        if not 0 <= self.var < self.dim:
            raise ValueError(f"variable index {self.var} out of range for dim {self.dim}")

    # -- plain evaluation ----------------------------------------------------

    def value_at(self, t: float) -> float:
        """phi evaluated with state coordinate x_var = t."""
        return value(self.kind, self.scale * t)

    def value_at_zero(self) -> float:
        return value(self.kind, 0.0)

    def eval_state(self, point: Sequence[float]) -> float:
        return self.value_at(point[self.var])

    def derivative_at(self, order: int, t: float) -> float:
        """d^order/dt^order of phi(scale*t); chain rule folds in scale^order."""
        return self.scale**order * derivative(self.kind, order, self.scale * t)

    def derivative_sup_on(self, order: int, lo: float, hi: float) -> float:
        a, b = sorted((self.scale * lo, self.scale * hi))
        return abs(self.scale) ** order * derivative_sup(self.kind, order, a, b)

    # -- minimal monomial and the quotient psi --------------------------------

    def minimal_monomial(self) -> Monomial:
        exps = [0] * self.dim
        exps[self.var] = minimal_order(self.kind)
        return tuple(exps)

    def series_coefficient(self, order: int) -> float:
        """Coefficient of t^order in phi(scale*t)."""
        return taylor_coefficient(self.kind, order) * self.scale**order

    def _quotient_series(self, u: float) -> float:
        g = minimal_order(self.kind)
        acc = 0.0
        # Horner over the shifted series keeps this exact to roundoff.
        for m in range(_SERIES_TERMS + g, g - 1, -1):
            acc = acc * u + taylor_coefficient(self.kind, m)
        return acc

    def _quotient_series_deriv(self, u: float) -> float:
        g = minimal_order(self.kind)
        acc = 0.0
        for m in range(_SERIES_TERMS + g, g, -1):
            acc = acc * u + (m - g) * taylor_coefficient(self.kind, m)
        return acc

    def quotient_at(self, t: float) -> float:
        """psi(t) = (phi(scale*t) - phi(0)) / t^g, with the limit at t = 0."""
        g = minimal_order(self.kind)
        u = self.scale * t
        if abs(u) <= _SERIES_SWITCH:
            return self.scale**g * self._quotient_series(u)
        return (value(self.kind, u) - self.value_at_zero()) / t**g

    def quotient_derivative_at(self, t: float) -> float:
        """d psi / dt."""
        g = minimal_order(self.kind)
        u = self.scale * t
        if abs(u) <= _SERIES_SWITCH:
            return self.scale ** (g + 1) * self._quotient_series_deriv(u)
        phi = value(self.kind, u) - self.value_at_zero()
        dphi = self.scale * derivative(self.kind, 1, u)
        return (dphi * t - g * phi) / t ** (g + 1)

    def taylor_polynomial(self, max_degree: int) -> Polynomial:
        """Series of phi(scale*t) truncated at total degree max_degree, as a
        polynomial in the full state space."""
        terms = {}
        for m in range(max_degree + 1):
            c = self.series_coefficient(m)
            if c != 0.0:
                exps = [0] * self.dim
                exps[self.var] = m
                terms[tuple(exps)] = c
        return Polynomial(self.dim, terms)

    def describe(self) -> str:
        var = f"x{self.var + 1}"
        arg = var if self.scale == 1.0 else f"{self.scale:g}*{var}"
        return f"{self.kind}({arg})"


@dataclass(frozen=True)
class Box:
    """An axis-aligned region containing the origin strictly in its interior."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("bound vectors differ in length")
        for lo, hi in zip(self.lower, self.upper):
            if not lo < hi:
                raise ValueError(f"degenerate interval [{lo}, {hi}]")
            if not (lo < 0.0 < hi):
                raise ValueError("box must contain the origin strictly")

    @staticmethod
    def from_intervals(intervals: Sequence[tuple[float, float]]) -> "Box":
        return Box(tuple(float(a) for a, _ in intervals), tuple(float(b) for _, b in intervals))

    @property
    def dim(self) -> int:
        return len(self.lower)

    def interval(self, i: int) -> tuple[float, float]:
        return (self.lower[i], self.upper[i])

    def contains(self, point: Sequence[float], tol: float = 0.0) -> bool:
        return all(
            lo - tol <= x <= hi + tol
            for x, lo, hi in zip(point, self.lower, self.upper)
        )

    def corners(self) -> list[tuple[float, ...]]:
        pts = [()]
        for lo, hi in zip(self.lower, self.upper):
            pts = [p + (v,) for p in pts for v in (lo, hi)]
        return pts

    def scaled(self, factor: float) -> "Box":
        return Box(
            tuple(v * factor for v in self.lower),
            tuple(v * factor for v in self.upper),
        )

    def sample(self, rng, count: int):
        """Uniform samples as an (count, dim) array."""
        import numpy as np

        lo = np.array(self.lower)
        hi = np.array(self.upper)
        return lo + (hi - lo) * rng.random((count, self.dim))

    def face_constraints(self) -> list[Polynomial]:
        """Linear polynomials, one per face, non-negative exactly on the box."""
        out = []
        for i, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            xi = Polynomial.variable(self.dim, i)
            out.append(xi - Polynomial.constant(self.dim, lo))
            out.append(Polynomial.constant(self.dim, hi) - xi)
        return out

    def __repr__(self) -> str:
        ivs = ", ".join(f"[{lo:g}, {hi:g}]" for lo, hi in zip(self.lower, self.upper))
        return f"Box({ivs})"
