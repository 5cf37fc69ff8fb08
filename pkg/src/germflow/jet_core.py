"""Truncated multivariate power series ("jets") over complex scalars.

A :class:`Jet` holds every coefficient of total degree ``<= D`` in ``n``
variables, stored densely in graded-lexicographic order. A :class:`MapJet`
is an ``n``-tuple of jets and stands for a map germ ``C^n -> C^n``.

All objects are immutable; every operation returns a new value.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import NotAGerm, ShapeMismatch, SingularLinearPart

MultiIndex = tuple[int, ...]


@dataclass(frozen=True)
class ToleranceProfile:
    """Thresholds turning exact statements into floating-point tests.

    ``zero_test`` is relative: a coefficient counts as zero when its
    magnitude is below ``zero_test * max(1, scale)``.
    """

    zero_test: float = 1e-9
    residual: float = 1e-9
    min_rcond: float = 1e-12
    small_divisor_floor: float = 1e-8
    primitivity: float = 1e-6

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not (0.0 < value < 1.0):
                raise ValueError(f"tolerance {name}={value!r} must lie in (0, 1)")

    def as_dict(self) -> dict[str, float]:
        return {
            "zero_test": self.zero_test,
            "residual": self.residual,
            "min_rcond": self.min_rcond,
            "small_divisor_floor": self.small_divisor_floor,
            "primitivity": self.primitivity,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, float]) -> "ToleranceProfile":
        unknown = set(data) - set(cls().as_dict())
        if unknown:
            raise ValueError(f"unknown tolerance keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def is_zero(self, value: complex, scale: float = 1.0) -> bool:
        return abs(value) < self.zero_test * max(1.0, scale)


DEFAULT_TOLERANCES = ToleranceProfile()


def _graded_lex(n: int, degree: int) -> list[MultiIndex]:
    # within a degree, larger exponents of earlier variables come first
    out = []
    for combo in itertools.combinations_with_replacement(range(n), degree):
        alpha = [0] * n
        for k in combo:
            alpha[k] += 1
        out.append(tuple(alpha))
    return out


class Basis:
    """Monomial table for ``n`` variables up to degree ``D`` plus the
    precomputed index tables used by multiplication and differentiation.
    Obtain instances through :func:`basis`, which caches them."""

    def __init__(self, n: int, D: int):
        if n < 1 or D < 0:
            raise ValueError(f"need n >= 1 and D >= 0, got n={n}, D={D}")
        self.n = n
        self.D = D
        monomials: list[MultiIndex] = []
        self.offsets = [0]
        for d in range(D + 1):
            monomials.extend(_graded_lex(n, d))
            self.offsets.append(len(monomials))
        self.monomials = tuple(monomials)
        self.size = len(monomials)
        self.index = {alpha: i for i, alpha in enumerate(monomials)}
        self.exponents = np.array(monomials, dtype=np.int64).reshape(self.size, n)
        self.degrees = self.exponents.sum(axis=1)

        # product pairs in graded-lex pairing order, degree > D never formed
        I, J, K = [], [], []
        for i, a in enumerate(monomials):
            da = self.degrees[i]
            for j in range(self.offsets[D - da + 1]):
                b = monomials[j]
                I.append(i)
                J.append(j)
                K.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self.mul_i = np.array(I, dtype=np.int64)
        self.mul_j = np.array(J, dtype=np.int64)
        self.mul_k = np.array(K, dtype=np.int64)

        # d/dx_k maps monomial src -> dst with integer factor
        self.deriv = []
        for k in range(n):
            src, dst, fac = [], [], []
            for i, a in enumerate(monomials):
                if a[k] > 0:
                    b = list(a)
                    b[k] -= 1
                    src.append(i)
                    dst.append(self.index[tuple(b)])
                    fac.append(a[k])
            self.deriv.append(
                (np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                 np.array(fac, dtype=float))
            )

        # alpha = parent + e_var, used to build all monomials of a map
        self.parent = np.zeros(self.size, dtype=np.int64)
        self.parent_var = np.zeros(self.size, dtype=np.int64)
        for i, a in enumerate(monomials[1:], start=1):
            k = next(v for v, e in enumerate(a) if e)
            b = list(a)
            b[k] -= 1
            self.parent[i] = self.index[tuple(b)]
            self.parent_var[i] = k

    def degree_slice(self, d: int) -> slice:
        return slice(self.offsets[d], self.offsets[d + 1])


@functools.lru_cache(maxsize=None)
def basis(n: int, D: int) -> Basis:
    return Basis(n, D)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=complex)
    arr.flags.writeable = False
    return arr


class Jet:
    """Scalar truncated power series in ``n`` complex variables, degree ``<= D``."""

    __slots__ = ("n", "D", "coeffs")

    def __init__(self, n: int, D: int, coeffs=None):
        b = basis(n, D)
        if coeffs is None:
            coeffs = np.zeros(b.size, dtype=complex)
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (b.size,):
            raise ShapeMismatch(
                f"expected {b.size} coefficients for n={n}, D={D}, got shape {coeffs.shape}"
            )
        self.n = n
        self.D = D
        self.coeffs = _frozen(coeffs)

    @property
    def basis(self) -> Basis:
        return basis(self.n, self.D)

    @classmethod
    def zero(cls, n: int, D: int) -> "Jet":
        return cls(n, D)

    @classmethod
    def constant(cls, n: int, D: int, value: complex) -> "Jet":
        c = np.zeros(basis(n, D).size, dtype=complex)
        c[0] = value
        return cls(n, D, c)

    @classmethod
    def variable(cls, n: int, D: int, k: int) -> "Jet":
        alpha = [0] * n
        alpha[k] = 1
        return cls.from_dict(n, D, {tuple(alpha): 1.0})

    @classmethod
    def from_dict(cls, n: int, D: int, terms: Mapping[Sequence[int], complex]) -> "Jet":
        """Build from ``{exponents: coefficient}``; terms above degree D are dropped."""
        b = basis(n, D)
        c = np.zeros(b.size, dtype=complex)
        for alpha, value in terms.items():
            alpha = tuple(int(e) for e in alpha)
            if len(alpha) != n or min(alpha) < 0:
                raise ShapeMismatch(f"bad multi-index {alpha} for n={n}")
            if sum(alpha) <= D:
                c[b.index[alpha]] += value
        return cls(n, D, c)

    def _check(self, alpha: Sequence[int]) -> MultiIndex:
        alpha = tuple(alpha)
        if len(alpha) != self.n or min(alpha) < 0:
            raise ShapeMismatch(f"bad multi-index {alpha} for n={self.n}")
        if sum(alpha) > self.D:
            raise IndexError(f"degree {sum(alpha)} exceeds truncation degree {self.D}")
        return alpha

    def __getitem__(self, alpha: Sequence[int]) -> complex:
        return complex(self.coeffs[self.basis.index[self._check(alpha)]])

    def items(self) -> Iterator[tuple[MultiIndex, complex]]:
        for alpha, c in zip(self.basis.monomials, self.coeffs):
            yield alpha, complex(c)

    def to_dict(self, drop_zeros: bool = True) -> dict[MultiIndex, complex]:
        return {a: c for a, c in self.items() if c != 0 or not drop_zeros}

    def degree_part(self, d: int) -> np.ndarray:
        return self.coeffs[self.basis.degree_slice(d)]

    def max_abs(self, min_degree: int = 0, max_degree: int | None = None) -> float:
        b = self.basis
        hi = self.D if max_degree is None else min(max_degree, self.D)
        if min_degree > hi:
            return 0.0
        seg = self.coeffs[b.offsets[min_degree]: b.offsets[hi + 1]]
        return float(np.max(np.abs(seg))) if seg.size else 0.0

    def truncate(self, D: int) -> "Jet":
        if D > self.D:
            raise ValueError("cannot raise truncation degree of a jet")
        return Jet(self.n, D, self.coeffs[: basis(self.n, D).size])

    def derivative(self, k: int) -> "Jet":
        src, dst, fac = self.basis.deriv[k]
        c = np.zeros_like(self.coeffs)
        c[dst] = self.coeffs[src] * fac
        return Jet(self.n, self.D, c)

    def _same_shape(self, other: "Jet"):
        if not isinstance(other, Jet) or (self.n, self.D) != (other.n, other.D):
            raise ShapeMismatch(
                f"jet shapes differ: (n={self.n}, D={self.D}) vs "
                f"(n={getattr(other, 'n', None)}, D={getattr(other, 'D', None)})"
            )

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            return self + Jet.constant(self.n, self.D, other)
        self._same_shape(other)
        return Jet(self.n, self.D, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.n, self.D, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return Jet(self.n, self.D, self.coeffs * other)
        return jet_mul(self, other)

    def __rmul__(self, other):
        return self * other

    def __call__(self, point) -> complex:
        return jet_eval(self, point)

    def __eq__(self, other):
        return (
            isinstance(other, Jet)
            and (self.n, self.D) == (other.n, other.D)
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def __hash__(self):
        return hash((self.n, self.D, self.coeffs.tobytes()))

    def __repr__(self):
        terms = [f"({c:.6g})*{a}" for a, c in self.items() if c != 0]
        return f"Jet(n={self.n}, D={self.D}, {' + '.join(terms) or '0'})"


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Truncated product; terms of degree > D are never formed."""
    a._same_shape(b)
    bs = a.basis
    prod = a.coeffs[bs.mul_i] * b.coeffs[bs.mul_j]
    # bincount sums each bucket in pair order, keeping results reproducible
    re = np.bincount(bs.mul_k, weights=prod.real, minlength=bs.size)
    im = np.bincount(bs.mul_k, weights=prod.imag, minlength=bs.size)
    return Jet(a.n, a.D, re + 1j * im)


def jet_eval(a: Jet, point) -> complex:
    """Evaluate by nested Horner schemes, one variable at a time."""
    z = np.asarray(point, dtype=complex).reshape(-1)
    if z.shape != (a.n,):
        raise ShapeMismatch(f"point has {z.size} entries, jet has n={a.n}")
    terms = {alpha: c for alpha, c in a.items() if c != 0}
    return _horner(terms, z, 0)


def _horner(terms: dict[MultiIndex, complex], z: np.ndarray, k: int) -> complex:
    if not terms:
        return 0j
    if k == len(z):
        return sum(terms.values(), 0j)
    groups: dict[int, dict[MultiIndex, complex]] = {}
    for alpha, c in terms.items():
        groups.setdefault(alpha[k], {})[alpha] = c
    acc = 0j
    for e in range(max(groups), -1, -1):
        acc = acc * z[k] + (_horner(groups[e], z, k + 1) if e in groups else 0j)
    return complex(acc)


class MapJet:
    """An ``n``-tuple of jets sharing ``(n, D)``: the jet of a map ``C^n -> C^n``."""

    __slots__ = ("components",)

    def __init__(self, components: Iterable[Jet]):
        comps = tuple(components)
        if not comps:
            raise ShapeMismatch("a map jet needs at least one component")
        n, D = comps[0].n, comps[0].D
        for c in comps:
            if (c.n, c.D) != (n, D):
                raise ShapeMismatch("map components disagree on (n, D)")
        if len(comps) != n:
            raise ShapeMismatch(f"map on C^{n} needs {n} components, got {len(comps)}")
        self.components = comps

    @property
    def n(self) -> int:
        return self.components[0].n

    @property
    def D(self) -> int:
        return self.components[0].D

    @property
    def basis(self) -> Basis:
        return basis(self.n, self.D)

    @property
    def is_germ(self) -> bool:
        return all(c.coeffs[0] == 0 for c in self.components)

    @property
    def matrix(self) -> np.ndarray:
        """Coefficients as an ``n x size`` array (row = component)."""
        return np.stack([c.coeffs for c in self.components])

    @classmethod
    def from_matrix(cls, n: int, D: int, mat) -> "MapJet":
        mat = np.asarray(mat, dtype=complex)
        return cls(Jet(n, D, row) for row in mat)

    @classmethod
    def identity(cls, n: int, D: int) -> "MapJet":
        return cls(Jet.variable(n, D, k) for k in range(n))

    @classmethod
    def linear(cls, A, D: int) -> "MapJet":
        A = np.asarray(A, dtype=complex)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ShapeMismatch(f"linear part must be square, got {A.shape}")
        b = basis(n, D)
        mat = np.zeros((n, b.size), dtype=complex)
        if D >= 1:
            mat[:, b.degree_slice(1)] = A
        return cls.from_matrix(n, D, mat)

    @classmethod
    def from_dicts(cls, n: int, D: int, comps: Sequence[Mapping]) -> "MapJet":
        return cls(Jet.from_dict(n, D, c) for c in comps)

    def linear_part(self) -> np.ndarray:
        if self.D < 1:
            return np.zeros((self.n, self.n), dtype=complex)
        return self.matrix[:, self.basis.degree_slice(1)].copy()

    def nonlinear_part(self) -> "MapJet":
        mat = self.matrix.copy()
        mat[:, : self.basis.offsets[2] if self.D >= 1 else 1] = 0
        return MapJet.from_matrix(self.n, self.D, mat)

    def truncate(self, D: int) -> "MapJet":
        return MapJet(c.truncate(D) for c in self.components)

    def max_abs(self, min_degree: int = 0, max_degree: int | None = None) -> float:
        return max(c.max_abs(min_degree, max_degree) for c in self.components)

    def _same_shape(self, other: "MapJet"):
        if not isinstance(other, MapJet) or (self.n, self.D) != (other.n, other.D):
            raise ShapeMismatch("map jet shapes differ")

    def __getitem__(self, j: int) -> Jet:
        return self.components[j]

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)

    def __add__(self, other: "MapJet") -> "MapJet":
        self._same_shape(other)
        return MapJet(a + b for a, b in zip(self, other))

    def __sub__(self, other: "MapJet") -> "MapJet":
        self._same_shape(other)
        return MapJet(a - b for a, b in zip(self, other))

    def __neg__(self):
        return MapJet(-a for a in self)

    def __mul__(self, scalar):
        return MapJet(a * scalar for a in self)

    __rmul__ = __mul__

    def __call__(self, point) -> np.ndarray:
        return np.array([jet_eval(c, point) for c in self.components])

    def __eq__(self, other):
        return isinstance(other, MapJet) and self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def __repr__(self):
        return "MapJet(\n  " + ",\n  ".join(repr(c) for c in self) + "\n)"


def max_deviation(a: MapJet, b: MapJet, max_degree: int | None = None) -> float:
    """Largest coefficient magnitude of ``a - b`` up to ``max_degree``."""
    return (a - b).max_abs(0, max_degree)


def _require_germ(f: MapJet, what: str):
    if not f.is_germ:
        raise NotAGerm(f"{what} must have zero constant terms")


def monomial_table(inner: MapJet) -> np.ndarray:
    """Rows hold the coefficients of ``inner**alpha`` for each basis monomial."""
    _require_germ(inner, "inner map")
    b = inner.basis
    rows = np.zeros((b.size, b.size), dtype=complex)
    rows[0, 0] = 1.0
    powers: list[Jet] = [Jet.constant(inner.n, inner.D, 1.0)]
    for i in range(1, b.size):
        p = jet_mul(powers[b.parent[i]], inner.components[b.parent_var[i]])
        powers.append(p)
        rows[i] = p.coeffs
    return rows


def map_compose(outer: MapJet, inner: MapJet) -> MapJet:
    """Jet of ``outer o inner`` truncated at D. ``inner`` must be a germ."""
    outer._same_shape(inner)
    table = monomial_table(inner)
    return MapJet.from_matrix(outer.n, outer.D, outer.matrix @ table)


def map_iterate(f: MapJet, k: int) -> MapJet:
    """``f^k`` as ``f o (f o (... o f))``; ``k = 0`` gives the identity."""
    if k < 0:
        raise ValueError("iteration count must be >= 0")
    _require_germ(f, "iterated map")
    result = MapJet.identity(f.n, f.D)
    for _ in range(k):
        result = map_compose(f, result)
    return result


def map_inverse(h: MapJet, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> MapJet:
    """Compositional inverse, fixing one more degree per sweep.

    Writes ``h = L + N`` and iterates ``g <- L^{-1} (id - N o g)``; after the
    sweep for degree ``d`` the inverse is exact through degree ``d``.
    """
    _require_germ(h, "inverted map")
    L = h.linear_part()
    if h.D < 1:
        return h
    s = np.linalg.svd(L, compute_uv=False)
    if s[-1] <= tol.min_rcond * max(s[0], 1e-300):
        raise SingularLinearPart(
            f"linear part is (numerically) singular: reciprocal condition {s[-1] / max(s[0], 1e-300):.3e}"
        )
    Linv = np.linalg.inv(L)
    ident = MapJet.identity(h.n, h.D)
    N = h.nonlinear_part()
    g = MapJet.linear(Linv, h.D)
    for _ in range(2, h.D + 1):
        rhs = ident - map_compose(N, g)
        g = MapJet.from_matrix(h.n, h.D, Linv @ rhs.matrix)
    return g


def jacobian_apply(G: MapJet, F: MapJet) -> MapJet:
    """Lie derivative ``G' . F``: component ``i`` is ``sum_j dG_i/dx_j * F_j``."""
    G._same_shape(F)
    _require_germ(F, "vector field")
    out = []
    for Gi in G:
        acc = Jet.zero(G.n, G.D)
        for j, Fj in enumerate(F):
            dG = Gi.derivative(j)
            if np.any(dG.coeffs):
                acc = acc + jet_mul(dG, Fj)
        out.append(acc)
    return MapJet(out)
