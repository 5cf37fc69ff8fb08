"""Finite-order Poincaré–Dulac normalization of map germs.

Given ``f(z) = Λz + ...`` with ``Λ`` diagonal, a near-identity change of
coordinates ``h`` is built degree by degree so that ``g = h^{-1} o f o h``
keeps only resonant monomials ``x^α`` in component ``j``, i.e. those with
``Λ^α = λ_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NearResonance, NonDiagonalLinearPart, NotAGerm, ShapeMismatch
from .jet_core import (
    DEFAULT_TOLERANCES,
    MapJet,
    MultiIndex,
    ToleranceProfile,
    map_compose,
    map_inverse,
)

MAX_ORDER_SEARCH = 1000


@dataclass(frozen=True)
class SpectrumInfo:
    eigenvalues: tuple[complex, ...]
    m: int
    scalar_mode: bool
    primitive_order: int | None
    tol: ToleranceProfile = DEFAULT_TOLERANCES

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def monomial_eigenvalue(self, alpha: Sequence[int]) -> complex:
        return complex(np.prod([lam**a for lam, a in zip(self.eigenvalues, alpha)]))

    def divisor(self, j: int, alpha: Sequence[int]) -> complex:
        return self.monomial_eigenvalue(alpha) - self.eigenvalues[j]


def root_order(lam: complex, tol: float, limit: int = MAX_ORDER_SEARCH) -> int | None:
    """Smallest ``p >= 1`` with ``|lam**p - 1| < tol``, or None up to ``limit``."""
    power = 1 + 0j
    for p in range(1, limit + 1):
        power *= lam
        if abs(power - 1) < tol:
            return p
    return None


def spectrum_of(f: MapJet, m: int, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> SpectrumInfo:
    """Read the spectrum off a linear part that must already be diagonal."""
    A = f.linear_part()
    off = A - np.diag(np.diag(A))
    scale = float(np.max(np.abs(A))) if A.size else 1.0
    if np.any(np.abs(off) >= tol.zero_test * max(1.0, scale)):
        raise NonDiagonalLinearPart(
            f"off-diagonal linear coefficients up to {np.max(np.abs(off)):.3e}; diagonalize first"
        )
    eig = tuple(complex(x) for x in np.diag(A))
    scalar = all(abs(e - eig[0]) < tol.zero_test * max(1.0, abs(eig[0])) for e in eig)
    order = root_order(eig[0], tol.primitivity) if scalar else None
    return SpectrumInfo(eig, m, scalar, order, tol)


def resonant(spec: SpectrumInfo, j: int, alpha: Sequence[int]) -> bool:
    """Whether monomial ``x^alpha`` in component ``j`` is resonant: ``Λ^α = λ_j``."""
    alpha = tuple(alpha)
    if len(alpha) != spec.n:
        raise ShapeMismatch(f"multi-index {alpha} does not match n={spec.n}")
    if sum(alpha) < 2:
        raise ValueError("resonance is only defined for degree >= 2")
    return abs(spec.divisor(j, alpha)) < spec.tol.zero_test


@dataclass
class NormalFormResult:
    g: MapJet
    h: MapJet
    h_inv: MapJet
    resonant_monomials: list[tuple[int, MultiIndex]]
    conjugacy_residual: float
    spectrum: SpectrumInfo
    order: int

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "eigenvalues": [[z.real, z.imag] for z in self.spectrum.eigenvalues],
            "resonant_monomials": [
                {"component": j, "alpha": list(a)} for j, a in self.resonant_monomials
            ],
            "conjugacy_residual": self.conjugacy_residual,
        }


def _homological_step(
    f: MapJet, d: int, spec: SpectrumInfo
) -> tuple[MapJet, list[tuple[int, MultiIndex]]]:
    """Degree-``d`` change ``id + h_d`` killing the non-resonant degree-``d`` terms of ``f``."""
    b = f.basis
    sl = b.degree_slice(d)
    mat = np.zeros((f.n, b.size), dtype=complex)
    mat[:, b.degree_slice(1)] = np.eye(f.n)
    kept = []
    floor = spec.tol.small_divisor_floor
    for j in range(f.n):
        coeffs = f[j].coeffs
        for idx in range(sl.start, sl.stop):
            alpha = b.monomials[idx]
            div = spec.divisor(j, alpha)
            if abs(div) < spec.tol.zero_test:
                kept.append((j, alpha))
                continue
            if coeffs[idx] == 0:
                continue
            if abs(div) < floor:
                raise NearResonance(
                    f"small divisor {abs(div):.3e} for component {j}, monomial {alpha}",
                    component=j, alpha=alpha, divisor=div,
                )
            mat[j, idx] = coeffs[idx] / div
    return MapJet.from_matrix(f.n, f.D, mat), kept


def normalize(
    f: MapJet, m: int, tol: ToleranceProfile = DEFAULT_TOLERANCES
) -> NormalFormResult:
    """Conjugate ``f`` to Poincaré–Dulac normal form through degree ``m``.

    Resonant coefficients of ``h`` are set to zero, so ``h`` is the minimal
    (and unique under that rule) normalizing change.

    Raises
    ------
    NotAGerm, NonDiagonalLinearPart, NearResonance
    """
    if not f.is_germ:
        raise NotAGerm("normalize needs a germ (zero constant terms)")
    if not (1 <= m <= f.D):
        raise ValueError(f"order m={m} must satisfy 1 <= m <= D={f.D}")
    spec = spectrum_of(f, m, tol)

    current = f
    H = MapJet.identity(f.n, f.D)
    resonant_terms: list[tuple[int, MultiIndex]] = []
    for d in range(2, m + 1):
        step, kept = _homological_step(current, d, spec)
        resonant_terms.extend(
            (j, a) for j, a in kept if not tol.is_zero(current[j][a])
        )
        if step == MapJet.identity(f.n, f.D):
            continue
        current = map_compose(map_compose(map_inverse(step, tol), current), step)
        H = map_compose(H, step)

    H_inv = map_inverse(H, tol)
    lhs = map_compose(H, current)
    rhs = map_compose(f, H)
    residual = (lhs - rhs).max_abs(0, m)
    resonant_terms.sort(key=lambda t: (sum(t[1]), t[0], [-e for e in t[1]]))
    return NormalFormResult(current, H, H_inv, resonant_terms, residual, spec, m)


@dataclass
class ResonanceReport:
    passed: bool
    violations: list[tuple[int, MultiIndex, complex]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "violations": [
                {"component": j, "alpha": list(a), "re": c.real, "im": c.imag}
                for j, a, c in self.violations
            ],
        }


def assert_resonant_only(g: MapJet, spec: SpectrumInfo, m: int) -> ResonanceReport:
    """List the non-resonant monomials of degree ``2..m`` still present in ``g``."""
    if not g.is_germ:
        raise NotAGerm("resonance check needs a germ")
    scale = g.max_abs(1, 1)
    bad = []
    for j, comp in enumerate(g):
        for alpha, c in comp.items():
            d = sum(alpha)
            if d < 2 or d > m:
                continue
            if not spec.tol.is_zero(c, scale) and not resonant(spec, j, alpha):
                bad.append((j, alpha, c))
    return ResonanceReport(not bad, bad)


def primitive_root(m: int, l: int = 1) -> complex:
    """``exp(2πi l/m)``; primitive when ``gcd(l, m) = 1``."""
    if math.gcd(l, m) != 1:
        raise ValueError(f"exp(2πi·{l}/{m}) is not primitive")
    return complex(np.exp(2j * np.pi * l / m))
