"""Executable checks of the iteration formula and the isochronous center theorem.

Each verifier returns a plain dataclass report with a ``passed`` flag and a
``to_dict`` rendering; hypothesis failures raise.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import HypothesisViolated, NonScalarLinearPart, NotAGerm, PrimitivityFailed
from .flow_map import FlowOptions, VectorFieldJet, flow_jet, matrix_exponential
from .jet_core import (
    DEFAULT_TOLERANCES,
    MapJet,
    ToleranceProfile,
    map_iterate,
)


def _scalar_of(A: np.ndarray, tol: ToleranceProfile) -> complex | None:
    lam = complex(A[0, 0])
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.all(np.abs(A - lam * np.eye(A.shape[0])) < tol.zero_test * scale):
        return lam
    return None


def _per_degree(f: MapJet) -> dict[int, float]:
    return {d: f.max_abs(d, d) for d in range(f.D + 1)}


@dataclass
class IterationReport:
    passed: bool
    m: int
    lam: complex
    max_residual: float
    residual_by_degree: dict[int, float]
    higher_degrees: dict[int, float]
    iterate: MapJet = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "check": "iteration-formula",
            "passed": self.passed,
            "m": self.m,
            "lambda": [self.lam.real, self.lam.imag],
            "max_residual": self.max_residual,
            "residual_by_degree": {str(k): v for k, v in self.residual_by_degree.items()},
            "unjudged_higher_degrees": {str(k): v for k, v in self.higher_degrees.items()},
        }


def verify_iteration_formula(
    f: MapJet, m: int, tol: ToleranceProfile = DEFAULT_TOLERANCES
) -> IterationReport:
    """Check that ``f^m - id`` has no terms of degree ``<= m``.

    Requires ``f'(0) = λI`` with ``λ`` a primitive ``m``-th root of unity.
    Degrees ``m+1..D`` are reported but never judged.
    """
    if not f.is_germ:
        raise NotAGerm("iteration formula applies to germs")
    if not (1 <= m <= f.D):
        raise ValueError(f"need 1 <= m <= D={f.D}, got m={m}")
    lam = _scalar_of(f.linear_part(), tol)
    if lam is None:
        raise NonScalarLinearPart("linear part is not a multiple of the identity")
    if abs(lam**m - 1) > tol.primitivity:
        raise PrimitivityFailed(f"λ^{m} - 1 = {abs(lam**m - 1):.3e}: λ is not an m-th root of unity")
    for j in range(1, m):
        if abs(lam**j - 1) <= tol.primitivity:
            raise PrimitivityFailed(f"λ^{j} = 1 with {j} < {m}: λ is not primitive")

    fm = map_iterate(f, m)
    diff = fm - MapJet.identity(f.n, f.D)
    by_degree = _per_degree(diff)
    judged = {d: v for d, v in by_degree.items() if d <= m}
    higher = {d: v for d, v in by_degree.items() if d > m}
    worst = max(judged.values())
    return IterationReport(worst < tol.residual, m, lam, worst, judged, higher, fm)


@dataclass
class CenterReport:
    passed: bool
    omega: float
    period: float
    max_residual: float
    residual_by_degree: dict[int, float]
    lie_terms_used: int
    substeps_used: int
    phi: MapJet = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "check": "isochronous-center",
            "passed": self.passed,
            "omega": self.omega,
            "period": self.period,
            "max_residual": self.max_residual,
            "residual_by_degree": {str(k): v for k, v in self.residual_by_degree.items()},
            "lie_terms_used": self.lie_terms_used,
            "substeps_used": self.substeps_used,
        }


def _require_rotation(V: VectorFieldJet, omega: float, tol: ToleranceProfile):
    A = V.A
    target = 1j * omega * np.eye(V.n)
    scale = max(1.0, abs(omega))
    dev = float(np.max(np.abs(A - target)))
    if dev >= tol.zero_test * scale:
        eig = np.linalg.eigvals(A)
        raise HypothesisViolated(
            f"F'(0) is not {omega:g}i·I (deviation {dev:.3e}; eigenvalues "
            + ", ".join(f"{e:.6g}" for e in eig) + ")"
        )


def verify_isochronous_center(
    V: VectorFieldJet,
    omega: float,
    opts: FlowOptions = FlowOptions(),
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
    threshold: float | None = None,
) -> CenterReport:
    """Check ``Φ_T = id`` through degree D for ``T = 2π/|ω|``, given ``F'(0) = ωi·I``."""
    omega = float(omega)
    if omega == 0:
        raise HypothesisViolated("ω must be nonzero")
    _require_rotation(V, omega, tol)
    T = 2 * math.pi / abs(omega)
    res = flow_jet(V, T, opts, tol)
    diff = res.phi - MapJet.identity(V.n, V.D)
    by_degree = _per_degree(diff)
    worst = max(by_degree.values())
    limit = tol.residual if threshold is None else threshold
    return CenterReport(
        worst < limit, omega, T, worst, by_degree, res.lie_terms_used, res.substeps_used, res.phi
    )


@dataclass
class FractionalIterateReport:
    m: int
    T: float
    residual: float
    linear_part_error: float

    def to_dict(self) -> dict:
        return {"check": "fractional-iterate", **asdict(self)}


def verify_fractional_iterate(
    V: VectorFieldJet, T: float, m: int, opts: FlowOptions = FlowOptions()
) -> FractionalIterateReport:
    """Compare ``(Φ_{T/m})^m`` with ``Φ_T``, and ``Φ_{T/m}'(0)`` with ``exp((T/m)A)``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if T <= 0:
        raise ValueError("T must be positive")
    part = flow_jet(V, T / m, opts).phi
    whole = flow_jet(V, T, opts).phi
    residual = (map_iterate(part, m) - whole).max_abs()
    lin = float(np.max(np.abs(part.linear_part() - matrix_exponential(V.A, T / m))))
    return FractionalIterateReport(m, T, residual, lin)


@dataclass
class IsolatedFixedPointVerdict:
    passed: bool
    k: int
    determinant: complex
    predicted: float

    def to_dict(self) -> dict:
        return {
            "check": "isolated-fixed-point",
            "passed": self.passed,
            "k": self.k,
            "abs_determinant": abs(self.determinant),
            "predicted": self.predicted,
        }


def check_isolated_fixed_point_criterion(
    V: VectorFieldJet,
    k: int,
    T: float,
    opts: FlowOptions = FlowOptions(),
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
    floor: float = 1e-6,
) -> IsolatedFixedPointVerdict:
    """``det(Φ_{T/k}'(0) - I)`` must stay away from 0 for ``k >= 2``.

    The prediction from ``F'(0) = (2π/T)i·I`` is ``|e^{2πi/k} - 1|^n``.
    """
    if k < 2:
        raise ValueError("criterion needs k >= 2 (k = 1 gives a zero divisor)")
    if T <= 0:
        raise ValueError("T must be positive")
    _require_rotation(V, 2 * math.pi / T, tol)
    lin = flow_jet(V, T / k, opts, tol).phi.linear_part()
    det = complex(np.linalg.det(lin - np.eye(V.n)))
    predicted = abs(np.exp(2j * math.pi / k) - 1) ** V.n
    return IsolatedFixedPointVerdict(abs(det) > floor, k, det, predicted)


@dataclass
class ClosedFormReport:
    tau: float
    residual: float
    residual_by_degree: dict[int, float]

    def passed(self, threshold: float) -> bool:
        return self.residual < threshold

    def to_dict(self) -> dict:
        return {
            "check": "closed-form-flow",
            "tau": self.tau,
            "residual": self.residual,
            "residual_by_degree": {str(k): v for k, v in self.residual_by_degree.items()},
        }


def compare_flow_closed_form(
    V: VectorFieldJet, closed_form: MapJet, tau: float, opts: FlowOptions = FlowOptions()
) -> ClosedFormReport:
    phi = flow_jet(V, tau, opts).phi
    diff = phi - closed_form
    return ClosedFormReport(float(tau), diff.max_abs(), _per_degree(diff))
