"""Jets of time-t maps of holomorphic vector fields via Lie series.

For ``ż = F(z)`` with ``F(0) = 0`` the time-t map is
``Φ_t = Σ_k t^k/k! · L_F^k(id)`` with ``L_F G = G'·F``. On jets the Lie
recursion is exact degree by degree, so the only approximation is where the
series is cut off. Long times are split into ``N`` substeps whose maps are
composed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import FlowPostconditionError, NotAGerm, SeriesNotConverged
from .jet_core import (
    DEFAULT_TOLERANCES,
    MapJet,
    ToleranceProfile,
    jacobian_apply,
    map_compose,
)


@dataclass(frozen=True)
class VectorFieldJet:
    F: MapJet

    def __post_init__(self):
        if not self.F.is_germ:
            raise NotAGerm("vector field must vanish at the origin")

    @property
    def A(self) -> np.ndarray:
        return self.F.linear_part()

    @property
    def n(self) -> int:
        return self.F.n

    @property
    def D(self) -> int:
        return self.F.D


@dataclass(frozen=True)
class FlowOptions:
    substeps: Union[int, str] = "auto"
    max_lie_terms: int = 60
    term_tol: float = 1e-16

    def __post_init__(self):
        if self.substeps != "auto" and (not isinstance(self.substeps, int) or self.substeps < 1):
            raise ValueError(f"substeps must be a positive integer or 'auto', got {self.substeps!r}")
        if self.max_lie_terms < 1 or self.term_tol <= 0:
            raise ValueError("max_lie_terms must be >= 1 and term_tol > 0")

    def resolve_substeps(self, tau: float, A: np.ndarray) -> int:
        if self.substeps != "auto":
            return int(self.substeps)
        norm = float(np.max(np.abs(A))) if A.size else 0.0
        return max(1, math.ceil(4 * abs(tau) * (1 + norm)))


@dataclass
class FlowResult:
    phi: MapJet
    tau: float
    lie_terms_used: int
    substeps_used: int
    linear_part_error: float


def matrix_exponential(A, tau: float = 1.0) -> np.ndarray:
    """``exp(tau·A)`` by scaling and squaring with a Taylor core."""
    M = np.asarray(A, dtype=complex) * tau
    n = M.shape[0]
    norm = float(np.max(np.sum(np.abs(M), axis=1))) if n else 0.0
    squarings = max(0, math.ceil(math.log2(norm / 0.125))) if norm > 0.125 else 0
    M = M / 2.0**squarings
    # ||M|| <= 1/8: 18 terms push the Taylor tail below double rounding
    E = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for k in range(1, 19):
        term = term @ M / k
        E = E + term
    for _ in range(squarings):
        E = E @ E
    return E


def _lie_step(V: VectorFieldJet, h: float, opts: FlowOptions) -> tuple[MapJet, int]:
    G = MapJet.identity(V.n, V.D)
    total = G.matrix.copy()
    factor = 1.0
    quiet = 0
    last = math.inf
    for k in range(1, opts.max_lie_terms + 1):
        G = jacobian_apply(G, V.F)
        factor *= h / k
        term = G.matrix * factor
        total += term
        size = float(np.max(np.abs(term)))
        # two consecutive small terms guard against even/odd cancellation
        quiet = quiet + 1 if size < opts.term_tol else 0
        if quiet >= 2:
            return MapJet.from_matrix(V.n, V.D, total), k
        last = size
    raise SeriesNotConverged(
        f"Lie series term still {last:.3e} after {opts.max_lie_terms} terms "
        f"(step {h:g}); increase substeps"
    )


def flow_jet(
    V: VectorFieldJet,
    tau: float,
    opts: FlowOptions = FlowOptions(),
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> FlowResult:
    """Jet of the time-``tau`` map of ``V``.

    Raises :class:`SeriesNotConverged` when a substep's series does not
    settle within ``opts.max_lie_terms`` and :class:`FlowPostconditionError`
    when the linear part drifts from ``exp(tau·A)`` beyond ``tol.residual``.
    """
    if isinstance(tau, complex) or not np.isrealobj(tau):
        raise TypeError("flow time must be real")
    tau = float(tau)
    if not math.isfinite(tau):
        raise ValueError("flow time must be finite")
    if tau == 0.0:
        phi = MapJet.identity(V.n, V.D)
        return FlowResult(phi, tau, 0, 0, 0.0)

    N = opts.resolve_substeps(tau, V.A)
    step, terms = _lie_step(V, tau / N, opts)
    phi = step
    for _ in range(N - 1):
        phi = map_compose(step, phi)

    expected = matrix_exponential(V.A, tau)
    err = float(np.max(np.abs(phi.linear_part() - expected))) if V.D >= 1 else 0.0
    if err >= tol.residual:
        raise FlowPostconditionError(
            f"linear part of the time-{tau:g} map differs from exp(tA) by {err:.3e}"
        )
    return FlowResult(phi, tau, terms, N, err)


@dataclass
class SemigroupReport:
    s: float
    t: float
    residual: float


def semigroup_check(
    V: VectorFieldJet, s: float, t: float, opts: FlowOptions = FlowOptions()
) -> SemigroupReport:
    """Compare ``Φ_{s+t}`` with ``Φ_s o Φ_t`` coefficient-wise."""
    direct = flow_jet(V, s + t, opts).phi
    split = map_compose(flow_jet(V, s, opts).phi, flow_jet(V, t, opts).phi)
    return SemigroupReport(s, t, (direct - split).max_abs())
