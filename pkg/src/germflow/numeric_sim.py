"""Numerical orbit integration, independent of the jet engine.

Fields are evaluated straight from their polynomial terms. The complex
system is integrated as a real one in the layout ``(u1, v1, ..., un, vn)``
with ``z_k = u_k + i v_k``, using the Dormand–Prince 5(4) pair and its
continuous extension for dense output.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainExit, StepUnderflow

DEFAULT_TOL = 1e-12
DEFAULT_RETURN_TOL = 1e-8
DEFAULT_PERIOD_TOL = 1e-6


@dataclass(frozen=True)
class EvaluableField:
    """Polynomial vector field ``ż = F(z)`` given by explicit terms.

    ``terms[j]`` is a tuple of ``(exponents, coefficient)`` pairs for
    component ``j``.
    """

    terms: tuple[tuple[tuple[tuple[int, ...], complex], ...], ...]
    domain_radius: float = 1.0

    def __post_init__(self):
        if self.domain_radius <= 0:
            raise ValueError("domain radius must be positive")
        n = len(self.terms)
        for comp in self.terms:
            for alpha, _ in comp:
                if len(alpha) != n:
                    raise ValueError(f"exponent tuple {alpha} does not match n={n}")
        origin = self(np.zeros(n, dtype=complex))
        if np.any(origin != 0):
            raise ValueError("field must vanish at the origin")

    @classmethod
    def from_polynomials(
        cls, comps: Sequence[Mapping[Sequence[int], complex]], domain_radius: float = 1.0
    ) -> "EvaluableField":
        terms = tuple(
            tuple((tuple(int(e) for e in a), complex(c)) for a, c in sorted(p.items()) if c != 0)
            for p in comps
        )
        return cls(terms, domain_radius)

    @property
    def n(self) -> int:
        return len(self.terms)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.zeros(self.n, dtype=complex)
        for j, comp in enumerate(self.terms):
            acc = 0j
            for alpha, c in comp:
                mono = c
                for zk, e in zip(z, alpha):
                    if e:
                        mono *= zk**e
                acc += mono
            out[j] = acc
        return out

    def jacobian(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        J = np.zeros((self.n, self.n), dtype=complex)
        for j, comp in enumerate(self.terms):
            for alpha, c in comp:
                for k, e in enumerate(alpha):
                    if e == 0:
                        continue
                    mono = c * e
                    for i, (zi, ei) in enumerate(zip(z, alpha)):
                        p = ei - 1 if i == k else ei
                        if p:
                            mono *= zi**p
                    J[j, k] += mono
        return J

    def real_rhs(self, y: np.ndarray) -> np.ndarray:
        return realify(self(complexify(y)))


def realify(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    y = np.empty(2 * z.size)
    y[0::2] = z.real
    y[1::2] = z.imag
    return y


def complexify(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return y[0::2] + 1j * y[1::2]


# Dormand–Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension (Hairer, Nørsett & Wanner, dopri5)
_DENSE = np.array([
    -12715105075 / 11282082432, 0, 87487479700 / 32700410799,
    -10690763975 / 1880347072, 701980252875 / 199316789632,
    -1453857185 / 822651844, 69997945 / 29380423,
])


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    tol: float
    dense: list[np.ndarray] = field(repr=False, default_factory=list)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def end(self) -> np.ndarray:
        return self.states[-1]

    def at(self, t: float) -> np.ndarray:
        """Dense-output state at time ``t`` inside the integrated window."""
        if t < self.times[0] or t > self.times[-1]:
            raise ValueError(f"t={t} outside [{self.times[0]}, {self.times[-1]}]")
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = min(max(i, 0), len(self.dense) - 1)
        t0, t1 = self.times[i], self.times[i + 1]
        return complexify(_dense_eval(self.dense[i], (t - t0) / (t1 - t0)))

    def sample(self, ts) -> np.ndarray:
        return np.array([self.at(t) for t in ts])


def _dense_eval(rc: np.ndarray, theta: float) -> np.ndarray:
    th1 = 1.0 - theta
    return rc[0] + theta * (rc[1] + th1 * (rc[2] + theta * (rc[3] + th1 * rc[4])))


def _rk_stages(rhs, y, h, k1):
    K = [k1]
    for s in range(1, 7):
        ys = y + h * sum(a * k for a, k in zip(_A[s], K))
        K.append(rhs(ys))
    return np.array(K)


def integrate(
    V: EvaluableField,
    z0,
    t_end: float,
    tol: float = DEFAULT_TOL,
    max_steps: int = 1_000_000,
) -> Trajectory:
    """Adaptive Dormand–Prince integration from ``t = 0`` to ``t_end``.

    ``tol`` is used as both absolute and relative local error tolerance.
    Raises :class:`DomainExit` once ``|z|`` exceeds twice the field's domain
    radius and :class:`StepUnderflow` if the step size collapses.
    """
    z0 = np.asarray(z0, dtype=complex).reshape(-1)
    if z0.size != V.n:
        raise ValueError(f"initial point has {z0.size} entries, field has n={V.n}")
    if np.linalg.norm(z0) >= V.domain_radius:
        raise ValueError(f"|z0| = {np.linalg.norm(z0):.3g} is outside the domain radius {V.domain_radius}")
    if not (1e-14 <= tol <= 1e-6):
        raise ValueError("tol must lie in [1e-14, 1e-6]")
    if not t_end > 0:
        raise ValueError("t_end must be positive")

    rhs = V.real_rhs
    y = realify(z0)
    t = 0.0
    f = rhs(y)
    times, states, dense = [0.0], [y.copy()], []

    scale0 = tol + tol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale0) ** 2))
    d1 = np.sqrt(np.mean((f / scale0) ** 2))
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h = min(h, t_end)

    for _ in range(max_steps):
        if t >= t_end:
            break
        h = min(h, t_end - t)
        if h < 1e-14 * max(1.0, abs(t)):
            raise StepUnderflow(f"step size underflow at t={t:.6g}", t=t)
        K = _rk_stages(rhs, y, h, f)
        y_new = y + h * (_B @ K)
        err_vec = h * (_E @ K)
        scale = tol + tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            f_new = K[6]
            ydiff = y_new - y
            bspl = h * f - ydiff
            rc = np.array([
                y, ydiff, bspl, ydiff - h * f_new - bspl, h * (_DENSE @ K),
            ])
            t = t + h if t + h < t_end else t_end
            y, f = y_new, f_new
            times.append(t)
            states.append(y.copy())
            dense.append(rc)
            if np.linalg.norm(complexify(y)) > 2 * V.domain_radius:
                raise DomainExit(f"orbit left the ball of radius {2 * V.domain_radius} at t={t:.6g}",
                                 t=t, state=complexify(y))
            factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            factor = max(0.2, 0.9 * err ** -0.2)
        h *= factor
    else:
        raise StepUnderflow(f"exceeded {max_steps} steps before t_end", t=t)

    return Trajectory(
        np.array(times), np.array([complexify(s) for s in states]), tol, dense
    )


@dataclass
class PeriodReport:
    z0: np.ndarray
    measured_period: float | None
    return_distance: float | None
    closest_time: float | None
    t_min: float
    t_max: float

    def to_dict(self) -> dict:
        return {
            "z0": [[c.real, c.imag] for c in self.z0],
            "measured_period": self.measured_period,
            "return_distance": self.return_distance,
            "closest_time": self.closest_time,
            "t_min": self.t_min,
            "t_max": self.t_max,
        }


def _refine_minimum(V, traj, z0, a, b, sa, iters=60):
    """Safeguarded Newton on d/dt |z(t) - z0|^2 inside the bracket [a, b]."""

    def slope(t):
        z = traj.at(t)
        w = z - z0
        Fz = V(z)
        s1 = 2 * np.real(np.vdot(w, Fz))
        s2 = 2 * np.real(np.vdot(Fz, Fz)) + 2 * np.real(np.vdot(w, V.jacobian(z) @ Fz))
        return s1, s2

    t = 0.5 * (a + b)
    for _ in range(iters):
        s1, s2 = slope(t)
        if s1 == 0:
            break
        if (s1 < 0) == (sa < 0):
            a = t
        else:
            b = t
        step = s1 / s2 if s2 > 0 else None
        t_new = t - step if step is not None else None
        if t_new is None or not (a < t_new < b):
            t_new = 0.5 * (a + b)
        if abs(t_new - t) <= 4e-16 * max(1.0, abs(t)):
            t = t_new
            break
        t = t_new
    return t


def measure_period(
    V: EvaluableField,
    z0,
    t_min: float,
    t_max: float,
    return_tol: float = DEFAULT_RETURN_TOL,
    tol: float = DEFAULT_TOL,
    samples_per_step: int = 4,
) -> PeriodReport:
    """First return time to ``z0`` after ``t_min``, or ``None`` before ``t_max``.

    Local minima of ``|z(t) - z0|^2`` are bracketed on the dense output and
    refined with Newton steps using the exact time derivative from the field.
    """
    if t_min <= 0:
        raise ValueError("t_min must be positive")
    if t_max <= t_min:
        raise ValueError("t_max must exceed t_min")
    z0 = np.asarray(z0, dtype=complex).reshape(-1)
    traj = integrate(V, z0, t_max, tol)

    grid = []
    for i in range(len(traj.times) - 1):
        t0, t1 = traj.times[i], traj.times[i + 1]
        if t1 < t_min:
            continue
        for s in range(samples_per_step):
            grid.append(t0 + (t1 - t0) * s / samples_per_step)
    grid.append(traj.t_end)
    grid = np.array([t for t in grid if t >= t_min])

    def slope(t):
        z = traj.at(t)
        return 2 * np.real(np.vdot(z - z0, V(z)))

    best = (None, math.inf)
    prev_t, prev_s = grid[0], slope(grid[0])
    for t in grid[1:]:
        s = slope(t)
        if prev_s < 0 <= s:
            tr = _refine_minimum(V, traj, z0, prev_t, t, prev_s)
            dist = float(np.linalg.norm(traj.at(tr) - z0))
            if dist < return_tol:
                return PeriodReport(z0, float(tr), dist, float(tr), t_min, t_max)
            if dist < best[1]:
                best = (float(tr), dist)
        prev_t, prev_s = t, s
    return PeriodReport(z0, None, None if best[0] is None else best[1], best[0], t_min, t_max)


def _kronecker(count: int, dim: int) -> np.ndarray:
    # R_d sequence: additive recurrence on the generalized golden ratio
    phi = 2.0
    for _ in range(64):
        phi = (1 + phi) ** (1.0 / (dim + 1))
    alpha = np.array([phi ** -(k + 1) for k in range(dim)]) % 1.0
    idx = np.arange(1, count + 1)[:, None]
    return (0.5 + idx * alpha) % 1.0


def sphere_samples(n: int, radius: float, count: int) -> np.ndarray:
    """Deterministic, well-spread points on the sphere ``|z| = radius`` in C^n."""
    u = _kronecker(count, 2 * n - 1)
    pts = np.empty((count, n), dtype=complex)
    for i, row in enumerate(u):
        phases = np.exp(2j * np.pi * row[:n])
        if n == 1:
            mods = np.array([1.0])
        else:
            # stick-breaking on squared moduli gives uniform weight on the simplex
            w = np.empty(n)
            rest = 1.0
            for k, v in enumerate(row[n:]):
                share = 1.0 - v ** (1.0 / (n - 1 - k))
                w[k] = rest * share
                rest -= w[k]
            w[-1] = rest
            mods = np.sqrt(w)
        pts[i] = radius * mods * phases
    return pts


@dataclass
class ScanReport:
    passed: bool
    expected_T: float
    period_tol: float
    radii: list[float]
    samples: list[PeriodReport]
    failures: list[tuple[int, str]]

    def to_dict(self) -> dict:
        return {
            "check": "isochrony-scan",
            "passed": self.passed,
            "expected_T": self.expected_T,
            "period_tol": self.period_tol,
            "radii": self.radii,
            "samples": [s.to_dict() for s in self.samples],
            "failures": [{"index": i, "reason": r} for i, r in self.failures],
        }


def _measure_job(args):
    V, z0, t_min, t_max, return_tol, tol = args
    return measure_period(V, z0, t_min, t_max, return_tol, tol)


def isochrony_scan(
    V: EvaluableField,
    radii: Sequence[float],
    samples_per_radius: int,
    expected_T: float,
    period_tol: float = DEFAULT_PERIOD_TOL,
    return_tol: float = DEFAULT_RETURN_TOL,
    tol: float = DEFAULT_TOL,
    t_min: float | None = None,
    t_max: float | None = None,
    workers: int = 1,
) -> ScanReport:
    """Measure the first-return time of sample orbits on spheres of given radii."""
    if expected_T <= 0:
        raise ValueError("expected_T must be positive")
    for r in radii:
        if not (0 < r < V.domain_radius):
            raise ValueError(f"radius {r} not inside the domain radius {V.domain_radius}")
    t_min = 0.01 * expected_T if t_min is None else t_min
    t_max = 1.25 * expected_T if t_max is None else t_max

    points = [z for r in radii for z in sphere_samples(V.n, r, samples_per_radius)]
    jobs = [(V, z, t_min, t_max, return_tol, tol) for z in points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_measure_job, jobs))
    else:
        reports = [_measure_job(j) for j in jobs]

    failures = []
    for i, rep in enumerate(reports):
        T = rep.measured_period
        if T is None:
            failures.append((i, "no return within return tolerance"))
        elif T < expected_T - period_tol:
            failures.append((i, f"short period {T:.12g}"))
        elif abs(T - expected_T) > period_tol:
            failures.append((i, f"period {T:.12g} differs from {expected_T:.12g}"))
    return ScanReport(not failures, expected_T, period_tol, list(radii), reports, failures)
