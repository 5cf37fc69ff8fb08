import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from germflow.errors import DomainExit
from germflow.numeric_sim import (
    EvaluableField,
    complexify,
    integrate,
    isochrony_scan,
    measure_period,
    realify,
    sphere_samples,
)

from factories import counterexample_flow

TWO_PI = 2 * math.pi


def rotation(omega=TWO_PI):
    return EvaluableField.from_polynomials([{(1,): 1j * omega}])


def riccati():
    return EvaluableField.from_polynomials([{(1,): 1j * TWO_PI, (2,): 1}])


def counterexample():
    return EvaluableField.from_polynomials([{(1, 0): 1j}, {(0, 1): -1j, (1, 2): 1}])


class TestField:
    def test_realification_layout(self):
        z = np.array([1 + 2j, 3 - 4j])
        assert list(realify(z)) == [1, 2, 3, -4]
        assert np.array_equal(complexify(realify(z)), z)

    def test_must_vanish_at_origin(self):
        with pytest.raises(ValueError):
            EvaluableField.from_polynomials([{(0,): 1.0}])

    def test_jacobian_finite_difference(self):
        V = counterexample()
        z = np.array([0.3 + 0.1j, -0.2 + 0.4j])
        J = V.jacobian(z)
        h = 1e-7
        for k in range(2):
            dz = np.zeros(2, complex)
            dz[k] = h
            fd = (V(z + dz) - V(z - dz)) / (2 * h)
            assert np.allclose(J[:, k], fd, atol=1e-8)


class TestIntegrate:
    def test_quarter_turn(self):
        traj = integrate(rotation(), [0.1], 0.25)
        assert abs(traj.end[0] - 0.1j) < 1e-10

    def test_full_turn(self):
        traj = integrate(rotation(), [0.1], 1.0)
        assert abs(traj.end[0] - 0.1) < 1e-10

    def test_counterexample_endpoint(self):
        traj = integrate(counterexample(), [0.1, 0.1], TWO_PI)
        assert abs(traj.end[1] - 0.1 / (1 - TWO_PI * 0.01)) < 1e-10
        assert abs(traj.end[1] - 0.1067046) < 1e-6
        assert np.max(np.abs(traj.end - counterexample_flow(TWO_PI, [0.1, 0.1]))) < 1e-10

    def test_dense_output(self):
        traj = integrate(counterexample(), [0.1, 0.1], 3.0)
        ts = np.linspace(0, 3.0, 101)
        err = max(np.max(np.abs(traj.at(t) - counterexample_flow(t, [0.1, 0.1]))) for t in ts)
        assert err < 1e-10

    def test_matches_scipy(self):
        V = riccati()
        z0 = [0.08 + 0.03j]
        sol = solve_ivp(lambda t, y: V.real_rhs(y), (0, 0.8), realify(z0), method="DOP853",
                        rtol=1e-13, atol=1e-15)
        ours = integrate(V, z0, 0.8)
        assert abs(ours.end[0] - complexify(sol.y[:, -1])[0]) < 1e-10

    def test_times_increase(self):
        traj = integrate(riccati(), [0.05], 1.0)
        assert np.all(np.diff(traj.times) > 0)

    def test_convergence_order(self):
        errs = [abs(integrate(rotation(), [0.1], 1.0, tol).end[0] - 0.1) for tol in (1e-8, 1e-10)]
        assert errs[0] / errs[1] >= 2**4

    def test_modulus_conservation(self):
        traj = integrate(rotation(3.0), [0.2 + 0.1j], 5.0, 1e-12)
        ts = np.linspace(0, 5.0, 400)
        drift = max(abs(abs(traj.at(t)[0]) - abs(0.2 + 0.1j)) for t in ts)
        assert drift < 1e-9

    def test_domain_exit(self):
        V = EvaluableField.from_polynomials([{(2,): 1.0}], domain_radius=0.5)
        with pytest.raises(DomainExit):
            integrate(V, [0.4], 5.0)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            integrate(rotation(), [2.0], 1.0)
        with pytest.raises(ValueError):
            integrate(rotation(), [0.1], 1.0, tol=1e-3)


class TestMeasurePeriod:
    def test_rotation(self):
        rep = measure_period(rotation(), [0.1], 0.01, 1.5)
        assert abs(rep.measured_period - 1) < 1e-8

    def test_riccati(self):
        rep = measure_period(riccati(), [0.05], 0.01, 1.5)
        assert abs(rep.measured_period - 1) < 1e-6

    def test_counterexample_no_return(self):
        rep = measure_period(counterexample(), [0.1, 0.1], 0.01 * TWO_PI, 13, return_tol=1e-4)
        assert rep.measured_period is None
        expected = abs(0.1 / (1 - TWO_PI * 0.01) - 0.1)
        assert abs(rep.return_distance - expected) < 1e-4
        assert abs(rep.closest_time - TWO_PI) < 0.01

    def test_t_min_positive(self):
        with pytest.raises(ValueError):
            measure_period(rotation(), [0.1], 0.0, 1.0)


class TestScan:
    def test_sphere_samples(self):
        pts = sphere_samples(2, 0.1, 8)
        assert np.allclose(np.linalg.norm(pts, axis=1), 0.1)
        assert len({tuple(np.round(p, 12)) for p in pts}) == 8
        assert np.array_equal(pts, sphere_samples(2, 0.1, 8))

    def test_riccati(self):
        rep = isochrony_scan(riccati(), [0.05, 0.1], 8, 1.0)
        assert rep.passed
        assert all(abs(s.measured_period - 1) < 1e-6 for s in rep.samples)

    def test_linear(self):
        rep = isochrony_scan(rotation(1.0), [0.1], 4, TWO_PI)
        assert rep.passed

    def test_counterexample_fails_everywhere(self):
        rep = isochrony_scan(counterexample(), [0.1], 4, TWO_PI)
        assert not rep.passed
        assert len(rep.failures) == 4
        assert all(abs(s.z0[1]) > 0 for s in rep.samples)

    def test_workers_match_serial(self):
        a = isochrony_scan(riccati(), [0.05], 3, 1.0)
        b = isochrony_scan(riccati(), [0.05], 3, 1.0, workers=2)
        assert [s.measured_period for s in a.samples] == [s.measured_period for s in b.samples]
