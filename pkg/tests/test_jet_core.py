import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from germflow.errors import NotAGerm, ShapeMismatch, SingularLinearPart
from germflow.jet_core import (
    Jet,
    MapJet,
    ToleranceProfile,
    basis,
    jacobian_apply,
    jet_eval,
    jet_mul,
    map_compose,
    map_inverse,
    map_iterate,
)

from factories import brute_mul, dict_of, diff_dict, naive_eval, random_germ, random_jet

seeds = st.integers(0, 2**32 - 1)


def one_d(D, terms):
    return MapJet.from_dicts(1, D, [terms])


class TestBasis:
    def test_graded_lex_order(self):
        assert basis(2, 2).monomials == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))

    def test_size_is_binomial(self):
        from math import comb
        for n in (1, 2, 3, 4):
            for D in (0, 3, 6):
                assert basis(n, D).size == comb(n + D, n)


class TestJet:
    def test_access_above_degree_is_an_error(self):
        a = Jet.from_dict(1, 2, {(1,): 1})
        with pytest.raises(IndexError):
            a[(3,)]

    def test_from_dict_drops_high_degree(self):
        a = Jet.from_dict(1, 2, {(1,): 1, (5,): 3})
        assert dict_of(a) == {(1,): 1}

    def test_immutable(self):
        a = Jet.from_dict(1, 2, {(1,): 1})
        with pytest.raises(ValueError):
            a.coeffs[0] = 1

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            jet_mul(Jet.zero(1, 2), Jet.zero(1, 3))


class TestJetMul:
    def test_binomial(self):
        a = Jet.from_dict(1, 2, {(0,): 1, (1,): 1})
        assert dict_of(a * a) == {(0,): 1, (1,): 2, (2,): 1}

    def test_annihilator(self):
        rng = np.random.default_rng(0)
        a = random_jet(rng, 2, 4)
        assert not np.any((a * Jet.zero(2, 4)).coeffs)

    @pytest.mark.parametrize("seed", range(5))
    def test_brute_force_convolution(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_jet(rng, 2, 4), random_jet(rng, 2, 4)
        expected = brute_mul(dict_of(a), dict_of(b), 4)
        got = a * b
        for alpha, c in got.items():
            assert abs(c - expected.get(alpha, 0)) < 1e-12

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(1, 3), st.integers(0, 8))
    def test_commutative_associative(self, seed, n, D):
        rng = np.random.default_rng(seed)
        a, b, c = (random_jet(rng, n, D) for _ in range(3))
        assert np.max(np.abs((a * b).coeffs - (b * a).coeffs)) < 1e-12
        lhs, rhs = (a * b) * c, a * (b * c)
        scale = max(1.0, np.max(np.abs(lhs.coeffs)))
        assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) < 1e-12 * scale

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        a, b = random_jet(rng, 3, 6), random_jet(rng, 3, 6)
        assert (a * b).coeffs.tobytes() == (a * b).coeffs.tobytes()


class TestCompose:
    def test_hand_expansion(self):
        f = one_d(4, {(1,): -1, (2,): 1})
        assert map_compose(f, f) == one_d(4, {(1,): 1, (3,): -2, (4,): 1})

    def test_identity_neutral(self):
        rng = np.random.default_rng(1)
        f = random_germ(rng, 2, 5, lam=0.5)
        assert map_compose(f, MapJet.identity(2, 5)) == f
        assert (map_compose(MapJet.identity(2, 5), f) - f).max_abs() < 1e-15

    def test_linear_maps(self):
        rng = np.random.default_rng(2)
        A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        B = rng.normal(size=(3, 3))
        got = map_compose(MapJet.linear(A, 3), MapJet.linear(B, 3))
        assert (got - MapJet.linear(A @ B, 3)).max_abs() < 1e-14

    def test_inner_must_be_germ(self):
        f = one_d(3, {(1,): 1})
        g = MapJet.from_dicts(1, 3, [{(0,): 1, (1,): 1}])
        with pytest.raises(NotAGerm):
            map_compose(f, g)

    @settings(max_examples=25, deadline=None)
    @given(seeds, st.integers(1, 3), st.integers(1, 5))
    def test_associative_and_linear_part(self, seed, n, D):
        rng = np.random.default_rng(seed)
        f, g, h = (random_germ(rng, n, D, A=rng.normal(size=(n, n))) for _ in range(3))
        lhs = map_compose(map_compose(f, g), h)
        rhs = map_compose(f, map_compose(g, h))
        scale = max(1.0, lhs.max_abs())
        assert (lhs - rhs).max_abs() < 1e-11 * scale
        fg = map_compose(f, g)
        assert np.allclose(fg.linear_part(), f.linear_part() @ g.linear_part(), rtol=0, atol=1e-13)


class TestIterate:
    def test_period_two_germ(self):
        f = one_d(4, {(1,): -1, (2,): 1})
        f2 = map_iterate(f, 2)
        assert f2[0][(2,)] == 0
        assert f2 == one_d(4, {(1,): 1, (3,): -2, (4,): 1})

    def test_zero_is_identity(self):
        f = one_d(4, {(1,): -1, (2,): 1})
        assert map_iterate(f, 0) == MapJet.identity(1, 4)

    def test_linear_root_of_unity(self):
        lam = np.exp(2j * np.pi / 5)
        f = MapJet.linear(lam * np.eye(2), 4)
        assert (map_iterate(f, 5) - MapJet.identity(2, 4)).max_abs() < 1e-14

    def test_rejects_non_germ(self):
        with pytest.raises(NotAGerm):
            map_iterate(MapJet.from_dicts(1, 2, [{(0,): 1}]), 2)

    @settings(max_examples=20, deadline=None)
    @given(seeds, st.integers(0, 4), st.integers(0, 4))
    def test_exponent_addition(self, seed, a, b):
        rng = np.random.default_rng(seed)
        f = random_germ(rng, 2, 5, lam=np.exp(0.7j), scale=0.5)
        lhs = map_iterate(f, a + b)
        rhs = map_compose(map_iterate(f, a), map_iterate(f, b))
        assert (lhs - rhs).max_abs() < 1e-10 * max(1.0, lhs.max_abs())

    def test_four_is_two_squared(self):
        rng = np.random.default_rng(7)
        f = random_germ(rng, 2, 6, lam=0.9j)
        f2 = map_iterate(f, 2)
        assert (map_iterate(f, 4) - map_compose(f2, f2)).max_abs() < 1e-12


class TestInverse:
    def test_one_d(self):
        h = one_d(3, {(1,): 1, (2,): 0.5})
        hinv = map_inverse(h)
        assert (hinv - one_d(3, {(1,): 1, (2,): -0.5, (3,): 0.5})).max_abs() < 1e-15
        assert (map_compose(h, hinv) - MapJet.identity(1, 3)).max_abs() < 1e-15

    def test_identity(self):
        assert map_inverse(MapJet.identity(2, 4)) == MapJet.identity(2, 4)

    def test_linear(self):
        A = np.array([[2, 1], [0, 1j]])
        got = map_inverse(MapJet.linear(A, 3))
        assert (got - MapJet.linear(np.linalg.inv(A), 3)).max_abs() < 1e-15

    def test_singular(self):
        with pytest.raises(SingularLinearPart):
            map_inverse(MapJet.linear(np.array([[1, 2], [2, 4]]), 3))

    def test_near_singular_respects_profile(self):
        A = np.diag([1.0, 1e-10])
        map_inverse(MapJet.linear(A, 2))
        with pytest.raises(SingularLinearPart):
            map_inverse(MapJet.linear(A, 2), ToleranceProfile(min_rcond=1e-8))

    @settings(max_examples=25, deadline=None)
    @given(seeds, st.integers(1, 3), st.integers(1, 6))
    def test_round_trip(self, seed, n, D):
        rng = np.random.default_rng(seed)
        A = np.eye(n) + 0.3 * rng.normal(size=(n, n))
        h = random_germ(rng, n, D, A=A)
        g = map_inverse(h)
        back = map_compose(h, g)
        # rounding in the composition scales with the inverse's coefficients,
        # which grow like 1/sigma_min(A)^D
        assert (back - MapJet.identity(n, D)).max_abs() < 1e-12 * max(1.0, g.max_abs())


class TestEval:
    def test_values(self):
        assert jet_eval(Jet.from_dict(1, 4, {(1,): 1, (3,): -2, (4,): 1}), [0]) == 0
        assert jet_eval(Jet.from_dict(1, 2, {(0,): 1, (1,): 2, (2,): 1}), [1]) == 4

    @pytest.mark.parametrize("seed", range(5))
    def test_naive_sum(self, seed):
        rng = np.random.default_rng(seed)
        a = random_jet(rng, 3, 5)
        z = rng.normal(size=3) * 0.7 + 1j * rng.normal(size=3) * 0.7
        assert abs(jet_eval(a, z) - naive_eval(dict_of(a), z)) < 1e-12 * max(1, abs(naive_eval(dict_of(a), z)))

    def test_shape(self):
        with pytest.raises(ShapeMismatch):
            jet_eval(Jet.zero(2, 2), [1, 2, 3])


class TestJacobianApply:
    def test_identity(self):
        rng = np.random.default_rng(4)
        F = random_germ(rng, 2, 4, A=rng.normal(size=(2, 2)))
        assert jacobian_apply(MapJet.identity(2, 4), F) == F

    def test_one_d(self):
        G = one_d(3, {(2,): 1})
        assert jacobian_apply(G, MapJet.identity(1, 3)) == one_d(3, {(2,): 2})

    @pytest.mark.parametrize("seed", range(5))
    def test_termwise_differentiation(self, seed):
        rng = np.random.default_rng(seed)
        D = 3
        G = MapJet([random_jet(rng, 2, D) for _ in range(2)])
        F = random_germ(rng, 2, D, A=rng.normal(size=(2, 2)))
        got = jacobian_apply(G, F)
        for i in range(2):
            expected = {}
            for j in range(2):
                part = brute_mul(diff_dict(dict_of(G[i]), j), dict_of(F[j]), D)
                for k, v in part.items():
                    expected[k] = expected.get(k, 0) + v
            for alpha, c in got[i].items():
                assert abs(c - expected.get(alpha, 0)) < 1e-12


def test_tolerance_profile_validation():
    with pytest.raises(ValueError):
        ToleranceProfile(zero_test=0)
    with pytest.raises(ValueError):
        ToleranceProfile(residual=2.0)
    with pytest.raises(ValueError):
        ToleranceProfile.from_dict({"bogus": 0.1})
    assert ToleranceProfile.from_dict({"residual": 1e-7}).residual == 1e-7
