import itertools

import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, settings, strategies as st

from germflow.errors import NearResonance, NonDiagonalLinearPart, NotAGerm
from germflow.jet_core import MapJet, ToleranceProfile, map_compose
from germflow.normal_form import (
    SpectrumInfo,
    assert_resonant_only,
    normalize,
    primitive_root,
    resonant,
    root_order,
    spectrum_of,
)

from factories import random_germ

seeds = st.integers(0, 2**32 - 1)


def spec_for(eigs, m=2):
    eigs = tuple(complex(e) for e in eigs)
    scalar = all(e == eigs[0] for e in eigs)
    return SpectrumInfo(eigs, m, scalar, root_order(eigs[0], 1e-6) if scalar else None)


def one_d(D, terms):
    return MapJet.from_dicts(1, D, [terms])


class TestResonant:
    def test_minus_one(self):
        s = spec_for([-1])
        assert not resonant(s, 0, (2,))
        assert resonant(s, 0, (3,))

    @pytest.mark.parametrize("m", [2, 3, 4, 5, 6, 7])
    def test_primitive_root_has_no_low_resonance(self, m):
        lam = primitive_root(m)
        s = spec_for([lam, lam], m)
        for d in range(2, m + 1):
            for a in range(d + 1):
                assert not resonant(s, 0, (a, d - a))
                assert not resonant(s, 1, (a, d - a))
        # first resonance sits at degree m + 1
        assert resonant(s, 0, (m + 1, 0))

    def test_counterexample_monomial(self):
        s = spec_for([1j, -1j])
        assert resonant(s, 1, (1, 2))
        assert not resonant(s, 0, (1, 2))

    def test_degree_one_rejected(self):
        with pytest.raises(ValueError):
            resonant(spec_for([1j]), 0, (1,))

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.integers(0, 11), min_size=2, max_size=3),
        st.lists(st.integers(0, 3), min_size=3, max_size=3),
        st.permutations(range(3)),
        st.integers(0, 2),
    )
    def test_permutation_invariance(self, angles, alpha, perm, j):
        n = len(angles)
        alpha = tuple(alpha[:n])
        assume(sum(alpha) >= 2)
        perm = [p for p in perm if p < n]
        j = j % n
        eig = [np.exp(2j * np.pi * a / 12) for a in angles]
        s = spec_for(eig)
        sp_ = spec_for([eig[p] for p in perm])
        alpha_p = tuple(alpha[p] for p in perm)
        assert resonant(s, j, alpha) == resonant(sp_, perm.index(j), alpha_p)


class TestSpectrum:
    def test_scalar_root(self):
        f = MapJet.linear(primitive_root(5) * np.eye(2), 5)
        s = spectrum_of(f, 5)
        assert s.scalar_mode and s.primitive_order == 5

    def test_non_diagonal(self):
        with pytest.raises(NonDiagonalLinearPart):
            spectrum_of(MapJet.linear(np.array([[1j, 1], [0, 1j]]), 3), 2)

    def test_no_root(self):
        lam = np.exp(2j * np.pi * np.sqrt(2))
        assert spectrum_of(MapJet.linear([[lam]], 3), 2).primitive_order is None


class TestNormalize:
    def test_minus_z_plus_z2(self):
        f = one_d(4, {(1,): -1, (2,): 1})
        r = normalize(f, 2)
        assert abs(r.h[0][(2,)] - 0.5) < 1e-12
        assert abs(r.h[0][(1,)] - 1) == 0
        assert r.g[0][(2,)] == 0
        assert r.conjugacy_residual < 1e-10
        assert r.resonant_monomials == []

    def test_linear_is_fixed(self):
        f = MapJet.linear(np.diag([0.5, 2j]), 4)
        r = normalize(f, 4)
        assert r.h == MapJet.identity(2, 4)
        assert r.g == f

    def test_cube_root_against_symbolic_conjugation(self):
        lam_sym = sp.exp(2 * sp.pi * sp.I / 3)
        x, a, b = sp.symbols("x a b")
        h_sym = x + a * x**2 + b * x**3
        f_sym = lambda z: lam_sym * z + z**2 + z**3
        eq = sp.expand(f_sym(h_sym) - h_sym.subs(x, lam_sym * x))
        sol = sp.solve([eq.coeff(x, 2), eq.coeff(x, 3)], [a, b], dict=True)[0]
        a_val, b_val = complex(sp.N(sol[a], 30)), complex(sp.N(sol[b], 30))

        lam = primitive_root(3)
        f = one_d(5, {(1,): lam, (2,): 1, (3,): 1})
        r = normalize(f, 3)
        assert abs(r.h[0][(2,)] - a_val) < 1e-12
        assert abs(r.h[0][(3,)] - b_val) < 1e-12
        assert abs(r.g[0][(2,)]) < 1e-12 and abs(r.g[0][(3,)]) < 1e-12
        assert assert_resonant_only(r.g, r.spectrum, 3).passed

    def test_counterexample_keeps_resonant_term(self):
        f = MapJet.from_dicts(2, 4, [{(1, 0): 1j, (2, 0): 0.3}, {(0, 1): -1j, (1, 2): 1, (0, 2): 0.2}])
        r = normalize(f, 3)
        assert (1, (1, 2)) in r.resonant_monomials
        assert abs(r.g[1][(1, 2)] - 1) < 1e-12
        assert abs(r.g[0][(2, 0)]) < 1e-12 and abs(r.g[1][(0, 2)]) < 1e-12
        assert r.conjugacy_residual < 1e-12

    def test_near_resonance_refused(self):
        f = one_d(4, {(1,): -1 + 0j, (3,): 1})
        normalize(f, 3)  # exact resonance: kept, no error
        # divisor lam^3 - lam is about 2*eps: above zero_test, below the floor
        eps = 2e-9
        g = one_d(4, {(1,): -1 + eps, (3,): 1})
        with pytest.raises(NearResonance) as info:
            normalize(g, 3)
        assert info.value.alpha == (3,)

    def test_errors(self):
        with pytest.raises(NotAGerm):
            normalize(MapJet.from_dicts(1, 3, [{(0,): 1, (1,): 1}]), 2)
        with pytest.raises(NonDiagonalLinearPart):
            normalize(MapJet.linear(np.array([[1j, 1], [0, 1j]]), 3), 2)
        with pytest.raises(ValueError):
            normalize(one_d(3, {(1,): -1}), 4)

    @pytest.mark.parametrize("m", [2, 3, 4, 5, 6])
    def test_scalar_primitive_root_linearizes(self, m):
        rng = np.random.default_rng(m)
        f = random_germ(rng, 2, m + 2, lam=primitive_root(m))
        r = normalize(f, m)
        assert r.resonant_monomials == []
        assert r.g.max_abs(2, m) < 1e-10
        assert r.conjugacy_residual < 1e-9


def _min_divisor(eig, m):
    n = len(eig)
    best = np.inf
    for d in range(2, m + 1):
        for alpha in itertools.product(range(d + 1), repeat=n):
            if sum(alpha) != d:
                continue
            mono = np.prod([e**a for e, a in zip(eig, alpha)])
            for lam in eig:
                div = abs(mono - lam)
                if div > 1e-9:
                    best = min(best, div)
    return best


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(2, 6), st.booleans())
def test_conjugacy_and_idempotence(seed, n, m, rooted):
    rng = np.random.default_rng(seed)
    if rooted:
        # exactly resonant spectra: roots of unity of order <= m
        p = int(rng.integers(2, m + 1))
        eig = np.exp(2j * np.pi * rng.integers(0, p, n) / p)
    else:
        eig = rng.uniform(0.6, 1.2, n) * np.exp(2j * np.pi * rng.uniform(size=n))
    assume(_min_divisor(eig, m) > 0.2)
    f = random_germ(rng, n, m + 2, A=np.diag(eig))
    r = normalize(f, m)
    assert r.conjugacy_residual < 1e-9
    assert np.array_equal(r.h.linear_part(), np.eye(n))
    assert assert_resonant_only(r.g, r.spectrum, m).passed
    back = map_compose(r.h, r.h_inv)
    assert (back - MapJet.identity(n, m + 2)).max_abs() < 1e-9 * max(1.0, r.h.max_abs())
    again = normalize(r.g, m)
    assert (again.h - MapJet.identity(n, m + 2)).max_abs(0, m) < 1e-9


class TestAssertResonantOnly:
    def test_pass_on_counterexample(self):
        g = MapJet.from_dicts(2, 3, [{(1, 0): 1j}, {(0, 1): -1j, (1, 2): 1}])
        s = spectrum_of(g, 3)
        assert assert_resonant_only(g, s, 3).passed

    def test_fail_lists_monomial(self):
        g = one_d(3, {(1,): -1, (2,): 1})
        rep = assert_resonant_only(g, spectrum_of(g, 2), 2)
        assert not rep.passed
        assert [(j, a) for j, a, _ in rep.violations] == [(0, (2,))]

    def test_ignores_tiny_coefficients(self):
        g = one_d(3, {(1,): -1, (2,): 1e-12})
        assert assert_resonant_only(g, spectrum_of(g, 2), 2).passed


def test_zero_test_profile_is_used():
    loose = ToleranceProfile(zero_test=1e-3)
    s = SpectrumInfo((-1 + 1e-4,), 2, True, None, loose)
    assert resonant(s, 0, (3,))
