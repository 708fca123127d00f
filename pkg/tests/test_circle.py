import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudorot.circle import (CircleLift, as_alpha, canonical_boundary_lift, circle_distance, convergents,
                              frac_mul, golden_mean, nearest_integer_distance, rotation_number,
                              translation_number)
from pseudorot.errors import ContractViolation, InvalidLiftError, RationalInputError
from pseudorot.hamiltonian import ConstantHamiltonian, HamiltonianField, RotationHamiltonian


def _conjugated_lift(beta, amp, phase=0.0):
    """Lift of g^-1 R_beta g with g(x) = x + amp sin(2 pi x + phase) / (2 pi)."""
    g = lambda x: x + amp * np.sin(2 * np.pi * x + phase) / (2 * np.pi)

    def g_inv(y):
        x = np.array(y, dtype=float, copy=True)
        for _ in range(60):
            x -= (g(x) - y) / (1 + amp * np.cos(2 * np.pi * x + phase))
        return x

    return CircleLift(lambda x: g_inv(g(np.asarray(x, dtype=float)) + beta))


def _best_approx_denominators(alpha, qmax):
    """Brute-force record denominators of min_p |q alpha - p|."""
    out, best = [], math.inf
    for q in range(1, qmax + 1):
        d = float(abs(q * alpha - mpmath.nint(q * alpha)))
        if d < best - 1e-30:
            best = d
            out.append(q)
    return out


class TestTranslationNumber:
    def test_rigid_translation(self):
        assert translation_number(CircleLift.translation(0.25), 100).value == 0.25

    def test_bracket_width(self):
        est = translation_number(CircleLift.translation(0.3), 400)
        assert est.lower <= est.value <= est.upper
        assert est.upper - est.lower == pytest.approx(2 / 400)

    @given(st.floats(0.05, 0.6), st.floats(0.0, 2 * math.pi))
    def test_conjugacy_invariance(self, amp, phase):
        it = 500
        tau = translation_number(_conjugated_lift(1 / 3, amp, phase), it).value
        assert abs(tau - 1 / 3) <= 2 / it

    def test_period_three_orbit(self):
        f = _conjugated_lift(1 / 3, 0.4)
        x0 = 0.0
        x3 = f(f(f(np.array([x0]))))[0]
        assert x3 - x0 == pytest.approx(1.0, abs=1e-10)
        assert translation_number(f, 3000).value == pytest.approx(1 / 3, abs=1 / 3000)

    def test_non_monotone_rejected(self):
        with pytest.raises(InvalidLiftError):
            CircleLift.from_samples(np.array([0.0, 0.5, 0.2, 0.7]))

    def test_degree_shift_fixed(self):
        with pytest.raises(ContractViolation):
            CircleLift(lambda x: x, degree_shift=2)

    def test_monotone_in_lift(self, golden):
        a = float(golden)
        f0 = CircleLift.translation(a)
        f1 = _conjugated_lift(a + 0.01, 0.2)
        assert translation_number(f1, 2000).value > translation_number(f0, 2000).value


class TestRotationNumber:
    def test_mod_one(self):
        assert rotation_number(CircleLift.translation(1.75), 10) == pytest.approx(0.75)

    def test_identity(self):
        assert rotation_number(CircleLift(lambda x: np.asarray(x, dtype=float)), 10) == 0.0

    def test_golden_rotation(self, golden):
        it = 5000
        a = float(golden % 1)
        f = CircleLift.from_circle_map(lambda x: (x + a) % 1.0)
        assert abs(rotation_number(f, it) - 0.6180339887498949) <= 1 / it

    def test_circle_distance(self):
        assert circle_distance(0.95, 0.05) == pytest.approx(0.1)


class TestCanonicalLift:
    def test_unreduced(self):
        lift = canonical_boundary_lift(RotationHamiltonian(1.6, 0.3))
        x = np.linspace(0, 1, 17)
        assert np.allclose(lift(x), x + 1.6, atol=1e-9)
        assert translation_number(lift, 500).value == pytest.approx(1.6, abs=1e-6)

    def test_constant(self):
        lift = canonical_boundary_lift(ConstantHamiltonian(2.0))
        assert translation_number(lift, 100).value == pytest.approx(0.0, abs=1e-12)

    def test_time_dependent_average(self):
        class Pulsing(HamiltonianField):
            family = "pulsing"

            def h(self, t, x, y):
                return math.pi * (0.3 + 0.2 * math.sin(2 * math.pi * t)) * (np.asarray(x) ** 2 + np.asarray(y) ** 2)

            def grad(self, t, x, y):
                c = 2 * math.pi * (0.3 + 0.2 * math.sin(2 * math.pi * t))
                return c * np.asarray(x, dtype=float), c * np.asarray(y, dtype=float)

        lift = canonical_boundary_lift(Pulsing())
        assert translation_number(lift, 500).value == pytest.approx(0.3, abs=1e-6)

    def test_not_boundary_constant(self):
        class Tilted(HamiltonianField):
            family = "tilted"

            def h(self, t, x, y):
                return np.asarray(x, dtype=float)

            def grad(self, t, x, y):
                return np.ones_like(np.asarray(x, dtype=float)), np.zeros_like(np.asarray(y, dtype=float))

        with pytest.raises(ContractViolation):
            canonical_boundary_lift(Tilted())


class TestConvergents:
    def test_golden_fibonacci(self, golden):
        qs = convergents(golden, 8).denominators
        assert qs == [1, 2, 3, 5, 8, 13, 21, 34]
        assert qs == _best_approx_denominators(golden, 34)

    def test_inverse_pi(self):
        with mpmath.workdps(60):
            alpha = 1 / mpmath.pi
        table = convergents(alpha, 4)
        assert [(e.p, e.q) for e in table.entries] == [(0, 1), (1, 3), (7, 22), (106, 333)]
        assert table.denominators == _best_approx_denominators(alpha, 333)

    def test_rational_refused(self):
        with pytest.raises(RationalInputError):
            convergents(0.5, 4)

    @given(st.integers(2, 40), st.integers(1, 9))
    def test_quadratic_surds(self, c, depth):
        if int(math.isqrt(c)) ** 2 == c:
            return
        alpha = as_alpha({"surd": [0, 1, c]}) % 1
        table = convergents(alpha, depth)
        dist = [min(e.frac, 1 - e.frac) for e in table.entries]
        assert all(b < a for a, b in zip(dist, dist[1:]))
        for e in table.entries:
            assert abs(e.q * alpha - e.p) < mpmath.mpf(1) / e.q


class TestAlpha:
    def test_surd_precision(self):
        a = as_alpha({"surd": [-1, 1, 5, 2]})
        with mpmath.workdps(80):
            assert abs(a - (mpmath.sqrt(5) - 1) / 2) < mpmath.mpf(10) ** -50

    def test_fraction_string(self):
        assert as_alpha("3/5") == as_alpha(Fraction(3, 5))

    def test_frac_mul_large_n(self, golden):
        # the golden mean has {F_k alpha} -> 0 or 1 with |F_k alpha - F_{k-1}| = alpha^k
        n = 6765
        assert nearest_integer_distance(n, golden) == pytest.approx(float(golden) ** 20, rel=1e-6)
        assert 0 <= frac_mul(n, golden) < 1
