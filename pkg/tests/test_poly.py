import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfaclab.errors import IllPosedIdentityError
from mfaclab.poly import (DELTA, ONE, ZERO, Polynomial, diophantine_g, is_stable,
                          poly_add, poly_mul, poly_roots, poly_sub)

coef = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
polys = st.lists(coef, min_size=1, max_size=6).map(Polynomial)


def close(a, b, rel=1e-12, abs_=1e-12):
    n = max(len(a), len(b))
    return all(math.isclose(a[i], b[i], rel_tol=rel, abs_tol=abs_) for i in range(n))


class TestArithmetic:
    def test_cancellation(self):
        assert poly_add(Polynomial([1, -1]), Polynomial([0, 1])) == ONE

    def test_add_zero(self):
        p = Polynomial([0.3, -2, 1])
        assert poly_add(p, ZERO) == p

    def test_add_example_coefficients(self):
        out = poly_add(Polynomial([0.2, 0.8]), Polynomial([-0.5, 0.3]))
        assert out.coeffs == pytest.approx((-0.3, 1.1), abs=1e-15)

    def test_mul_identity(self):
        p = Polynomial([0.3, -2, 1])
        assert poly_mul(ONE, p) == p

    def test_difference_of_squares(self):
        assert poly_mul(Polynomial([1, -1]), Polynomial([1, 1])) == Polynomial([1, 0, -1])

    def test_lambda_factor(self):
        out = 0.2 * poly_mul(DELTA, Polynomial([1, 0.4]))
        assert out.coeffs == pytest.approx((0.2, -0.12, -0.08), abs=1e-15)

    def test_canonical_form(self):
        assert Polynomial([1, 2, 0, 1e-16]).coeffs == (1.0, 2.0)
        assert Polynomial([]).coeffs == (0.0,)
        assert Polynomial(3).degree == 0
        assert (Polynomial([1, 1]) - Polynomial([0, 1])).degree == 0

    def test_degree_not_truncated(self):
        p = Polynomial([1, 0.5, 0.25])
        assert poly_mul(p, p).degree == 4

    def test_shift_and_eval(self):
        p = Polynomial([1, 2])
        assert p.shift(2).coeffs == (0.0, 0.0, 1.0, 2.0)
        assert p(0.5) == 2.0
        assert ZERO.shift(3) == ZERO

    def test_scalar_operands(self):
        p = Polynomial([1, 2])
        assert (2 * p).coeffs == (2.0, 4.0)
        assert (p + 1).coeffs == (2.0, 2.0)
        assert (1 - p).coeffs == (0.0, -2.0)
        assert (-p).coeffs == (-1.0, -2.0)

    def test_numpy_scalar_operands(self):
        p = Polynomial([1, 2])
        assert np.float64(2.0) * p == Polynomial([2, 4])
        assert np.float64(1.0) - p == Polynomial([0, -2])
        assert list(p) == [1.0, 2.0]

    @given(polys, polys, polys)
    def test_ring_axioms(self, a, b, c):
        assert close(poly_mul(a, poly_add(b, c)), poly_add(poly_mul(a, b), poly_mul(a, c)), 1e-12, 1e-10)
        assert close(poly_mul(a, b), poly_mul(b, a))
        assert close(poly_mul(poly_mul(a, b), c), poly_mul(a, poly_mul(b, c)), 1e-12, 1e-9)

    @given(polys, polys)
    def test_sub_inverts_add(self, a, b):
        assert close(poly_sub(poly_add(a, b), b), a, 1e-12, 1e-12)


class TestRoots:
    def test_linear(self):
        assert poly_roots(Polynomial([1, -0.5])) == [pytest.approx(0.5)]

    def test_plant_a_polynomial(self):
        r = sorted(z.real for z in poly_roots(Polynomial([1, -1.7, 0.7])))
        assert r == pytest.approx([0.7, 1.0], abs=1e-12)

    def test_noise_polynomial(self):
        assert poly_roots(Polynomial([1, 0.2])) == [pytest.approx(-0.2)]

    def test_constant_has_no_roots(self):
        assert poly_roots(Polynomial([3])) == []
        assert poly_roots(ZERO) == []

    @settings(max_examples=200)
    @given(st.lists(coef, min_size=2, max_size=7).filter(lambda c: abs(c[0]) > 0.1 and abs(c[-1]) > 1e-3))
    def test_reconstruction(self, c):
        p = Polynomial(c)
        rec = np.real(np.poly(poly_roots(p))) * p.coeffs[0]
        assert np.allclose(rec, p.coeffs, rtol=1e-8, atol=1e-8 * max(map(abs, c)))


def _winding_unstable_count(p: Polynomial, n=20000):
    """Roots of z^d p(z^-1) outside the unit disk, by the argument principle."""
    d = p.degree
    t = np.linspace(0.0, 2.0 * np.pi, n + 1)
    z = np.exp(1j * t)
    vals = np.polyval(p.coeffs, z)
    if np.min(np.abs(vals)) < 1e-9:
        return None  # root on the circle
    inside = int(round((np.unwrap(np.angle(vals))[-1] - np.angle(vals[0])) / (2 * np.pi)))
    return d - inside


class TestStability:
    def test_examples(self):
        assert is_stable(Polynomial([1, 0.2]), 0.0)
        assert not is_stable(Polynomial([1, -1]), 0.0)
        assert not is_stable(Polynomial([1, -1.7, 0.7]), 0.0)

    def test_margin(self):
        assert is_stable(Polynomial([1, -0.9]))
        assert not is_stable(Polynomial([1, -0.9]), margin=0.2)

    def test_degenerate(self):
        assert is_stable(ONE)
        assert not is_stable(ZERO)
        # vanishing c0 is a root at infinity
        assert not is_stable(Polynomial([0, 1, 0.5]))

    @settings(max_examples=200)
    @given(st.lists(coef, min_size=2, max_size=5).filter(lambda c: abs(c[0]) > 0.05))
    def test_agrees_with_argument_principle(self, c):
        p = Polynomial(c)
        outside = _winding_unstable_count(p)
        if outside is None:
            return
        if any(abs(abs(r) - 1.0) < 1e-6 for r in poly_roots(p)):
            return
        assert is_stable(p) == (outside == 0)


class TestDiophantine:
    def test_unit_p(self):
        lw, ly = Polynomial([0.2, 0.1]), Polynomial([1.7, -0.7])
        assert close(diophantine_g(lw, ly, ONE), lw + ly)

    def test_degenerate(self):
        ly = Polynomial([1.7, -0.7])
        assert close(diophantine_g(ZERO, ly, ONE), ly)

    def test_worked_example(self):
        g = diophantine_g(Polynomial([0.2]), Polynomial([-0.4]), Polynomial([1, 0.1]))
        assert g.coeffs == pytest.approx((-0.1, 0.02), abs=1e-15)

    def test_non_monic_p_rejected(self):
        with pytest.raises(IllPosedIdentityError):
            diophantine_g(ZERO, ZERO, Polynomial([2, 0.1]))

    @given(polys, polys, st.lists(coef, min_size=0, max_size=3))
    def test_identity_residual(self, lw, ly, ptail):
        p = Polynomial([1.0] + ptail)
        g = diophantine_g(lw, ly, p)
        lhs = g.shift(1)
        rhs = (ONE + lw.shift(1)) * p - (ONE - ly.shift(1))
        res = max(abs(lhs[i] - rhs[i]) for i in range(max(len(lhs), len(rhs))))
        assert res <= 1e-12
