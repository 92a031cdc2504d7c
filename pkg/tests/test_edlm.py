import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfaclab.edlm import (HistoryBuffer, Orders, PGVector, armax_to_pg, build_delta_h,
                          darma_to_pg, pg_to_darma, predict_delta_y)
from mfaclab.poly import ONE, Polynomial

from oracles import iterate_edlm, random_stable_monic, simulate_armax


class TestOrders:
    def test_sizes(self):
        assert Orders(2, 2, 2, 1).size == 7
        assert Orders().size == 2

    @pytest.mark.parametrize("args", [(0, 1), (1, 0), (1, 1, -1, 0), (1, 1, 0, -2)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            Orders(*args)


class TestPGVector:
    def test_length_checked(self):
        with pytest.raises(ValueError):
            PGVector(Orders(1, 2), [1.0, 2.0])

    def test_bound(self):
        PGVector(Orders(1, 1), [0.6, 0.8], bound_b=1.0)
        with pytest.raises(ValueError):
            PGVector(Orders(1, 1), [0.6, 0.9], bound_b=1.0)

    def test_segments(self):
        phi = PGVector(Orders(2, 2, 2, 1), [1, 2, 3, 4, 5, 6, 7])
        assert phi.phi_ly.coeffs == (1.0, 2.0)
        assert phi.phi_lu.coeffs == (3.0, 4.0)
        assert phi.phi_lv.coeffs == (5.0, 6.0)
        assert phi.phi_lw.coeffs == (7.0,)
        assert phi.gain == 3.0
        assert PGVector(Orders(1, 1), [1, 2]).phi_lw.is_zero()

    def test_immutable(self):
        phi = PGVector(Orders(1, 1), [1, 2])
        with pytest.raises(ValueError):
            phi.values[0] = 3.0


class TestHistoryBuffer:
    def test_zero_before_start(self):
        h = HistoryBuffer(depth=4, start=0)
        h.set("y", 0, 2.0)
        assert h.get("y", -5) == 0.0
        assert h.delta("y", 0) == 2.0

    def test_future_and_depth(self):
        h = HistoryBuffer(depth=3, start=0)
        for j in range(6):
            h.set("u", j, float(j))
        with pytest.raises(IndexError):
            h.get("u", 6)
        with pytest.raises(IndexError):
            h.get("u", 2)
        assert h.get("u", 3) == 3.0

    def test_preload(self):
        h = HistoryBuffer(depth=8, start=-10)
        h.preload("y", (0, 0, 0, 0.5, 0.2), newest=1)
        assert h.get("y", 1) == 0.2
        assert h.get("y", 0) == 0.5
        assert h.k == 1


class TestBuildDeltaH:
    def test_all_zero(self):
        h = HistoryBuffer(depth=6, start=0)
        h.set("y", 0, 0.0)
        h.set("u", 0, 0.0)
        h.set("v", 0, 0.0)
        h.set("w", 0, 0.0)
        assert np.array_equal(build_delta_h(h, Orders(2, 2, 1, 1), 0), np.zeros(6))

    def test_table_initial_values(self):
        h = HistoryBuffer(depth=8, start=-10)
        h.preload("y", (0, 0, 0, 0.5, 0.2), newest=1)
        h.preload("u", (0,) * 6, newest=0)
        h.set("u", 1, 0.0)
        dh = build_delta_h(h, Orders(1, 2), 1)
        assert dh == pytest.approx([-0.3, 0.0, 0.0])

    def test_length_example4(self):
        h = HistoryBuffer(depth=6)
        h.set("y", 0, 1.0)
        for name in "uvw":
            h.set(name, 0, 1.0)
        assert build_delta_h(h, Orders(2, 2, 2, 1), 0).size == 7

    def test_segment_order(self):
        h = HistoryBuffer(depth=6, start=0)
        y = [0, 1, 3, 6]
        u = [0, 10, 30, 60]
        for j in range(4):
            h.set("y", j, y[j])
            h.set("u", j, u[j])
        dh = build_delta_h(h, Orders(2, 3), 3)
        assert list(dh) == [3, 2, 30, 20, 10]


class TestPrediction:
    def test_zero_phi(self):
        phi = PGVector.zeros(Orders(1, 2))
        assert predict_delta_y(phi, [1, 2, 3], 0.7) == 0.7

    def test_dot_product(self):
        phi = PGVector(Orders(1, 2), [-0.4, -0.5, -0.2])
        assert predict_delta_y(phi, [1, 1, 1], 0.0) == pytest.approx(-1.1)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            predict_delta_y(PGVector.zeros(Orders(1, 2)), [1, 2])


class TestConversions:
    def test_static_gain(self):
        phi = darma_to_pg(ONE, Polynomial([0.7]), Orders(1, 1))
        assert list(phi.values) == [0.0, 0.7]

    def test_second_regime(self):
        phi = darma_to_pg(Polynomial([1, 0.4]), Polynomial([-0.5, -0.2]), Orders(1, 2))
        assert list(phi.values) == pytest.approx([-0.4, -0.5, -0.2])

    def test_integrating_plant(self):
        phi = darma_to_pg(Polynomial([1, -1.7, 0.7]), Polynomial([1, 1.4]), Orders(2, 2))
        assert list(phi.values) == pytest.approx([1.7, -0.7, 1, 1.4])

    def test_armax(self):
        o = Orders(2, 2, 0, 1)
        phi = armax_to_pg(Polynomial([1, -1.7, 0.7]), Polynomial([1, 1.4]), Polynomial([1, 0.2]), o)
        assert list(phi.segment("y")) == pytest.approx([1.7, -0.7])
        assert list(phi.segment("u")) == pytest.approx([1, 1.4])
        assert list(phi.segment("w")) == pytest.approx([0.2])
        white = armax_to_pg(Polynomial([1, 0.5]), Polynomial([1]), ONE, o)
        assert list(white.segment("w")) == [0.0]

    def test_order_too_small(self):
        with pytest.raises(ValueError):
            darma_to_pg(Polynomial([1, -1.7, 0.7]), Polynomial([1, 1.4]), Orders(1, 2))
        with pytest.raises(ValueError):
            armax_to_pg(ONE, ONE, Polynomial([1, 0.2, 0.1]), Orders(1, 1, 0, 1))

    def test_non_monic(self):
        with pytest.raises(ValueError):
            darma_to_pg(Polynomial([2, 1]), ONE, Orders(1, 1))
        with pytest.raises(ValueError):
            armax_to_pg(ONE, ONE, Polynomial([0.5, 0.1]), Orders(1, 1, 0, 1))

    def test_round_trip(self):
        a, b = Polynomial([1, -0.2, -0.8]), Polynomial([-0.5, 0.3, 0.2])
        a2, b2 = pg_to_darma(darma_to_pg(a, b, Orders(2, 3)))
        assert a2.coeffs == pytest.approx(a.coeffs)
        assert b2.coeffs == pytest.approx(b.coeffs)


def _max_rel_drift(y1, y2):
    return float(np.max(np.abs(y1 - y2)) / max(1.0, np.max(np.abs(y1))))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_darma_equivalence(seed):
    rng = np.random.default_rng(seed)
    na, nb = rng.integers(1, 4), rng.integers(1, 4)
    a = random_stable_monic(rng, na)
    b = rng.normal(size=nb)
    u = rng.normal(size=1000)
    phi = darma_to_pg(Polynomial(a), Polynomial(b), Orders(int(na), int(nb)))
    assert _max_rel_drift(simulate_armax(a, b, u), iterate_edlm(phi, u)) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_armax_equivalence(seed):
    rng = np.random.default_rng(seed)
    na, nb, nc = rng.integers(1, 4), rng.integers(1, 3), rng.integers(1, 3)
    a = random_stable_monic(rng, na)
    b = rng.normal(size=nb)
    c = np.concatenate(([1.0], rng.uniform(-0.8, 0.8, size=nc)))
    u, xi = rng.normal(size=1000), rng.normal(scale=0.3, size=1000)
    phi = armax_to_pg(Polynomial(a), Polynomial(b), Polynomial(c), Orders(int(na), int(nb), 0, int(nc)))
    assert _max_rel_drift(simulate_armax(a, b, u, c, xi), iterate_edlm(phi, u, xi)) <= 1e-12


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 3), st.integers(0, 3),
       st.lists(st.floats(-10, 10), min_size=12, max_size=12))
def test_regressor_segments(ly, lu, lv, lw, samples):
    o = Orders(ly, lu, lv, lw)
    h = HistoryBuffer(depth=o.max_lag + 3, start=0)
    for j in range(3):
        for i, name in enumerate("yuvw"):
            h.set(name, j, samples[4 * j + i])
    dh = build_delta_h(h, o, 2)
    assert dh.size == o.size
    sy, su, sv, sw = o.slices()
    assert [sl.stop - sl.start for sl in (sy, su, sv, sw)] == [ly, lu, lv, lw]
    window_zero = all(h.delta(n, 2 - lag) == 0.0 for n, L in zip("yuvw", (ly, lu, lv, lw))
                      for lag in range(L))
    assert (not dh.any()) == window_zero
