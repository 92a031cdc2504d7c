import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfaclab.edlm import Orders
from mfaclab.plants import (PRESET_IDS, DisturbanceSpec, LinearRegime, NonlinearRegime,
                            PlantModel, Reference, Regime, make_example, reference,
                            sample_disturbance, step_plant)


def ex1_regimes():
    return make_example("ex1").plant().regimes


class TestStep:
    def test_first_regime_hand_value(self):
        p = PlantModel(ex1_regimes(), y_init=(0.2, 0.5), u_init=(0.0, 0.0, 0.0))
        assert step_plant(p, 0.0, 1) == pytest.approx(0.26)

    def test_constant_disturbance(self):
        p = make_example("ex2-case1").plant()
        q = PlantModel(p.regimes)
        assert q.step(0.0, 1) == pytest.approx(1.0)

    def test_cubic_input_map(self):
        p = PlantModel((Regime(0, 200, NonlinearRegime("cubic")),), u_init=(0.0,))
        assert p.step(1.0, 1) == pytest.approx(0.6)

    def test_history_advances(self):
        p = PlantModel((Regime(0, 10, LinearRegime(a=(1, -0.5), b=(2.0,))),))
        y2 = p.step(1.0, 1)
        y3 = p.step(0.0, 2)
        assert (y2, y3) == (2.0, 1.0)
        assert p.history.get("y", 3) == 1.0

    def test_coloured_noise_enters_with_lag(self):
        p = PlantModel((Regime(0, 10, LinearRegime(c=(1, 0.2))),))
        assert p.step(0.0, 1, noise=1.0) == pytest.approx(1.0)
        assert p.step(0.0, 2, noise=0.0) == pytest.approx(0.2)

    def test_measured_disturbance_path(self):
        p = PlantModel((Regime(0, 10, LinearRegime(b=(0.0,), bv=(1, 0.4))),))
        assert p.step(0.0, 1, v_now=2.0) == pytest.approx(2.0)
        assert p.step(0.0, 2, v_now=0.0) == pytest.approx(0.8)

    def test_out_of_range(self):
        p = make_example("ex1").plant()
        with pytest.raises(ValueError):
            p.step(0.0, 701)

    def test_regimes_must_tile(self):
        law = LinearRegime()
        with pytest.raises(ValueError):
            PlantModel((Regime(0, 10, law), Regime(12, 20, law)))
        with pytest.raises(ValueError):
            PlantModel((Regime(5, 5, law),))

    def test_unknown_map(self):
        with pytest.raises(ValueError):
            NonlinearRegime("quartic")

    def test_a0_nonzero(self):
        with pytest.raises(ValueError):
            LinearRegime(a=(0.0, 1.0))


class TestBoundary:
    @pytest.mark.parametrize("pid,switch", [("ex1", 350), ("ex2-case1", 350), ("nl", 200)])
    def test_regime_index(self, pid, switch):
        p = make_example(pid).plant()
        assert p.regime_index(switch) == 1
        assert p.regime_index(switch + 1) == 2

    def test_new_coefficients_take_effect_after_boundary(self):
        # feed the same state at k = 350 and k = 351; only the latter uses regime 2
        r1, r2 = ex1_regimes()
        outs = {}
        for k in (350, 351):
            p = PlantModel((r1, r2), y_init=(0.3, 0.7), u_init=(0.1, 0.2, 0.4), start=k)
            outs[k] = p.step(1.0, k)
        assert outs[350] == pytest.approx(0.2 * 0.7 + 0.8 * 0.3 - 0.5 * 1.0 + 0.3 * 0.4 + 0.2 * 0.2)
        assert outs[351] == pytest.approx(-0.4 * 0.7 - 0.5 * 1.0 - 0.2 * 0.4)


class TestReference:
    @pytest.mark.parametrize("k,expected", [(0, 5.0), (80, -5.0), (40, -5.0), (39, 5.0),
                                            (120, 5.0), (-40, -5.0)])
    def test_period_80(self, k, expected):
        assert reference(Reference("square", 5.0, 80.0), k) == expected

    def test_tie_rounds_away(self):
        # 1.5 -> 2 and 2.5 -> 3; half-to-even would send 2.5 to 2
        ref = Reference("square", 10.0, 100.0)
        assert ref.value(150) == 10.0
        assert ref.value(250) == -10.0

    def test_constant(self):
        assert Reference("constant", 2.5).value(999) == 2.5

    def test_invalid(self):
        with pytest.raises(ValueError):
            Reference("sawtooth")
        with pytest.raises(ValueError):
            Reference("square", 1.0, 0.0)

    @given(st.integers(-10_000, 10_000))
    def test_values_are_plus_minus_amplitude(self, k):
        assert abs(Reference("square", 3.0, 7.0).value(k)) == 3.0


class TestDisturbance:
    def test_none(self):
        assert sample_disturbance(DisturbanceSpec(), 5) == 0.0

    def test_sinusoid(self):
        spec = DisturbanceSpec("sinusoid", amplitude=5.0, rate=1 / 20)
        assert sample_disturbance(spec, 0) == 0.0
        assert sample_disturbance(spec, 10) == pytest.approx(5 * math.sin(0.5))

    def test_schedule(self):
        spec = DisturbanceSpec("constant_schedule", schedule=((0, 350, 1.0), (350, 700, 100.0)))
        assert sample_disturbance(spec, 400) == 100.0
        assert sample_disturbance(spec, 350) == 1.0
        assert sample_disturbance(spec, 701) == 0.0

    def test_white_noise_statistics(self):
        spec = DisturbanceSpec("white_noise", variance=0.1, seed=3)
        rng = spec.rng()
        x = np.array([sample_disturbance(spec, k, rng) for k in range(100_000)])
        sigma = math.sqrt(0.1)
        assert abs(x.mean()) <= 3 * sigma / math.sqrt(x.size)
        assert abs(x.var() / 0.1 - 1.0) <= 0.05

    def test_white_noise_reproducible(self):
        spec = DisturbanceSpec("white_noise", variance=0.1, seed=42)
        r1, r2 = spec.rng(), spec.rng()
        s1 = [sample_disturbance(spec, k, r1) for k in range(500)]
        s2 = [sample_disturbance(spec, k, r2) for k in range(500)]
        assert s1 == s2

    def test_white_noise_needs_rng(self):
        with pytest.raises(ValueError):
            sample_disturbance(DisturbanceSpec("white_noise", variance=1.0), 0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            DisturbanceSpec("pink")
        with pytest.raises(ValueError):
            DisturbanceSpec("white_noise", variance=-1.0)


class TestPresets:
    def test_ids(self):
        for pid in PRESET_IDS:
            assert make_example(pid).id == pid
        assert make_example(1).id == "ex1"
        assert make_example("3").id == "ex3"
        with pytest.raises(ValueError):
            make_example("ex9")

    def test_example1(self):
        pre = make_example(1)
        assert pre.horizon == 700
        assert pre.switch_steps() == [350]
        est = pre.setup.estimator
        assert (est.eta, est.mu, est.phi0) == (3.0, 1.0, (-0.8, -0.5, -0.2))
        assert pre.setup.controller.orders == Orders(1, 2)
        assert pre.y_init == (0, 0, 0, 0.5, 0.2)
        assert pre.u_init == (0,) * 6

    def test_example2(self):
        for pid in ("ex2-case1", "ex2-case2"):
            pre = make_example(pid)
            assert pre.setup.estimator.phi0 == (-0.1, -0.1, -0.1)
            assert pre.setup.controller.lam == 0.2

    def test_example3(self):
        pre = make_example(3)
        assert pre.noise.variance == 0.1
        prop, cur = pre.variants["proposed"], pre.variants["current"]
        assert prop.controller.orders == Orders(2, 2, 0, 1)
        assert prop.controller.lambda_poly.coeffs == (0.5, 0.2)
        assert prop.estimator.kind == "rls" and prop.estimator.p0 == 1e6
        assert cur.controller.lam == pytest.approx(0.5 ** 2)

    def test_example4(self):
        pre = make_example(4)
        assert pre.setup.controller.orders == Orders(2, 2, 2, 1)
        assert pre.measured.kind == "sinusoid" and pre.measured.amplitude == 5.0

    def test_nonlinear(self):
        pre = make_example("nl")
        assert pre.switch_steps() == [200]

    def test_true_pg_ex3(self):
        law = make_example(3).plant().regimes[0].law
        assert list(law.pg(Orders(2, 2, 0, 1)).values) == pytest.approx([1.7, -0.7, 1, 1.4, 0.2])
        assert list(law.pg(Orders(2, 2)).values) == pytest.approx([1.7, -0.7, 1, 1.4])
