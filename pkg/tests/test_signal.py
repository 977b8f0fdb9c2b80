import numpy as np
import pytest

from fringesim.signal import (
    FLICKER_FUSION_HZ,
    PulseParams,
    check_imperceptible,
    integrate_level,
    level_at,
    on_overlap,
)

from oracle_utils import draw_lattice_pulse, draw_lattice_window, quad_integral


class TestPulseParams:
    def test_phase_normalized_into_period(self):
        assert PulseParams(1000, 0.5, phase_us=2300).phase_us == 300
        assert PulseParams(1000, 0.5, phase_us=-100).phase_us == 900

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(period_us=0, duty=0.5),
            dict(period_us=-5, duty=0.5),
            dict(period_us=10, duty=1.5),
            dict(period_us=10, duty=-0.1),
            dict(period_us=10, duty=0.5, level_on=1.0, level_off=2.0),
            dict(period_us=10, duty=0.5, level_on=1.0, level_off=-0.1),
        ],
    )
    def test_invalid_params_rejected(self, kwargs):
        with pytest.raises(ValueError):
            PulseParams(**kwargs)

    def test_json_round_trip(self):
        p = PulseParams(800, 0.25, phase_us=100, level_on=2.0, level_off=0.5)
        obj = p.to_json()
        assert set(obj) == {"period_us", "duty", "phase_us", "level_on", "level_off"}
        assert PulseParams.from_json(obj) == p


class TestLevelAt:
    def test_first_half_period_is_on(self):
        p = PulseParams(1000, 0.5)
        assert level_at(p, 100) == 1.0

    def test_second_half_period_is_off(self):
        p = PulseParams(1000, 0.5)
        assert level_at(p, 700) == 0.0

    def test_zero_duty_always_off_level(self):
        p = PulseParams(1000, 0.0, level_on=1.0, level_off=0.2)
        for t in (0.0, 3.7, 999.0, 12345.6):
            assert level_at(p, t) == 0.2

    def test_periodicity(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            period, duty, phase, on, off = draw_lattice_pulse(rng)
            p = PulseParams(period, duty, phase, on, off)
            t = float(rng.uniform(0, 3 * period))
            n = int(rng.integers(-5, 6))
            assert level_at(p, t) == level_at(p, t + n * period)

    def test_array_argument(self):
        p = PulseParams(1000, 0.5)
        np.testing.assert_array_equal(level_at(p, [100, 700]), [1.0, 0.0])


class TestOnOverlap:
    def test_window_inside_on_phase(self):
        assert on_overlap(PulseParams(1000, 0.5), 0, 500) == 500

    def test_exactly_one_full_period(self):
        assert on_overlap(PulseParams(1000, 0.5), 0, 1000) == 500

    def test_window_straddling_edge(self):
        # frozen from the quadrature oracle at 0.01 us steps
        p = PulseParams(1000, 0.5)
        expected = quad_integral(1000, 0.5, 250, 500)
        assert expected == 250
        assert on_overlap(p, 250, 500) == pytest.approx(250, rel=1e-12)

    def test_negative_duration_rejected(self):
        with pytest.raises(ValueError):
            on_overlap(PulseParams(1000, 0.5), 0, -1)

    def test_additivity(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            period, duty, phase, on, off = draw_lattice_pulse(rng)
            p = PulseParams(period, duty, phase, on, off)
            a = float(rng.uniform(-2 * period, 2 * period))
            d1 = float(rng.uniform(0, 2 * period))
            d2 = float(rng.uniform(0, 2 * period))
            whole = on_overlap(p, a, d1 + d2)
            split = on_overlap(p, a, d1) + on_overlap(p, a + d1, d2)
            assert split == pytest.approx(whole, abs=1e-9 * max(period, 1.0))

    def test_bounds(self):
        rng = np.random.default_rng(13)
        for _ in range(300):
            period, duty, phase, on, off = draw_lattice_pulse(rng)
            p = PulseParams(period, duty, phase, on, off)
            t, d = draw_lattice_window(rng)
            ov = on_overlap(p, t, d)
            assert 0.0 <= ov <= d


class TestIntegrateLevel:
    def test_full_periods_average(self):
        p = PulseParams(250, 0.3, level_on=1.0, level_off=0.0)
        for k in (1, 2, 7):
            assert integrate_level(p, 0, k * 250) == pytest.approx(k * 250 * 0.3, rel=1e-12)

    def test_zero_duration(self):
        assert integrate_level(PulseParams(1000, 0.5), 123.4, 0) == 0.0

    def test_off_then_on_window(self):
        # frozen from the quadrature oracle: off on [3,4), on on [4,5)
        assert quad_integral(4, 0.5, 3, 2) == pytest.approx(1.0, rel=1e-12)
        assert integrate_level(PulseParams(4, 0.5), 3, 2) == pytest.approx(1.0, rel=1e-12)

    def test_levels_weighting(self):
        p = PulseParams(100, 0.5, level_on=3.0, level_off=1.0)
        # one full period: 50 us at 3.0 plus 50 us at 1.0
        assert integrate_level(p, 0, 100) == pytest.approx(200.0, rel=1e-12)

    def test_quadrature_equivalence_1000_draws(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            period, duty, phase, on, off = draw_lattice_pulse(rng)
            p = PulseParams(period, duty, phase, on, off)
            t, d = draw_lattice_window(rng, max_duration_us=200.0)
            exact = integrate_level(p, t, d)
            reference = quad_integral(period, duty, t, d, phase, on, off)
            if reference == 0.0:
                assert abs(exact) <= 1e-9
            else:
                assert exact == pytest.approx(reference, rel=1e-6)

    def test_within_level_bounds(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            period, duty, phase, on, off = draw_lattice_pulse(rng)
            p = PulseParams(period, duty, phase, on, off)
            t, d = draw_lattice_window(rng)
            value = integrate_level(p, t, d)
            assert off * d - 1e-9 <= value <= on * d + 1e-9


class TestImperceptibility:
    def test_500_hz_is_imperceptible(self):
        assert check_imperceptible(PulseParams(2000, 0.5)) is True

    def test_100_hz_is_perceptible(self):
        assert check_imperceptible(PulseParams(10000, 0.5)) is False

    def test_exact_threshold_excluded(self):
        assert check_imperceptible(PulseParams(5000, 0.5)) is False

    def test_constant_light_trivially_imperceptible(self):
        assert check_imperceptible(PulseParams(100000, 0.0)) is True
        assert check_imperceptible(PulseParams(100000, 1.0)) is True

    def test_custom_threshold(self):
        assert check_imperceptible(PulseParams(5000, 0.5), threshold_hz=100.0) is True
        assert FLICKER_FUSION_HZ == 200.0
