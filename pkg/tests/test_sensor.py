import numpy as np
import pytest

from fringesim.sensor import (
    Pattern,
    SensorConfig,
    expose,
    gain_profile_at,
    render_pattern,
    row_gain,
)
from fringesim.signal import PulseParams

from oracle_utils import draw_lattice_pulse, quad_integral


def unit_cfg(rows=8, cols=4, **kwargs):
    defaults = dict(interline_delay_us=1, exposure_us=1, gain=1.0, rows=rows, cols=cols)
    defaults.update(kwargs)
    return SensorConfig(**defaults)


class TestSensorConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(interline_delay_us=0),
            dict(exposure_us=0),
            dict(gain=0),
            dict(rows=0),
            dict(cols=-3),
        ],
    )
    def test_invalid_config_rejected(self, kwargs):
        with pytest.raises(ValueError):
            unit_cfg(**kwargs)

    def test_row_start_times(self):
        cfg = SensorConfig(interline_delay_us=25, exposure_us=250, rows=4, cols=4, start_us=10)
        np.testing.assert_allclose(cfg.row_start_us(np.arange(3)), [10, 35, 60])

    def test_json_round_trip(self):
        cfg = unit_cfg(start_us=5.0)
        assert SensorConfig.from_json(cfg.to_json()) == cfg


class TestRowGain:
    def test_constant_light_gives_k_te(self):
        cfg = SensorConfig(interline_delay_us=25, exposure_us=250, gain=2.0, rows=16, cols=4)
        p = PulseParams(1000, 1.0)
        for i in (0, 7, 15):
            assert row_gain(cfg, p, i) == 2.0 * 250.0

    def test_period4_profile(self):
        # hand integration: rows [0,1) [1,2) on, [2,3) [3,4) off, repeating
        cfg = unit_cfg()
        p = PulseParams(4, 0.5)
        np.testing.assert_array_equal(
            row_gain(cfg, p, np.arange(8)), [1, 1, 0, 0, 1, 1, 0, 0]
        )

    def test_full_period_exposure_is_row_independent(self):
        p = PulseParams(100, 0.25, level_on=2.0, level_off=0.5)
        for m in (1, 2, 3):
            cfg = SensorConfig(interline_delay_us=7, exposure_us=m * 100, gain=1.5, rows=64, cols=4)
            expected = 1.5 * m * 100 * (0.25 * 2.0 + 0.75 * 0.5)
            gains = row_gain(cfg, p, np.arange(64))
            np.testing.assert_allclose(gains, expected, rtol=1e-12)

    def test_index_out_of_range(self):
        cfg = unit_cfg()
        with pytest.raises(IndexError):
            row_gain(cfg, PulseParams(4, 0.5), 8)
        with pytest.raises(IndexError):
            row_gain(cfg, PulseParams(4, 0.5), -1)

    def test_closed_form_matches_quadrature_500_draws(self):
        rng = np.random.default_rng(99)
        for _ in range(500):
            period, duty, phase, on, off = draw_lattice_pulse(rng)
            p = PulseParams(period, duty, phase, on, off)
            td = float(rng.integers(1, 5001)) / 100.0
            te = float(rng.integers(1, 50001)) / 100.0
            t0 = float(rng.integers(0, 100001)) / 100.0
            rows = int(rng.integers(2, 100))
            cfg = SensorConfig(td, te, float(rng.integers(1, 300)) / 100.0, rows, 4, t0)
            i = int(rng.integers(0, rows))
            reference = cfg.gain * quad_integral(period, duty, t0 + i * td, te, phase, on, off)
            value = row_gain(cfg, p, i)
            if reference == 0.0:
                assert abs(value) <= 1e-9
            else:
                assert value == pytest.approx(reference, rel=1e-6)

    def test_profile_periodicity(self):
        # interline delay dividing the period makes the profile periodic in rows
        cfg = SensorConfig(interline_delay_us=5, exposure_us=3, rows=64, cols=4)
        p = PulseParams(40, 0.5)
        gains = row_gain(cfg, p, np.arange(64))
        period_rows = 8
        np.testing.assert_allclose(gains[:-period_rows], gains[period_rows:], atol=1e-12)


class TestRenderPattern:
    def test_zero_tilt_columns_equal_profile(self):
        pattern = render_pattern(unit_cfg(), PulseParams(4, 0.5), 0.0)
        for j in range(pattern.gains.shape[1]):
            np.testing.assert_array_equal(pattern.gains[:, j], pattern.profile)

    def test_quarter_turn_rows_identical(self):
        pattern = render_pattern(unit_cfg(rows=6, cols=12), PulseParams(4, 0.5), 90.0)
        for i in range(1, 6):
            np.testing.assert_array_equal(pattern.gains[i], pattern.gains[0])

    def test_diagonal_tilt_value(self):
        # u = cos45 - sin45 = 0 at pixel (1,1), so the gain equals row 0's
        cfg = unit_cfg()
        pattern = render_pattern(cfg, PulseParams(4, 0.5), 45.0)
        r0 = gain_profile_at(cfg, PulseParams(4, 0.5), 0.0)
        assert quad_integral(4, 0.5, 0, 1) == pytest.approx(r0, rel=1e-12)
        assert pattern.gains[1, 1] == r0 == 1.0

    def test_eighth_turn_paths_match_dense_evaluation(self):
        cfg = unit_cfg(rows=32, cols=24, exposure_us=3)
        p = PulseParams(28, 0.4, phase_us=3)
        for tilt in (45.0, -45.0):
            pattern = render_pattern(cfg, p, tilt)
            c = np.sqrt(0.5)
            s = np.copysign(np.sqrt(0.5), tilt)
            u = np.arange(32)[:, None] * c - np.arange(24)[None, :] * s
            dense = gain_profile_at(cfg, p, u)
            np.testing.assert_allclose(pattern.gains, dense, atol=1e-9)

    def test_tilt_out_of_range(self):
        with pytest.raises(ValueError):
            render_pattern(unit_cfg(), PulseParams(4, 0.5), 91.0)

    def test_gain_bounds_invariant(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            period, duty, phase, on, off = draw_lattice_pulse(rng)
            p = PulseParams(period, duty, phase, on, off)
            cfg = SensorConfig(17.0, 120.0, 1.3, 40, 30)
            tilt = float(rng.uniform(-90, 90))
            pattern = render_pattern(cfg, p, tilt)
            lo = cfg.gain * off * cfg.exposure_us - 1e-9
            hi = cfg.gain * on * cfg.exposure_us + 1e-9
            assert pattern.gains.min() >= lo
            assert pattern.gains.max() <= hi

    def test_contrast_collapse_on_full_period_exposure(self):
        for m in (1, 2, 3):
            cfg = SensorConfig(13.0, m * 400.0, 2.0, 128, 8)
            pattern = render_pattern(cfg, PulseParams(400, 0.5), 0.0)
            swing = float(pattern.gains.max() - pattern.gains.min())
            assert swing <= 1e-9 * cfg.gain * cfg.exposure_us

    def test_normalized_in_unit_range(self):
        pattern = render_pattern(unit_cfg(), PulseParams(4, 0.5, level_on=2.0, level_off=0.5), 0.0)
        norm = pattern.normalized()
        assert norm.min() >= 0.0
        assert norm.max() <= 1.0

    def test_to_json_echoes_parameters(self):
        pattern = render_pattern(unit_cfg(), PulseParams(4, 0.5), 45.0)
        obj = pattern.to_json()
        assert obj["tilt_deg"] == 45.0
        assert len(obj["profile"]) == 8
        assert obj["pulse"]["period_us"] == 4.0
        assert obj["sensor"]["rows"] == 8

    def test_to_pgm_preview(self, tmp_path):
        from fringesim.io import load_image

        pattern = render_pattern(unit_cfg(), PulseParams(4, 0.5), 0.0)
        path = tmp_path / "pattern.pgm"
        pattern.to_pgm(path)
        preview = load_image(path)
        np.testing.assert_array_equal(preview[:, 0], [1, 1, 0, 0, 1, 1, 0, 0])


class TestExpose:
    def test_all_ones_pattern_is_identity(self):
        cfg = unit_cfg(rows=6, cols=5)
        pattern = render_pattern(cfg, PulseParams(10, 1.0), 0.0)
        np.testing.assert_array_equal(pattern.gains, 1.0)
        rng = np.random.default_rng(0)
        img = rng.uniform(0, 2, (6, 5))
        np.testing.assert_array_equal(expose(img, pattern), img)

    def test_zero_pixels_stay_zero(self):
        cfg = unit_cfg(rows=6, cols=5)
        pattern = render_pattern(cfg, PulseParams(4, 0.5), 0.0)
        img = np.zeros((6, 5))
        img[2, 3] = 0.0
        out = expose(img, pattern)
        assert out[2, 3] == 0.0
        np.testing.assert_array_equal(out, 0.0)

    def test_uniform_image_carries_profile(self):
        cfg = unit_cfg()
        pattern = render_pattern(cfg, PulseParams(4, 0.5), 0.0)
        out = expose(np.ones((8, 4)), pattern)
        np.testing.assert_array_equal(out[:, 0], [1, 1, 0, 0, 1, 1, 0, 0])

    def test_linearity_in_the_image(self):
        cfg = unit_cfg(rows=12, cols=7, exposure_us=2)
        pattern = render_pattern(cfg, PulseParams(6, 0.4), 0.0)
        rng = np.random.default_rng(1)
        img = rng.uniform(0, 1, (12, 7))
        for c in (0.0, 0.5, 3.0):
            np.testing.assert_allclose(expose(c * img, pattern), c * expose(img, pattern), atol=1e-15)

    def test_dimension_mismatch_rejected(self):
        pattern = render_pattern(unit_cfg(), PulseParams(4, 0.5), 0.0)
        with pytest.raises(ValueError):
            expose(np.ones((4, 4)), pattern)

    def test_color_image_broadcasts_gains(self):
        cfg = unit_cfg()
        pattern = render_pattern(cfg, PulseParams(4, 0.5), 0.0)
        img = np.ones((8, 4, 3))
        out = expose(img, pattern)
        assert out.shape == (8, 4, 3)
        np.testing.assert_array_equal(out[:, 0, 1], [1, 1, 0, 0, 1, 1, 0, 0])

    def test_rejects_negative_pixels(self):
        pattern = render_pattern(unit_cfg(), PulseParams(4, 0.5), 0.0)
        img = np.ones((8, 4))
        img[0, 0] = -0.5
        with pytest.raises(ValueError):
            expose(img, pattern)
