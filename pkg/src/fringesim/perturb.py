"""Fringe geometry, drive-parameter conversions, and pattern measurement.

A fringe pattern is described by the bright width ``b`` and dark interval
``s`` in sensor rows plus a tilt angle. With interline delay ``t_d`` the
conversion to the electrical drive is

    b = period * duty / t_d        s = period * (1 - duty) / t_d

and the exact inverse

    period = (b + s) * t_d         duty = b / (b + s).

Both directions are kept real-valued; rounding to whole rows happens only
when measuring a rendered pattern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin

from .sensor import Pattern, SensorConfig, expose, render_pattern
from .signal import PulseParams


@dataclass(frozen=True)
class PerturbationParams:
    """Attack parameters: fringe width, interval (rows) and tilt (degrees)."""

    width_rows: float
    interval_rows: float
    tilt_deg: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "width_rows", float(self.width_rows))
        object.__setattr__(self, "interval_rows", float(self.interval_rows))
        object.__setattr__(self, "tilt_deg", float(self.tilt_deg))
        if not self.width_rows > 0:
            raise ValueError(f"width_rows must be > 0, got {self.width_rows}")
        if self.interval_rows < 0:
            raise ValueError(f"interval_rows must be >= 0, got {self.interval_rows}")
        if not abs(self.tilt_deg) <= 90.0:
            raise ValueError(f"tilt_deg must lie in [-90, 90], got {self.tilt_deg}")

    def to_json(self) -> dict:
        return {"b": self.width_rows, "s": self.interval_rows, "alpha_deg": self.tilt_deg}

    @classmethod
    def from_json(cls, obj: dict) -> "PerturbationParams":
        return cls(obj["b"], obj["s"], obj.get("alpha_deg", 0.0))

    @classmethod
    def from_cli_string(cls, text: str) -> "PerturbationParams":
        """Parse the CLI form ``b,s,alpha`` (alpha optional)."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) not in (2, 3):
            raise ValueError(f"expected 'b,s[,alpha]', got {text!r}")
        tilt = float(parts[2]) if len(parts) == 3 else 0.0
        return cls(float(parts[0]), float(parts[1]), tilt)


def pulse_to_fringe(period_us: float, duty: float, interline_delay_us: float) -> tuple[float, float]:
    """Bright width and dark interval (rows) produced by a drive waveform."""
    if not period_us > 0:
        raise ValueError(f"period_us must be > 0, got {period_us}")
    if not interline_delay_us > 0:
        raise ValueError(f"interline_delay_us must be > 0, got {interline_delay_us}")
    if not 0.0 <= duty <= 1.0:
        raise ValueError(f"duty must lie in [0, 1], got {duty}")
    width = period_us * duty / interline_delay_us
    interval = period_us * (1.0 - duty) / interline_delay_us
    return width, interval


def fringe_to_pulse(width_rows: float, interval_rows: float, interline_delay_us: float) -> tuple[float, float]:
    """Drive period and duty realizing the requested fringe geometry."""
    if not width_rows > 0:
        raise ValueError(f"width_rows must be > 0, got {width_rows}")
    if interval_rows < 0:
        raise ValueError(f"interval_rows must be >= 0, got {interval_rows}")
    if not interline_delay_us > 0:
        raise ValueError(f"interline_delay_us must be > 0, got {interline_delay_us}")
    total = width_rows + interval_rows
    if total <= 0:
        raise ValueError("width_rows + interval_rows must be > 0")
    return total * interline_delay_us, width_rows / total


def theta_to_signal(
    theta: PerturbationParams,
    cfg: SensorConfig,
    levels: tuple[float, float] = (1.0, 0.0),
    phase_us: float = 0.0,
) -> PulseParams:
    """Drive waveform whose rendered pattern realizes ``theta`` on ``cfg``."""
    period_us, duty = fringe_to_pulse(
        theta.width_rows, theta.interval_rows, cfg.interline_delay_us
    )
    level_on, level_off = levels
    return PulseParams(
        period_us=period_us,
        duty=duty,
        phase_us=phase_us,
        level_on=level_on,
        level_off=level_off,
    )


def render_adversarial(
    image,
    theta: PerturbationParams,
    cfg: SensorConfig,
    levels: tuple[float, float] = (1.0, 0.0),
    phase_us: float = 0.0,
) -> tuple[np.ndarray, Pattern]:
    """Apply the fringe perturbation ``theta`` to ``image``.

    Returns the perturbed image and the pattern it was built from.
    """
    pulse = theta_to_signal(theta, cfg, levels=levels, phase_us=phase_us)
    pattern = render_pattern(cfg, pulse, theta.tilt_deg)
    return expose(image, pattern), pattern


def measure_run_lengths(profile, rel_tol: float = 0.01) -> tuple[list[int], list[int]]:
    """Measured bright and dark run lengths of a row-gain profile.

    A row counts as bright when within ``rel_tol`` of the profile maximum
    (relative to the full swing) and dark when within ``rel_tol`` of the
    minimum. Runs touching either end of the profile are truncated by the
    frame rather than the signal and are discarded.
    """
    p = np.asarray(profile, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise ValueError("profile must be a 1-D array with at least 2 rows")
    lo, hi = p.min(), p.max()
    swing = hi - lo
    if swing <= 0:
        return [], []
    bright = p >= hi - rel_tol * swing
    dark = p <= lo + rel_tol * swing

    def interior_runs(mask: np.ndarray) -> list[int]:
        runs = []
        start = None
        for idx, flag in enumerate(mask):
            if flag and start is None:
                start = idx
            elif not flag and start is not None:
                if start > 0:
                    runs.append(idx - start)
                start = None
        # a run still open at the end touches the frame edge: drop it
        return runs

    return interior_runs(bright), interior_runs(dark)


def measure_tilt(gains) -> float:
    """Dominant fringe tilt of a gain field, in degrees within (-90, 90].

    Uses the structure tensor of the gradient field; for a pattern built
    from a profile along ``u = i*cos(a) - j*sin(a)`` this recovers ``a``
    up to the 180-degree ambiguity of an orientation.
    """
    g = np.asarray(gains, dtype=np.float64)
    if g.ndim != 2:
        raise ValueError("gains must be a 2-D array")
    # isotropic pre-smoothing keeps the orientation of a 1-D field intact
    # while suppressing the staircase aliasing of hard fringe edges
    g = ndimage.gaussian_filter(g, sigma=1.5, mode="nearest")
    gi, gj = np.gradient(g)
    jii = float(np.sum(gi * gi))
    jij = float(np.sum(gi * gj))
    jjj = float(np.sum(gj * gj))
    if jii + jjj <= 0:
        raise ValueError("gain field is constant, tilt undefined")
    # gradient direction is (cos a, -sin a), so the half-angle of the
    # structure tensor comes out as -a
    angle = -0.5 * math.degrees(math.atan2(2.0 * jij, jii - jjj))
    if angle <= -90.0:
        angle += 180.0
    elif angle > 90.0:
        angle -= 180.0
    return angle


class FringePerturber(BaseEstimator, TransformerMixin):
    """Transformer that implants a fringe perturbation into images.

    Frame dimensions come from the input image; everything else is a plain
    scalar parameter so the perturber composes with standard pipelines and
    parameter grids.
    """

    def __init__(
        self,
        width_rows=20.0,
        interval_rows=20.0,
        tilt_deg=0.0,
        interline_delay_us=25.0,
        exposure_us=250.0,
        gain=1.0,
        start_us=0.0,
        level_on=1.0,
        level_off=0.0,
        phase_us=0.0,
    ):
        self.width_rows = width_rows
        self.interval_rows = interval_rows
        self.tilt_deg = tilt_deg
        self.interline_delay_us = interline_delay_us
        self.exposure_us = exposure_us
        self.gain = gain
        self.start_us = start_us
        self.level_on = level_on
        self.level_off = level_off
        self.phase_us = phase_us

    def fit(self, X=None, y=None):
        return self

    def theta(self) -> PerturbationParams:
        return PerturbationParams(self.width_rows, self.interval_rows, self.tilt_deg)

    def sensor_for(self, image) -> SensorConfig:
        arr = np.asarray(image)
        return SensorConfig(
            interline_delay_us=self.interline_delay_us,
            exposure_us=self.exposure_us,
            gain=self.gain,
            rows=arr.shape[0],
            cols=arr.shape[1],
            start_us=self.start_us,
        )

    def transform(self, X):
        single = isinstance(X, np.ndarray) and X.ndim in (2, 3)
        images = [X] if single else list(X)
        out = []
        for img in images:
            adv, _ = render_adversarial(
                img,
                self.theta(),
                self.sensor_for(img),
                levels=(self.level_on, self.level_off),
                phase_us=self.phase_us,
            )
            out.append(adv)
        return out[0] if single else out
