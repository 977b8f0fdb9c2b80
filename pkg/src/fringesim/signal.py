"""On-off keyed illumination waveform and its exact time integrals.

The drive signal is an ideal rectangular wave: within every period of
``period_us`` microseconds the lamp sits at ``level_on`` for the first
``duty`` fraction and at ``level_off`` for the rest. ``phase_us`` shifts
the first rising edge. Edges are instantaneous, which keeps every integral
below in closed form.

All operations are pure and accept scalar or ndarray time arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Human flicker fusion limit: modulation faster than this is invisible.
FLICKER_FUSION_HZ = 200.0


@dataclass(frozen=True)
class PulseParams:
    """Electrical drive of the modulated lamp.

    period_us: pulse repetition period, > 0.
    duty: on fraction of each period, in [0, 1].
    phase_us: offset of the first on-edge, normalized into [0, period_us).
    level_on / level_off: relative luminance of the two states,
        0 <= level_off <= level_on.
    """

    period_us: float
    duty: float = 0.5
    phase_us: float = 0.0
    level_on: float = 1.0
    level_off: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "period_us", float(self.period_us))
        object.__setattr__(self, "duty", float(self.duty))
        object.__setattr__(self, "level_on", float(self.level_on))
        object.__setattr__(self, "level_off", float(self.level_off))
        if not self.period_us > 0:
            raise ValueError(f"period_us must be > 0, got {self.period_us}")
        if not 0.0 <= self.duty <= 1.0:
            raise ValueError(f"duty must lie in [0, 1], got {self.duty}")
        if not 0.0 <= self.level_off <= self.level_on:
            raise ValueError(
                f"levels must satisfy 0 <= level_off <= level_on, "
                f"got on={self.level_on} off={self.level_off}"
            )
        object.__setattr__(self, "phase_us", float(self.phase_us) % self.period_us)

    @property
    def frequency_hz(self) -> float:
        """Repetition frequency in Hz (period is in microseconds)."""
        return 1e6 / self.period_us

    def to_json(self) -> dict:
        return {
            "period_us": self.period_us,
            "duty": self.duty,
            "phase_us": self.phase_us,
            "level_on": self.level_on,
            "level_off": self.level_off,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PulseParams":
        return cls(
            period_us=obj["period_us"],
            duty=obj["duty"],
            phase_us=obj.get("phase_us", 0.0),
            level_on=obj.get("level_on", 1.0),
            level_off=obj.get("level_off", 0.0),
        )


def level_at(p: PulseParams, t):
    """Instantaneous luminance at time ``t`` (microseconds).

    On-state iff ``(t - phase_us) mod period_us < duty * period_us``.
    """
    t = np.asarray(t, dtype=np.float64)
    on = np.mod(t - p.phase_us, p.period_us) < p.duty * p.period_us
    out = np.where(on, p.level_on, p.level_off)
    return float(out) if out.ndim == 0 else out


def _on_time_cumulative(p: PulseParams, x):
    # Total on-state time in [phase_us, phase_us + x); valid for any real x.
    on_len = p.duty * p.period_us
    periods = np.floor(x / p.period_us)
    return periods * on_len + np.minimum(np.mod(x, p.period_us), on_len)


def on_overlap(p: PulseParams, t_start, duration: float):
    """Exact on-state time within the window ``[t_start, t_start + duration]``.

    ``t_start`` may be an ndarray of window starts sharing one duration.
    """
    duration = float(duration)
    if duration < 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    t_start = np.asarray(t_start, dtype=np.float64)
    if p.duty <= 0.0:
        out = np.zeros_like(t_start)
    elif p.duty >= 1.0:
        out = np.full_like(t_start, duration)
    else:
        rel = t_start - p.phase_us
        out = _on_time_cumulative(p, rel + duration) - _on_time_cumulative(p, rel)
        # guard against float-roundoff excursions outside [0, duration]
        out = np.clip(out, 0.0, duration)
    return float(out) if out.ndim == 0 else out


def integrate_level(p: PulseParams, t_start, duration: float):
    """Exact integral of the luminance over the window, in luminance * us."""
    ov = on_overlap(p, t_start, duration)
    return p.level_off * float(duration) + (p.level_on - p.level_off) * ov


def check_imperceptible(p: PulseParams, threshold_hz: float = FLICKER_FUSION_HZ) -> bool:
    """True iff the drive produces no visible flicker.

    Constant light (duty 0 or 1) never flickers; otherwise the repetition
    frequency must exceed ``threshold_hz`` strictly.
    """
    if p.duty <= 0.0 or p.duty >= 1.0:
        return True
    return p.frequency_hz > threshold_hz
