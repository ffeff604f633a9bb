"""Open-circuit sensing stub: voltages along the line versus frequency.

Driving an open quarter-wave-style stub sets up a standing wave whose
open-end magnitude depends only on the delivered power, while the voltage
at a tap a distance l from the open end scales by |cos((pi/2) f / f_max)|
with f_max = c / (4 l sqrt(eps_eff)). Each tap therefore encodes frequency
as a voltage ratio against the open end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from scipy.constants import c as _C0

from .errors import BijectivityError


@dataclass(frozen=True)
class TapSpec:
    """One read-out position, named by the highest frequency it resolves uniquely."""

    name: str
    f_max_hz: float

    def __post_init__(self):
        if self.f_max_hz <= 0.0:
            raise ValueError("f_max_hz must be positive")


@dataclass(frozen=True)
class StubParams:
    """Lossless open stub with read-out taps sorted by descending f_max."""

    z0s: float = 50.0
    taps: tuple[TapSpec, ...] = field(
        default_factory=lambda: (TapSpec("l1", 16e9), TapSpec("l2", 5e9))
    )
    eps_eff: float = 1.0
    r_d: float = 180.0  # detector isolation resistor; drops out of voltage ratios

    def __post_init__(self):
        if self.z0s <= 0.0 or self.eps_eff <= 0.0 or self.r_d <= 0.0:
            raise ValueError("z0s, eps_eff, r_d must be positive")
        object.__setattr__(self, "taps", tuple(self.taps))
        fs = [t.f_max_hz for t in self.taps]
        if fs != sorted(fs, reverse=True):
            raise ValueError("taps must be ordered by descending f_max_hz")


def v_oc_magnitude(p_stub_w: float, z0s: float) -> float:
    """Open-end voltage magnitude for power p_stub_w delivered into the stub."""
    if p_stub_w < 0.0:
        raise ValueError("stub power must be >= 0")
    return math.sqrt(8.0 * p_stub_w * z0s)


def standing_ratio(f_hz: float, f_max_hz: float) -> float:
    """Tap-to-open-end voltage ratio cos((pi/2) f / f_max), monotone on (0, f_max].

    Raises BijectivityError outside that range; use wrapped_ratio for the
    physical (periodic, non-invertible) response beyond f_max.
    """
    if not 0.0 < f_hz <= f_max_hz:
        raise BijectivityError(
            f"{f_hz / 1e9:.3f} GHz outside the monotone range (0, {f_max_hz / 1e9:.3f}] GHz"
        )
    return math.cos(math.pi / 2.0 * f_hz / f_max_hz)


def wrapped_ratio(f_hz: float, f_max_hz: float) -> float:
    """|cos((pi/2) f / f_max)| for any positive frequency (periodic response)."""
    return abs(math.cos(math.pi / 2.0 * f_hz / f_max_hz))


def tap_length(f_max_hz: float, eps_eff: float = 1.0) -> float:
    """Distance from the open end placing the first null at f_max_hz, in meters."""
    if f_max_hz <= 0.0 or eps_eff <= 0.0:
        raise ValueError("f_max_hz and eps_eff must be positive")
    return _C0 / (4.0 * f_max_hz * math.sqrt(eps_eff))


def tap_rms_voltages(
    expanded: Sequence[tuple[float, float]], stub: StubParams
) -> tuple[float, list[float]]:
    """(open-end voltage, per-tap voltages) for expanded (freq_hz, p_stub_w) lines.

    Lines at distinct frequencies are uncorrelated, so their standing-wave
    contributions add in power at every position along the stub.
    """
    oc_sq = 0.0
    tap_sq = [0.0] * len(stub.taps)
    for f_hz, p_w in expanded:
        if p_w < 0.0:
            raise ValueError("per-line stub power must be >= 0")
        v_sq = 8.0 * p_w * stub.z0s
        oc_sq += v_sq
        for i, tap in enumerate(stub.taps):
            r = wrapped_ratio(f_hz, tap.f_max_hz)
            tap_sq[i] += v_sq * r * r
    return math.sqrt(oc_sq), [math.sqrt(x) for x in tap_sq]
