"""Signal pick-off networks: resistive tap and directional coupler.

The resistive tap is a single resistor bridging the through line to a
matched monitor port. Its coupling, match, and insertion loss follow in
closed form from the three-resistor divider it forms with the line
impedance. The directional coupler variant is described by measured
tables over a finite band.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import OutOfBandError

# Representative package dissipation limits for tap resistor sizing, in watts.
PACKAGE_LIMITS_W = (0.05, 0.1, 0.25, 1.0)


@dataclass(frozen=True)
class ResistiveTapParams:
    """Bridge resistor r_c into a matched monitor port, on a z0 line."""

    r_c: float = 220.0
    z0: float = 50.0

    def __post_init__(self):
        if self.r_c <= 0.0 or self.z0 <= 0.0:
            raise ValueError("r_c and z0 must be positive")


# A table is either a flat scalar or [(freq_hz, value_db), ...] breakpoints.
Table = float | Sequence[tuple[float, float]]


def _eval_table(table: Table, f_hz: float) -> float:
    if isinstance(table, (int, float)):
        return float(table)
    pts = sorted(table)
    fs = np.array([p[0] for p in pts])
    vs = np.array([p[1] for p in pts])
    return float(np.interp(f_hz, fs, vs))


@dataclass(frozen=True)
class DirectionalCouplerParams:
    """Banded coupler characterized by coupling/insertion/directivity tables."""

    coupling_db: Table = -15.0
    insertion_db: Table = field(default_factory=lambda: ((1e9, 0.8), (14e9, 1.6)))
    directivity_db: Table = 6.0
    f_min_hz: float = 1e9
    f_max_hz: float = 14e9

    def __post_init__(self):
        if self.f_min_hz <= 0.0 or self.f_max_hz <= self.f_min_hz:
            raise ValueError("coupler band must satisfy 0 < f_min < f_max")


@dataclass(frozen=True)
class ReflectionEnvironment:
    """Downstream reflection seen from the pick-off point.

    gamma gives the reflection magnitude versus frequency (a callable or a
    constant, 0..1); electrical_delay_s is the one-way delay from the
    pick-off to the reflecting element.
    """

    gamma: float | Callable[[float], float] = 0.0
    electrical_delay_s: float = 0.0

    def gamma_at(self, f_hz: float) -> float:
        g = self.gamma(f_hz) if callable(self.gamma) else float(self.gamma)
        if not 0.0 <= g <= 1.0:
            raise ValueError(f"reflection magnitude must be within [0, 1], got {g}")
        return g


def tap_coupling(p: ResistiveTapParams) -> float:
    """Power coupling of the tap into its monitor port, in dB (negative)."""
    return 20.0 * math.log10(2.0 * p.z0 / (2.0 * p.r_c + 3.0 * p.z0))


def tap_sparams(p: ResistiveTapParams) -> tuple[float, float]:
    """(s11_db, s21_db) of the through line with the tap attached."""
    denom = 2.0 * p.r_c + 3.0 * p.z0
    s11 = 20.0 * math.log10(p.z0 / denom)
    s21 = 20.0 * math.log10((2.0 * p.r_c + 2.0 * p.z0) / denom)
    return s11, s21


def tap_dissipation(p: ResistiveTapParams, p_in_dbm: float) -> float:
    """Average power burned in the tap resistor, in watts.

    The dissipated fraction of the incident power is k^2 * r_c*z0/(r_c+z0)^2
    with k the through-line voltage transfer; it does not depend on drive
    level, so the result is linear in the input power.
    """
    k = (2.0 * p.r_c + 2.0 * p.z0) / (2.0 * p.r_c + 3.0 * p.z0)
    fraction = k * k * p.r_c * p.z0 / (p.r_c + p.z0) ** 2
    return fraction * 10.0 ** (p_in_dbm / 10.0) * 1e-3


def tap_input_limit_dbm(p: ResistiveTapParams, package_limit_w: float) -> float:
    """Largest input power (dBm) keeping the tap resistor within a package rating."""
    one_watt_in = tap_dissipation(p, 30.0)  # dissipation at 1 W input
    return 30.0 + 10.0 * math.log10(package_limit_w / one_watt_in)


def coupler_response(p: DirectionalCouplerParams, f_hz: float) -> tuple[float, float, float]:
    """(coupling_db, insertion_db, directivity_db) at f_hz.

    Tables are interpolated piecewise-linearly; queries outside
    [f_min_hz, f_max_hz] raise OutOfBandError.
    """
    if not p.f_min_hz <= f_hz <= p.f_max_hz:
        raise OutOfBandError(
            f"{f_hz / 1e9:.3f} GHz outside coupler band "
            f"[{p.f_min_hz / 1e9:.3f}, {p.f_max_hz / 1e9:.3f}] GHz"
        )
    return (
        _eval_table(p.coupling_db, f_hz),
        _eval_table(p.insertion_db, f_hz),
        _eval_table(p.directivity_db, f_hz),
    )


def sampled_forward_amplitude(
    kind: str,
    env: ReflectionEnvironment,
    f_hz: float,
    coupler: DirectionalCouplerParams | None = None,
) -> float:
    """Ratio of the monitored amplitude to the pure forward wave.

    A resistive tap samples the standing-wave sum of forward and reflected
    waves directly. A directional coupler rejects the reflected wave by its
    directivity, so only an attenuated copy leaks into the monitor port.
    """
    g = env.gamma_at(f_hz)
    phase = -2.0 * (2.0 * math.pi * f_hz * env.electrical_delay_s)
    if kind == "tap":
        leak = g
    elif kind == "coupler":
        if coupler is None:
            raise ValueError("coupler parameters required for kind='coupler'")
        _, _, directivity = coupler_response(coupler, f_hz)
        leak = g * 10.0 ** (-directivity / 20.0)
    else:
        raise ValueError(f"unknown pick-off kind {kind!r}")
    return abs(1.0 + leak * complex(math.cos(phase), math.sin(phase)))


def load_coupler_table(path: str) -> DirectionalCouplerParams:
    """Read a measured coupler table CSV: freq_hz, coupling_db, insertion_db, directivity_db."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"freq_hz", "coupling_db", "insertion_db", "directivity_db"}
        if reader.fieldnames is None or expected - set(reader.fieldnames):
            raise ValueError(f"coupler table must have columns {sorted(expected)}")
        for row in reader:
            rows.append(
                (
                    float(row["freq_hz"]),
                    float(row["coupling_db"]),
                    float(row["insertion_db"]),
                    float(row["directivity_db"]),
                )
            )
    if not rows:
        raise ValueError("coupler table is empty")
    rows.sort()
    return DirectionalCouplerParams(
        coupling_db=tuple((f, c) for f, c, _, _ in rows),
        insertion_db=tuple((f, i) for f, _, i, _ in rows),
        directivity_db=tuple((f, d) for f, _, _, d in rows),
        f_min_hz=rows[0][0],
        f_max_hz=rows[-1][0],
    )


def save_coupler_table(p: DirectionalCouplerParams, path: str, freqs_hz: Sequence[float]) -> None:
    """Write the coupler tables sampled on freqs_hz to CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["freq_hz", "coupling_db", "insertion_db", "directivity_db"])
        for f in freqs_hz:
            c, i, d = coupler_response(p, f)
            writer.writerow([repr(float(f)), repr(c), repr(i), repr(d)])
