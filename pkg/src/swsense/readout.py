"""Conditioning and read-out chain: attenuator, amplifier, log detectors, ADC.

chain_readout composes the whole monitor path for a signal descriptor:
pick-off coupling, step attenuation, saturating gain, stub drive, per-tap
standing-wave voltages, logarithmic detection, and ADC quantization. The
same composition runs unquantized via chain_voltages for analysis.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Sequence

from .core import SignalDescriptor, Tone, expand_signal
from .coupling import (
    DirectionalCouplerParams,
    ResistiveTapParams,
    coupler_response,
    tap_coupling,
)
from .stub import StubParams, TapSpec, tap_rms_voltages


@dataclass(frozen=True)
class AttenuatorParams:
    """Digital step attenuator ahead of the gain stage."""

    step_db: float = 0.25
    max_db: float = 31.75
    settle_time: float = 50e-9

    def __post_init__(self):
        if self.step_db <= 0.0 or self.max_db < self.step_db:
            raise ValueError("need 0 < step_db <= max_db")

    def valid_setting(self, att_db: float) -> bool:
        if not 0.0 <= att_db <= self.max_db + 1e-9:
            return False
        steps = att_db / self.step_db
        return abs(steps - round(steps)) < 1e-6


@dataclass(frozen=True)
class AmplifierParams:
    """Fixed-gain driver with a hard output power ceiling."""

    gain_db: float = 20.0
    p_out_sat_dbm: float = 20.0


@dataclass(frozen=True)
class DetectorParams:
    """Log detector v_det = slope_a * log10(v) + intercept_b over its linear range.

    Inputs outside [v_in_min, v_in_max] volts clamp to the range edges,
    reproducing the low-power floor and high-power saturation of real
    detectors. The default range spans 40 dB placed around the held
    operating point of the default chain.
    """

    slope_a: float = 0.4
    intercept_b: float = 1.0
    v_in_min: float = 0.014
    v_in_max: float = 1.4

    def __post_init__(self):
        if self.slope_a <= 0.0:
            raise ValueError("slope_a must be positive")
        if not 0.0 < self.v_in_min < self.v_in_max:
            raise ValueError("need 0 < v_in_min < v_in_max")


@dataclass(frozen=True)
class AdcParams:
    """Flash ADC digitizing the detector outputs."""

    bits: int = 12
    sample_rate: float = 5e6
    v_fs: float = 1.398

    def __post_init__(self):
        if not 6 <= self.bits <= 16:
            raise ValueError("bits must lie in [6, 16]")
        if self.sample_rate <= 0.0 or self.v_fs <= 0.0:
            raise ValueError("sample_rate and v_fs must be positive")

    @property
    def lsb(self) -> float:
        return self.v_fs / 2**self.bits

    @property
    def full_code(self) -> int:
        return 2**self.bits - 1

    @property
    def sample_period(self) -> float:
        return 1.0 / self.sample_rate


@dataclass(frozen=True)
class ChainConfig:
    """Every hardware parameter of one sensing stage."""

    coupling_kind: str = "tap"  # "tap" or "coupler"
    tap: ResistiveTapParams = field(default_factory=ResistiveTapParams)
    coupler: DirectionalCouplerParams | None = None
    stub: StubParams = field(default_factory=StubParams)
    attenuator: AttenuatorParams = field(default_factory=AttenuatorParams)
    amplifier: AmplifierParams = field(default_factory=AmplifierParams)
    detector: DetectorParams = field(default_factory=DetectorParams)
    adc: AdcParams = field(default_factory=AdcParams)
    # Optional monitor-path gain ripple versus frequency, [(freq_hz, db), ...].
    gain_ripple: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.coupling_kind not in ("tap", "coupler"):
            raise ValueError("coupling_kind must be 'tap' or 'coupler'")
        if self.coupling_kind == "coupler" and self.coupler is None:
            object.__setattr__(self, "coupler", DirectionalCouplerParams())
        if len(self.stub.taps) != 2:
            raise ValueError("read-out chain expects exactly two stub taps")

    def coupling_db_at(self, f_hz: float) -> float:
        if self.coupling_kind == "tap":
            return tap_coupling(self.tap)
        c, _, _ = coupler_response(self.coupler, f_hz)
        return c

    def through_loss_db_at(self, f_hz: float) -> float:
        """Through-line insertion of the pick-off network, in dB >= 0."""
        if self.coupling_kind == "tap":
            from .coupling import tap_sparams

            return -tap_sparams(self.tap)[1]
        _, ins, _ = coupler_response(self.coupler, f_hz)
        return ins

    def ripple_db_at(self, f_hz: float) -> float:
        if not self.gain_ripple:
            return 0.0
        import numpy as np

        pts = sorted(self.gain_ripple)
        return float(
            np.interp(f_hz, [p[0] for p in pts], [p[1] for p in pts])
        )


@dataclass(frozen=True)
class TapCodes:
    """One synchronous ADC acquisition of the three detector outputs."""

    t_s: float
    code_oc: int
    code_l1: int
    code_l2: int
    att_db: float


def detector_voltage(v_rms: float, det: DetectorParams) -> float:
    """Log-detector output for an input of v_rms volts, clamped to its range."""
    if v_rms < 0.0:
        raise ValueError("detector input voltage must be >= 0")
    v = min(max(v_rms, det.v_in_min), det.v_in_max)
    return det.slope_a * math.log10(v) + det.intercept_b


def adc_sample(v: float, adc: AdcParams) -> int:
    """Quantize a detector voltage to an ADC code (floor, clamped to range)."""
    return min(max(int(math.floor(v / adc.lsb)), 0), adc.full_code)


def detector_floor_code(cfg: ChainConfig) -> int:
    """Code produced when a detector input sits at (or below) its linear floor."""
    return adc_sample(detector_voltage(0.0, cfg.detector), cfg.adc)


def detector_ceiling_code(cfg: ChainConfig) -> int:
    """Code produced when a detector input is pinned at its linear ceiling."""
    return adc_sample(detector_voltage(cfg.detector.v_in_max, cfg.detector), cfg.adc)


def chain_voltages_lines(
    lines: Sequence[tuple[float, float]],
    cfg: ChainConfig,
    att_db: float,
    forward_ratios: Sequence[float] | None = None,
) -> tuple[float, float, float]:
    """Unquantized detector voltages (open end, tap 1, tap 2).

    lines are (freq_hz, input-referred watts) pairs. forward_ratios, when
    given, scales the monitored amplitude per line to account for
    downstream reflections at the pick-off point.
    """
    if not cfg.attenuator.valid_setting(att_db):
        raise ValueError(
            f"att_db={att_db} is not a multiple of {cfg.attenuator.step_db} "
            f"within [0, {cfg.attenuator.max_db}]"
        )
    drive: list[tuple[float, float]] = []
    total_w = 0.0
    for i, (f_hz, p_w) in enumerate(lines):
        g_db = (
            cfg.coupling_db_at(f_hz)
            - att_db
            + cfg.amplifier.gain_db
            + cfg.ripple_db_at(f_hz)
        )
        p = p_w * 10.0 ** (g_db / 10.0)
        if forward_ratios is not None:
            r = forward_ratios[i]
            p *= r * r
        drive.append((f_hz, p))
        total_w += p
    # Hard amplifier ceiling on total output power; line ratios are preserved.
    sat_w = 10.0 ** (cfg.amplifier.p_out_sat_dbm / 10.0) * 1e-3
    if total_w > sat_w:
        scale = sat_w / total_w
        drive = [(f, p * scale) for f, p in drive]
    v_oc, taps = tap_rms_voltages(drive, cfg.stub)
    det = cfg.detector
    return (
        detector_voltage(v_oc, det),
        detector_voltage(taps[0], det),
        detector_voltage(taps[1], det),
    )


def chain_voltages(
    sig: SignalDescriptor,
    cfg: ChainConfig,
    att_db: float,
    forward_ratio: Callable[[float], float] | None = None,
) -> tuple[float, float, float]:
    """chain_voltages_lines over an expanded signal descriptor."""
    lines = expand_signal(sig)
    ratios = None if forward_ratio is None else [forward_ratio(f) for f, _ in lines]
    return chain_voltages_lines(lines, cfg, att_db, ratios)


def chain_readout_lines(
    lines: Sequence[tuple[float, float]],
    cfg: ChainConfig,
    att_db: float,
    t_s: float = 0.0,
    forward_ratios: Sequence[float] | None = None,
) -> TapCodes:
    """Digitized three-detector acquisition for pre-expanded lines."""
    v_oc, v1, v2 = chain_voltages_lines(lines, cfg, att_db, forward_ratios)
    adc = cfg.adc
    return TapCodes(
        t_s=t_s,
        code_oc=adc_sample(v_oc, adc),
        code_l1=adc_sample(v1, adc),
        code_l2=adc_sample(v2, adc),
        att_db=att_db,
    )


def chain_readout(
    sig: SignalDescriptor,
    cfg: ChainConfig,
    att_db: float,
    t_s: float = 0.0,
    forward_ratio: Callable[[float], float] | None = None,
) -> TapCodes:
    """Digitized three-detector acquisition for a signal descriptor."""
    lines = expand_signal(sig)
    ratios = None if forward_ratio is None else [forward_ratio(f) for f, _ in lines]
    return chain_readout_lines(lines, cfg, att_db, t_s, ratios)


# ---------------- ChainConfig JSON (de)serialization ----------------


def _table_to_json(table):
    if table is None:
        return None
    if isinstance(table, (int, float)):
        return float(table)
    return [[float(f), float(v)] for f, v in table]


def _table_from_json(obj):
    if obj is None or isinstance(obj, (int, float)):
        return obj
    return tuple((float(f), float(v)) for f, v in obj)


def chain_config_to_dict(cfg: ChainConfig) -> dict:
    d = {
        "coupling_kind": cfg.coupling_kind,
        "tap": asdict(cfg.tap),
        "coupler": None,
        "stub": {
            "z0s": cfg.stub.z0s,
            "taps": [{"name": t.name, "f_max": t.f_max_hz} for t in cfg.stub.taps],
            "eps_eff": cfg.stub.eps_eff,
            "r_d": cfg.stub.r_d,
        },
        "attenuator": asdict(cfg.attenuator),
        "amplifier": asdict(cfg.amplifier),
        "detector": asdict(cfg.detector),
        "adc": asdict(cfg.adc),
        "gain_ripple": _table_to_json(cfg.gain_ripple),
    }
    if cfg.coupler is not None:
        d["coupler"] = {
            "coupling_db": _table_to_json(cfg.coupler.coupling_db),
            "insertion_db": _table_to_json(cfg.coupler.insertion_db),
            "directivity_db": _table_to_json(cfg.coupler.directivity_db),
            "f_min_hz": cfg.coupler.f_min_hz,
            "f_max_hz": cfg.coupler.f_max_hz,
        }
    return d


def chain_config_from_dict(d: dict) -> ChainConfig:
    coupler = None
    if d.get("coupler") is not None:
        c = d["coupler"]
        coupler = DirectionalCouplerParams(
            coupling_db=_table_from_json(c["coupling_db"]),
            insertion_db=_table_from_json(c["insertion_db"]),
            directivity_db=_table_from_json(c["directivity_db"]),
            f_min_hz=c["f_min_hz"],
            f_max_hz=c["f_max_hz"],
        )
    stub_d = d.get("stub", {})
    stub = StubParams(
        z0s=stub_d.get("z0s", 50.0),
        taps=tuple(TapSpec(t["name"], t["f_max"]) for t in stub_d.get("taps", []))
        or StubParams().taps,
        eps_eff=stub_d.get("eps_eff", 1.0),
        r_d=stub_d.get("r_d", 180.0),
    )
    ripple = d.get("gain_ripple")
    return ChainConfig(
        coupling_kind=d.get("coupling_kind", "tap"),
        tap=ResistiveTapParams(**d.get("tap", {})),
        coupler=coupler,
        stub=stub,
        attenuator=AttenuatorParams(**d.get("attenuator", {})),
        amplifier=AmplifierParams(**d.get("amplifier", {})),
        detector=DetectorParams(**d.get("detector", {})),
        adc=AdcParams(**d.get("adc", {})),
        gain_ripple=_table_from_json(ripple) if ripple is not None else None,
    )


def save_chain_config(cfg: ChainConfig, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(chain_config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_chain_config(path: str) -> ChainConfig:
    with open(path) as fh:
        return chain_config_from_dict(json.load(fh))


def chain_config_hash(cfg: ChainConfig) -> str:
    """Stable short hash of a chain configuration, for calibration headers."""
    blob = json.dumps(chain_config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
