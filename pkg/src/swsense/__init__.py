"""Behavioral models and closed-loop simulation for standing-wave RF sensing.

The package models a line-monitoring stage end to end: a resistive tap or
directional coupler feeding an attenuator, amplifier and dual-tap open
stub with log detectors and an ADC; the estimator that inverts the tap
voltage ratio into frequency and power; and a controller that steers a
tunable notch at whatever crosses its power threshold.
"""

from .core import SignalDescriptor, Tone, dbm_to_watts, expand_modulated, expand_signal, watts_to_dbm
from .coupling import (
    DirectionalCouplerParams,
    ReflectionEnvironment,
    ResistiveTapParams,
    coupler_response,
    sampled_forward_amplitude,
    tap_coupling,
    tap_dissipation,
    tap_input_limit_dbm,
    tap_sparams,
)
from .stub import StubParams, TapSpec, standing_ratio, tap_length, tap_rms_voltages, v_oc_magnitude
from .readout import (
    AdcParams,
    AmplifierParams,
    AttenuatorParams,
    ChainConfig,
    DetectorParams,
    TapCodes,
    chain_config_hash,
    chain_readout,
    chain_voltages,
    load_chain_config,
    save_chain_config,
)
from .filters import FilterState, NotchModel, notch_s21_db, release, stopband_gamma, tune
from .estimator import (
    CalibrationGrid,
    CalibrationTable,
    Estimate,
    build_calibration,
    estimate,
    estimate_frequency,
    estimate_power,
    load_calibration,
    place_nodes,
    resolution,
    save_calibration,
)
from .controller import ControllerConfig, ControllerState, agc_policy, on_sample
from .engine import (
    Metrics,
    Scenario,
    StageSpec,
    Trace,
    TraceRecord,
    detect_limit_cycle,
    load_scenario,
    measure_response_time,
    run,
    save_scenario,
)
from .errors import (
    BijectivityError,
    CalibrationRangeError,
    IndeterminateFrequencyError,
    NoSignalError,
    OutOfBandError,
    PlacementInfeasibleError,
    PowerOverrangeError,
    SwsenseError,
    TuningRangeError,
)

__version__ = "0.1.0"

__all__ = [
    "AdcParams",
    "AmplifierParams",
    "AttenuatorParams",
    "BijectivityError",
    "CalibrationGrid",
    "CalibrationRangeError",
    "CalibrationTable",
    "ChainConfig",
    "ControllerConfig",
    "ControllerState",
    "DetectorParams",
    "DirectionalCouplerParams",
    "Estimate",
    "FilterState",
    "IndeterminateFrequencyError",
    "Metrics",
    "NoSignalError",
    "NotchModel",
    "OutOfBandError",
    "PlacementInfeasibleError",
    "PowerOverrangeError",
    "ReflectionEnvironment",
    "ResistiveTapParams",
    "Scenario",
    "SignalDescriptor",
    "StageSpec",
    "StubParams",
    "SwsenseError",
    "TapCodes",
    "TapSpec",
    "Tone",
    "Trace",
    "TraceRecord",
    "TuningRangeError",
    "agc_policy",
    "build_calibration",
    "chain_config_hash",
    "chain_readout",
    "chain_voltages",
    "coupler_response",
    "dbm_to_watts",
    "detect_limit_cycle",
    "estimate",
    "estimate_frequency",
    "estimate_power",
    "expand_modulated",
    "expand_signal",
    "load_calibration",
    "load_chain_config",
    "load_scenario",
    "measure_response_time",
    "notch_s21_db",
    "on_sample",
    "place_nodes",
    "release",
    "resolution",
    "run",
    "sampled_forward_amplitude",
    "save_calibration",
    "save_chain_config",
    "save_scenario",
    "standing_ratio",
    "stopband_gamma",
    "tap_coupling",
    "tap_dissipation",
    "tap_input_limit_dbm",
    "tap_length",
    "tap_rms_voltages",
    "tap_sparams",
    "tune",
    "v_oc_magnitude",
    "watts_to_dbm",
]
