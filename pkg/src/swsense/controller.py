"""Sample-driven detection controller: gain control, thresholding, filter actions.

Every ADC acquisition runs one handler pass: the gain-control policy first
(so attenuator bookkeeping is always current), then estimation and the
threshold state machine. Actions carry an effective time one controller
clock after the triggering sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .estimator import CONF_SATURATED, CalibrationTable, Estimate, estimate
from .errors import NoSignalError, SwsenseError
from .readout import ChainConfig, TapCodes, detector_floor_code

MODE_IDLE = "idle"
MODE_ENGAGING = "engaging"
MODE_ENGAGED = "engaged"
MODE_RELEASING = "releasing"

ACT_TUNE = "tune"
ACT_RELEASE = "release"
ACT_FLAG_SET = "flag_set"
ACT_FLAG_CLEAR = "flag_clear"
ACT_SET_ATT = "set_att"


@dataclass(frozen=True)
class Action:
    """One controller output, applied at effective_at_s."""

    kind: str
    effective_at_s: float
    freq_hz: float | None = None
    att_db: float | None = None


@dataclass(frozen=True)
class ControllerConfig:
    """Detection threshold, gain-control window, and timing of one stage.

    The code window defaults match the default chain: agc_high_code is the
    open-end code seen at agc_engage_power input with zero attenuation, so
    the attenuator starts stepping right above that input level. Readings
    at agc_floor_code mean "no signal" and freeze the attenuator rather
    than walking it down.
    """

    threshold_dbm: float = 0.0
    agc_engage_power: float = 0.0
    agc_high_code: int = 2965
    agc_low_code: int = 2815
    agc_floor_code: int = 757
    clock_period: float = 200e-9
    retune_deadband_hz: float = 400e6
    switch_freq_hz: float | None = None

    @staticmethod
    def for_chain(
        cfg: ChainConfig,
        threshold_dbm: float = 0.0,
        agc_engage_power: float = 0.0,
        window_codes: int = 150,
        **overrides,
    ) -> "ControllerConfig":
        """Derive the code window from a chain config and an engage power."""
        from .core import SignalDescriptor, Tone
        from .readout import chain_voltages, adc_sample

        f_probe = cfg.stub.taps[0].f_max_hz / 2.0
        sig = SignalDescriptor((Tone(freq_hz=f_probe, power_dbm=agc_engage_power),))
        v_oc, _, _ = chain_voltages(sig, cfg, 0.0)
        high = adc_sample(v_oc, cfg.adc)
        return ControllerConfig(
            threshold_dbm=threshold_dbm,
            agc_engage_power=agc_engage_power,
            agc_high_code=high,
            agc_low_code=high - window_codes,
            agc_floor_code=detector_floor_code(cfg),
            **overrides,
        )


@dataclass(frozen=True)
class ControllerState:
    """Controller bookkeeping between samples."""

    mode: str = MODE_IDLE
    att_db: float = 0.0
    tuned_freq_hz: float | None = None
    pending_mode: str | None = None
    pending_at_s: float | None = None
    freeze_samples: int = 0
    last_estimate: Estimate | None = None
    diagnostic: str | None = None
    flag: bool = False


def agc_policy(code_oc: int, att_db: float, ctrl: ControllerConfig, chain: ChainConfig) -> float:
    """Next attenuator setting for an open-end code (one step per sample).

    Readings above the window step the attenuation up; readings below it
    step down only while a signal is actually visible (above the detector
    floor) and attenuation remains to remove.
    """
    step = chain.attenuator.step_db
    max_db = chain.attenuator.max_db
    if code_oc > ctrl.agc_high_code and att_db < max_db - 1e-9:
        return min(max_db, round((att_db + step) / step) * step)
    if ctrl.agc_floor_code < code_oc < ctrl.agc_low_code and att_db > 1e-9:
        return max(0.0, round((att_db - step) / step) * step)
    return att_db


def on_sample(
    codes: TapCodes,
    st: ControllerState,
    ctrl: ControllerConfig,
    chain: ChainConfig,
    cal: CalibrationTable,
) -> tuple[ControllerState, list[Action]]:
    """Process one acquisition; returns the next state and emitted actions.

    An open-end reading at the detector floor is interpreted as signal
    absence (below any threshold); other estimation failures leave the
    filter untouched and are surfaced through the diagnostic field.
    """
    now = codes.t_s
    actions: list[Action] = []
    mode = st.mode
    pending_mode, pending_at = st.pending_mode, st.pending_at_s
    if pending_at is not None and now >= pending_at:
        mode, pending_mode, pending_at = pending_mode, None, None

    # Gain control first, so estimation sees current attenuator bookkeeping.
    att_cmd = agc_policy(codes.code_oc, st.att_db, ctrl, chain)
    stepped = att_cmd != st.att_db
    if stepped:
        actions.append(Action(ACT_SET_ATT, now + ctrl.clock_period, att_db=att_cmd))

    diagnostic = None
    if codes.code_oc >= chain.adc.full_code and st.att_db >= chain.attenuator.max_db:
        diagnostic = "overrange: code pinned at full scale with attenuator exhausted"

    est: Estimate | None = None
    no_signal = False
    if st.freeze_samples > 0:
        new_freeze = st.freeze_samples - 1
    else:
        new_freeze = 0
        try:
            est = estimate(codes, cal, ctrl.switch_freq_hz)
        except NoSignalError:
            no_signal = True
        except SwsenseError as exc:
            diagnostic = f"{type(exc).__name__}: {exc}"

    tuned = st.tuned_freq_hz
    flag = st.flag
    # A saturated open-end reading carries no usable tap ratio; hold all
    # mode decisions and let the step attenuator bring it back in range.
    usable = est is not None and est.confidence != CONF_SATURATED
    if usable or no_signal:
        above = usable and est.power_dbm > ctrl.threshold_dbm
        if mode == MODE_IDLE and above:
            actions.append(Action(ACT_TUNE, now + ctrl.clock_period, freq_hz=est.freq_hz))
            actions.append(Action(ACT_FLAG_SET, now + ctrl.clock_period))
            mode, pending_mode, pending_at = MODE_ENGAGING, MODE_ENGAGED, now + ctrl.clock_period
            tuned = est.freq_hz
            flag = True
        elif mode == MODE_ENGAGED:
            if no_signal or not above:
                actions.append(Action(ACT_RELEASE, now + ctrl.clock_period))
                actions.append(Action(ACT_FLAG_CLEAR, now + ctrl.clock_period))
                mode, pending_mode, pending_at = MODE_RELEASING, MODE_IDLE, now + ctrl.clock_period
                tuned = None
                flag = False
            elif (
                tuned is not None
                and abs(est.freq_hz - tuned) > ctrl.retune_deadband_hz
            ):
                actions.append(Action(ACT_TUNE, now + ctrl.clock_period, freq_hz=est.freq_hz))
                mode, pending_mode, pending_at = MODE_ENGAGING, MODE_ENGAGED, now + ctrl.clock_period
                tuned = est.freq_hz

    if stepped:
        new_freeze = 1  # next sample straddles the attenuator settling window

    new_state = ControllerState(
        mode=mode,
        att_db=att_cmd,
        tuned_freq_hz=tuned,
        pending_mode=pending_mode,
        pending_at_s=pending_at,
        freeze_samples=new_freeze,
        last_estimate=est if est is not None else (None if no_signal else st.last_estimate),
        diagnostic=diagnostic,
        flag=flag,
    )
    return new_state, actions
