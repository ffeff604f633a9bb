"""Envelope-domain closed-loop simulation of sensing stages on a shared line.

Time is advanced on a fixed dt grid for trace logging, while each stage's
ADC samples on its own tick stream (seed-randomized phase, codes delivered
one sample period after conversion start) and its controller reacts with a
one-clock actuation delay. Stage k feeds stage k+1 through its pick-off
insertion loss and its notch; a reflective notch also perturbs what stage
k's own detectors see via the sampled forward amplitude.
"""

from __future__ import annotations

import heapq
import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field, asdict

import numpy as np

from .controller import (
    ACT_FLAG_CLEAR,
    ACT_FLAG_SET,
    ACT_RELEASE,
    ACT_SET_ATT,
    ACT_TUNE,
    Action,
    ControllerConfig,
    ControllerState,
    on_sample,
)
from .core import Tone, expand_modulated, watts_to_dbm
from .coupling import ReflectionEnvironment, sampled_forward_amplitude
from .errors import SwsenseError, TuningRangeError
from .estimator import CalibrationGrid, CalibrationTable, build_calibration
from .filters import FilterState, NotchModel, notch_s21_db, stopband_gamma, release, tune
from .readout import (
    ChainConfig,
    chain_config_from_dict,
    chain_config_hash,
    chain_config_to_dict,
    chain_readout_lines,
)

_SILENT_DBM = -300.0


@dataclass(frozen=True)
class StageSpec:
    """One sensing stage: chain hardware, its controller, and its notch."""

    chain: ChainConfig = field(default_factory=ChainConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    notch: NotchModel = field(default_factory=NotchModel)
    electrical_delay_s: float = 0.0


@dataclass(frozen=True)
class Scenario:
    """A closed-loop run: sources driving one or more cascaded stages."""

    duration_s: float
    sources: tuple[Tone, ...]
    stages: tuple[StageSpec, ...]
    dt_s: float = 25e-9
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "stages", tuple(self.stages))


@dataclass(frozen=True)
class StageSnapshot:
    """Controller/filter observables of one stage at one trace instant."""

    code_oc: int
    code_l1: int
    code_l2: int
    att_db: float
    f_est_hz: float
    p_est_dbm: float
    mode: str
    action: str
    filter_engaged: bool
    filter_center_hz: float


@dataclass(frozen=True)
class TraceRecord:
    """Powers and stage observables at one dt instant."""

    t_s: float
    in_dbm: tuple[tuple[float, ...], ...]  # [stage][source]
    out_dbm: tuple[tuple[float, ...], ...]
    stages: tuple[StageSnapshot, ...]


@dataclass
class Metrics:
    """Summary quantities of one run."""

    response_time_engage_s: float | None = None
    response_time_release_s: float | None = None
    limit_cycle: bool = False
    limit_cycle_period_s: float | None = None
    final_output_dbm: list[float] = field(default_factory=list)  # per source
    suppression_db: list[float | None] = field(default_factory=list)
    max_output_dbm: float | None = None
    diagnostics: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AppliedAction:
    """An action as applied by the engine (or refused, with ok=False)."""

    stage: int
    kind: str
    decided_s: float
    effective_at_s: float
    freq_hz: float | None = None
    att_db: float | None = None
    ok: bool = True


@dataclass
class Trace:
    """Everything a run produced."""

    scenario: Scenario
    records: list[TraceRecord]
    samples: list[list[dict]]  # per stage, one dict per ADC delivery
    actions: list[AppliedAction]
    filter_hist: list[list[tuple[float, FilterState]]]
    metrics: Metrics


_CAL_CACHE: dict[str, CalibrationTable] = {}


def clear_calibration_cache() -> None:
    _CAL_CACHE.clear()


def default_grid_for(cfg: ChainConfig) -> CalibrationGrid:
    """Calibration sweep covering the chain's usable band."""
    f_hi = cfg.stub.taps[0].f_max_hz
    f_lo = 1e9
    if cfg.coupling_kind == "coupler" and cfg.coupler is not None:
        f_hi = min(f_hi, cfg.coupler.f_max_hz)
        f_lo = max(f_lo, cfg.coupler.f_min_hz)
    return CalibrationGrid(f_start_hz=f_lo, f_stop_hz=f_hi)


def get_calibration(cfg: ChainConfig, ctrl: ControllerConfig, grid: CalibrationGrid | None = None) -> CalibrationTable:
    """Build (or reuse) the calibration table a controller estimates against."""
    grid = grid or default_grid_for(cfg)
    key = json.dumps(
        [
            chain_config_hash(cfg),
            asdict(grid),
            ctrl.agc_high_code,
            ctrl.agc_low_code,
            ctrl.agc_floor_code,
        ]
    )
    if key not in _CAL_CACHE:
        _CAL_CACHE[key] = build_calibration(cfg, grid, ctrl)
    return _CAL_CACHE[key]


def _validate(sc: Scenario) -> None:
    if sc.duration_s <= 0.0 or sc.dt_s <= 0.0:
        raise ValueError("duration_s and dt_s must be positive")
    if not sc.stages:
        raise ValueError("scenario needs at least one stage")
    for k, st in enumerate(sc.stages):
        period = st.chain.adc.sample_period
        if sc.dt_s > period / 4.0 + 1e-15:
            raise ValueError(
                f"dt_s={sc.dt_s} too coarse for stage {k}: need <= ADC period/4 = {period / 4.0}"
            )
        if st.chain.coupling_kind == "coupler":
            band = (st.chain.coupler.f_min_hz, st.chain.coupler.f_max_hz)
            for src in sc.sources:
                for f, _ in expand_modulated(src):
                    if not band[0] <= f <= band[1]:
                        raise ValueError(
                            f"source line {f / 1e9:.3f} GHz outside stage {k} coupler band"
                        )


class _Runner:
    def __init__(self, sc: Scenario, calibrations: list[CalibrationTable] | None):
        _validate(sc)
        self.sc = sc
        self.expanded = [expand_modulated(src) for src in sc.sources]
        rng = np.random.default_rng(sc.seed)
        self.phase = [
            float(rng.uniform(0.0, st.chain.adc.sample_period)) for st in sc.stages
        ]
        self.cals = calibrations or [
            get_calibration(st.chain, st.controller) for st in sc.stages
        ]
        self.filter_hist: list[list[tuple[float, FilterState]]] = [
            [(-math.inf, FilterState())] for _ in sc.stages
        ]
        self.att_hist: list[list[tuple[float, float]]] = [[(-math.inf, 0.0)] for _ in sc.stages]
        self.ctrl_state = [ControllerState() for _ in sc.stages]
        self.samples: list[list[dict]] = [[] for _ in sc.stages]
        self.actions: list[AppliedAction] = []
        self.diagnostics: list[str] = []

    # ---- state lookups (histories are chronological per stage) ----

    def _filter_state_at(self, k: int, t: float) -> FilterState:
        hist = self.filter_hist[k]
        i = bisect_right(hist, t, key=lambda e: e[0]) - 1
        return hist[i][1]

    def _att_at(self, k: int, t: float) -> float:
        hist = self.att_hist[k]
        i = bisect_right(hist, t, key=lambda e: e[0]) - 1
        return hist[i][1]

    # ---- line propagation ----

    def _source_lines(self, t: float) -> list[tuple[float, float, int]]:
        lines = []
        for si, src in enumerate(self.sc.sources):
            if src.active(t):
                lines.extend((f, w, si) for f, w in self.expanded[si])
        return lines

    def _through_stage(self, k: int, lines, t: float):
        spec = self.sc.stages[k]
        state = self._filter_state_at(k, t)
        out = []
        for f, w, si in lines:
            w2 = w * 10.0 ** (-spec.chain.through_loss_db_at(f) / 10.0)
            p_dbm = watts_to_dbm(w2) if w2 > 0.0 else _SILENT_DBM
            s21 = notch_s21_db(spec.notch, state, f, p_dbm, t)
            out.append((f, w2 * 10.0 ** (s21 / 10.0), si))
        return out

    def _stage_input_lines(self, k: int, t: float):
        lines = self._source_lines(t)
        for j in range(k):
            lines = self._through_stage(j, lines, t)
        return lines

    # ---- sampling ----

    def _acquire(self, k: int, t_deliver: float):
        spec = self.sc.stages[k]
        tau = t_deliver - spec.chain.adc.sample_period
        lines3 = self._stage_input_lines(k, tau)
        state = self._filter_state_at(k, tau)
        pairs, ratios = [], []
        for f, w, _ in lines3:
            if w <= 0.0:
                continue
            w_f = w * 10.0 ** (-spec.chain.through_loss_db_at(f) / 10.0)
            g = stopband_gamma(spec.notch, state, f, watts_to_dbm(w_f), tau)
            env = ReflectionEnvironment(g, spec.electrical_delay_s)
            ratios.append(
                sampled_forward_amplitude(
                    spec.chain.coupling_kind, env, f, spec.chain.coupler
                )
            )
            pairs.append((f, w))
        return chain_readout_lines(
            pairs, spec.chain, self._att_at(k, tau), t_s=t_deliver, forward_ratios=ratios
        )

    def _apply(self, k: int, decided_s: float, act: Action) -> None:
        applied = AppliedAction(
            stage=k,
            kind=act.kind,
            decided_s=decided_s,
            effective_at_s=act.effective_at_s,
            freq_hz=act.freq_hz,
            att_db=act.att_db,
        )
        spec = self.sc.stages[k]
        if act.kind == ACT_TUNE:
            current = self.filter_hist[k][-1][1]
            try:
                new = tune(spec.notch, current, act.freq_hz, act.effective_at_s)
                self.filter_hist[k].append((act.effective_at_s, new))
            except TuningRangeError as exc:
                applied.ok = False
                self.diagnostics.append(f"stage {k}: {exc}")
        elif act.kind == ACT_RELEASE:
            current = self.filter_hist[k][-1][1]
            self.filter_hist[k].append((act.effective_at_s, release(current)))
        elif act.kind == ACT_SET_ATT:
            self.att_hist[k].append((act.effective_at_s, act.att_db))
        elif act.kind in (ACT_FLAG_SET, ACT_FLAG_CLEAR):
            pass  # flag state is tracked in the controller state itself
        self.actions.append(applied)

    def run(self, collect_trace: bool) -> Trace:
        sc = self.sc
        # Merge per-stage tick streams chronologically.
        heap = []
        for k, st in enumerate(sc.stages):
            heapq.heappush(heap, (self.phase[k], k))
        while heap:
            t, k = heapq.heappop(heap)
            if t >= sc.duration_s:
                continue
            codes = self._acquire(k, t)
            state, acts = on_sample(
                codes, self.ctrl_state[k], sc.stages[k].controller, sc.stages[k].chain, self.cals[k]
            )
            self.ctrl_state[k] = state
            for act in acts:
                self._apply(k, t, act)
            if state.diagnostic:
                self.diagnostics.append(f"stage {k} at {t:.3e}s: {state.diagnostic}")
            est = state.last_estimate
            self.samples[k].append(
                {
                    "t_s": t,
                    "code_oc": codes.code_oc,
                    "code_l1": codes.code_l1,
                    "code_l2": codes.code_l2,
                    "att_db": codes.att_db,
                    "f_est_hz": est.freq_hz if est else math.nan,
                    "p_est_dbm": est.power_dbm if est else math.nan,
                    "mode": state.mode,
                    "action": ";".join(a.kind for a in acts),
                }
            )
            heapq.heappush(heap, (t + sc.stages[k].chain.adc.sample_period, k))

        records = self._build_records() if collect_trace else []
        metrics = self._metrics(records)
        return Trace(
            scenario=sc,
            records=records,
            samples=self.samples,
            actions=self.actions,
            filter_hist=self.filter_hist,
            metrics=metrics,
        )

    # ---- post-processing ----

    def _powers_at(self, t: float) -> tuple[list[list[float]], list[list[float]]]:
        """Per-stage, per-source input/output powers (dBm) at time t."""
        n_src = len(self.sc.sources)
        ins, outs = [], []
        lines = self._source_lines(t)
        for k in range(len(self.sc.stages)):
            per_in = [0.0] * n_src
            for f, w, si in lines:
                per_in[si] += w
            lines = self._through_stage(k, lines, t)
            per_out = [0.0] * n_src
            for f, w, si in lines:
                per_out[si] += w
            ins.append([watts_to_dbm(w) if w > 0 else _SILENT_DBM for w in per_in])
            outs.append([watts_to_dbm(w) if w > 0 else _SILENT_DBM for w in per_out])
        return ins, outs

    def _build_records(self) -> list[TraceRecord]:
        sc = self.sc
        n = int(round(sc.duration_s / sc.dt_s))
        records = []
        sample_times = [[s["t_s"] for s in self.samples[k]] for k in range(len(sc.stages))]
        for i in range(n):
            t = i * sc.dt_s
            ins, outs = self._powers_at(t)
            snaps = []
            for k in range(len(sc.stages)):
                j = bisect_right(sample_times[k], t) - 1
                s = (
                    self.samples[k][j]
                    if j >= 0
                    else {
                        "code_oc": 0,
                        "code_l1": 0,
                        "code_l2": 0,
                        "att_db": 0.0,
                        "f_est_hz": math.nan,
                        "p_est_dbm": math.nan,
                        "mode": "idle",
                        "action": "",
                    }
                )
                fstate = self._filter_state_at(k, t)
                snaps.append(
                    StageSnapshot(
                        code_oc=s["code_oc"],
                        code_l1=s["code_l1"],
                        code_l2=s["code_l2"],
                        att_db=s["att_db"],
                        f_est_hz=s["f_est_hz"],
                        p_est_dbm=s["p_est_dbm"],
                        mode=s["mode"],
                        action=s["action"],
                        filter_engaged=fstate.engaged,
                        filter_center_hz=fstate.f_center_hz,
                    )
                )
            records.append(
                TraceRecord(
                    t_s=t,
                    in_dbm=tuple(tuple(x) for x in ins),
                    out_dbm=tuple(tuple(x) for x in outs),
                    stages=tuple(snaps),
                )
            )
        return records

    def _toggle_times(self, k: int) -> list[tuple[float, bool]]:
        out = []
        last = False
        for t, st in self.filter_hist[k]:
            if st.engaged != last:
                out.append((t, st.engaged))
                last = st.engaged
        return out

    def _metrics(self, records: list[TraceRecord]) -> Metrics:
        sc = self.sc
        m = Metrics(diagnostics=list(self.diagnostics))
        rises = sorted(src.t_on_s for src in sc.sources if src.t_on_s > 0.0)
        falls = sorted(src.t_off_s for src in sc.sources if src.t_off_s < sc.duration_s)
        tunes = [a for a in self.actions if a.stage == 0 and a.kind == ACT_TUNE and a.ok]
        rels = [a for a in self.actions if a.stage == 0 and a.kind == ACT_RELEASE]
        if rises and tunes:
            t_edge = rises[0]
            after = [a.effective_at_s for a in tunes if a.effective_at_s > t_edge]
            if after:
                m.response_time_engage_s = after[0] - t_edge
        if falls and rels:
            t_edge = falls[0]
            after = [a.effective_at_s for a in rels if a.effective_at_s > t_edge]
            if after:
                m.response_time_release_s = after[0] - t_edge
        for k in range(len(sc.stages)):
            cyc, period = _cycle_from_toggles(self._toggle_times(k))
            if cyc:
                m.limit_cycle = True
                m.limit_cycle_period_s = period
                break
        t_end = sc.duration_s - sc.dt_s / 2.0
        ins, outs = self._powers_at(t_end)
        for si, src in enumerate(sc.sources):
            if src.active(t_end):
                final = outs[-1][si]
                m.final_output_dbm.append(final)
                m.suppression_db.append(ins[0][si] - final)
            else:
                m.final_output_dbm.append(_SILENT_DBM)
                m.suppression_db.append(None)
        if records:
            totals = [
                sum(10.0 ** (x / 10.0) for x in r.out_dbm[-1]) for r in records
            ]
            peak = max(totals)
            m.max_output_dbm = watts_to_dbm(peak * 1e-3) if peak > 0 else _SILENT_DBM
        return m


def run(
    sc: Scenario,
    collect_trace: bool = True,
    calibrations: list[CalibrationTable] | None = None,
) -> Trace:
    """Simulate a scenario; returns the full trace with metrics attached."""
    return _Runner(sc, calibrations).run(collect_trace)


def _cycle_from_toggles(toggles: list[tuple[float, bool]]) -> tuple[bool, float | None]:
    if len(toggles) < 4:
        return False, None
    engages = [t for t, on in toggles if on]
    if len(engages) < 2:
        return False, None
    intervals = np.diff(engages)
    period = float(intervals.mean())
    if len(intervals) >= 2 and float(intervals.std()) / period >= 0.2:
        return False, None
    return True, period


def detect_limit_cycle(trace: Trace, stage: int = 0) -> tuple[bool, float | None]:
    """(cycling?, mean engage-to-engage period) for one stage's notch.

    A limit cycle is at least four engage/disengage toggles whose
    engage-to-engage intervals vary by less than 20 percent.
    """
    clock = trace.scenario.stages[stage].controller.clock_period
    if trace.scenario.duration_s <= 10.0 * clock:
        raise ValueError("trace too short to judge cycling (need > 10 controller clocks)")
    hist = trace.filter_hist[stage]
    toggles = []
    last = False
    for t, st in hist:
        if st.engaged != last:
            toggles.append((t, st.engaged))
            last = st.engaged
    return _cycle_from_toggles(toggles)


def measure_response_time(trace: Trace, edge: str = "rise", stage: int = 0) -> float:
    """Seconds from a source power edge to the stage's filter action taking effect."""
    sc = trace.scenario
    if edge == "rise":
        edges = sorted(src.t_on_s for src in sc.sources if src.t_on_s > 0.0)
        kinds = (ACT_TUNE,)
    elif edge == "fall":
        edges = sorted(src.t_off_s for src in sc.sources if src.t_off_s < sc.duration_s)
        kinds = (ACT_RELEASE,)
    else:
        raise ValueError("edge must be 'rise' or 'fall'")
    if len(edges) != 1:
        raise ValueError(f"need exactly one {edge} edge, found {len(edges)}")
    t_edge = edges[0]
    hits = [
        a.effective_at_s
        for a in trace.actions
        if a.stage == stage and a.kind in kinds and a.ok and a.effective_at_s > t_edge
    ]
    if not hits:
        raise ValueError(f"no filter action follows the {edge} edge")
    return hits[0] - t_edge


# ---------------- scenario JSON ----------------


def _controller_to_dict(c: ControllerConfig) -> dict:
    return asdict(c)


def _notch_to_dict(n: NotchModel) -> dict:
    d = asdict(n)
    d["f_tune_range_hz"] = list(n.f_tune_range_hz)
    return d


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "duration_s": sc.duration_s,
        "dt_s": sc.dt_s,
        "seed": sc.seed,
        "sources": [
            {
                "freq_hz": t.freq_hz,
                "power_dbm": t.power_dbm,
                "t_on_s": t.t_on_s,
                "t_off_s": None if math.isinf(t.t_off_s) else t.t_off_s,
                "occupied_bw_hz": t.occupied_bw_hz,
                "n_subtones": t.n_subtones,
            }
            for t in sc.sources
        ],
        "stages": [
            {
                "chain": chain_config_to_dict(st.chain),
                "controller": _controller_to_dict(st.controller),
                "notch": _notch_to_dict(st.notch),
                "electrical_delay_s": st.electrical_delay_s,
            }
            for st in sc.stages
        ],
    }


def scenario_from_dict(d: dict) -> Scenario:
    sources = []
    for t in d.get("sources", []):
        sources.append(
            Tone(
                freq_hz=t["freq_hz"],
                power_dbm=t["power_dbm"],
                t_on_s=t.get("t_on_s", 0.0),
                t_off_s=math.inf if t.get("t_off_s") is None else t["t_off_s"],
                occupied_bw_hz=t.get("occupied_bw_hz", 0.0),
                n_subtones=t.get("n_subtones", 0),
            )
        )
    stages = []
    for st in d.get("stages", []):
        nd = dict(st.get("notch", {}))
        if "f_tune_range_hz" in nd:
            nd["f_tune_range_hz"] = tuple(nd["f_tune_range_hz"])
        stages.append(
            StageSpec(
                chain=chain_config_from_dict(st.get("chain", {})),
                controller=ControllerConfig(**st.get("controller", {})),
                notch=NotchModel(**nd),
                electrical_delay_s=st.get("electrical_delay_s", 0.0),
            )
        )
    return Scenario(
        duration_s=d["duration_s"],
        dt_s=d.get("dt_s", 25e-9),
        seed=d.get("seed", 0),
        sources=tuple(sources),
        stages=tuple(stages),
    )


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))


def save_scenario(sc: Scenario, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(sc), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------- trace artifacts ----------------


def trace_to_csv(trace: Trace, path: str) -> None:
    """Write the dt-grid trace; one row per instant, stage columns prefixed s<k>_."""
    n_stage = len(trace.scenario.stages)
    n_src = len(trace.scenario.sources)
    cols = ["t_s"]
    for k in range(n_stage):
        cols += [f"s{k}_in{i}_dbm" for i in range(n_src)]
        cols += [f"s{k}_out{i}_dbm" for i in range(n_src)]
        cols += [
            f"s{k}_{name}"
            for name in (
                "code_oc",
                "code_l1",
                "code_l2",
                "att_db",
                "f_est_hz",
                "p_est_dbm",
                "mode",
                "action",
                "filter_engaged",
                "filter_center_hz",
            )
        ]
    import csv as _csv

    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(cols)
        for r in trace.records:
            row: list = [repr(r.t_s)]
            for k in range(n_stage):
                row += [repr(x) for x in r.in_dbm[k]]
                row += [repr(x) for x in r.out_dbm[k]]
                s = r.stages[k]
                row += [
                    s.code_oc,
                    s.code_l1,
                    s.code_l2,
                    repr(s.att_db),
                    repr(s.f_est_hz),
                    repr(s.p_est_dbm),
                    s.mode,
                    s.action,
                    int(s.filter_engaged),
                    repr(s.filter_center_hz),
                ]
            w.writerow(row)


def samples_to_csv(trace: Trace, stage: int, path: str) -> None:
    """Write one stage's per-sample controller log."""
    import csv as _csv

    cols = ["t_s", "code_oc", "code_l1", "code_l2", "att_db", "f_est_hz", "p_est_dbm", "mode", "action"]
    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(cols)
        for s in trace.samples[stage]:
            w.writerow(
                [
                    repr(s["t_s"]),
                    s["code_oc"],
                    s["code_l1"],
                    s["code_l2"],
                    repr(s["att_db"]),
                    repr(s["f_est_hz"]),
                    repr(s["p_est_dbm"]),
                    s["mode"],
                    s["action"],
                ]
            )
