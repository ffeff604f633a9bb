"""Pick-off network checks against an independent nodal-analysis oracle.

The closed forms in swsense.coupling are cross-checked by solving the tap
circuit directly: a Thevenin source (V_s, Z0) drives node A, the through
load Z0 hangs on A, and R_C runs from A to node B which is terminated by
the matched monitor load Z0. Powers are referenced to the available power
V_s^2 / (4 Z0).
"""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from swsense.coupling import (
    DirectionalCouplerParams,
    ReflectionEnvironment,
    ResistiveTapParams,
    coupler_response,
    load_coupler_table,
    sampled_forward_amplitude,
    save_coupler_table,
    tap_coupling,
    tap_dissipation,
    tap_input_limit_dbm,
    tap_sparams,
)
from swsense.errors import OutOfBandError


def nodal_tap(r_c, z0, p_in_w):
    """Solve the tap circuit; returns per-path powers in watts."""
    v_s = math.sqrt(4.0 * p_in_w * z0)  # RMS source voltage for P_avail = p_in_w
    g = np.array(
        [
            [2.0 / z0 + 1.0 / r_c, -1.0 / r_c],
            [-1.0 / r_c, 1.0 / r_c + 1.0 / z0],
        ]
    )
    i = np.array([v_s / z0, 0.0])
    v_a, v_b = np.linalg.solve(g, i)
    return {
        "through": v_a**2 / z0,
        "monitor": v_b**2 / z0,
        "r_c": (v_a - v_b) ** 2 / r_c,
        "reflected": (v_s / 2.0 - v_a) ** 2 / z0,
        "available": p_in_w,
    }


@given(st.floats(min_value=5.0, max_value=5000.0), st.floats(min_value=10.0, max_value=200.0))
def test_formulas_match_nodal_solve(r_c, z0):
    p = ResistiveTapParams(r_c=r_c, z0=z0)
    sol = nodal_tap(r_c, z0, 1.0)
    assert tap_coupling(p) == pytest.approx(10 * math.log10(sol["monitor"]), abs=1e-9)
    s11, s21 = tap_sparams(p)
    assert s21 == pytest.approx(10 * math.log10(sol["through"]), abs=1e-9)
    assert s11 == pytest.approx(10 * math.log10(sol["reflected"]), abs=1e-9)
    assert tap_dissipation(p, 30.0) == pytest.approx(sol["r_c"], rel=1e-9)


@given(st.floats(min_value=5.0, max_value=5000.0))
def test_tap_energy_conservation(r_c):
    sol = nodal_tap(r_c, 50.0, 1.0)
    total = sol["through"] + sol["monitor"] + sol["r_c"] + sol["reflected"]
    assert total == pytest.approx(sol["available"], rel=1e-12)


def test_paper_design_point_210():
    p = ResistiveTapParams(r_c=210.0, z0=50.0)
    s11, s21 = tap_sparams(p)
    assert tap_coupling(p) == pytest.approx(-15.117497, abs=1e-5)
    assert s11 == pytest.approx(-21.138097, abs=1e-5)
    assert s21 == pytest.approx(-0.797430, abs=1e-5)


def test_default_design_point_220():
    p = ResistiveTapParams()
    assert p.r_c == 220.0
    s11, s21 = tap_sparams(p)
    assert tap_coupling(p) == pytest.approx(-15.417040, abs=1e-5)
    assert s11 == pytest.approx(-21.437640, abs=1e-5)
    assert s21 == pytest.approx(-0.769165, abs=1e-5)
    # 12.64 mW dissipated in the coupling resistor at +20 dBm drive
    assert tap_dissipation(p, 20.0) == pytest.approx(0.01264005, abs=1e-7)


def test_tap_monotonicity_in_r_c():
    r = np.linspace(10.0, 2000.0, 50)
    c = [tap_coupling(ResistiveTapParams(r_c=x)) for x in r]
    s11 = [tap_sparams(ResistiveTapParams(r_c=x))[0] for x in r]
    s21 = [tap_sparams(ResistiveTapParams(r_c=x))[1] for x in r]
    assert all(a > b for a, b in zip(c, c[1:]))  # coupling weakens
    assert all(a > b for a, b in zip(s11, s11[1:]))  # better match
    assert all(a < b for a, b in zip(s21, s21[1:]))  # lower loss
    assert s21[-1] < 0.0


def test_input_limit_matches_dissipation():
    p = ResistiveTapParams()
    limit = tap_input_limit_dbm(p, 0.05)
    assert tap_dissipation(p, limit) == pytest.approx(0.05, rel=1e-9)
    # +20 dBm drive sits comfortably under the smallest package line
    assert tap_dissipation(p, 20.0) < 0.05


class TestCoupler:
    def test_insertion_interpolates(self):
        p = DirectionalCouplerParams()
        c, ins, d = coupler_response(p, 7.5e9)
        assert c == pytest.approx(-15.0)
        assert ins == pytest.approx(0.8 + 0.8 * (7.5 - 1.0) / 13.0)
        assert d == pytest.approx(6.0)

    def test_out_of_band(self):
        p = DirectionalCouplerParams()
        with pytest.raises(OutOfBandError):
            coupler_response(p, 15e9)
        with pytest.raises(OutOfBandError):
            coupler_response(p, 0.5e9)

    def test_csv_round_trip(self, tmp_path):
        p = DirectionalCouplerParams()
        path = tmp_path / "coupler.csv"
        save_coupler_table(p, str(path), [1e9, 7e9, 14e9])
        q = load_coupler_table(str(path))
        for f in (1e9, 6.3e9, 14e9):
            assert coupler_response(q, f) == pytest.approx(coupler_response(p, f))


class TestSampledForwardAmplitude:
    def test_matched_is_unity(self):
        env = ReflectionEnvironment(0.0, 1e-10)
        assert sampled_forward_amplitude("tap", env, 6e9) == pytest.approx(1.0)
        assert sampled_forward_amplitude(
            "coupler", env, 6e9, DirectionalCouplerParams()
        ) == pytest.approx(1.0)

    def test_tap_null_at_pi(self):
        # one-way delay = 1/(4f) puts the round trip at half a period: phase pi
        f = 6e9
        env = ReflectionEnvironment(1.0, 1.0 / (4.0 * f))
        assert sampled_forward_amplitude("tap", env, f) == pytest.approx(0.0, abs=1e-12)

    def test_tap_peak_at_2pi(self):
        f = 6e9
        env = ReflectionEnvironment(1.0, 1.0 / (2.0 * f))
        assert sampled_forward_amplitude("tap", env, f) == pytest.approx(2.0)

    def test_coupler_directivity_bounds_dip(self):
        f = 6e9
        env = ReflectionEnvironment(1.0, 1.0 / (4.0 * f))
        r = sampled_forward_amplitude("coupler", env, f, DirectionalCouplerParams())
        assert r == pytest.approx(1.0 - 10 ** (-6.0 / 20.0), abs=1e-12)
        # infinite directivity: reflection becomes invisible
        huge = DirectionalCouplerParams(directivity_db=300.0)
        assert sampled_forward_amplitude("coupler", env, f, huge) == pytest.approx(1.0)

    def test_gamma_magnitude_validated(self):
        env = ReflectionEnvironment(1.5, 0.0)
        with pytest.raises(ValueError):
            sampled_forward_amplitude("tap", env, 6e9)
