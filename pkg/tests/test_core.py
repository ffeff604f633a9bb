import math

import pytest
from hypothesis import given, strategies as st

from swsense.core import (
    SignalDescriptor,
    Tone,
    dbm_to_watts,
    expand_modulated,
    expand_signal,
    watts_to_dbm,
)


def test_dbm_to_watts_anchors():
    assert dbm_to_watts(0.0) == pytest.approx(1e-3)
    assert dbm_to_watts(20.0) == pytest.approx(0.1)
    assert dbm_to_watts(-20.0) == pytest.approx(1e-5)


@given(st.floats(min_value=-80.0, max_value=40.0))
def test_dbm_watts_round_trip(p_dbm):
    assert watts_to_dbm(dbm_to_watts(p_dbm)) == pytest.approx(p_dbm, abs=1e-12, rel=1e-12)


def test_watts_to_dbm_rejects_nonpositive():
    with pytest.raises(ValueError):
        watts_to_dbm(0.0)
    with pytest.raises(ValueError):
        watts_to_dbm(-1e-3)


class TestTone:
    def test_validation(self):
        with pytest.raises(ValueError):
            Tone(freq_hz=-1e9, power_dbm=0.0)
        with pytest.raises(ValueError):
            Tone(freq_hz=1e9, power_dbm=0.0, t_on_s=2e-6, t_off_s=1e-6)
        with pytest.raises(ValueError):
            Tone(freq_hz=1e9, power_dbm=0.0, occupied_bw_hz=12e6, n_subtones=4)
        with pytest.raises(ValueError):
            # comb must not reach into nonpositive frequencies
            Tone(freq_hz=1e9, power_dbm=0.0, occupied_bw_hz=2.5e9)

    def test_subtone_defaults(self):
        assert Tone(freq_hz=1e9, power_dbm=0.0).n_subtones == 1
        assert Tone(freq_hz=1e9, power_dbm=0.0, occupied_bw_hz=12e6).n_subtones == 31

    def test_activity_window_half_open(self):
        t = Tone(freq_hz=1e9, power_dbm=0.0, t_on_s=1e-6, t_off_s=2e-6)
        assert not t.active(0.999e-6)
        assert t.active(1e-6)
        assert t.active(1.5e-6)
        assert not t.active(2e-6)

    def test_cw_active_forever(self):
        t = Tone(freq_hz=1e9, power_dbm=0.0)
        assert t.active(0.0) and t.active(1.0)


class TestExpandModulated:
    def test_cw_degenerate(self):
        lines = expand_modulated(Tone(freq_hz=6e9, power_dbm=0.0))
        assert lines == [(6e9, pytest.approx(1e-3))]

    def test_three_subtone_comb(self):
        t = Tone(freq_hz=6e9, power_dbm=0.0, occupied_bw_hz=12e6, n_subtones=3)
        lines = expand_modulated(t)
        assert [f for f, _ in lines] == [
            pytest.approx(5.994e9),
            pytest.approx(6.0e9),
            pytest.approx(6.006e9),
        ]
        for _, w in lines:
            assert w == pytest.approx(1e-3 / 3)

    @given(
        st.floats(min_value=1e9, max_value=15e9),
        st.floats(min_value=-20.0, max_value=20.0),
        st.floats(min_value=0.0, max_value=100e6),
        st.integers(min_value=1, max_value=15).map(lambda k: 2 * k + 1),
    )
    def test_power_conservation(self, f, p, bw, n):
        t = Tone(freq_hz=f, power_dbm=p, occupied_bw_hz=bw, n_subtones=n if bw > 0 else 0)
        lines = expand_modulated(t)
        assert sum(w for _, w in lines) == pytest.approx(dbm_to_watts(p), rel=1e-12)
        span = max(fr for fr, _ in lines) - min(fr for fr, _ in lines)
        assert span == pytest.approx(bw if len(lines) > 1 else 0.0, abs=1.0)


def test_expand_signal_concatenates():
    sig = SignalDescriptor(
        (
            Tone(freq_hz=2e9, power_dbm=0.0),
            Tone(freq_hz=9e9, power_dbm=-10.0, occupied_bw_hz=12e6, n_subtones=3),
        )
    )
    lines = expand_signal(sig)
    assert len(lines) == 4
    assert math.isclose(sum(w for _, w in lines), 1e-3 + 1e-4, rel_tol=1e-12)
