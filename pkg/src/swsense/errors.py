"""Exception types raised by the sensing toolkit."""

from __future__ import annotations


class SwsenseError(Exception):
    """Base class for all toolkit errors."""


class OutOfBandError(SwsenseError):
    """Frequency falls outside a component's characterized band."""


class BijectivityError(SwsenseError):
    """Requested inversion is outside the monotone range of the stub response."""


class CalibrationRangeError(SwsenseError):
    """Calibration grid reaches outside the representable detector range."""


class NoSignalError(SwsenseError):
    """Open-end reading sits at the detector floor; nothing to estimate."""


class IndeterminateFrequencyError(SwsenseError):
    """Both tap readings are saturated; the voltage ratio carries no information."""


class PowerOverrangeError(SwsenseError):
    """Open-end reading is pinned high with the attenuator already at maximum."""


class TuningRangeError(SwsenseError):
    """Requested notch center lies outside the filter's tuning range."""


class PlacementInfeasibleError(SwsenseError):
    """No stub length satisfies the requested resolution constraint."""
