"""Gaussian laser pulses and their assignment to drive channels."""

from dataclasses import dataclass, field, replace

import numpy as np

_TWO_LN2 = 2.0 * np.log(2.0)


@dataclass(frozen=True)
class Pulse:
    """Gaussian pulse in atomic units.

    ``duration`` is the intensity FWHM, so the field envelope is
    exp(-2 ln2 ((t - center) / duration)^2).
    """

    amplitude: float
    center: float
    duration: float
    carrier: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("pulse amplitude must be non-negative")
        if self.duration <= 0:
            raise ValueError("pulse duration must be positive")
        if self.carrier <= 0:
            raise ValueError("carrier frequency must be positive")

    def shifted(self, dt):
        return replace(self, center=self.center + dt)


def pulse_envelope(p, t):
    x = (np.asarray(t, dtype=float) - p.center) / p.duration
    return p.amplitude * np.exp(-_TWO_LN2 * x * x)


def pulse_field(p, t):
    """Real lab-frame field E(t) = E0 exp(-2 ln2 ((t-Tc)/tp)^2) cos(w0 (t-Tc))."""
    t = np.asarray(t, dtype=float)
    return pulse_envelope(p, t) * np.cos(p.carrier * (t - p.center))


@dataclass(frozen=True)
class DriveProgram:
    """Pulses paired with the drive channel each one addresses."""

    assignments: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "assignments", tuple((p, str(ch)) for p, ch in self.assignments))

    @property
    def pulses(self):
        return [p for p, _ in self.assignments]

    @property
    def channels(self):
        return sorted({ch for _, ch in self.assignments})

    def field(self, channel, t):
        """Summed lab-frame field of all pulses on ``channel``."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for p, ch in self.assignments:
            if ch == channel:
                out = out + pulse_field(p, t)
        return out

    def rotating_amplitude(self, channel, t):
        """Complex co-rotating amplitude sum_i env_i(t) exp(i w0 T_i) on ``channel``."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for p, ch in self.assignments:
            if ch == channel:
                out = out + pulse_envelope(p, t) * np.exp(1j * p.carrier * p.center)
        return out

    @property
    def last_center(self):
        return max((p.center for p in self.pulses), default=0.0)

    @property
    def first_center(self):
        return min((p.center for p in self.pulses), default=0.0)


def two_pulse_program(template, first_center, delay, channels):
    """Pulse 1 at ``first_center`` and pulse 2 ``delay`` later, each on its channel."""
    c1, c2 = channels
    p1 = replace(template, center=first_center)
    p2 = replace(template, center=first_center + delay)
    return DriveProgram(((p1, c1), (p2, c2)))


def pulse_train(template, first_center, delay, channels):
    """``len(channels)`` identical pulses spaced by ``delay``."""
    return DriveProgram(
        tuple((replace(template, center=first_center + i * delay), ch) for i, ch in enumerate(channels))
    )
