"""Excitation signal specifications for simulation experiments.

Each spec is a small frozen dataclass with a ``force(t)`` method returning
the instantaneous value. ``force`` accepts scalars or arrays; the simulator
evaluates it at the integrator stage times, so signals should be defined in
continuous time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = ["ChirpSpec", "ConstantSpec", "NyquistViolationError", "SineSpec", "as_signal"]


class NyquistViolationError(ValueError):
    """Chirp end frequency reaches or exceeds the sampling Nyquist rate."""


@dataclass(frozen=True)
class ChirpSpec:
    """Logarithmic sine sweep.

    The instantaneous frequency sweeps log-uniformly from ``f0`` to ``f1``
    (both in Hz) over ``duration`` seconds; the phase starts at zero.

    Fields
    ------
    amplitude : peak value [Nm]
    f0, f1 : start / end frequency [Hz], 0 < f0 < f1
    duration : sweep length [s]
    """

    amplitude: float
    f0: float
    f1: float
    duration: float
    sweep: str = "logarithmic"

    def __post_init__(self):
        if not (0 < self.f0 < self.f1):
            raise ValueError("require 0 < f0 < f1")
        if self.duration <= 0:
            raise ValueError("duration must be > 0")
        if self.sweep != "logarithmic":
            raise ValueError("only logarithmic sweeps are supported")

    def phase(self, t):
        """Accumulated phase [rad]; phase(0) = 0."""
        ratio = self.f1 / self.f0
        tau = self.duration / math.log(ratio)
        return 2.0 * math.pi * self.f0 * tau * (np.exp(np.asarray(t) / tau) - 1.0)

    def instantaneous_frequency(self, t):
        """Instantaneous frequency [Hz] at time t."""
        return self.f0 * (self.f1 / self.f0) ** (np.asarray(t) / self.duration)

    def force(self, t):
        return self.amplitude * np.sin(self.phase(t))

    def validate_sampling(self, dt: float, allow_nyquist: bool = False) -> None:
        """Check the end frequency against the sampling rate.

        Warns when ``f1 > 0.4/dt``; raises unless ``allow_nyquist`` when
        ``f1 >= 1/(2 dt)``.
        """
        nyquist = 0.5 / dt
        if self.f1 >= nyquist and not allow_nyquist:
            raise NyquistViolationError(
                f"chirp end frequency {self.f1} Hz reaches Nyquist {nyquist} Hz; "
                "pass allow_nyquist=True to force"
            )
        if self.f1 > 0.8 * nyquist:
            warnings.warn(
                f"chirp end frequency {self.f1} Hz is above 80% of Nyquist "
                f"({nyquist} Hz); high-frequency content will be distorted",
                stacklevel=2,
            )

    def sample(self, dt: float, allow_nyquist: bool = False) -> np.ndarray:
        """Sampled sweep on the grid t = 0, dt, 2 dt, ..., < duration."""
        self.validate_sampling(dt, allow_nyquist)
        n = int(round(self.duration / dt))
        return np.asarray(self.force(np.arange(n) * dt), dtype=float)


@dataclass(frozen=True)
class SineSpec:
    """Fixed-frequency sinusoid ``amplitude * sin(omega t)`` [Nm, rad/s]."""

    amplitude: float
    omega: float

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be > 0")

    def force(self, t):
        return self.amplitude * np.sin(self.omega * np.asarray(t))


@dataclass(frozen=True)
class ConstantSpec:
    """Constant force [Nm]."""

    value: float

    def force(self, t):
        return self.value * np.ones_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class SineMotionSpec:
    """Prescribed sinusoidal endpoint motion ``x_e = amplitude sin(omega t)``.

    Used by the kinematic backdrive mode, where the endpoint position is an
    authoritative source (one finger backdriving the other) and the external
    force is a measured output.
    """

    amplitude: float
    omega: float

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be > 0")

    def position(self, t):
        return self.amplitude * np.sin(self.omega * np.asarray(t))

    def velocity(self, t):
        return self.amplitude * self.omega * np.cos(self.omega * np.asarray(t))

    def acceleration(self, t):
        return -self.amplitude * self.omega**2 * np.sin(self.omega * np.asarray(t))


def as_signal(spec):
    """Coerce a spec, callable, number, or None into a scalar function of t.

    The known spec types get hand-built closures over ``math`` functions;
    the simulator evaluates the excitation three times per integration step,
    so this path is deliberately allocation-free.
    """
    if spec is None:
        return lambda t: 0.0
    if isinstance(spec, ChirpSpec):
        amp = spec.amplitude
        tau = spec.duration / math.log(spec.f1 / spec.f0)
        k = 2.0 * math.pi * spec.f0 * tau
        return lambda t: amp * math.sin(k * (math.exp(t / tau) - 1.0))
    if isinstance(spec, SineSpec):
        amp, w = spec.amplitude, spec.omega
        return lambda t: amp * math.sin(w * t)
    if isinstance(spec, ConstantSpec):
        value = spec.value
        return lambda t: value
    if callable(spec):
        return spec
    if hasattr(spec, "force"):
        return lambda t: float(spec.force(t))
    value = float(spec)
    return lambda t: value
