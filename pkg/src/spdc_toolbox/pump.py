"""Pump beam synthesis: the spatial envelope along the guide and the spectral amplitude f+."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import SPEED_OF_LIGHT, DeviceParams, NumericalContractError, k_deg


class GridTooCoarse(NumericalContractError):
    pass


@dataclass(frozen=True)
class BeamSpec:
    """One Gaussian pump beam.

    ``tilt_delta_theta`` is measured from the degeneracy angle, so the beam hits
    the guide at ``theta_deg + tilt_delta_theta``.
    """

    position_z0: float
    tilt_delta_theta: float
    waist_wp: float
    weight: complex = 1.0

    def __post_init__(self):
        if not (self.waist_wp > 0 and math.isfinite(self.waist_wp)):
            raise ValueError(f"waist_wp must be positive, got {self.waist_wp!r}")
        if not (abs(self.weight) > 0 and np.isfinite(self.weight)):
            raise ValueError(f"beam weight must be finite and non-zero, got {self.weight!r}")
        if not (math.isfinite(self.position_z0) and math.isfinite(self.tilt_delta_theta)):
            raise ValueError("beam position and tilt must be finite")

    def angle(self, device: DeviceParams) -> float:
        return device.theta_deg + self.tilt_delta_theta

    def spatial_frequency(self, device: DeviceParams) -> float:
        """Residual phase rate of the envelope ``phi(z)`` once k_deg is removed (rad/m)."""
        return -(math.sin(self.angle(device)) * device.pump_wavenumber - k_deg(device))


class CavityPhase:
    """Tabulated spectral phase, linearly interpolated and clamped outside the table."""

    def __init__(self, omega, phase):
        omega = np.asarray(omega, dtype=float)
        phase = np.asarray(phase, dtype=float)
        if omega.ndim != 1 or omega.shape != phase.shape or omega.size < 2:
            raise ValueError("cavity phase table needs two equal-length columns with at least 2 rows")
        if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(phase))):
            raise ValueError("cavity phase table contains non-finite values")
        if np.any(np.diff(omega) <= 0):
            raise ValueError("cavity phase frequencies must be strictly increasing")
        self.omega = omega
        self.phase = phase

    def __call__(self, omega):
        return np.interp(omega, self.omega, self.phase)

    def __eq__(self, other):
        return (
            isinstance(other, CavityPhase)
            and np.array_equal(self.omega, other.omega)
            and np.array_equal(self.phase, other.phase)
        )

    def __repr__(self):
        return f"CavityPhase(n={self.omega.size}, range=[{float(self.omega[0])!r}, {float(self.omega[-1])!r}])"


@dataclass(frozen=True)
class PumpPulse:
    center_wavelength: float
    duration_tau_p: float
    cavity_phase: Optional[CavityPhase] = None

    def __post_init__(self):
        if not (self.center_wavelength > 0 and math.isfinite(self.center_wavelength)):
            raise ValueError(f"center_wavelength must be positive, got {self.center_wavelength!r}")
        if not (self.duration_tau_p > 0 and math.isfinite(self.duration_tau_p)):
            raise ValueError(f"duration_tau_p must be positive, got {self.duration_tau_p!r}")


@dataclass(frozen=True, eq=False)
class SampledComplexFunction:
    """Complex samples on the uniform axis ``axis_start + k * axis_step``."""

    axis_start: float
    axis_step: float
    values: np.ndarray
    axis_name: str = field(default="axis")

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if not (self.axis_step > 0 and math.isfinite(self.axis_step) and math.isfinite(self.axis_start)):
            raise ValueError("axis_step must be positive and the axis finite")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")

    @property
    def axis(self) -> np.ndarray:
        return self.axis_start + self.axis_step * np.arange(self.values.size)

    @property
    def axis_stop(self) -> float:
        return self.axis_start + self.axis_step * (self.values.size - 1)

    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.values) ** 2)) * self.axis_step)

    def normalized(self) -> "SampledComplexFunction":
        n = self.norm()
        if n == 0:
            raise NumericalContractError("cannot normalize an identically zero function")
        return SampledComplexFunction(self.axis_start, self.axis_step, self.values / n, self.axis_name)

    @classmethod
    def from_axis(cls, axis, values, axis_name="axis") -> "SampledComplexFunction":
        axis = np.asarray(axis, dtype=float)
        step = uniform_step(axis)
        return cls(float(axis[0]), step, values, axis_name)


def uniform_step(axis, rtol=1e-9) -> float:
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or axis.size < 2:
        raise ValueError("axis needs at least two points")
    steps = np.diff(axis)
    step = (axis[-1] - axis[0]) / (axis.size - 1)
    if not step > 0 or np.max(np.abs(steps - step)) > rtol * abs(step):
        raise ValueError("axis must be uniform and strictly increasing")
    return float(step)


def beam_field(beam: BeamSpec, device: DeviceParams, z):
    """Complex pump field of one tilted Gaussian beam at positions ``z`` (m).

    ``weight * exp(-(z - z0)^2 cos^2(theta) / w_p^2) * exp(-i (omega_p/c) sin(theta) z)``
    with ``theta = theta_deg + dtheta``. The transverse phase runs with a minus
    sign so that tilting towards positive ``dtheta`` raises the signal-idler
    detuning.
    """
    theta = beam.angle(device)
    z = np.asarray(z, dtype=float)
    envelope = np.exp(-((z - beam.position_z0) ** 2) * math.cos(theta) ** 2 / beam.waist_wp**2)
    return beam.weight * envelope * np.exp(-1j * device.pump_wavenumber * math.sin(theta) * z)


def max_spatial_frequency(beams: Sequence[BeamSpec], device: DeviceParams) -> float:
    """Highest significant spatial frequency of the envelope phi(z) (rad/m)."""
    carrier = max(abs(b.spatial_frequency(device)) for b in beams)
    return carrier + max(4.0 / b.waist_wp for b in beams)


def nyquist_step(k_max: float) -> float:
    """Largest z-step giving 8 samples per shortest oscillation."""
    return 2 * math.pi / (8 * k_max)


def device_z_grid(device: DeviceParams, max_step: float) -> np.ndarray:
    """Uniform grid over [-L/2, L/2] (endpoints included) with step <= ``max_step``."""
    n_intervals = max(2, math.ceil(device.length_L / max_step))
    n_intervals += n_intervals % 2
    return np.linspace(-device.length_L / 2, device.length_L / 2, n_intervals + 1)


def pump_envelope(beams: Sequence[BeamSpec], device: DeviceParams, z_grid) -> SampledComplexFunction:
    """Sample ``phi(z) = sum(beam fields) * exp(i k_deg z)`` on a uniform z-grid.

    Raises
    ------
    GridTooCoarse
        If the step exceeds the 8-samples-per-oscillation rule.
    """
    if len(beams) == 0:
        raise ValueError("at least one beam is required")
    z = np.asarray(z_grid, dtype=float)
    step = uniform_step(z)
    limit = nyquist_step(max_spatial_frequency(beams, device))
    if step > limit * (1 + 1e-12):
        raise GridTooCoarse(f"z-step {step:.4g} m exceeds the sampling limit {limit:.4g} m")
    # Equal to sum(beam_field) * exp(i k_deg z); the carrier and k_deg are
    # combined per beam before exponentiating so a beam at theta_deg stays real.
    total = np.zeros(z.shape, dtype=complex)
    for beam in beams:
        theta = beam.angle(device)
        envelope = np.exp(-((z - beam.position_z0) ** 2) * math.cos(theta) ** 2 / beam.waist_wp**2)
        total += beam.weight * envelope * np.exp(1j * beam.spatial_frequency(device) * z)
    return SampledComplexFunction(float(z[0]), step, total, "z_m")


def pump_spectrum(pulse: PumpPulse, omega_plus, omega_p0: Optional[float] = None):
    """Spectral amplitude f+ of the pump at sum frequency ``omega_plus``.

    Gaussian of amplitude 1/e half-width ``2 / tau_p`` around the line centre,
    times ``exp(i * cavity_phase(omega_plus))`` when a phase table is attached.
    """
    if omega_p0 is None:
        omega_p0 = 2 * math.pi * SPEED_OF_LIGHT / pulse.center_wavelength
    omega_plus = np.asarray(omega_plus, dtype=float)
    amplitude = np.exp(-((omega_plus - omega_p0) ** 2) * pulse.duration_tau_p**2 / 4)
    if pulse.cavity_phase is None:
        return amplitude.astype(complex)
    return amplitude * np.exp(1j * pulse.cavity_phase(omega_plus))
