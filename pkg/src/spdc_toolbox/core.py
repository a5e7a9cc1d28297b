"""Physical constants, device parameters and the pump-geometry -> phase-space maps.

Everything in here is SI: seconds, meters, rad/s. Display units (ps, mm, um,
nm, arcmin) only show up in the scenario files and CSV headers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact

DEFAULT_GROUP_VELOCITY = 9.26e7  # m/s; reproduces 10.8 ps per mm of spot displacement

# Small-angle map is only trusted below this tilt (rad).
MAX_APPROX_TILT = 0.05


class NumericalContractError(ValueError):
    """Base class for violated numerical preconditions (grids, angles, supports)."""


class AngleOutOfRange(NumericalContractError):
    pass


@dataclass(frozen=True)
class DeviceParams:
    """Waveguide and phase-matching constants.

    Either ``theta_deg`` or the pair ``(index_signal, index_idler)`` defines the
    degeneracy angle. When both are given they must agree,
    ``sin(theta_deg) == (index_signal - index_idler) / 2``.
    """

    length_L: float
    group_velocity_vg: float
    pump_center_omega: float
    theta_deg: Optional[float] = None
    index_signal: Optional[float] = None
    index_idler: Optional[float] = None

    def __post_init__(self):
        if not (self.length_L > 0 and math.isfinite(self.length_L)):
            raise ValueError(f"length_L must be positive, got {self.length_L!r}")
        if not (0 < self.group_velocity_vg < SPEED_OF_LIGHT):
            raise ValueError(f"group_velocity_vg must lie in (0, c), got {self.group_velocity_vg!r}")
        if not (self.pump_center_omega > 0 and math.isfinite(self.pump_center_omega)):
            raise ValueError(f"pump_center_omega must be positive, got {self.pump_center_omega!r}")
        has_pair = self.index_signal is not None or self.index_idler is not None
        if has_pair:
            if self.index_signal is None or self.index_idler is None:
                raise ValueError("index_signal and index_idler must be given together")
            half_diff = (self.index_signal - self.index_idler) / 2
            if abs(half_diff) > 1:
                raise ValueError("|index_signal - index_idler| / 2 must not exceed 1")
            theta_from_indices = math.asin(half_diff)
            if self.theta_deg is None:
                object.__setattr__(self, "theta_deg", theta_from_indices)
            elif abs(math.sin(self.theta_deg) - half_diff) > 1e-12:
                raise ValueError(
                    f"theta_deg={self.theta_deg!r} inconsistent with indices "
                    f"(sin(theta_deg) must equal {half_diff!r})"
                )
        elif self.theta_deg is None:
            object.__setattr__(self, "theta_deg", 0.0)
        if not math.isfinite(self.theta_deg) or abs(self.theta_deg) >= math.pi / 2:
            raise ValueError(f"theta_deg must lie in (-pi/2, pi/2), got {self.theta_deg!r}")

    @property
    def pump_wavenumber(self) -> float:
        """Vacuum pump wavenumber ``omega_p / c``."""
        return self.pump_center_omega / SPEED_OF_LIGHT

    @property
    def k_deg(self) -> float:
        return k_deg(self)

    @classmethod
    def from_wavelength(cls, length_L, group_velocity_vg, wavelength, **kwargs) -> "DeviceParams":
        return cls(length_L, group_velocity_vg, wavelength_to_omega(wavelength), **kwargs)


@dataclass(frozen=True)
class PhaseSpacePoint:
    tau: float
    omega_minus: float

    def __post_init__(self):
        if not (math.isfinite(self.tau) and math.isfinite(self.omega_minus)):
            raise ValueError("phase-space coordinates must be finite")


def wavelength_to_omega(wavelength):
    return 2 * np.pi * SPEED_OF_LIGHT / wavelength


def k_deg(device: DeviceParams) -> float:
    """Longitudinal pump wavevector at the degeneracy angle (rad/m)."""
    if device.index_signal is not None:
        return (device.index_signal - device.index_idler) / 2 * device.pump_wavenumber
    return math.sin(device.theta_deg) * device.pump_wavenumber


def position_to_delay(z0, device: DeviceParams):
    """Pump spot position (m) -> biphoton delay (s)."""
    return z0 / device.group_velocity_vg


def delay_to_position(tau, device: DeviceParams):
    return tau * device.group_velocity_vg


def _detuning_scale(device: DeviceParams) -> float:
    return device.group_velocity_vg * device.pump_wavenumber


def angle_to_detuning(delta_theta, device: DeviceParams):
    """Small-angle map from pump tilt (rad, relative to theta_deg) to frequency detuning.

    Raises
    ------
    AngleOutOfRange
        If any ``|delta_theta|`` reaches ``MAX_APPROX_TILT``; use
        :func:`angle_to_detuning_exact` there.
    """
    arr = np.asarray(delta_theta, dtype=float)
    if not np.all(np.abs(arr) < MAX_APPROX_TILT):
        raise AngleOutOfRange(
            f"tilt {delta_theta!r} rad outside the small-angle range |dtheta| < {MAX_APPROX_TILT}"
        )
    return delta_theta * _detuning_scale(device)


def angle_to_detuning_exact(delta_theta, device: DeviceParams):
    """Detuning ``(sin(theta_deg + dtheta) - sin(theta_deg)) * v_g * omega_p / c``."""
    theta = device.theta_deg
    return (np.sin(theta + delta_theta) - math.sin(theta)) * _detuning_scale(device)


def detuning_to_angle(omega_minus, device: DeviceParams):
    """Inverse of :func:`angle_to_detuning` (small-angle form)."""
    dtheta = omega_minus / _detuning_scale(device)
    if not np.all(np.abs(dtheta) < MAX_APPROX_TILT):
        raise AngleOutOfRange(f"detuning {omega_minus!r} rad/s needs a tilt beyond {MAX_APPROX_TILT} rad")
    return dtheta


def detuning_to_angle_exact(omega_minus, device: DeviceParams, theta=None):
    """Tilt increment that moves a beam at total angle ``theta`` by ``omega_minus``.

    ``theta`` defaults to the degeneracy angle, giving the exact inverse of
    :func:`angle_to_detuning_exact`.
    """
    if theta is None:
        theta = device.theta_deg
    s = np.sin(theta) + omega_minus / _detuning_scale(device)
    if np.any(np.abs(s) >= 1):
        raise AngleOutOfRange(f"detuning {omega_minus!r} rad/s is not reachable by tilting")
    return np.arcsin(s) - theta


def arcmin_to_rad(a):
    return a * math.pi / (180 * 60)


def rad_to_arcmin(r):
    return r * (180 * 60) / math.pi


def _lambda_scale(device: DeviceParams) -> float:
    return 8 * math.pi * SPEED_OF_LIGHT / device.pump_center_omega**2


def detuning_to_lambda(omega_minus, device: DeviceParams):
    """Express a signal-idler detuning in wavelength-equivalent units (m)."""
    return _lambda_scale(device) * omega_minus


def lambda_to_detuning(lam, device: DeviceParams):
    return lam / _lambda_scale(device)


def centered_axis(halfspan: float, points: int) -> np.ndarray:
    """FFT-style axis ``-halfspan + k * 2 * halfspan / points``; contains 0 for even ``points``."""
    step = 2 * halfspan / points
    return (np.arange(points) - points // 2) * step
