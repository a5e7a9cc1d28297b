"""Antidiagonal amplitude f- by three routes, and assembly of the joint spectral amplitude.

Routes
------
finite
    Trapezoid quadrature of ``phi(z) exp(i w z / v_g)`` over the device length.
infinite
    Analytic Fourier transform of the (untruncated) multi-beam envelope.
gaussian
    Closed-form single-beam amplitude; used as an oracle.

All three share the same absolute scale before normalization, so the finite
and infinite routes can be compared sample by sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.signal import czt

from .core import DeviceParams, NumericalContractError, centered_axis, position_to_delay
from .pump import (
    BeamSpec,
    GridTooCoarse,
    SampledComplexFunction,
    device_z_grid,
    max_spatial_frequency,
    nyquist_step,
    pump_envelope,
    pump_spectrum,
    uniform_step,
)

ROUTES = ("finite", "infinite", "gaussian")


class DomainMismatch(NumericalContractError):
    pass


class WaistMismatch(ValueError):
    pass


def spectral_width(beam: BeamSpec, device: DeviceParams) -> float:
    """1/e amplitude half-width of a beam's f- in omega_- (rad/s).

    Exact Fourier width of the profile ``exp(-(z - z0)^2 cos^2(theta) / w_p^2)``,
    i.e. ``2 v_g cos(theta) / w_p``.
    """
    return 2 * device.group_velocity_vg * math.cos(beam.angle(device)) / beam.waist_wp


def center_detuning(beam: BeamSpec, device: DeviceParams) -> float:
    """Detuning at which the beam's f- peaks (exact sine, no small-angle step)."""
    return -beam.spatial_frequency(device) * device.group_velocity_vg


def beam_delay(beam: BeamSpec, device: DeviceParams) -> float:
    return position_to_delay(beam.position_z0, device)


class GaussianTerm(NamedTuple):
    """``amp * exp(-p w^2 + q w + r)``: one beam's contribution to f-(w)."""

    amp: complex
    p: float
    q: complex
    r: complex

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        return self.amp * np.exp(-self.p * omega**2 + self.q * omega + self.r)

    def conj(self) -> "GaussianTerm":
        return GaussianTerm(np.conj(self.amp), self.p, np.conj(self.q), np.conj(self.r))


def gaussian_term(beam: BeamSpec, device: DeviceParams, *, transform_scale: bool = True) -> GaussianTerm:
    """Closed form of one beam's f-.

    ``weight * exp(i (w - mu) tau0) * exp(-(w - mu)^2 / dw^2)`` with
    ``mu = center_detuning`` and ``dw = spectral_width``. With
    ``transform_scale`` the prefactor ``sqrt(pi) w_p / cos(theta)`` of the
    continuous Fourier integral is included, which fixes the relative weight of
    beams with different tilts.
    """
    dw = spectral_width(beam, device)
    mu = center_detuning(beam, device)
    tau0 = beam_delay(beam, device)
    p = 1.0 / dw**2
    q = 2 * mu / dw**2 + 1j * tau0
    r = -(mu**2) / dw**2 - 1j * mu * tau0
    amp = complex(beam.weight)
    if transform_scale:
        amp *= math.sqrt(math.pi) * beam.waist_wp / math.cos(beam.angle(device))
    return GaussianTerm(amp, p, q, r)


def gaussian_inner(a: GaussianTerm, b: GaussianTerm) -> complex:
    """``integral conj(a(w)) b(w) dw`` in closed form."""
    A = a.p + b.p
    B = np.conj(a.q) + b.q
    C = np.conj(a.r) + b.r
    return complex(np.conj(a.amp) * b.amp * np.sqrt(np.pi / A) * np.exp(B**2 / (4 * A) + C))


def f_minus_gaussian(beam: BeamSpec, device: DeviceParams, omega_minus):
    """Single-beam f- with unit peak modulus times ``|weight|`` (not normalized)."""
    return gaussian_term(beam, device, transform_scale=False)(omega_minus)


def _check_omega_grid(omega_minus_grid) -> np.ndarray:
    omega = np.asarray(omega_minus_grid, dtype=float)
    uniform_step(omega)
    return omega


def f_minus_infinite(beams: Sequence[BeamSpec], device: DeviceParams, omega_minus_grid) -> SampledComplexFunction:
    """Fourier transform of the whole (untruncated) multi-beam envelope, normalized on the grid."""
    omega = _check_omega_grid(omega_minus_grid)
    values = np.zeros(omega.shape, dtype=complex)
    for beam in beams:
        values += gaussian_term(beam, device)(omega)
    return SampledComplexFunction.from_axis(omega, values, "omega_minus_rad_s").normalized()


def f_minus_finite(
    envelope: SampledComplexFunction,
    device: DeviceParams,
    omega_minus_grid,
    envelope_bandwidth: Optional[float] = None,
    normalize: bool = True,
) -> SampledComplexFunction:
    """Trapezoid quadrature of ``phi(z) exp(i w z / v_g)`` over ``[-L/2, L/2]``.

    Parameters
    ----------
    envelope : SampledComplexFunction
        ``phi(z)`` sampled from ``-L/2`` to ``L/2`` inclusive.
    device : DeviceParams
    omega_minus_grid : array_like
        Uniform detuning grid (rad/s).
    envelope_bandwidth : float, optional
        Highest spatial frequency carried by ``phi`` (rad/m); adds to the kernel's
        phase rate in the sampling check. Only the kernel rate is checked when
        omitted.
    normalize : bool
        L2-normalize over the detuning grid (default).

    Raises
    ------
    DomainMismatch
        If the envelope does not span exactly ``[-L/2, L/2]``.
    GridTooCoarse
        If the z-step violates the 8-samples-per-oscillation rule.
    """
    omega = _check_omega_grid(omega_minus_grid)
    half = device.length_L / 2
    tol = 1e-9 * device.length_L
    if abs(envelope.axis_start + half) > tol or abs(envelope.axis_stop - half) > tol:
        raise DomainMismatch(
            f"envelope spans [{envelope.axis_start!r}, {envelope.axis_stop!r}] m, "
            f"expected [{-half!r}, {half!r}] m"
        )
    v = device.group_velocity_vg
    k_max = float(np.max(np.abs(omega))) / v + (envelope_bandwidth or 0.0)
    if k_max > 0 and envelope.axis_step > nyquist_step(k_max) * (1 + 1e-12):
        raise GridTooCoarse(
            f"z-step {envelope.axis_step:.4g} m too coarse for detunings up to "
            f"{np.max(np.abs(omega)):.4g} rad/s (limit {nyquist_step(k_max):.4g} m)"
        )
    values = _trapezoid_transform(envelope, omega, v)
    out = SampledComplexFunction.from_axis(omega, values, "omega_minus_rad_s")
    return out.normalized() if normalize else out


def _trapezoid_transform(envelope: SampledComplexFunction, omega: np.ndarray, v: float) -> np.ndarray:
    """``sum_n w_n phi_n exp(i omega_k z_n / v)`` for uniform ``omega_k`` and ``z_n``.

    Both axes are uniform, so the sum is a chirp-z transform along the unit
    circle and costs O((N + M) log(N + M)) instead of N * M exponentials.
    """
    dz = envelope.axis_step
    weighted = np.full(envelope.values.size, dz) * envelope.values
    weighted[0] *= 0.5
    weighted[-1] *= 0.5
    if omega.size == 1:
        return np.array([np.sum(weighted * np.exp(1j * omega[0] * envelope.axis / v))])
    h = omega[1] - omega[0]
    # term_nk = exp(i omega_0 n dz / v) * exp(i k h n dz / v), times exp(i omega_k z_0 / v)
    spiral = czt(
        weighted,
        m=omega.size,
        w=np.exp(1j * h * dz / v),
        a=np.exp(-1j * omega[0] * dz / v),
    )
    return spiral * np.exp(1j * omega * envelope.axis_start / v)


def finite_z_grid(beams: Sequence[BeamSpec], device: DeviceParams, omega_max: float) -> np.ndarray:
    """Device z-grid satisfying the combined pump + kernel sampling rule."""
    k_max = max_spatial_frequency(beams, device) + abs(omega_max) / device.group_velocity_vg
    return device_z_grid(device, nyquist_step(k_max))


def f_minus_route(
    beams: Sequence[BeamSpec], device: DeviceParams, omega_minus_grid, route: str = "finite"
) -> SampledComplexFunction:
    """Normalized f- of a beam list by the requested route."""
    omega = _check_omega_grid(omega_minus_grid)
    if route == "finite":
        z = finite_z_grid(beams, device, float(np.max(np.abs(omega))))
        envelope = pump_envelope(beams, device, z)
        return f_minus_finite(envelope, device, omega, max_spatial_frequency(beams, device))
    if route == "infinite":
        return f_minus_infinite(beams, device, omega)
    if route == "gaussian":
        if len(beams) != 1:
            raise ValueError("the gaussian route handles exactly one beam")
        values = f_minus_gaussian(beams[0], device, omega)
        return SampledComplexFunction.from_axis(omega, values, "omega_minus_rad_s").normalized()
    raise ValueError(f"unknown route {route!r}; expected one of {ROUTES}")


def component_overlap(beam_a: BeamSpec, beam_b: BeamSpec, device: DeviceParams) -> float:
    """Modulus of the normalized inner product of two beams' f- (closed form)."""
    if not math.isclose(beam_a.waist_wp, beam_b.waist_wp, rel_tol=1e-12):
        raise WaistMismatch(f"waists differ: {beam_a.waist_wp!r} vs {beam_b.waist_wp!r}")
    ga = gaussian_term(beam_a, device, transform_scale=False)
    gb = gaussian_term(beam_b, device, transform_scale=False)
    cross = abs(gaussian_inner(ga, gb))
    norm = math.sqrt(abs(gaussian_inner(ga, ga)) * abs(gaussian_inner(gb, gb)))
    return min(1.0, cross / norm)


@dataclass(frozen=True, eq=False)
class JsaGrid:
    """Joint spectral amplitude on identical signal/idler axes.

    Normalized so that ``sum |amplitude|^2 * d_ws * d_wi == 1``.
    """

    omega_s_axis: np.ndarray
    omega_i_axis: np.ndarray
    amplitude: np.ndarray

    def __post_init__(self):
        if self.amplitude.shape != (self.omega_s_axis.size, self.omega_i_axis.size):
            raise ValueError("amplitude shape does not match the axes")
        if not np.all(np.isfinite(self.amplitude)):
            raise ValueError("JSA contains non-finite entries")

    @property
    def step(self) -> float:
        # whole-span estimate; neighbouring differences lose digits at optical offsets
        return uniform_step(self.omega_s_axis)

    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.amplitude) ** 2)) * self.step**2)


def jsa_from_factors(pulse, f_minus_values, device: DeviceParams, axis) -> JsaGrid:
    """Combine f+ and f- samples on the square grid ``axis`` x ``axis``.

    ``f_minus_values[m]`` must hold f- at ``(m - (N - 1)) * step`` for
    ``m = 0 .. 2N - 2``, the full set of on-grid signal-idler differences.
    """
    n = axis.size
    idx = np.arange(n)
    diff_index = idx[:, None] - idx[None, :] + (n - 1)
    omega_plus = axis[:, None] + axis[None, :]
    amplitude = pump_spectrum(pulse, omega_plus, device.pump_center_omega) * f_minus_values[diff_index]
    step = uniform_step(axis)
    norm = math.sqrt(float(np.sum(np.abs(amplitude) ** 2)) * step**2)
    if norm == 0:
        raise NumericalContractError("JSA vanishes on the grid")
    return JsaGrid(axis, axis.copy(), amplitude / norm)


def jsa_axis(device: DeviceParams, halfspan: float, points: int) -> np.ndarray:
    """Signal/idler axis centred on degeneracy ``omega_p / 2``."""
    return device.pump_center_omega / 2 + centered_axis(halfspan, points)


def assemble_jsa(scenario, route: str = "finite", beams: Optional[Sequence[BeamSpec]] = None) -> JsaGrid:
    """Build ``f+(ws + wi) f-(ws - wi)`` for a scenario and L2-normalize it.

    ``beams`` overrides ``scenario.beams`` (used by pump-displacement scans).
    """
    device = scenario.device
    beams = scenario.beams if beams is None else beams
    halfspan, points = scenario.grids.jsa_halfspan, scenario.grids.jsa_points
    axis = jsa_axis(device, halfspan, points)
    step = 2 * halfspan / points
    differences = step * np.arange(-(points - 1), points)
    f_minus = f_minus_route(beams, device, differences, route)
    return jsa_from_factors(scenario.pulse, f_minus.values, device, axis)
