"""Generalized HOM coincidences and pump-displacement Wigner tomography.

With the signal arm delayed by ``d_tau`` (spectral phase ``exp(i ws d_tau)``)
and its frequency argument shifted by ``d_mu`` (``f(ws + d_mu, wi)``), the
balanced beam-splitter coincidence probability is::

    P = (1 - g * W(DELAY_SCALE * d_tau + t0, SHIFT_SCALE * d_mu + m0)) / 2

``g``, ``t0`` and ``m0`` come from :func:`calibrate`; ``g`` is 1 and the
offsets vanish up to discretization for normalized states.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .biphoton import (
    JsaGrid,
    assemble_jsa,
    beam_delay,
    center_detuning,
    spectral_width,
)
from .core import (
    MAX_APPROX_TILT,
    DeviceParams,
    NumericalContractError,
    PhaseSpacePoint,
    arcmin_to_rad,
    delay_to_position,
    detuning_to_angle_exact,
)
from .pump import BeamSpec
from .wigner import (
    RealGrid2D,
    delay_support,
    f_minus_support,
    sample_f_minus_for_wigner,
    wigner_transform,
)

# Wigner argument reached per unit of arm delay / arm frequency shift.
DELAY_SCALE = -0.5
SHIFT_SCALE = 1.0

ROUTES = ("interferometer", "pump_engineered")


class ShiftExceedsGrid(NumericalContractError):
    pass


class BeamLeavesDevice(NumericalContractError):
    pass


class PointOffGrid(NumericalContractError):
    pass


@dataclass(frozen=True)
class HomSetting:
    arm_delay: float = 0.0
    arm_shift: float = 0.0
    route: str = "interferometer"

    def __post_init__(self):
        if not (math.isfinite(self.arm_delay) and math.isfinite(self.arm_shift)):
            raise ValueError("HOM displacements must be finite")
        if self.route not in ROUTES:
            raise ValueError(f"unknown HOM route {self.route!r}; expected one of {ROUTES}")


def _fourier_shift_rows(amplitude: np.ndarray, shift_bins: float) -> np.ndarray:
    """``out[n, :] = amplitude[n + shift_bins, :]`` by band-limited (periodic) interpolation."""
    if shift_bins == 0:
        return amplitude
    n = amplitude.shape[0]
    if float(shift_bins).is_integer():
        return np.roll(amplitude, -int(shift_bins), axis=0)
    freqs = np.fft.fftfreq(n)
    phase = np.exp(2j * np.pi * freqs * shift_bins)
    if n % 2 == 0:
        phase[n // 2] = np.cos(np.pi * shift_bins)
    return np.fft.ifft(np.fft.fft(amplitude, axis=0) * phase[:, None], axis=0)


def _check_shift_support(amplitude: np.ndarray, shift_bins: float) -> None:
    marginal = np.sum(np.abs(amplitude) ** 2, axis=1)
    support = np.nonzero(marginal > 1e-20 * marginal.max())[0]
    first, last = support[0] - shift_bins, support[-1] - shift_bins
    if first < 0 or last > amplitude.shape[0] - 1:
        raise ShiftExceedsGrid(
            f"frequency shift of {shift_bins:.4g} grid steps moves the JSA support off the grid"
        )


def displace_signal(jsa: JsaGrid, arm_delay: float, arm_shift: float) -> np.ndarray:
    """Signal-arm amplitude after the shift ``ws -> ws + arm_shift`` and delay phase."""
    step = jsa.step
    shift_bins = arm_shift / step
    if shift_bins != 0:
        _check_shift_support(jsa.amplitude, shift_bins)
    out = _fourier_shift_rows(jsa.amplitude, shift_bins)
    if arm_delay != 0:
        # Relative frequencies: the common offset omega_p/2 only adds a global arm phase.
        rel = jsa.omega_s_axis - jsa.omega_s_axis[jsa.omega_s_axis.size // 2]
        out = out * np.exp(1j * rel * arm_delay)[:, None]
    return out


def swap_overlap(amplitude: np.ndarray, step: float) -> float:
    """``Re sum f(ws, wi) conj(f(wi, ws)) d_ws d_wi``."""
    return float(np.real(np.sum(amplitude * np.conj(amplitude.T))) * step**2)


def hom_coincidence(jsa: JsaGrid, setting: HomSetting = HomSetting()) -> float:
    """Coincidence probability behind a balanced beam splitter (interferometer route).

    Raises
    ------
    ShiftExceedsGrid
        If the frequency shift pushes the JSA support off its grid.
    """
    if setting.route != "interferometer":
        raise ValueError("hom_coincidence acts on a sampled JSA; use pump_engineered_coincidence for the pump route")
    shifted = displace_signal(jsa, setting.arm_delay, setting.arm_shift)
    p = 0.5 * (1 - swap_overlap(shifted, jsa.step))
    return min(1.0, max(0.0, p))


# --- calibration -----------------------------------------------------------


@dataclass(frozen=True)
class Calibration:
    """Affine link between coincidences and Wigner values, fixed by a Gaussian state."""

    gain: float
    tau_offset: float
    omega_offset: float
    delay_scale: float = DELAY_SCALE
    shift_scale: float = SHIFT_SCALE

    def argument(self, arm_delay, arm_shift) -> Tuple[float, float]:
        return (
            self.delay_scale * np.asarray(arm_delay) + self.tau_offset,
            self.shift_scale * np.asarray(arm_shift) + self.omega_offset,
        )

    def coincidence(self, wigner_value):
        return 0.5 * (1 - self.gain * np.asarray(wigner_value))

    def to_wigner(self, coincidence):
        return (1 - 2 * np.asarray(coincidence)) / self.gain

    @property
    def affine_gain(self) -> float:
        """Slope of ``W = affine_gain * P + affine_offset``."""
        return -2 / self.gain

    @property
    def affine_offset(self) -> float:
        return 1 / self.gain


def calibration_beam(device: DeviceParams, waist: float) -> BeamSpec:
    """Off-centre single beam used as the calibration state.

    Displaced on both axes so that sign or factor-of-two errors in the argument
    map show up as offsets instead of cancelling by symmetry.
    """
    return BeamSpec(position_z0=min(0.05e-3, device.length_L / 40), tilt_delta_theta=arcmin_to_rad(1.0), waist_wp=waist)


def calibrate(scenario, route: str = "finite", beam: Optional[BeamSpec] = None) -> Calibration:
    """Fix gain and argument offsets from three coincidences of a Gaussian state.

    The Gaussian's Wigner function is known in closed form, so the points
    ``(0, 0)``, ``(d_tau, 0)`` and ``(0, d_mu)`` determine ``g``, ``t0``, ``m0``.
    """
    device = scenario.device
    if beam is None:
        beam = calibration_beam(device, scenario.beams[0].waist_wp)
    jsa = assemble_jsa(scenario, route, beams=[beam])
    dw = spectral_width(beam, device)
    tau0, mu0 = beam_delay(beam, device), center_detuning(beam, device)
    a_tau, a_omega = dw**2 / 2, 2 / dw**2

    d_tau = 1 / dw
    d_mu = max(1, round(0.5 * dw / jsa.step)) * jsa.step
    p0 = hom_coincidence(jsa, HomSetting())
    p1 = hom_coincidence(jsa, HomSetting(arm_delay=d_tau))
    p2 = hom_coincidence(jsa, HomSetting(arm_shift=d_mu))
    logs = [math.log(1 - 2 * p) for p in (p0, p1, p2)]
    x1 = DELAY_SCALE * d_tau
    y2 = SHIFT_SCALE * d_mu
    u = -((logs[1] - logs[0]) / a_tau + x1**2) / (2 * x1)
    v = -((logs[2] - logs[0]) / a_omega + y2**2) / (2 * y2)
    gain = math.exp(logs[0] + a_tau * u**2 + a_omega * v**2)
    return Calibration(gain=gain, tau_offset=u + tau0, omega_offset=v + mu0)


class CoincidencePrediction(NamedTuple):
    probability: float
    clamped: bool


def coincidence_from_wigner(W: RealGrid2D, point: PhaseSpacePoint, gain: float) -> CoincidencePrediction:
    """Coincidence probability implied by a Wigner value (bilinear lookup).

    ``clamped`` flags a raw value outside [0, 1], i.e. a non-physical gain.
    """
    tau, omega = W.tau_axis, W.omega_axis
    if not (tau[0] <= point.tau <= tau[-1] and omega[0] <= point.omega_minus <= omega[-1]):
        raise PointOffGrid(f"{point} lies outside the Wigner grid")
    value = RegularGridInterpolator((tau, omega), W.values)([[point.tau, point.omega_minus]])[0]
    raw = 0.5 * (1 - gain * value)
    clamped = not 0.0 <= raw <= 1.0
    return CoincidencePrediction(min(1.0, max(0.0, float(raw))), clamped)


# --- pump engineering ------------------------------------------------------


def displaced_beams(
    beams: Sequence[BeamSpec], device: DeviceParams, tau_shift: float, omega_shift: float
) -> list:
    """Beam list whose Wigner function is the original translated by ``(tau_shift, omega_shift)``.

    Each beam is re-tilted by the exact angle that moves its own detuning by
    ``omega_shift``; the whole illumination pattern (spots and transverse
    phases) is then translated by ``v_g * tau_shift`` along the guide. The
    waist is rescaled with ``cos(theta)`` so the footprint on the guide, and
    with it the spectral width, is unchanged by the re-tilt.
    """
    d = delay_to_position(tau_shift, device)
    out = []
    for beam in beams:
        tilt = beam.tilt_delta_theta + float(detuning_to_angle_exact(omega_shift, device, theta=beam.angle(device)))
        footprint = math.cos(device.theta_deg + tilt) / math.cos(beam.angle(device))
        moved = replace(beam, tilt_delta_theta=tilt, waist_wp=beam.waist_wp * footprint)
        weight = moved.weight * np.exp(-1j * moved.spatial_frequency(device) * d)
        out.append(replace(moved, position_z0=beam.position_z0 + d, weight=complex(weight)))
    return out


def check_beams_inside(beams: Sequence[BeamSpec], device: DeviceParams) -> None:
    """Raise BeamLeavesDevice if a spot leaves [-L/2 + 2w, L/2 - 2w] or a tilt the small-angle range."""
    for beam in beams:
        limit = device.length_L / 2 - 2 * beam.waist_wp
        if abs(beam.position_z0) > limit:
            raise BeamLeavesDevice(f"beam spot at {beam.position_z0:.4g} m outside +-{limit:.4g} m")
        if abs(beam.tilt_delta_theta) >= MAX_APPROX_TILT:
            raise BeamLeavesDevice(f"beam tilt {beam.tilt_delta_theta:.4g} rad beyond {MAX_APPROX_TILT} rad")


def pump_engineered_coincidence(scenario, setting: HomSetting, route: str = "finite") -> float:
    """Coincidence at zero interferometer displacement after moving the pump instead.

    The pump is translated so that the state's Wigner function at the origin
    equals the value the interferometer route probes at ``setting``.
    """
    tau_shift = -DELAY_SCALE * setting.arm_delay
    omega_shift = -SHIFT_SCALE * setting.arm_shift
    beams = displaced_beams(scenario.beams, scenario.device, tau_shift, omega_shift)
    check_beams_inside(beams, scenario.device)
    return hom_coincidence(assemble_jsa(scenario, route, beams=beams))


def coincidence(scenario, setting: HomSetting, route: str = "finite") -> float:
    """Dispatch on ``setting.route``."""
    if setting.route == "pump_engineered":
        return pump_engineered_coincidence(scenario, setting, route)
    return hom_coincidence(assemble_jsa(scenario, route), setting)


# --- tomography ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TomographyResult:
    """Reconstructed vs directly computed Wigner function on the target grid.

    ``reconstructed`` holds NaN where the displaced pump would leave the device.
    """

    reconstructed: RealGrid2D
    direct: RealGrid2D
    affine_gain: float
    affine_offset: float
    max_abs_error: float
    rms_error: float
    valid: np.ndarray
    calibration: Calibration

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.direct.values)))


def scan_jsa_grid(
    beams: Sequence[BeamSpec], device: DeviceParams, pulse, extra_tau: float = 0.0, extra_omega: float = 0.0
) -> Tuple[float, int]:
    """JSA half-span and point count that hold every state of a scan.

    ``extra_tau`` / ``extra_omega`` are the largest displacements applied.
    """
    plus_support = 6 * 2 / pulse.duration_tau_p
    minus_support = f_minus_support(beams, device) + abs(extra_omega)
    halfspan = 0.5 * (plus_support + minus_support) * 1.05
    reach = delay_support(beams, device) + abs(extra_tau)
    max_step = 2 * math.pi / (4 * reach)
    points = 2 * math.ceil(halfspan / max_step)
    return halfspan, max(points, 16)


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is not None:
        return threads
    raw = os.environ.get("SPDC_THREADS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        raise ValueError(f"SPDC_THREADS must be a positive integer, got {raw!r}")
    return value


def tomography_scan(
    scenario,
    tau_targets,
    omega_targets,
    route: str = "finite",
    threads: Optional[int] = None,
    calibration: Optional[Calibration] = None,
) -> TomographyResult:
    """Reconstruct W point by point from coincidences of pump-displaced states.

    For each target ``(tau*, Omega*)`` the pump is translated so that the
    target moves to the calibrated measurement point, one zero-displacement
    coincidence is computed, and the affine map is inverted. Targets whose
    displaced pump leaves the device become gaps (NaN) instead of errors.
    """
    tau_targets = np.asarray(tau_targets, dtype=float)
    omega_targets = np.asarray(omega_targets, dtype=float)
    device = scenario.device
    halfspan, points = scan_jsa_grid(
        scenario.beams,
        device,
        scenario.pulse,
        float(np.max(np.abs(tau_targets))),
        float(np.max(np.abs(omega_targets))),
    )
    if scenario.grids.jsa_halfspan >= halfspan and scenario.grids.jsa_points * halfspan >= points * scenario.grids.jsa_halfspan:
        scan_scenario = scenario
    else:
        scan_scenario = replace(scenario, grids=replace(scenario.grids, jsa_halfspan=halfspan, jsa_points=points))
    if calibration is None:
        calibration = calibrate(scan_scenario, route)

    def measure(target):
        tau_star, omega_star = target
        beams = displaced_beams(
            scenario.beams,
            device,
            calibration.tau_offset - tau_star,
            calibration.omega_offset - omega_star,
        )
        try:
            check_beams_inside(beams, device)
        except BeamLeavesDevice:
            return math.nan
        p = hom_coincidence(assemble_jsa(scan_scenario, route, beams=beams))
        return float(calibration.to_wigner(p))

    targets = [(t, o) for t in tau_targets for o in omega_targets]
    workers = resolve_threads(threads)
    if workers == 1:
        values = [measure(t) for t in targets]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(measure, targets))
    reconstructed = np.array(values).reshape(tau_targets.size, omega_targets.size)

    f = sample_f_minus_for_wigner(scenario.beams, device, tau_targets, omega_targets, route)
    direct = wigner_transform(f, tau_targets, omega_targets)
    valid = ~np.isnan(reconstructed)
    err = np.abs(reconstructed - direct.values)[valid]
    return TomographyResult(
        reconstructed=RealGrid2D(tau_targets, omega_targets, reconstructed),
        direct=direct,
        affine_gain=calibration.affine_gain,
        affine_offset=calibration.affine_offset,
        max_abs_error=float(err.max()) if err.size else math.nan,
        rms_error=float(np.sqrt(np.mean(err**2))) if err.size else math.nan,
        valid=valid,
        calibration=calibration,
    )
