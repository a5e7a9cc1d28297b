"""Chronocyclic Wigner function of f-, analytic oracles, and scalar metrics.

Convention::

    W(tau, Omega) = integral dw f(Omega - w) conj(f(Omega + w)) exp(2 i tau w)

With ``integral |f|^2 dw == 1`` this gives ``integral W dtau = pi |f(Omega)|^2``
and ``double integral W = pi``; a normalized single-beam state peaks at 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .biphoton import (
    WaistMismatch,
    beam_delay,
    center_detuning,
    f_minus_route,
    gaussian_inner,
    gaussian_term,
    spectral_width,
)
from .core import DeviceParams, NumericalContractError, PhaseSpacePoint
from .pump import BeamSpec, SampledComplexFunction, uniform_step


class ImaginaryResidueTooLarge(NumericalContractError):
    pass


class SupportExceeded(NumericalContractError):
    pass


class NoPeaks(NumericalContractError):
    pass


@dataclass(frozen=True, eq=False)
class RealGrid2D:
    """Real samples ``values[i, j]`` at ``(tau_axis[i], omega_axis[j])``.

    NaN entries mark gaps (points a tomography scan could not reach); any other
    non-finite value is rejected.
    """

    tau_axis: np.ndarray
    omega_axis: np.ndarray
    values: np.ndarray
    omega_name: str = field(default="omega_minus_rad_s")

    def __post_init__(self):
        tau = np.asarray(self.tau_axis, dtype=float)
        omega = np.asarray(self.omega_axis, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "tau_axis", tau)
        object.__setattr__(self, "omega_axis", omega)
        object.__setattr__(self, "values", values)
        uniform_step(tau)
        uniform_step(omega)
        if values.shape != (tau.size, omega.size):
            raise ValueError(f"values shape {values.shape} does not match axes ({tau.size}, {omega.size})")
        if np.any(np.isinf(values)):
            raise ValueError("grid values must be finite")

    @property
    def d_tau(self) -> float:
        return float(self.tau_axis[1] - self.tau_axis[0])

    @property
    def d_omega(self) -> float:
        return float(self.omega_axis[1] - self.omega_axis[0])

    def argmax(self) -> PhaseSpacePoint:
        i, j = np.unravel_index(np.nanargmax(self.values), self.values.shape)
        return PhaseSpacePoint(float(self.tau_axis[i]), float(self.omega_axis[j]))


@dataclass
class WignerMetrics:
    peak_locations: List[PhaseSpacePoint]
    peak_widths: List[Tuple[float, float]]
    min_value: float
    negativity_volume: float
    fringe_period_omega: Optional[float] = None
    fringe_period_tau: Optional[float] = None


_BLOCK_ELEMENTS = 1 << 21


def _interp_zero(values: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Linear interpolation at fractional indices; zero outside the samples."""
    n = values.size
    i0 = np.floor(pos).astype(np.int64)
    t = pos - i0

    def take(i):
        return np.where((i >= 0) & (i < n), values[np.clip(i, 0, n - 1)], 0)

    return (1 - t) * take(i0) + t * take(i0 + 1)


def cross_wigner(
    f: SampledComplexFunction, g: SampledComplexFunction, tau_axis, omega_axis
) -> np.ndarray:
    """Complex cross-Wigner ``integral f(Omega - w) conj(g(Omega + w)) exp(2 i tau w) dw``.

    Riemann sum with step equal to the sample spacing. Detunings on the
    sampling grid (or half-way between two samples) use the samples directly;
    anything else is linearly interpolated. ``f`` and ``g`` are zero outside
    their sampled window. Returns shape ``(len(tau_axis), len(omega_axis))``.
    """
    if f.values.size != g.values.size or not (
        math.isclose(f.axis_start, g.axis_start, rel_tol=0, abs_tol=1e-9 * f.axis_step)
        and math.isclose(f.axis_step, g.axis_step, rel_tol=1e-12)
    ):
        raise ValueError("cross_wigner needs f and g on the same axis")
    tau = np.atleast_1d(np.asarray(tau_axis, dtype=float))
    omega = np.atleast_1d(np.asarray(omega_axis, dtype=float))
    h = f.axis_step
    lo, hi = f.axis_start, f.axis_stop
    if np.any(omega < lo - 1e-9 * h) or np.any(omega > hi + 1e-9 * h):
        raise SupportExceeded(
            f"requested detunings span [{omega.min()!r}, {omega.max()!r}] rad/s, "
            f"f- is sampled on [{lo!r}, {hi!r}] rad/s"
        )
    n = f.values.size
    pos = (omega - lo) / h
    twice = np.round(2 * pos)
    snap = np.abs(2 * pos - twice) < 1e-9
    pos = np.where(snap, twice / 2, pos)
    # Half-integer positions pair samples symmetrically with a half-step offset.
    half_offset = np.abs(pos - np.round(pos)) > 0.25

    out = np.empty((tau.size, omega.size), dtype=complex)
    for offset in (0.0, 0.5):
        cols = np.nonzero(half_offset if offset else ~half_offset)[0]
        if not cols.size:
            continue
        s = np.arange(-n, n + (0 if offset else 1)) + offset
        kernel = np.exp(2j * np.outer(s * h, tau))
        # bound the (columns x lags) product array to a few tens of MB
        block = max(1, _BLOCK_ELEMENTS // s.size)
        for start in range(0, cols.size, block):
            chunk = cols[start : start + block]
            p = pos[chunk][:, None]
            prod = _interp_zero(f.values, p - s[None, :]) * np.conj(_interp_zero(g.values, p + s[None, :]))
            out[:, chunk] = (h * (prod @ kernel)).T
    return out


def wigner_transform(
    f_minus: SampledComplexFunction, tau_axis, omega_axis, residue_tol: float = 1e-10
) -> RealGrid2D:
    """Numerical Wigner function of sampled f- on the requested axes.

    Raises
    ------
    ImaginaryResidueTooLarge
        If ``max |Im W| > residue_tol * max |W|``.
    SupportExceeded
        If a requested detuning lies outside the sampled window of f-.
    """
    raw = cross_wigner(f_minus, f_minus, tau_axis, omega_axis)
    scale = float(np.max(np.abs(raw))) if raw.size else 0.0
    residue = float(np.max(np.abs(raw.imag))) if raw.size else 0.0
    if residue > residue_tol * scale:
        raise ImaginaryResidueTooLarge(f"imaginary residue {residue:.3g} vs max |W| {scale:.3g}")
    return RealGrid2D(np.asarray(tau_axis, float), np.asarray(omega_axis, float), raw.real)


def imaginary_residue(f_minus: SampledComplexFunction, tau_axis, omega_axis) -> float:
    """``max |Im W| / max |W|`` of the raw transform."""
    raw = cross_wigner(f_minus, f_minus, tau_axis, omega_axis)
    return float(np.max(np.abs(raw.imag)) / np.max(np.abs(raw)))


def wigner_gaussian_oracle(beam: BeamSpec, device: DeviceParams, tau_axis, omega_axis) -> RealGrid2D:
    """Closed-form Wigner function of a normalized single-beam state.

    ``exp(-2 (Omega - mu)^2 / dw^2) * exp(-dw^2 (tau - tau0)^2 / 2)``: peak 1 at
    ``(tau0, mu)``, 1/e half-widths ``dw / sqrt(2)`` and ``sqrt(2) / dw``.
    """
    tau = np.asarray(tau_axis, dtype=float)
    omega = np.asarray(omega_axis, dtype=float)
    dw = spectral_width(beam, device)
    mu = center_detuning(beam, device)
    tau0 = beam_delay(beam, device)
    values = np.exp(-(dw**2) * (tau[:, None] - tau0) ** 2 / 2) * np.exp(-2 * (omega[None, :] - mu) ** 2 / dw**2)
    return RealGrid2D(tau, omega, values)


def gaussian_wigner_widths(beam: BeamSpec, device: DeviceParams) -> Tuple[float, float]:
    """1/e half-widths ``(in tau, in Omega)`` of a single-beam Wigner function."""
    dw = spectral_width(beam, device)
    return math.sqrt(2) / dw, dw / math.sqrt(2)


def wigner_multibeam_oracle(
    beams: Sequence[BeamSpec], device: DeviceParams, tau_axis, omega_axis
) -> RealGrid2D:
    """Closed-form Wigner function of a normalized multi-beam (untruncated) state.

    Sum over beam pairs of the analytic Gaussian cross terms; off-diagonal pairs
    carry the interference fringes.
    """
    waists = {b.waist_wp for b in beams}
    if max(waists) - min(waists) > 1e-12 * max(waists):
        raise WaistMismatch(f"multibeam oracle needs equal waists, got {sorted(waists)}")
    tau = np.asarray(tau_axis, dtype=float)[:, None]
    omega = np.asarray(omega_axis, dtype=float)[None, :]
    terms = [gaussian_term(b, device) for b in beams]
    norm = sum(gaussian_inner(a, b) for a in terms for b in terms).real
    total = np.zeros((tau.shape[0], omega.shape[1]), dtype=complex)
    for a in terms:
        for b in terms:
            A = a.p + b.p
            B = 2 * a.p * omega - a.q - 2 * b.p * omega + np.conj(b.q) + 2j * tau
            C = -A * omega**2 + (a.q + np.conj(b.q)) * omega + a.r + np.conj(b.r)
            total += a.amp * np.conj(b.amp) * np.sqrt(np.pi / A) * np.exp(B**2 / (4 * A) + C)
    return RealGrid2D(tau[:, 0], omega[0], total.real / norm)


# --- marginals -------------------------------------------------------------


def marginal_over_tau(W: RealGrid2D) -> np.ndarray:
    return W.values.sum(axis=0) * W.d_tau


def marginal_over_omega(W: RealGrid2D) -> np.ndarray:
    return W.values.sum(axis=1) * W.d_omega


def total_integral(W: RealGrid2D) -> float:
    return float(W.values.sum() * W.d_tau * W.d_omega)


def time_amplitude(f: SampledComplexFunction, tau) -> np.ndarray:
    """``F(tau) = integral f(w) exp(-i w tau) dw``; ``integral W dOmega = |F|^2 / 2``."""
    tau = np.asarray(tau, dtype=float)
    return f.axis_step * (np.exp(-1j * np.outer(tau, f.axis)) @ f.values)


# --- scenario-level helpers -----------------------------------------------


def aligned_omega_grid(omega_axis, support_halfspan: float, max_step: float) -> np.ndarray:
    """Sampling grid for f- on which every requested detuning is an exact node.

    The step is ``d_omega / r`` for the smallest integer ``r`` with step <=
    ``max_step``; the grid covers ``[-support_halfspan, support_halfspan]`` and
    the requested axis.
    """
    omega = np.asarray(omega_axis, dtype=float)
    d_omega = uniform_step(omega) if omega.size > 1 else max_step
    r = max(1, math.ceil(d_omega / max_step - 1e-9))
    h = d_omega / r
    lo = min(-support_halfspan, omega[0])
    hi = max(support_halfspan, omega[-1])
    k_lo = math.ceil((omega[0] - lo) / h - 1e-9)
    k_hi = math.ceil((hi - omega[0]) / h - 1e-9)
    return omega[0] + h * np.arange(-k_lo, k_hi + 1)


def f_minus_support(beams: Sequence[BeamSpec], device: DeviceParams, decay: float = 6.0) -> float:
    """Half-span in omega_- outside which every beam's f- is below exp(-decay^2)."""
    return max(abs(center_detuning(b, device)) + decay * spectral_width(b, device) for b in beams)


def delay_support(beams: Sequence[BeamSpec], device: DeviceParams, decay: float = 6.0) -> float:
    """Half-span in tau holding the time-domain content of f-."""
    return max(abs(beam_delay(b, device)) + decay * 2 / spectral_width(b, device) for b in beams)


def sample_f_minus_for_wigner(
    beams: Sequence[BeamSpec], device: DeviceParams, tau_axis, omega_axis, route: str = "finite"
) -> SampledComplexFunction:
    """Sample f- on a grid aligned with ``omega_axis`` and fine enough for ``tau_axis``.

    The Riemann sum in the transform is periodic in tau with period ``pi / h``;
    the step keeps that period at least four times the delay content.
    """
    tau = np.asarray(tau_axis, dtype=float)
    reach = max(float(np.max(np.abs(tau))), delay_support(beams, device))
    max_step = math.pi / (4 * reach)
    grid = aligned_omega_grid(omega_axis, f_minus_support(beams, device), max_step)
    return f_minus_route(beams, device, grid, route)


def scenario_wigner(
    beams: Sequence[BeamSpec], device: DeviceParams, tau_axis, omega_axis, route: str = "finite"
) -> RealGrid2D:
    f = sample_f_minus_for_wigner(beams, device, tau_axis, omega_axis, route)
    return wigner_transform(f, tau_axis, omega_axis)


# --- metrics ---------------------------------------------------------------


def _half_width(values: np.ndarray, index: int, step: float) -> float:
    """1/e half-width of a peak along one axis (mean of both sides that close)."""
    peak = values[index]
    level = peak / math.e
    sides = []
    for direction in (-1, 1):
        k = index
        while 0 <= k + direction < values.size and values[k + direction] > level:
            k += direction
        if not 0 <= k + direction < values.size:
            continue
        a, b = values[k], values[k + direction]
        frac = (a - level) / (a - b) if a != b else 0.0
        sides.append((abs(k - index) + frac) * step)
    if not sides:
        return (values.size - 1) * step / 2
    return float(np.mean(sides))


def _dominant_period(row: np.ndarray, step: float, pad_factor: int = 8) -> Optional[float]:
    """Period of the strongest non-DC spectral peak of ``row``; None if there is none."""
    n_pad = 1 << (max(row.size * pad_factor, 16) - 1).bit_length()
    spectrum = np.abs(np.fft.rfft(row, n_pad))
    if spectrum.size < 4 or spectrum.max() == 0:
        return None
    interior = spectrum[1:-1]
    is_peak = (interior > spectrum[:-2]) & (interior >= spectrum[2:])
    is_peak &= interior > 1e-3 * spectrum.max()
    candidates = np.nonzero(is_peak)[0] + 1
    if candidates.size == 0:
        return None
    k = candidates[np.argmax(spectrum[candidates])]
    y0, y1, y2 = np.log(spectrum[k - 1 : k + 2])
    denom = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
    frequency_bins = k + shift
    return float(n_pad * step / frequency_bins)


def wigner_metrics(W: RealGrid2D, smoothing: Optional[Tuple[float, float]] = None) -> WignerMetrics:
    """Peaks, widths, negativity and fringe periods of a Wigner grid.

    Parameters
    ----------
    W : RealGrid2D
    smoothing : (sigma_tau, sigma_omega), optional
        Gaussian smoothing applied before peak search. Passing the coherent-state
        widths (``1/dw``, ``dw/2``) turns W into its Husimi function, so peak search
        finds the lobes and ignores interference fringes, which are
        exponentially suppressed. Widths are always measured on the raw grid.

    Raises
    ------
    NoPeaks
        If the searched field has no positive maximum.
    """
    values = np.nan_to_num(W.values, nan=0.0)
    search = values
    if smoothing is not None:
        sigma = (smoothing[0] / W.d_tau, smoothing[1] / W.d_omega)
        search = ndimage.gaussian_filter(values, sigma, mode="constant", truncate=6.0)
    top = float(search.max())
    if top <= 0:
        raise NoPeaks("Wigner grid has no positive maximum")
    local_max = ndimage.maximum_filter(search, size=3, mode="constant", cval=-np.inf) == search
    peaks = np.argwhere(local_max & (search > 0.5 * top))
    order = np.argsort(-search[tuple(peaks.T)], kind="stable")
    peaks = peaks[order]

    locations, widths = [], []
    for i, j in peaks:
        locations.append(PhaseSpacePoint(float(W.tau_axis[i]), float(W.omega_axis[j])))
        widths.append((_half_width(values[:, j], i, W.d_tau), _half_width(values[i, :], j, W.d_omega)))

    negativity = float(-np.minimum(values, 0).sum() * W.d_tau * W.d_omega)
    return WignerMetrics(
        peak_locations=locations,
        peak_widths=widths,
        min_value=float(values.min()),
        negativity_volume=negativity,
        fringe_period_omega=_dominant_period(values[values.shape[0] // 2, :], W.d_omega),
        fringe_period_tau=_dominant_period(values[:, values.shape[1] // 2], W.d_tau),
    )
