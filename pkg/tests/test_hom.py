import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdc_toolbox.biphoton import assemble_jsa, spectral_width
from spdc_toolbox.core import PhaseSpacePoint, centered_axis
from spdc_toolbox.hom import (
    DELAY_SCALE,
    SHIFT_SCALE,
    BeamLeavesDevice,
    HomSetting,
    PointOffGrid,
    ShiftExceedsGrid,
    calibrate,
    coincidence,
    coincidence_from_wigner,
    hom_coincidence,
    pump_engineered_coincidence,
    resolve_threads,
    tomography_scan,
)
from spdc_toolbox.pump import BeamSpec, CavityPhase, PumpPulse
from spdc_toolbox.wigner import RealGrid2D, wigner_gaussian_oracle, wigner_multibeam_oracle


@pytest.fixture(scope="module")
def fig1_jsa(fig1):
    return assemble_jsa(fig1)


def width(scenario):
    return spectral_width(scenario.beams[0], scenario.device)


def test_symmetric_state_bunches_completely(fig1_jsa):
    assert hom_coincidence(fig1_jsa) <= 1e-6


def test_long_delay_makes_photons_distinguishable(fig1, fig1_jsa):
    p = hom_coincidence(fig1_jsa, HomSetting(arm_delay=10 / width(fig1)))
    assert abs(p - 0.5) <= 1e-3


def test_calibration_is_close_to_ideal(fig1):
    cal = calibrate(fig1)
    assert cal.gain == pytest.approx(1.0, abs=1e-6)
    assert abs(cal.tau_offset) < 1e-6 / width(fig1)
    assert abs(cal.omega_offset) < 1e-6 * width(fig1)
    assert cal.affine_gain == pytest.approx(-2 / cal.gain)
    assert cal.to_wigner(cal.coincidence(0.37)) == pytest.approx(0.37)


def test_coincidence_surface_is_affine_image_of_wigner(fig1, fig1_jsa):
    cal = calibrate(fig1)
    beam = fig1.beams[0]
    dw = width(fig1)
    delays = np.linspace(-3 / dw, 3 / dw, 7)
    shifts = fig1_jsa.step * np.arange(-3, 4) * 3
    P = np.array([[hom_coincidence(fig1_jsa, HomSetting(a, s)) for s in shifts] for a in delays])
    tau_args, omega_args = cal.argument(delays, shifts)
    oracle = wigner_gaussian_oracle(beam, fig1.device, tau_args[::-1], omega_args).values[::-1]
    assert np.max(np.abs(P - cal.coincidence(oracle))) <= 1e-6


def test_sub_bin_frequency_shift(fig1, fig1_jsa):
    cal = calibrate(fig1)
    shift = 0.37 * width(fig1)
    p = hom_coincidence(fig1_jsa, HomSetting(0.0, shift))
    t, o = cal.argument(0.0, shift)
    w = wigner_gaussian_oracle(fig1.beams[0], fig1.device, [float(t), float(t) + 1e-15], [float(o), float(o) + 1.0])
    assert p == pytest.approx(float(cal.coincidence(w.values[0, 0])), abs=1e-8)


def test_pump_phase_table_does_not_change_coincidences(cat):
    w0 = cat.device.pump_center_omega
    table = CavityPhase(w0 + np.linspace(-5e12, 5e12, 101), 3 * np.sin(np.linspace(-4, 4, 101)) ** 2)
    phased = replace(cat, pulse=PumpPulse(775e-9, 3.2e-12, table))
    plain_jsa, phased_jsa = assemble_jsa(cat), assemble_jsa(phased)
    for setting in (HomSetting(), HomSetting(2e-12, 0.0), HomSetting(-4e-12, 3 * plain_jsa.step)):
        assert hom_coincidence(plain_jsa, setting) == pytest.approx(hom_coincidence(phased_jsa, setting), abs=1e-10)


def test_routes_agree_for_equal_waists(fig1, cat):
    for scenario in (fig1, cat):
        jsa = assemble_jsa(scenario)
        for delay, shift in [(0.0, 0.0), (3e-12, 0.0), (0.0, 8 * jsa.step), (-2e-12, -5 * jsa.step)]:
            a = hom_coincidence(jsa, HomSetting(delay, shift))
            b = pump_engineered_coincidence(scenario, HomSetting(delay, shift, "pump_engineered"))
            assert a == pytest.approx(b, abs=1e-6)


def test_coincidence_dispatch(fig1):
    s = HomSetting(1e-12, 0.0, "pump_engineered")
    assert coincidence(fig1, s) == pump_engineered_coincidence(fig1, s)
    with pytest.raises(ValueError):
        hom_coincidence(assemble_jsa(fig1), s)


def test_coincidence_from_wigner_values(fig1, fig1_jsa):
    tau, omega = centered_axis(4e-12, 64), centered_axis(2e12, 64)
    zero = RealGrid2D(tau, omega, np.zeros((64, 64)))
    assert coincidence_from_wigner(zero, PhaseSpacePoint(0.0, 0.0), 1.0).probability == 0.5
    cal = calibrate(fig1)
    W = wigner_gaussian_oracle(fig1.beams[0], fig1.device, tau, omega)
    pred = coincidence_from_wigner(W, PhaseSpacePoint(0.0, 0.0), cal.gain)
    assert pred.probability == pytest.approx(hom_coincidence(fig1_jsa), abs=1e-8)
    off_peak = coincidence_from_wigner(W, PhaseSpacePoint(5e-13, 3e11), cal.gain)
    assert not off_peak.clamped and 0.0 < off_peak.probability < 0.5
    assert coincidence_from_wigner(W, PhaseSpacePoint(0.0, 0.0), 10.0).clamped
    with pytest.raises(PointOffGrid):
        coincidence_from_wigner(W, PhaseSpacePoint(1e-11, 0.0), 1.0)


def test_negative_wigner_means_antibunching(cat):
    odd = replace(cat, beams=(cat.beams[0], replace(cat.beams[1], weight=-1.0)))
    tau, omega = centered_axis(2e-12, 16), centered_axis(1e11, 16)
    W = wigner_multibeam_oracle(odd.beams, odd.device, tau, omega)
    cal = calibrate(odd)
    pred = coincidence_from_wigner(W, PhaseSpacePoint(0.0, 0.0), cal.gain)
    assert W.values[8, 8] < 0 and pred.probability > 0.5
    assert hom_coincidence(assemble_jsa(odd)) == pytest.approx(pred.probability, abs=1e-6)


def test_shift_off_grid_is_rejected(fig1_jsa):
    with pytest.raises(ShiftExceedsGrid):
        hom_coincidence(fig1_jsa, HomSetting(0.0, 0.9 * fig1_jsa.omega_s_axis.size * fig1_jsa.step))


def test_pump_route_reports_beams_leaving_device(fig1):
    with pytest.raises(BeamLeavesDevice):
        pump_engineered_coincidence(fig1, HomSetting(50e-12, 0.0, "pump_engineered"))


@settings(max_examples=30, deadline=None)
@given(st.floats(-2e-11, 2e-11), st.integers(-10, 10))
def test_probability_stays_in_unit_interval(fig1_jsa, delay, bins):
    p = hom_coincidence(fig1_jsa, HomSetting(delay, bins * fig1_jsa.step))
    assert 0.0 <= p <= 1.0


def test_argument_map_constants():
    assert (DELAY_SCALE, SHIFT_SCALE) == (-0.5, 1.0)


def test_gaussian_tomography_round_trip(fig1):
    dw = width(fig1)
    tau, omega = np.linspace(-3 / dw, 3 / dw, 21), np.linspace(-3 * dw, 3 * dw, 21)
    result = tomography_scan(fig1, tau, omega, threads=1)
    assert result.valid.all()
    assert result.max_abs_error <= 1e-6 * result.peak
    assert result.affine_gain == pytest.approx(-2.0, abs=1e-5)


def test_tomography_marks_unreachable_targets_as_gaps(fig1):
    tau = np.linspace(-12e-12, 12e-12, 5)
    result = tomography_scan(fig1, tau, np.array([0.0, 1e11]))
    assert not result.valid[0].any() and not result.valid[-1].any()
    assert result.valid[2].all()
    assert np.isnan(result.reconstructed.values[0]).all()
    assert np.isfinite(result.max_abs_error)


def test_tomography_is_thread_count_independent(cat):
    tau, omega = np.linspace(-8e-12, 8e-12, 5), np.linspace(-1e12, 1e12, 4)
    one = tomography_scan(cat, tau, omega, threads=1)
    four = tomography_scan(cat, tau, omega, threads=4)
    assert np.array_equal(one.reconstructed.values, four.reconstructed.values)


def test_thread_count_from_environment(monkeypatch):
    monkeypatch.delenv("SPDC_THREADS", raising=False)
    assert resolve_threads() == 1
    monkeypatch.setenv("SPDC_THREADS", "6")
    assert resolve_threads() == 6
    assert resolve_threads(3) == 3
    monkeypatch.setenv("SPDC_THREADS", "0")
    with pytest.raises(ValueError):
        resolve_threads()


def test_setting_validation():
    with pytest.raises(ValueError):
        HomSetting(math.inf, 0.0)
    with pytest.raises(ValueError):
        HomSetting(0.0, 0.0, "teleport")
