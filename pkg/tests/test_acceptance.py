"""Acceptance criteria 1-9.

Each test records one ``criterion N: PASS|FAIL`` line; the lines are echoed
in the terminal summary (see conftest.py) and printed directly when this file
is run as a script.
"""

import math
import os
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

import frozen
from conftest import GOLDEN, SCENARIOS
from fuzzing import run_fuzz
from spdc_toolbox.biphoton import assemble_jsa, center_detuning, component_overlap, f_minus_route, spectral_width
from spdc_toolbox.configio import format_document, load_scenario, parse_document
from spdc_toolbox.core import angle_to_detuning, angle_to_detuning_exact, arcmin_to_rad, centered_axis, position_to_delay
from spdc_toolbox.hom import DELAY_SCALE, SHIFT_SCALE, HomSetting, calibrate, hom_coincidence, scan_jsa_grid, tomography_scan
from spdc_toolbox.pump import BeamSpec, CavityPhase, PumpPulse
from spdc_toolbox.wigner import (
    RealGrid2D,
    _dominant_period,
    imaginary_residue,
    marginal_over_tau,
    sample_f_minus_for_wigner,
    scenario_wigner,
    total_integral,
    wigner_metrics,
    wigner_multibeam_oracle,
    wigner_transform,
)

RESULTS = []


def record(number, checks, elapsed):
    """Store and print the verdict; ``checks`` maps a description to (ok, measured)."""
    ok = all(passed for passed, _ in checks.values())
    detail = "; ".join(f"{name} {'ok' if passed else 'FAILED'} ({value})" for name, (passed, value) in checks.items())
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} [{elapsed:.1f} s] {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def sup_rel(a, b):
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def husimi(beam, device):
    dw = spectral_width(beam, device)
    return 1 / dw, dw / 2


def test_criterion_1_finite_route_matches_closed_form(fig1):
    start = time.perf_counter()
    beam = fig1.beams[0]
    dw, mu = spectral_width(beam, fig1.device), center_detuning(beam, fig1.device)
    omega = np.linspace(mu - 4 * dw, mu + 4 * dw, 801)
    err = sup_rel(f_minus_route([beam], fig1.device, omega, "finite").values, f_minus_route([beam], fig1.device, omega, "gaussian").values)
    elapsed = time.perf_counter() - start
    record(1, {"sup-norm error <= 1e-6": (err <= 1e-6, f"{err:.2e}"), "runtime < 1 s": (elapsed < 1, f"{elapsed:.2f} s")}, elapsed)


def test_criterion_2_wigner_realness_and_marginals(fig1, cat, compass):
    start = time.perf_counter()
    w = fig1.beams[0].waist_wp
    configs = {
        "single": (fig1.device, [BeamSpec(0.0, 0.0, w)]),
        "shifted": (fig1.device, [BeamSpec(3e-4, 0.0, w)]),
        "tilted": (fig1.device, [BeamSpec(0.0, arcmin_to_rad(6.0), w)]),
        "cat": (cat.device, list(cat.beams)),
        "compass": (compass.device, list(compass.beams)),
    }
    tau, omega = centered_axis(14e-12, 256), centered_axis(6e12, 128)
    worst = {"residue": 0.0, "marginal": 0.0, "total": 0.0}
    for device, beams in configs.values():
        f = sample_f_minus_for_wigner(beams, device, tau, omega, "finite")
        W = wigner_transform(f, tau, omega)
        expected = math.pi * np.interp(omega, f.axis, np.abs(f.values) ** 2)
        worst["residue"] = max(worst["residue"], imaginary_residue(f, tau, omega))
        worst["marginal"] = max(worst["marginal"], sup_rel(marginal_over_tau(W), expected))
        worst["total"] = max(worst["total"], abs(total_integral(W) / math.pi - 1))
    elapsed = time.perf_counter() - start
    record(
        2,
        {
            "imaginary residue <= 1e-10 max|W|": (worst["residue"] <= 1e-10, f"{worst['residue']:.1e}"),
            "tau-marginal = pi|f|^2 to 1e-6": (worst["marginal"] <= 1e-6, f"{worst['marginal']:.1e}"),
            "total integral = pi to 1e-6": (worst["total"] <= 1e-6, f"{worst['total']:.1e}"),
            "runtime < 30 s": (elapsed < 30, f"{elapsed:.1f} s"),
        },
        elapsed,
    )


def test_criterion_3_displacement_covariance(fig1):
    start = time.perf_counter()
    device, w = fig1.device, fig1.beams[0].waist_wp
    tau, omega = centered_axis(16e-12, 256), centered_axis(4e12, 256)
    base = scenario_wigner([BeamSpec(0.0, 0.0, w)], device, tau, omega).argmax()
    moved = scenario_wigner([BeamSpec(3e-4, 0.0, w)], device, tau, omega).argmax()
    tilted = scenario_wigner([BeamSpec(0.0, arcmin_to_rad(5.0), w)], device, tau, omega).argmax()
    tau_miss = abs(moved.tau - base.tau - position_to_delay(3e-4, device)) / (tau[1] - tau[0])
    omega_miss = abs(tilted.omega_minus - base.omega_minus - angle_to_detuning_exact(arcmin_to_rad(5.0), device)) / (omega[1] - omega[0])
    record(
        3,
        {
            "0.3 mm shift within one tau cell": (tau_miss <= 1, f"{tau_miss:.2f} cells"),
            "5 arcmin tilt within one Omega cell": (omega_miss <= 1, f"{omega_miss:.2f} cells"),
        },
        time.perf_counter() - start,
    )


def test_criterion_4_cat_state(cat):
    start = time.perf_counter()
    a, b = cat.beams
    overlap = component_overlap(a, b, cat.device)
    tau, omega = centered_axis(12e-12, 256), centered_axis(5e12, 256)
    W = scenario_wigner(cat.beams, cat.device, tau, omega)
    lobes = len(wigner_metrics(W, smoothing=husimi(a, cat.device)).peak_locations)
    fine = centered_axis(3e12, 4096)
    row = scenario_wigner(cat.beams, cat.device, [0.0, 1e-13], fine).values[0]
    period = _dominant_period(row, fine[1] - fine[0])
    period_err = abs(period / frozen.CAT_FRINGE_PERIOD - 1)
    central = row[np.abs(fine) < frozen.CAT_FRINGE_PERIOD]
    record(
        4,
        {
            "overlap < 0.05": (overlap < 0.05, f"{overlap:.2e}"),
            "two lobes": (lobes == 2, lobes),
            "negative central fringes": (central.min() < 0, f"min {central.min():.3f}"),
            "fringe period within 2% of oracle": (period_err <= 0.02, f"{period_err:.1e}"),
        },
        time.perf_counter() - start,
    )


def test_criterion_5_compass_state(compass):
    start = time.perf_counter()
    tau, omega = centered_axis(12e-12, 256), centered_axis(5e12, 256)
    W = scenario_wigner(compass.beams, compass.device, tau, omega)
    oracle = wigner_multibeam_oracle(compass.beams, compass.device, tau, omega)
    err = sup_rel(W.values, oracle.values)
    lobes = len(wigner_metrics(W, smoothing=husimi(compass.beams[0], compass.device)).peak_locations)
    dw = spectral_width(compass.beams[0], compass.device)
    patch = W.values[np.ix_(np.abs(tau) < 1 / dw, np.abs(omega) < dw)]
    elapsed = time.perf_counter() - start
    record(
        5,
        {
            "four lobes": (lobes == 4, lobes),
            "central interference patch": (patch.min() < -0.1 and patch.max() > 0.1, f"{patch.min():.2f}..{patch.max():.2f}"),
            "transform vs oracle <= 1e-6": (err <= 1e-6, f"{err:.1e}"),
            "runtime < 60 s": (elapsed < 60, f"{elapsed:.1f} s"),
        },
        elapsed,
    )


def test_criterion_6_hom_oracle(fig1, cat):
    start = time.perf_counter()
    halfspan, points = scan_jsa_grid(cat.beams, cat.device, cat.pulse, 20e-12, 3e12)
    scan = replace(cat, grids=replace(cat.grids, jsa_halfspan=halfspan, jsa_points=points))
    cal = calibrate(scan)
    jsa = assemble_jsa(scan)
    h = jsa.step
    delays = np.linspace(-20e-12, 20e-12, 21)
    shifts = h * max(1, round(2e11 / h)) * np.arange(-10, 11)
    P = np.array([[hom_coincidence(jsa, HomSetting(d, s)) for s in shifts] for d in delays])
    tau_args, omega_args = cal.argument(delays, shifts)
    W = wigner_multibeam_oracle(scan.beams, scan.device, tau_args[::-1], omega_args).values[::-1]
    surface_err = float(np.max(np.abs(P - cal.coincidence(W))))

    w0 = cat.device.pump_center_omega
    table = CavityPhase(w0 + np.linspace(-5e12, 5e12, 101), 4 * np.cos(np.linspace(0, 9, 101)) ** 3)
    phased = assemble_jsa(replace(scan, pulse=PumpPulse(cat.pulse.center_wavelength, cat.pulse.duration_tau_p, table)))
    settings = [HomSetting(d, s) for d in delays[::5] for s in shifts[::5]]
    phase_err = max(abs(hom_coincidence(jsa, s) - hom_coincidence(phased, s)) for s in settings)

    fig1_jsa = assemble_jsa(fig1)
    p0 = hom_coincidence(fig1_jsa)
    p_far = hom_coincidence(fig1_jsa, HomSetting(10 / spectral_width(fig1.beams[0], fig1.device)))
    record(
        6,
        {
            "21x21 surface vs affine oracle <= 1e-6": (surface_err <= 1e-6, f"{surface_err:.1e}"),
            "pump phase invariance <= 1e-10": (phase_err <= 1e-10, f"{phase_err:.1e}"),
            "P(0,0) <= 1e-6": (p0 <= 1e-6, f"{p0:.1e}"),
            "P at 10/dw = 1/2 +- 1e-3": (abs(p_far - 0.5) <= 1e-3, f"{p_far:.6f}"),
        },
        time.perf_counter() - start,
    )


def test_criterion_7_tomography_round_trip(compass):
    start = time.perf_counter()
    g = compass.grids
    result = tomography_scan(compass, centered_axis(g.tau_halfspan, 41), centered_axis(g.big_omega_halfspan, 41), threads=os.cpu_count())
    rms, worst = result.rms_error / result.peak, result.max_abs_error / result.peak

    step = angle_to_detuning(1e-4, compass.device)
    omega = step * np.arange(-20, 21)
    line = tomography_scan(compass, np.array([0.0, 1e-13]), omega, threads=os.cpu_count(), calibration=result.calibration)
    row = line.reconstructed.values[0]
    samples = frozen.COMPASS_FRINGE_PERIOD / step
    sign_changes = int(np.count_nonzero(np.diff(np.sign(row)) != 0))
    measured = _dominant_period(row, step)
    period_err = abs(measured / frozen.COMPASS_FRINGE_PERIOD - 1)
    elapsed = time.perf_counter() - start
    record(
        7,
        {
            "rms <= 1e-4 peak": (rms <= 1e-4, f"{rms:.1e}"),
            "max <= 1e-3 peak": (worst <= 1e-3, f"{worst:.1e}"),
            "all targets reachable": (bool(result.valid.all()), int(result.valid.sum())),
            ">= 6 samples per fringe at 100 urad": (samples >= 6, f"{samples:.2f}"),
            "fringes resolved in 100 urad scan": (sign_changes >= 4 and period_err <= 0.1, f"{sign_changes} sign changes, period error {period_err:.1e}"),
            "runtime < 5 min": (elapsed < 300, f"{elapsed:.0f} s"),
        },
        elapsed,
    )


def test_criterion_8_parser_robustness():
    start = time.perf_counter()
    counts, crashes = run_fuzz(10_000)
    mismatched, checked = [], 0
    files = sorted(GOLDEN.glob("*.scn"))
    for path in files:
        kind, *detail = path.with_suffix(".expect").read_text().split()
        if kind == "syntax":
            continue
        checked += 1
        expected = (GOLDEN / detail[0]).read_bytes() if kind == "canonical" else path.read_bytes()
        if format_document(parse_document(path.read_bytes())).encode() != expected:
            mismatched.append(path.name)
    record(
        8,
        {
            "10000 fuzzed inputs, no crash": (not crashes and sum(counts.values()) == 10_000, f"{len(crashes)} crashes"),
            "golden corpus >= 12 files": (len(files) >= 12, len(files)),
            "printer round trip byte-exact": (not mismatched, f"{checked - len(mismatched)}/{checked}"),
        },
        time.perf_counter() - start,
    )


def test_criterion_9_thread_count_does_not_change_output(tmp_path):
    start = time.perf_counter()
    outputs = {}
    for threads in ("1", "8"):
        prefix = tmp_path / f"t{threads}"
        env = dict(os.environ, SPDC_THREADS=threads)
        cmd = [sys.executable, "-m", "spdc_toolbox", "tomography", "--config", str(SCENARIOS / "compass.scn"), "--out-prefix", str(prefix)]
        proc = subprocess.run(cmd, env=env, capture_output=True)
        outputs[threads] = (proc.returncode, [(prefix.parent / f"{prefix.name}{s}").read_bytes() for s in ("_reconstructed.csv", "_direct.csv", "_meta.txt")])
    same = outputs["1"] == outputs["8"]
    record(
        9,
        {
            "both runs exit 0": (outputs["1"][0] == 0 and outputs["8"][0] == 0, [outputs[t][0] for t in outputs]),
            "files byte-identical": (same, "identical" if same else "differ"),
        },
        time.perf_counter() - start,
    )


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
