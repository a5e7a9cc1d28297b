"""Command-line entry point.

Exit codes: 0 success, 1 usage, 2 scenario file, 3 numerical contract, 4 I/O.
Results go to files or stdout; diagnostics go to stderr. Grid flags override
the scenario's ``[grid]`` values.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .biphoton import ROUTES, assemble_jsa, beam_delay, center_detuning, f_minus_route, spectral_width
from .configio import (
    CavityPhaseUnreadable,
    ConfigError,
    RejectedValue,
    format_metadata,
    load_scenario,
    write_complex_function,
    write_jsa,
    write_real_grid,
    write_tomography,
)
from .core import NumericalContractError, centered_axis, detuning_to_lambda
from .hom import HomSetting, calibrate, coincidence, resolve_threads, tomography_scan
from .hom import ROUTES as HOM_ROUTES
from .wigner import RealGrid2D, scenario_wigner

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4


@dataclass
class CommandOutcome:
    exit_code: int
    messages: List[str] = field(default_factory=list)
    stdout: List[str] = field(default_factory=list)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")

    def exit(self, status=0, message=None):
        # --help lands here; surface it as output rather than leaving the process
        raise _HelpRequested(self.format_help())


class _HelpRequested(Exception):
    pass


def _positive_int(text):
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError(f"expected an integer >= 2, got {text!r}")
    return value


def _positive_float(text):
    value = float(text)
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


def _finite_float(text):
    value = float(text)
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spdc-toolbox", description="Biphoton states, Wigner functions and HOM tomography.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, route=True):
        p.add_argument("--config", required=True, help="scenario file")
        if route:
            p.add_argument("--route", choices=ROUTES, default="finite", help="f- computation route")

    for name, help_text in (("jsa", "joint spectral amplitude CSV"), ("fminus", "antidiagonal amplitude f- CSV")):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--out", required=True)
        p.add_argument("--points", type=_positive_int, help="overrides the grid point count")
        p.add_argument("--halfspan-rad-per-ps", type=_positive_float, help="overrides the grid half-span")

    p = sub.add_parser("wigner", help="Wigner function CSV")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--lambda-units", action="store_true", help="write the frequency axis as a wavelength offset (m)")
    _wigner_grid_flags(p)

    p = sub.add_parser("hom", help="one coincidence probability")
    common(p)
    p.add_argument("--delay-ps", type=_finite_float, default=0.0)
    p.add_argument("--shift-rad-s", type=_finite_float, default=0.0)
    p.add_argument("--setup", choices=HOM_ROUTES, default="interferometer", help="where the displacement is applied")

    p = sub.add_parser("tomography", help="pump-displacement Wigner reconstruction")
    common(p)
    p.add_argument("--tau-points", type=_positive_int, default=41)
    p.add_argument("--omega-points", type=_positive_int, default=41)
    p.add_argument("--tau-halfspan-ps", type=_positive_float)
    p.add_argument("--omega-halfspan-rad-per-ps", type=_positive_float)
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser("validate", help="check a scenario and print derived quantities")
    common(p, route=False)
    return parser


def _wigner_grid_flags(p):
    p.add_argument("--tau-points", type=_positive_int)
    p.add_argument("--omega-points", type=_positive_int)
    p.add_argument("--tau-halfspan-ps", type=_positive_float)
    p.add_argument("--omega-halfspan-rad-per-ps", type=_positive_float)


def _override(value, fallback, scale=None):
    if value is None:
        return fallback
    return value if scale is None else value * scale


def _wigner_axes(args, grids):
    tau_h = _override(args.tau_halfspan_ps, grids.tau_halfspan, 1e-12)
    om_h = _override(args.omega_halfspan_rad_per_ps, grids.big_omega_halfspan, 1e12)
    tau_n = _override(args.tau_points, grids.tau_points)
    om_n = _override(args.omega_points, grids.big_omega_points)
    return centered_axis(tau_h, tau_n), centered_axis(om_h, om_n)


def _check_gaussian_route(args, scenario):
    if getattr(args, "route", None) == "gaussian" and len(scenario.beams) != 1:
        raise UsageError(f"--route gaussian needs exactly one [beam]; {args.config} has {len(scenario.beams)}")


def _cmd_jsa(args, scenario, out, log):
    grids = scenario.grids
    points = _override(args.points, grids.jsa_points)
    if points % 2:
        raise UsageError(f"--points must be even for the jsa grid, got {points}")
    halfspan = _override(args.halfspan_rad_per_ps, grids.jsa_halfspan, 1e12)
    try:
        scenario = replace(scenario, grids=replace(grids, jsa_points=points, jsa_halfspan=halfspan))
    except ValueError as exc:
        raise UsageError(f"--points: {exc}") from None
    jsa = assemble_jsa(scenario, args.route)
    write_jsa(jsa, args.out)
    log.append(f"wrote {args.out}")


def _cmd_fminus(args, scenario, out, log):
    grids = scenario.grids
    points = _override(args.points, grids.omega_minus_points)
    halfspan = _override(args.halfspan_rad_per_ps, grids.omega_minus_halfspan, 1e12)
    f = f_minus_route(scenario.beams, scenario.device, centered_axis(halfspan, points), args.route)
    write_complex_function(f, args.out)
    log.append(f"wrote {args.out}")


def _cmd_wigner(args, scenario, out, log):
    tau, omega = _wigner_axes(args, scenario.grids)
    W = scenario_wigner(scenario.beams, scenario.device, tau, omega, args.route)
    if args.lambda_units:
        W = RealGrid2D(W.tau_axis, detuning_to_lambda(W.omega_axis, scenario.device), W.values, omega_name="delta_lambda_m")
    write_real_grid(W, args.out)
    log.append(f"wrote {args.out}")


def _cmd_hom(args, scenario, out, log):
    setting = HomSetting(args.delay_ps * 1e-12, args.shift_rad_s, args.setup)
    p = coincidence(scenario, setting, args.route)
    cal = calibrate(scenario, args.route)
    tau_arg, omega_arg = cal.argument(setting.arm_delay, setting.arm_shift)
    out.append(
        format_metadata(
            [
                ("coincidence", p),
                ("wigner_value", float(cal.to_wigner(p))),
                ("wigner_tau_s", tau_arg),
                ("wigner_omega_rad_s", omega_arg),
            ]
        ).rstrip("\n")
    )


def _cmd_tomography(args, scenario, out, log):
    grids = scenario.grids
    tau_h = _override(args.tau_halfspan_ps, grids.tau_halfspan, 1e-12)
    om_h = _override(args.omega_halfspan_rad_per_ps, grids.big_omega_halfspan, 1e12)
    try:
        threads = resolve_threads()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = tomography_scan(
        scenario,
        centered_axis(tau_h, args.tau_points),
        centered_axis(om_h, args.omega_points),
        args.route,
        threads=threads,
    )
    if not np.any(result.valid):
        raise NumericalContractError("every tomography target moves a beam off the device; shrink the target ranges")
    for path in write_tomography(result, args.out_prefix):
        log.append(f"wrote {path}")
    out.append(f"rms_error = {result.rms_error!r}")
    out.append(f"max_abs_error = {result.max_abs_error!r}")


def _cmd_validate(args, scenario, out, log):
    device = scenario.device
    items = [
        ("beams", len(scenario.beams)),
        ("k_deg_rad_per_m", device.k_deg),
        ("pump_omega_rad_s", device.pump_center_omega),
    ]
    for i, beam in enumerate(scenario.beams, start=1):
        items += [
            (f"beam{i}_delta_omega_rad_s", spectral_width(beam, device)),
            (f"beam{i}_tau0_s", beam_delay(beam, device)),
            (f"beam{i}_omega0_rad_s", center_detuning(beam, device)),
        ]
    g = scenario.grids
    items += [
        ("grid_omega_minus_halfspan_rad_s", g.omega_minus_halfspan),
        ("grid_omega_minus_points", g.omega_minus_points),
        ("grid_tau_halfspan_s", g.tau_halfspan),
        ("grid_tau_points", g.tau_points),
        ("grid_big_omega_halfspan_rad_s", g.big_omega_halfspan),
        ("grid_big_omega_points", g.big_omega_points),
        ("grid_jsa_halfspan_rad_s", g.jsa_halfspan),
        ("grid_jsa_points", g.jsa_points),
    ]
    out.append(format_metadata(items).rstrip("\n"))


COMMANDS = {
    "jsa": _cmd_jsa,
    "fminus": _cmd_fminus,
    "wigner": _cmd_wigner,
    "hom": _cmd_hom,
    "tomography": _cmd_tomography,
    "validate": _cmd_validate,
}


def run(argv: Optional[Sequence[str]] = None) -> CommandOutcome:
    """Execute one command without touching ``sys.exit``."""
    argv = list(sys.argv[1:] if argv is None else argv)
    out: List[str] = []
    log: List[str] = []
    try:
        args = build_parser().parse_args(argv)
    except _HelpRequested as help_text:
        return CommandOutcome(EXIT_OK, [], [str(help_text)])
    except UsageError as exc:
        return CommandOutcome(EXIT_USAGE, [str(exc)])
    try:
        scenario = load_scenario(args.config)
        _check_gaussian_route(args, scenario)
        COMMANDS[args.command](args, scenario, out, log)
    except UsageError as exc:
        return CommandOutcome(EXIT_USAGE, [str(exc)])
    except CavityPhaseUnreadable as exc:
        return CommandOutcome(EXIT_IO, [f"{args.config}: {exc}"])
    except ConfigError as exc:
        return CommandOutcome(EXIT_CONFIG, [f"{args.config}: {exc}"])
    except (NumericalContractError, RejectedValue) as exc:
        return CommandOutcome(EXIT_NUMERIC, [f"{args.command}: {type(exc).__name__}: {exc}"])
    except OSError as exc:
        name = exc.filename or args.config
        return CommandOutcome(EXIT_IO, [f"{name}: {exc.strerror or exc}"])
    return CommandOutcome(EXIT_OK, log, out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    outcome = run(argv)
    for line in outcome.stdout:
        print(line)
    for line in outcome.messages:
        print(line, file=sys.stderr)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
