"""Scenario files and data files.

The scenario language is line oriented::

    # comment
    [device]
    length_mm = 2
    [beam]
    waist_um = 200

Parsing runs in two layers. :func:`parse_document` checks the grammar only and
keeps every entry, so any syntactically valid file can be reprinted by
:func:`format_document`. :func:`parse_scenario` then validates keys and
values and converts display units to SI.
"""

from __future__ import annotations

import cmath
import math
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .biphoton import center_detuning, spectral_width
from .core import (
    DEFAULT_GROUP_VELOCITY,
    SPEED_OF_LIGHT,
    DeviceParams,
    arcmin_to_rad,
)
from .pump import BeamSpec, CavityPhase, PumpPulse, SampledComplexFunction
from .wigner import RealGrid2D

MIN_POINTS = 16
MAX_POINTS = 65536
DEFAULT_OMEGA_MINUS_POINTS = 1024
DEFAULT_WIGNER_POINTS = 256

SECTIONS = ("device", "pulse", "beam", "grid")
SINGLE_SECTIONS = ("device", "pulse", "grid")

Value = Union[int, float, str]


# --- errors ----------------------------------------------------------------


class ConfigError(ValueError):
    """Base class of every scenario-file failure."""


class ConfigSyntaxError(ConfigError):
    def __init__(self, line: int, column: int, message: str, text: str = ""):
        self.line = line
        self.column = column
        self.message = message
        self.text = text
        super().__init__(f"line {line}, column {column}: {message}: {text!r}")


class ConfigSemanticError(ConfigError):
    def __init__(self, key: str, message: str, line: Optional[int] = None, text: str = ""):
        self.key = key
        self.message = message
        self.line = line
        self.text = text
        where = f" (line {line}: {text!r})" if line is not None else ""
        super().__init__(f"{key}: {message}{where}")


class CavityPhaseUnreadable(ConfigError):
    """The cavity phase file named in ``[pulse]`` could not be opened."""

    def __init__(self, path: str, reason: str):
        self.path = path
        self.key = "cavity_phase_file"
        super().__init__(f"cavity_phase_file {path!r}: {reason}")


class RejectedValue(ValueError):
    """A value that the output formats refuse to carry (NaN, infinity)."""


class IoError(OSError):
    pass


# --- document layer --------------------------------------------------------


@dataclass(frozen=True)
class Entry:
    key: str
    value: Value
    line: int
    text: str


@dataclass
class Section:
    name: str
    line: int
    entries: List[Entry] = field(default_factory=list)


@dataclass
class Document:
    sections: List[Section] = field(default_factory=list)


_WS = "[ \t]*"
_HEADER = re.compile(rf"{_WS}\[{_WS}([^\]]*?){_WS}\]{_WS}$")
_ENTRY = re.compile(rf"{_WS}([^ \t=]*){_WS}=(.*)$")
_KEY = re.compile(r"[a-z_][a-z0-9_]*")
_INTEGER = re.compile(r"[+-]?[0-9]{1,18}")
_FLOAT = re.compile(r"[+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_STRING = re.compile(r'"([^"\x00-\x1f\x7f]*)"')


def _strip_comment(line: str) -> str:
    in_string = False
    for i, ch in enumerate(line):
        if ch == '"':
            in_string = not in_string
        elif ch == "#" and not in_string:
            return line[:i]
    return line


def _decode(text: Union[str, bytes]) -> str:
    if isinstance(text, str):
        return text
    try:
        return text.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = text[: exc.start].count(b"\n") + 1
        column = exc.start - (text.rfind(b"\n", 0, exc.start) + 1) + 1
        raise ConfigSyntaxError(line, column, "invalid UTF-8") from None


def _parse_value(raw: str, lineno: int, column: int, text: str) -> Value:
    token = raw.strip(" \t")
    column += len(raw) - len(raw.lstrip(" \t"))
    if not token:
        raise ConfigSyntaxError(lineno, column, "missing value", text)
    if _STRING.fullmatch(token):
        return token[1:-1]
    if _INTEGER.fullmatch(token):
        return int(token)
    if _FLOAT.fullmatch(token):
        value = float(token)
        if not math.isfinite(value):
            raise ConfigSyntaxError(lineno, column, "number out of range", text)
        return value
    raise ConfigSyntaxError(lineno, column, "value must be a decimal number or a quoted string", text)


def parse_document(text: Union[str, bytes]) -> Document:
    """Grammar-level parse. Never raises anything but :class:`ConfigSyntaxError`."""
    text = _decode(text)
    if text.startswith("﻿"):
        text = text[1:]
    doc = Document()
    for lineno, line in enumerate(text.split("\n"), start=1):
        if line.endswith("\r"):
            line = line[:-1]
        body = _strip_comment(line)
        if not body.strip(" \t"):
            continue
        header = _HEADER.match(body)
        if header:
            name = header.group(1)
            if name not in SECTIONS:
                raise ConfigSyntaxError(lineno, header.start(1) + 1, f"unknown section [{name}]", line)
            doc.sections.append(Section(name, lineno))
            continue
        entry = _ENTRY.match(body)
        if not entry:
            column = len(body) - len(body.lstrip(" \t")) + 1
            raise ConfigSyntaxError(lineno, column, "expected '[section]' or 'key = value'", line)
        key = entry.group(1)
        if not _KEY.fullmatch(key):
            raise ConfigSyntaxError(lineno, entry.start(1) + 1, f"invalid key {key!r}", line)
        if not doc.sections:
            raise ConfigSyntaxError(lineno, entry.start(1) + 1, "entry before any section header", line)
        value = _parse_value(entry.group(2), lineno, entry.start(2) + 1, line)
        doc.sections[-1].entries.append(Entry(key, value, lineno, line))
    return doc


def format_value(value: Value) -> str:
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def format_document(doc: Document) -> str:
    """Canonical text: one blank line between sections, ``key = value``, no comments."""
    blocks = []
    for section in doc.sections:
        lines = [f"[{section.name}]"]
        lines += [f"{e.key} = {format_value(e.value)}" for e in section.entries]
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


# --- semantic layer --------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Sampling grids in SI units.

    ``omega_minus_*`` sets the 1-D f- export, ``tau_*`` and ``big_omega_*`` the
    Wigner grid, ``jsa_*`` the square signal/idler grid.
    """

    omega_minus_halfspan: float
    omega_minus_points: int
    tau_halfspan: float
    tau_points: int
    big_omega_halfspan: float
    big_omega_points: int
    jsa_halfspan: float
    jsa_points: int

    def __post_init__(self):
        for name in ("omega_minus", "tau", "big_omega", "jsa"):
            halfspan = getattr(self, f"{name}_halfspan")
            points = getattr(self, f"{name}_points")
            if not (halfspan > 0 and math.isfinite(halfspan)):
                raise ValueError(f"{name}_halfspan must be positive and finite, got {halfspan!r}")
            _check_points(points, f"{name}_points")


def _check_points(points, name):
    if not isinstance(points, (int, np.integer)) or points < MIN_POINTS or points > MAX_POINTS or points % 2:
        raise ValueError(f"{name} must be an even integer in [{MIN_POINTS}, {MAX_POINTS}], got {points!r}")


@dataclass(frozen=True)
class Scenario:
    device: DeviceParams
    pulse: PumpPulse
    beams: Tuple[BeamSpec, ...]
    grids: GridSpec

    def __post_init__(self):
        object.__setattr__(self, "beams", tuple(self.beams))
        if not self.beams:
            raise ValueError("a scenario needs at least one beam")


@dataclass(frozen=True)
class _Key:
    scale: float = 1.0
    required: bool = False
    default: Optional[float] = None
    kind: str = "float"  # float | points | path


_SCHEMA: Dict[str, Dict[str, _Key]] = {
    "device": {
        "length_mm": _Key(1e-3, required=True),
        "vg_m_per_s": _Key(1.0, default=DEFAULT_GROUP_VELOCITY),
        "theta_deg_arcmin": _Key(arcmin_to_rad(1.0)),  # 0 unless the index pair sets it
        "n_signal": _Key(),
        "n_idler": _Key(),
    },
    "pulse": {
        "wavelength_nm": _Key(1e-9, required=True),
        "duration_ps": _Key(1e-12, required=True),
        "cavity_phase_file": _Key(kind="path"),
    },
    "beam": {
        "position_mm": _Key(1e-3, default=0.0),
        "tilt_arcmin": _Key(arcmin_to_rad(1.0), default=0.0),
        "waist_um": _Key(1e-6, required=True),
        "amplitude": _Key(default=1.0),
        "phase_rad": _Key(default=0.0),
    },
    "grid": {
        "omega_minus_halfspan_rad_per_ps": _Key(1e12),
        "omega_minus_points": _Key(kind="points"),
        "tau_halfspan_ps": _Key(1e-12),
        "tau_points": _Key(kind="points"),
        "big_omega_halfspan_rad_per_ps": _Key(1e12),
        "big_omega_points": _Key(kind="points"),
        "jsa_halfspan_rad_per_ps": _Key(1e12),
        "jsa_points": _Key(kind="points"),
    },
}


def _fail(key: str, message: str, entry: Optional[Entry] = None):
    if entry is None:
        raise ConfigSemanticError(key, message)
    raise ConfigSemanticError(key, message, entry.line, entry.text)


def _section_values(section: Section) -> Tuple[Dict[str, Value], Dict[str, Entry]]:
    schema = _SCHEMA[section.name]
    values: Dict[str, Value] = {}
    entries: Dict[str, Entry] = {}
    for entry in section.entries:
        spec = schema.get(entry.key)
        if spec is None:
            _fail(entry.key, f"unknown key in [{section.name}]; expected one of {sorted(schema)}", entry)
        if entry.key in values:
            _fail(entry.key, f"duplicate key (first set on line {entries[entry.key].line})", entry)
        if spec.kind == "path":
            if not isinstance(entry.value, str) or not entry.value:
                _fail(entry.key, "expected a non-empty quoted file name", entry)
        elif isinstance(entry.value, str):
            _fail(entry.key, "expected a number, got a string", entry)
        elif spec.kind == "points":
            if not isinstance(entry.value, int):
                _fail(entry.key, "expected an integer point count", entry)
            try:
                _check_points(entry.value, entry.key)
            except ValueError as exc:
                _fail(entry.key, str(exc), entry)
        values[entry.key] = entry.value
        entries[entry.key] = entry
    for key, spec in schema.items():
        if spec.required and key not in values:
            _fail(key, f"required key missing from [{section.name}] (line {section.line})")
    return values, entries


def _si(values, key, section):
    spec = _SCHEMA[section][key]
    raw = values.get(key, spec.default)
    return None if raw is None else float(raw) * spec.scale


def _positive(values, entries, key, section):
    v = _si(values, key, section)
    if v is not None and not (v > 0 and math.isfinite(v)):
        _fail(key, "must be positive", entries.get(key))
    return v


def _build_device(values, entries, pump_omega: float) -> DeviceParams:
    length = _positive(values, entries, "length_mm", "device")
    vg = _si(values, "vg_m_per_s", "device")
    if not (0 < vg < SPEED_OF_LIGHT):
        _fail("vg_m_per_s", "must lie strictly between 0 and the speed of light", entries.get("vg_m_per_s"))
    theta = _si(values, "theta_deg_arcmin", "device")
    ns, ni = _si(values, "n_signal", "device"), _si(values, "n_idler", "device")
    if (ns is None) != (ni is None):
        missing = "n_idler" if ni is None else "n_signal"
        _fail(missing, "n_signal and n_idler must be given together")
    if ns is not None:
        half_diff = (ns - ni) / 2
        if not abs(half_diff) <= 1:
            _fail("n_signal", "|n_signal - n_idler| / 2 must not exceed 1", entries["n_signal"])
        if theta is not None and abs(math.sin(theta) - half_diff) > 1e-12:
            _fail("theta_deg_arcmin", "inconsistent with n_signal and n_idler", entries["theta_deg_arcmin"])
    elif theta is not None and not abs(theta) < math.pi / 2:
        _fail("theta_deg_arcmin", "must lie in (-5400, 5400) arcmin", entries["theta_deg_arcmin"])
    return DeviceParams(length, vg, pump_omega, theta, ns, ni)


def _build_pulse(values, entries, base_dir, load_files) -> PumpPulse:
    wavelength = _positive(values, entries, "wavelength_nm", "pulse")
    duration = _positive(values, entries, "duration_ps", "pulse")
    omega = 2 * math.pi * SPEED_OF_LIGHT / wavelength
    if not math.isfinite(omega):
        _fail("wavelength_nm", "too small", entries["wavelength_nm"])
    phase = None
    name = values.get("cavity_phase_file")
    if name is not None and load_files:
        path = Path(base_dir or ".") / name
        try:
            phase = read_cavity_phase(path)
        except ConfigError:
            raise
        except (OSError, ValueError) as exc:
            raise CavityPhaseUnreadable(str(path), str(exc)) from None
    return PumpPulse(wavelength, duration, phase)


def _build_beam(values, entries, device: DeviceParams) -> BeamSpec:
    z0 = _si(values, "position_mm", "beam")
    if not abs(z0) <= device.length_L / 2:
        _fail("position_mm", "beam spot must lie on the device, |position_mm| <= length_mm / 2", entries.get("position_mm"))
    tilt = _si(values, "tilt_arcmin", "beam")
    if not abs(device.theta_deg + tilt) < math.pi / 2:
        _fail("tilt_arcmin", "total incidence angle must stay below 90 degrees", entries.get("tilt_arcmin"))
    waist = _positive(values, entries, "waist_um", "beam")
    amplitude = _positive(values, entries, "amplitude", "beam")
    phase = _si(values, "phase_rad", "beam")
    weight = amplitude if phase == 0 else amplitude * cmath.exp(1j * phase)
    return BeamSpec(z0, tilt, waist, weight)


def default_grids(device: DeviceParams, pulse: PumpPulse, beams: Sequence[BeamSpec]) -> Dict[str, float]:
    """Automatic grid values for keys absent from ``[grid]`` (SI)."""
    from .hom import scan_jsa_grid

    widths = [spectral_width(b, device) for b in beams]
    centers = [abs(center_detuning(b, device)) for b in beams]
    delays = [abs(b.position_z0) / device.group_velocity_vg for b in beams]
    jsa_halfspan, jsa_points = scan_jsa_grid(beams, device, pulse)
    return {
        "omega_minus_halfspan": max(centers) + 8 * min(widths),
        "omega_minus_points": DEFAULT_OMEGA_MINUS_POINTS,
        "tau_halfspan": max(delays) + 8 / min(widths),
        "tau_points": DEFAULT_WIGNER_POINTS,
        "big_omega_halfspan": max(centers) + 4 * max(widths),
        "big_omega_points": DEFAULT_WIGNER_POINTS,
        "jsa_halfspan": jsa_halfspan,
        "jsa_points": jsa_points,
    }


_GRID_KEYS = {
    "omega_minus_halfspan": "omega_minus_halfspan_rad_per_ps",
    "omega_minus_points": "omega_minus_points",
    "tau_halfspan": "tau_halfspan_ps",
    "tau_points": "tau_points",
    "big_omega_halfspan": "big_omega_halfspan_rad_per_ps",
    "big_omega_points": "big_omega_points",
    "jsa_halfspan": "jsa_halfspan_rad_per_ps",
    "jsa_points": "jsa_points",
}


def _build_grids(values, entries, device, pulse, beams) -> GridSpec:
    try:
        auto = default_grids(device, pulse, beams)
    except (ArithmeticError, ValueError) as exc:
        raise ConfigSemanticError("[grid]", f"automatic grid sizing failed ({exc}); check beam and pulse values") from None
    resolved = {}
    for field_name, key in _GRID_KEYS.items():
        if key in values:
            value = values[key] if key.endswith("_points") else _positive(values, entries, key, "grid")
        else:
            value = auto[field_name]
            if not math.isfinite(value) or (key.endswith("_points") and value > MAX_POINTS):
                _fail(key, f"automatic value {value!r} is unusable; set it explicitly")
        resolved[field_name] = value
    return GridSpec(**resolved)


def scenario_from_document(doc: Document, base_dir=None, load_files: bool = True) -> Scenario:
    """Validate a parsed document and build the SI scenario."""
    by_name: Dict[str, List[Section]] = {name: [] for name in SECTIONS}
    for section in doc.sections:
        by_name[section.name].append(section)
    for name in SINGLE_SECTIONS:
        if len(by_name[name]) > 1:
            second = by_name[name][1]
            raise ConfigSemanticError(f"[{name}]", "section may appear only once", second.line, f"[{name}]")
    for name in ("device", "pulse", "beam"):
        if not by_name[name]:
            raise ConfigSemanticError(f"[{name}]", "required section missing")
    parsed = {name: [_section_values(s) for s in sections] for name, sections in by_name.items()}

    device_values, device_entries = parsed["device"][0]
    pulse_values, pulse_entries = parsed["pulse"][0]
    pulse = _build_pulse(pulse_values, pulse_entries, base_dir, load_files)
    device = _build_device(device_values, device_entries, 2 * math.pi * SPEED_OF_LIGHT / pulse.center_wavelength)
    beams = tuple(_build_beam(v, e, device) for v, e in parsed["beam"])
    grid_values, grid_entries = parsed["grid"][0] if parsed["grid"] else ({}, {})
    grids = _build_grids(grid_values, grid_entries, device, pulse, beams)
    return Scenario(device, pulse, beams, grids)


def parse_scenario(text: Union[str, bytes], base_dir=None, load_files: bool = True) -> Scenario:
    """Parse and validate scenario text.

    Parameters
    ----------
    text : str or bytes
        Scenario source; bytes are decoded as UTF-8.
    base_dir : path-like, optional
        Directory against which ``cavity_phase_file`` is resolved.
    load_files : bool
        Skip reading the cavity phase table when False.

    Raises
    ------
    ConfigSyntaxError, ConfigSemanticError, CavityPhaseUnreadable
    """
    return scenario_from_document(parse_document(text), base_dir, load_files)


def load_scenario(path, load_files: bool = True) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_bytes(), path.parent, load_files)


# --- data files ------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def _current_umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


_UMASK = _current_umask()


def _atomic_write(destination, text: str) -> None:
    if hasattr(destination, "write"):
        destination.write(text)
        return
    path = Path(destination)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    except OSError as exc:
        raise IoError(exc.errno, f"cannot write {str(path)!r}: {exc.strerror}") from None
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise IoError(exc.errno, f"cannot write {str(path)!r}: {exc.strerror}") from None


def _axis_comment(label: str, name: str, axis: np.ndarray) -> str:
    return f"# {label}={name} min={_fmt(axis[0])} max={_fmt(axis[-1])} n={axis.size}"


def _finite_or_reject(values: np.ndarray, what: str, allow_gaps: bool) -> None:
    bad = ~np.isfinite(values)
    if allow_gaps:
        bad &= ~np.isnan(values)
    if np.any(bad):
        raise RejectedValue(f"{what} contains non-finite values, which are never serialized")


def format_real_grid(grid: RealGrid2D, allow_gaps: bool = False) -> str:
    """CSV text of a real grid; gaps (NaN) become empty cells when allowed."""
    values = np.asarray(grid.values, dtype=float)
    _finite_or_reject(values, "grid", allow_gaps)
    lines = [
        _axis_comment("axis1", "tau_s", grid.tau_axis),
        _axis_comment("axis2", grid.omega_name, grid.omega_axis),
    ]
    if allow_gaps:
        lines.append(f"# gaps={int(np.isnan(values).sum())}")
    lines.append(f"tau_s,{grid.omega_name},value")
    taus = [_fmt(t) for t in grid.tau_axis]
    omegas = [_fmt(o) for o in grid.omega_axis]
    for i, t in enumerate(taus):
        row = values[i]
        for j, o in enumerate(omegas):
            v = row[j]
            lines.append(f"{t},{o},{'' if v != v else _fmt(v)}")
    return "\n".join(lines) + "\n"


def write_real_grid(grid: RealGrid2D, destination, allow_gaps: bool = False) -> None:
    """Write ``grid`` as CSV (tau outer, omega inner), atomically when given a path.

    Raises
    ------
    RejectedValue
        If a value is not finite (NaN allowed only with ``allow_gaps``).
    IoError
    """
    _atomic_write(destination, format_real_grid(grid, allow_gaps))


def _read_lines(source) -> List[str]:
    if hasattr(source, "read"):
        return source.read().split("\n")
    try:
        return Path(source).read_text(encoding="utf-8").split("\n")
    except OSError as exc:
        raise IoError(exc.errno, f"cannot read {str(source)!r}: {exc.strerror}") from None


def _data_rows(lines: List[str], expected_cols: int) -> Tuple[List[str], np.ndarray]:
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body:
        raise ValueError("missing column header")
    header = body[0].split(",")
    if len(header) != expected_cols:
        raise ValueError(f"expected {expected_cols} columns, header is {body[0]!r}")
    rows = [[float(c) if c else math.nan for c in ln.split(",")] for ln in body[1:]]
    if any(len(r) != expected_cols for r in rows):
        raise ValueError("ragged CSV row")
    return header, np.array(rows, dtype=float).reshape(-1, expected_cols)


def read_real_grid(source) -> RealGrid2D:
    header, data = _data_rows(_read_lines(source), 3)
    tau = np.unique(data[:, 0])
    omega = data[: np.count_nonzero(data[:, 0] == data[0, 0]), 1]
    if tau.size * omega.size != data.shape[0]:
        raise ValueError("grid rows do not form a full tau x omega product")
    return RealGrid2D(tau, omega, data[:, 2].reshape(tau.size, omega.size), omega_name=header[1])


def format_complex_function(f: SampledComplexFunction) -> str:
    values = f.values
    _finite_or_reject(values.real, "function", False)
    _finite_or_reject(values.imag, "function", False)
    axis = f.axis
    lines = [_axis_comment("axis", f.axis_name, axis), f"{f.axis_name},re,im"]
    lines += [f"{_fmt(a)},{_fmt(v.real)},{_fmt(v.imag)}" for a, v in zip(axis, values)]
    return "\n".join(lines) + "\n"


def write_complex_function(f: SampledComplexFunction, destination) -> None:
    """Write a sampled complex function as ``axis,re,im`` CSV."""
    _atomic_write(destination, format_complex_function(f))


def read_complex_function(source) -> SampledComplexFunction:
    header, data = _data_rows(_read_lines(source), 3)
    return SampledComplexFunction.from_axis(data[:, 0], data[:, 1] + 1j * data[:, 2], header[0])


def format_complex_grid(axis1: np.ndarray, axis2: np.ndarray, values: np.ndarray, names=("omega_s_rad_s", "omega_i_rad_s")) -> str:
    _finite_or_reject(values.real, "grid", False)
    _finite_or_reject(values.imag, "grid", False)
    lines = [
        _axis_comment("axis1", names[0], axis1),
        _axis_comment("axis2", names[1], axis2),
        f"{names[0]},{names[1]},re,im",
    ]
    second = [_fmt(b) for b in axis2]
    for i, a in enumerate(axis1):
        fa = _fmt(a)
        row = values[i]
        lines += [f"{fa},{second[j]},{_fmt(row[j].real)},{_fmt(row[j].imag)}" for j in range(axis2.size)]
    return "\n".join(lines) + "\n"


def write_jsa(jsa, destination) -> None:
    _atomic_write(destination, format_complex_grid(jsa.omega_s_axis, jsa.omega_i_axis, jsa.amplitude))


def read_complex_grid(source) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    _, data = _data_rows(_read_lines(source), 4)
    a = np.unique(data[:, 0])
    b = data[: np.count_nonzero(data[:, 0] == data[0, 0]), 1]
    if a.size * b.size != data.shape[0]:
        raise ValueError("grid rows do not form a full product")
    return a, b, (data[:, 2] + 1j * data[:, 3]).reshape(a.size, b.size)


def read_cavity_phase(path) -> CavityPhase:
    """Two-column ``omega_rad_s,phase_rad`` CSV; ``#`` lines and a header row are skipped."""
    omega, phase = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#") or line.replace(" ", "") == "omega_rad_s,phase_rad":
                continue
            cells = line.split(",")
            try:
                if len(cells) != 2:
                    raise ValueError("expected two columns")
                omega.append(float(cells[0]))
                phase.append(float(cells[1]))
            except ValueError as exc:
                raise ConfigSemanticError("cavity_phase_file", f"{path}: {exc}", lineno, line) from None
    try:
        return CavityPhase(omega, phase)
    except ValueError as exc:
        raise ConfigSemanticError("cavity_phase_file", f"{path}: {exc}") from None


def format_metadata(items: Sequence[Tuple[str, float]]) -> str:
    """``key = value`` lines readable by :func:`parse_metadata`."""
    lines = []
    for key, value in items:
        if not _KEY.fullmatch(key):
            raise ValueError(f"invalid metadata key {key!r}")
        if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
            lines.append(f"{key} = {int(value)}")
            continue
        if not math.isfinite(value):
            raise RejectedValue(f"metadata {key} is not finite")
        lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def parse_metadata(text: str) -> Dict[str, Value]:
    doc = parse_document("[grid]\n" + text)
    return {e.key: e.value for e in doc.sections[0].entries}


def write_tomography(result, prefix) -> List[Path]:
    """Write ``<prefix>_reconstructed.csv``, ``<prefix>_direct.csv`` and ``<prefix>_meta.txt``.

    All three texts are formatted before any file is touched, so a
    formatting failure leaves nothing behind.
    """
    prefix = str(prefix)
    cal = result.calibration
    meta = [
        ("affine_gain", result.affine_gain),
        ("affine_offset", result.affine_offset),
        ("max_abs_error", result.max_abs_error),
        ("rms_error", result.rms_error),
        ("peak", result.peak),
        ("calibration_gain", cal.gain),
        ("tau_offset_s", cal.tau_offset),
        ("omega_offset_rad_s", cal.omega_offset),
        ("valid_points", int(np.count_nonzero(result.valid))),
        ("total_points", int(result.valid.size)),
    ]
    texts = [
        (Path(prefix + "_reconstructed.csv"), format_real_grid(result.reconstructed, allow_gaps=True)),
        (Path(prefix + "_direct.csv"), format_real_grid(result.direct)),
        (Path(prefix + "_meta.txt"), format_metadata(meta)),
    ]
    for path, text in texts:
        _atomic_write(path, text)
    return [p for p, _ in texts]
