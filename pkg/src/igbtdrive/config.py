"""Run configuration: an INI-style file with typed sections, SI units.

Sections: ``[device]``, ``[circuit]``, ``[sim]``, ``[experiment]``,
``[output]`` and one ``[drive.<name>]`` per gate drive.  Omitted keys take
their defaults, and every default applied is reported so the manifest can
echo it.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .device_model import CircuitParams, DeviceParams
from .gate_drive import CatsProfile, CspDesignInputs, CspProfile, ResistorDrive
from .transient_sim import SimConfig

EXPERIMENTS = ("edge", "sweep", "compare", "fom-on-file")
DRIVE_TYPES = {"csp": CspDesignInputs, "cats": CatsProfile, "resistor": ResistorDrive}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentParams:
    kind: str = "sweep"
    drive: str = "csp"
    reference: str = "cats"
    duty: float = 0.5
    i3_values: tuple[float, ...] = (10e-3, 20e-3, 30e-3, 40e-3, 50e-3)
    target_loss: str = "reference"
    tune: str = "i_3"
    tune_min: float | None = None
    tune_max: float | None = None
    input: str = ""
    workers: int = 1


@dataclass(frozen=True)
class DriveSpec:
    name: str
    kind: str
    value: Any  # CspDesignInputs, CspProfile, CatsProfile or ResistorDrive


@dataclass
class RunConfig:
    device: DeviceParams
    circuit: CircuitParams
    sim: SimConfig
    drives: dict[str, DriveSpec]
    experiment: ExperimentParams
    output_dir: Path
    source: str = "<string>"
    echo: list[tuple[str, str, str, str]] = field(default_factory=list)

    def drive(self, name: str) -> DriveSpec:
        if name not in self.drives:
            known = ", ".join(sorted(self.drives)) or "none"
            raise ConfigError(f"unknown drive {name!r} (defined drives: {known})")
        return self.drives[name]


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return n
            continue
        if key is not None and current == section:
            k = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
            if k == key:
                return n
    return None


def _where(text: str, section: str, key: str | None = None) -> str:
    n = _line_of(text, section, key)
    loc = f"[{section}]" + (f" {key}" if key else "")
    return f"{loc} (line {n})" if n else loc


def _convert(raw: str, typ: Any, where: str):
    raw = raw.strip()
    try:
        if typ in (float, "float"):
            return float(raw)
        if typ in (int, "int"):
            return int(raw)
        if typ in (str, "str"):
            return raw
        if typ in ("float | None",):
            return None if raw.lower() in ("", "none") else float(raw)
        if typ in ("tuple[float, ...]",):
            return tuple(float(x) for x in re.split(r"[,\s]+", raw) if x)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {typ}") from None
    raise ConfigError(f"{where}: unsupported field type {typ}")


def _build(cls, section: str, values: dict[str, str], text: str, echo: list, skip=()):
    fields = {f.name: f for f in dataclasses.fields(cls) if f.init and not f.name.startswith("_")}
    unknown = set(values) - set(fields) - set(skip)
    if unknown:
        k = sorted(unknown)[0]
        raise ConfigError(f"{_where(text, section, k)}: unknown key {k!r}")
    kwargs = {}
    for name, f in fields.items():
        if name in skip:
            continue
        typ = f.type
        if name in values:
            kwargs[name] = _convert(values[name], typ, _where(text, section, name))
            echo.append((section, name, repr(kwargs[name]), "config"))
        else:
            default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
            echo.append((section, name, repr(default), "default"))
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{_where(text, section)}: {exc}") from exc


def _parse_steps(raw: str, where: str) -> CspProfile:
    steps = []
    for chunk in raw.split(","):
        parts = chunk.split()
        if not parts:
            continue
        if len(parts) != 2:
            raise ConfigError(f"{where}: each step is '<amplitude_A> <duration_s>', got {chunk.strip()!r}")
        try:
            steps.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ConfigError(f"{where}: cannot read step {chunk.strip()!r}") from None
    try:
        return CspProfile(tuple(steps))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(text: str, source: str = "<string>", dt_override: float | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    known = {"device", "circuit", "sim", "experiment", "output"}
    for s in cp.sections():
        if s not in known and not s.startswith("drive."):
            raise ConfigError(f"{_where(text, s)}: unknown section")

    echo: list = []
    sect = lambda name: dict(cp[name]) if cp.has_section(name) else {}
    device = _build(DeviceParams, "device", sect("device"), text, echo)
    circuit = _build(CircuitParams, "circuit", sect("circuit"), text, echo)
    sim_values = sect("sim")
    if dt_override is not None:
        sim_values["dt"] = repr(float(dt_override))
    sim = _build(SimConfig, "sim", sim_values, text, echo)
    if dt_override is not None:
        k = next(i for i, e in enumerate(echo) if e[:2] == ("sim", "dt"))
        echo[k] = ("sim", "dt", repr(float(dt_override)), "override")
    exp = _build(ExperimentParams, "experiment", sect("experiment"), text, echo)
    if exp.kind not in EXPERIMENTS:
        raise ConfigError(f"{_where(text, 'experiment', 'kind')}: kind must be one of {EXPERIMENTS}")
    out = sect("output")
    unknown = set(out) - {"dir"}
    if unknown:
        k = sorted(unknown)[0]
        raise ConfigError(f"{_where(text, 'output', k)}: unknown key {k!r}")
    output_dir = Path(out.get("dir", "out"))
    echo.append(("output", "dir", repr(str(output_dir)), "config" if "dir" in out else "default"))

    drives = {}
    for s in cp.sections():
        if not s.startswith("drive."):
            continue
        name = s[len("drive.") :]
        values = dict(cp[s])
        kind = values.pop("type", None)
        if kind not in DRIVE_TYPES:
            raise ConfigError(f"{_where(text, s, 'type')}: type must be one of {sorted(DRIVE_TYPES)}")
        echo.append((s, "type", repr(kind), "config"))
        if kind == "csp" and "steps" in values:
            if len(values) > 1:
                k = sorted(set(values) - {"steps"})[0]
                raise ConfigError(f"{_where(text, s, k)}: explicit steps exclude design keys")
            value = _parse_steps(values["steps"], _where(text, s, "steps"))
            echo.append((s, "steps", repr(value.steps), "config"))
        else:
            value = _build(DRIVE_TYPES[kind], s, values, text, echo)
        drives[name] = DriveSpec(name, kind, value)

    needed = {"edge": ("drive",), "sweep": ("drive",), "compare": ("drive", "reference")}
    for key in needed.get(exp.kind, ()):
        name = getattr(exp, key)
        if name not in drives:
            known = ", ".join(sorted(drives)) or "none"
            raise ConfigError(f"{_where(text, 'experiment', key)}: unknown drive {name!r} (defined drives: {known})")

    return RunConfig(device, circuit, sim, drives, exp, output_dir, source, echo)


def load_config(path: str | Path, dt_override: float | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path), dt_override)
