"""Run configuration files.

Line-oriented ``key = value`` text with ``[section]`` headers and ``#``
comments. Every dimensioned value carries its unit ("r0 = 200 um",
"omega_z = 1 MHz"). Frequencies given in Hz-type units are cyclic
(omega = 2 pi f); "rad/s" gives an angular frequency directly. Cooling
detuning and Rabi frequency also accept "gamma", the cooling linewidth.

Example::

    mode = budget
    seed = 1
    species = ca40
    n_ions = 10

    [trap]
    pole_count = 8
    V0 = 394.4 V
    Omega = 20 MHz
    r0 = 200 um
    omega_z = 1 MHz

    [scenario]
    ring_radius = 20 um

Parsing is strict: unknown keys, missing units and sections that do not
belong to the selected mode are errors naming the line and key.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field

from .constants import IonSpecies, species_by_name
from .trap import TrapConfig

MODES = ("potential-scan", "statics", "md", "budget", "sweep")

# unit -> (dimension, factor to SI); cyclic frequencies include the 2 pi
UNITS = {
    "m": ("length", 1.0), "mm": ("length", 1e-3), "um": ("length", 1e-6), "nm": ("length", 1e-9),
    "V": ("voltage", 1.0), "kV": ("voltage", 1e3), "mV": ("voltage", 1e-3),
    "Hz": ("angular_frequency", 2 * math.pi), "kHz": ("angular_frequency", 2e3 * math.pi),
    "MHz": ("angular_frequency", 2e6 * math.pi), "GHz": ("angular_frequency", 2e9 * math.pi),
    "rad/s": ("angular_frequency", 1.0),
    "s": ("time", 1.0), "ms": ("time", 1e-3), "us": ("time", 1e-6), "ns": ("time", 1e-9),
    "K": ("temperature", 1.0), "mK": ("temperature", 1e-3), "uK": ("temperature", 1e-6),
    "G": ("magnetic_field", 1.0), "mG": ("magnetic_field", 1e-3), "uG": ("magnetic_field", 1e-6),
}
# shift-type frequencies stay in Hz (not angular)
FREQ_UNITS = {"Hz": 1.0, "kHz": 1e3, "mHz": 1e-3}


class ConfigError(ValueError):
    def __init__(self, message, line=None, key=None):
        where = f"line {line}: " if line is not None else ""
        what = f"{key}: " if key is not None else ""
        super().__init__(f"{where}{what}{message}")
        self.line = line
        self.key = key


@dataclass(frozen=True)
class Field:
    kind: str  # quantity, hz, int, float, choice, bool, str, list
    dimension: str = ""
    choices: tuple = ()
    default: object = None
    doc: str = ""


Q = lambda dim, default=None, doc="": Field("quantity", dim, default=default, doc=doc)  # noqa: E731

SCHEMA = {
    "": {
        "mode": Field("choice", choices=MODES),
        "seed": Field("int", doc="required; seeds the minimizer starts and the MD random stream"),
        "species": Field("str", default="ca40"),
        "n_ions": Field("int"),
    },
    "trap": {
        "pole_count": Field("int", doc="2k"),
        "V0": Q("voltage"),
        "Omega": Q("angular_frequency"),
        "r0": Q("length"),
        "omega_z": Q("angular_frequency"),
    },
    "scan": {
        "r_min": Q("length", 0.0),
        "r_max": Q("length", None, "default 2 r_min"),
        "points": Field("int", default=401),
    },
    "statics": {
        "z_tol": Q("length", 10e-9),
        "perturbation": Q("length", 0.1e-6),
    },
    "scenario": {
        "ring_radius": Field("quantity", "length", doc="or 'auto' for r_min + epsilon"),
        "T_axial": Q("temperature", 0.54e-3),
        "T_radial": Q("temperature", 10e-3),
        "M_J": Field("float", default=0.5),
        "B": Q("magnetic_field", 0.05),
        "dB": Q("magnetic_field", 6e-7),
        "bbr_T": Q("temperature", 300.0),
        "bbr_dT": Q("temperature", 10.0),
        "laser_waist": Q("length", 40e-6),
        "misalignment": Q("length", 0.0),
        "extra_dc_quadrupole": Field("hz", default=0.04),
        "axial_voltage_stability": Field("float", default=1e-4),
        "radius_override": Field("bool", default=False),
        "broadening": Field("choice", choices=("linear", "quadrature"), default="linear"),
    },
    "thresholds": {
        "max_shift": Field("hz", doc="per-entry |shift| limit"),
        "max_broadening": Field("hz"),
        "max_long_term": Field("float"),
        "max_total_shift": Field("hz"),
    },
    "integrator": {
        "steps_per_rf_period": Field("int", default=100),
        "field_mode": Field("choice", choices=("full", "pseudo", "off"), default="full"),
        "static_field": Field("bool", default=True),
    },
    "cooling": {
        "detuning": Field("quantity", "angular_frequency", default="-0.5 gamma"),
        "rabi": Field("quantity", "angular_frequency", default="0.5 gamma"),
        "beams": Field("choice", choices=("xyz", "z"), default="xyz"),
    },
    "schedule": {
        "initial_temperature": Q("temperature", 1e-3),
        "initial_cooling": Q("time", 0.2e-3),
        "dark_time": Q("time"),
        "cool_time": Q("time"),
        "cycles": Field("int"),
        "record_time": Q("time", 10e-6, "temperature record length"),
    },
    "sweep": {
        "kind": Field("choice", choices=("statics", "budget")),
        "axis": Field("str"),
        "values": Field("list"),
        "axis2": Field("str"),
        "values2": Field("list"),
    },
}

MODE_SECTIONS = {
    "potential-scan": {"", "trap", "scan"},
    "statics": {"", "trap", "statics"},
    "md": {"", "trap", "integrator", "cooling", "schedule"},
    "budget": {"", "trap", "scenario", "thresholds"},
    "sweep": {"", "trap", "sweep", "statics", "scenario"},
}
REQUIRED = {
    "potential-scan": {"": ("mode", "seed"), "trap": tuple(SCHEMA["trap"])},
    "statics": {"": ("mode", "seed", "n_ions"), "trap": tuple(SCHEMA["trap"])},
    "md": {"": ("mode", "seed", "n_ions"), "trap": tuple(SCHEMA["trap"]),
           "schedule": ("dark_time", "cool_time", "cycles")},
    "budget": {"": ("mode", "seed", "n_ions"), "trap": tuple(SCHEMA["trap"]),
               "scenario": ("ring_radius",)},
    "sweep": {"": ("mode", "seed", "n_ions"), "trap": tuple(SCHEMA["trap"]),
              "sweep": ("kind", "axis", "values")},
}


@dataclass(frozen=True)
class Quantity:
    """A number with the unit it was written in."""

    magnitude: float
    unit: str

    def si(self, gamma: float | None = None) -> float:
        if self.unit == "gamma":
            if gamma is None:
                raise ValueError("'gamma' unit needs a species")
            return self.magnitude * gamma
        return self.magnitude * UNITS[self.unit][1]

    def text(self) -> str:
        return f"{_num(self.magnitude)} {self.unit}"


def _num(x: float) -> str:
    return repr(float(x))


_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_QTY = re.compile(rf"^({_NUMBER})\s*(\S+)?$")


def _parse_quantity(text, dimension, allow_gamma, line, key) -> Quantity:
    m = _QTY.match(text)
    if not m:
        raise ConfigError(f"cannot read quantity {text!r}", line, key)
    mag, unit = float(m.group(1)), m.group(2)
    if unit is None:
        raise ConfigError(f"missing unit (expected a {dimension.replace('_', ' ')})", line, key)
    if unit == "gamma" and allow_gamma:
        return Quantity(mag, unit)
    if unit not in UNITS or UNITS[unit][0] != dimension:
        raise ConfigError(f"unit {unit!r} is not a {dimension.replace('_', ' ')}", line, key)
    return Quantity(mag, unit)


def _parse_hz(text, line, key) -> Quantity:
    m = _QTY.match(text)
    if not m:
        raise ConfigError(f"cannot read quantity {text!r}", line, key)
    if m.group(2) is None:
        raise ConfigError("missing unit (expected Hz)", line, key)
    if m.group(2) not in FREQ_UNITS:
        raise ConfigError(f"unit {m.group(2)!r} is not Hz, kHz or mHz", line, key)
    return Quantity(float(m.group(1)), m.group(2))


def _parse_value(section, key, f: Field, text, line):
    try:
        if f.kind == "quantity":
            if section == "scenario" and key == "ring_radius" and text == "auto":
                return "auto"
            return _parse_quantity(text, f.dimension, section == "cooling", line, key)
        if f.kind == "hz":
            return _parse_hz(text, line, key)
        if f.kind == "int":
            return int(text)
        if f.kind == "float":
            return float(text)
        if f.kind == "bool":
            if text not in ("true", "false"):
                raise ConfigError("expected true or false", line, key)
            return text == "true"
        if f.kind == "choice":
            if text not in f.choices:
                raise ConfigError(f"expected one of {', '.join(f.choices)}", line, key)
            return text
        if f.kind == "list":
            return tuple(x.strip() for x in text.split(",") if x.strip())
        return text
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"cannot read {text!r}", line, key) from None


def _format_value(v) -> str:
    if isinstance(v, Quantity):
        return v.text()
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _num(v)
    if isinstance(v, tuple):
        return ", ".join(v)
    return str(v)


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration: explicit values per section, in schema order."""

    values: dict = field(default_factory=dict)

    @property
    def mode(self) -> str:
        return self.values[""]["mode"]

    @property
    def seed(self) -> int:
        return self.values[""]["seed"]

    def get(self, section, key):
        v = self.values.get(section, {}).get(key)
        if v is None:
            v = SCHEMA[section][key].default
            if isinstance(v, str) and SCHEMA[section][key].kind == "quantity":
                mag, unit = v.split()
                v = Quantity(float(mag), unit)
        return v

    def si(self, section, key, default=None):
        v = self.get(section, key)
        if v is None:
            return default
        if isinstance(v, Quantity):
            if SCHEMA[section][key].kind == "hz":
                return v.magnitude * FREQ_UNITS[v.unit]
            return v.si(self.species.cooling_linewidth_gamma)
        return v

    @property
    def species(self) -> IonSpecies:
        return species_by_name(self.values[""].get("species", "ca40"))

    @property
    def n_ions(self) -> int:
        return self.values[""].get("n_ions", 1)

    def trap(self) -> TrapConfig:
        return TrapConfig(self.values["trap"]["pole_count"], self.si("trap", "V0"),
                          self.si("trap", "Omega"), self.si("trap", "r0"), self.si("trap", "omega_z"))

    def canonical(self) -> str:
        lines = []
        for section in SCHEMA:
            vals = self.values.get(section)
            if not vals:
                continue
            if section:
                lines += ["", f"[{section}]"]
            for key in SCHEMA[section]:
                if key in vals:
                    lines.append(f"{key} = {_format_value(vals[key])}")
        return "\n".join(lines).lstrip("\n") + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def with_value(self, dotted: str, text: str) -> "RunConfig":
        """Copy with one value replaced, e.g. with_value('trap.V0', '3142 V')."""
        section, _, key = dotted.rpartition(".")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown parameter {dotted!r}", key=dotted)
        v = _parse_value(section, key, SCHEMA[section][key], text, None)
        values = {s: dict(d) for s, d in self.values.items()}
        values.setdefault(section, {})[key] = v
        return RunConfig(values)


def parse_run_config(text: str) -> RunConfig:
    values: dict = {"": {}}
    where: dict = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[([A-Za-z_-]+)\]", line)
        if m:
            section = m.group(1)
            if section not in SCHEMA or section == "":
                raise ConfigError(f"unknown section [{section}]", lineno)
            if section in values:
                raise ConfigError(f"duplicate section [{section}]", lineno)
            values[section] = {}
            where[(section, None)] = lineno
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key in [{section or 'top level'}]", lineno, key)
        if key in values[section]:
            raise ConfigError("duplicate key", lineno, key)
        values[section][key] = _parse_value(section, key, SCHEMA[section][key], val, lineno)
        where[(section, key)] = lineno

    mode = values[""].get("mode")
    if mode is None:
        raise ConfigError("mode missing", key="mode")
    for s in values:
        if s not in MODE_SECTIONS[mode] and (values[s] or (s, None) in where):
            raise ConfigError(f"section [{s}] does not apply to mode {mode}", where.get((s, None)), s)
    for s, keys in REQUIRED[mode].items():
        for k in keys:
            if k not in values.get(s, {}):
                name = f"{s}.{k}" if s else k
                raise ConfigError("required key missing", where.get((s, None)), name)
    if "species" in values[""]:
        try:
            species_by_name(values[""]["species"])
        except (KeyError, ValueError):
            raise ConfigError("unknown species", where[("", "species")], "species") from None
    if mode == "sweep":
        sw = values["sweep"]
        if ("axis2" in sw) != ("values2" in sw):
            raise ConfigError("axis2 and values2 go together", where.get(("sweep", "axis2")), "axis2")
    cfg = RunConfig({s: d for s, d in values.items() if d})
    try:
        cfg.trap()
    except ValueError as e:
        raise ConfigError(str(e), where.get(("trap", None)), "trap") from None
    return cfg


def load_run_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_run_config(fh.read())
