"""Device configuration: a TOML file with one table per parameter group.

Grammar (TOML 1.0)::

    [geometry]            gap_length, electrode_width, cell_count, electrode_cells,
                          siv_areal_density, temperature, layer_thickness
    [optics]              transmission
    [excitation_spectrum] resonance_center, resonance_fwhm, resonance_amplitude,
                          background_slope, background_offset
    [hole_spectrum]       baseline, plus [[hole_spectrum.peaks]] {center, fwhm, amplitude}
    [rates]               sigma_ion, p_escape_halffield, escape_exponent, sigma_cap,
                          tau_dark, pl_brightness, sat_flux, overshoot_qe
    [schottky]            phi0, n1, n2, prefactor, temperature, photon_energy
    [transport]           g_bulk, g_if, d_if, p_local, if_gain
    [detector]            efficiency, psf_waist
    [numerics]            macro_tol, dt_min, dt_cap, steady_tol, steady_max_iter, overshoot_window
    [beam]                center, waist, power, photon_energy
    [protocols.NAME]      bin_width, repetitions, plus [[protocols.NAME.segments]]
                          {duration, bias, laser_on, power}

Every table and key is optional; missing values take the documented
defaults.  Unknown tables or keys are errors.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import re
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigParseError, ProtocolError, ValidationError
from .kinetics import RateParams
from .photophysics import ElectrodeOptics, ExcitationSpectrum, HoleGenerationSpectrum, Peak
from .protocol import DetectorParams, NumericsParams, Protocol, Segment, turnoff_protocol
from .schottky import SchottkyParams
from .transport import BeamProfile, DeviceGeometry, TransportParams

DEFAULT_PATH = Path(__file__).with_name("data") / "default.toml"


def _default_protocols():
    return {"turnoff": turnoff_protocol()}


@dataclass(frozen=True)
class DeviceConfig:
    geometry: DeviceGeometry = field(default_factory=DeviceGeometry)
    optics: ElectrodeOptics = field(default_factory=ElectrodeOptics)
    excitation_spectrum: ExcitationSpectrum = field(default_factory=ExcitationSpectrum)
    hole_spectrum: HoleGenerationSpectrum = field(default_factory=HoleGenerationSpectrum)
    rates: RateParams = field(default_factory=RateParams)
    schottky: SchottkyParams = field(default_factory=SchottkyParams)
    transport: TransportParams = field(default_factory=TransportParams)
    detector: DetectorParams = field(default_factory=DetectorParams)
    numerics: NumericsParams = field(default_factory=NumericsParams)
    beam: BeamProfile = field(default_factory=BeamProfile)
    protocols: dict = field(default_factory=_default_protocols, compare=True, hash=False)

    def validate(self):
        for f in fields(self):
            if f.name == "protocols":
                continue
            try:
                getattr(self, f.name).validate()
            except ValidationError as exc:
                raise ValidationError(f"{f.name}.{exc.field}", str(exc).split(": ", 1)[1]) from None
        for name, proto in self.protocols.items():
            try:
                proto.validate()
            except ProtocolError as exc:
                raise ValidationError(f"protocols.{name}", str(exc)) from None
        return self

    def protocol(self, name: str) -> Protocol:
        try:
            return self.protocols[name]
        except KeyError:
            raise KeyError(f"no protocol named {name!r}; have {sorted(self.protocols)}") from None

    def with_updates(self, updates: dict) -> "DeviceConfig":
        """Copy with dotted-name overrides such as ``{"rates.sigma_ion": 1e-19}``."""
        groups = {}
        for key, value in updates.items():
            group, _, name = key.partition(".")
            if group not in _SIMPLE or not name:
                raise KeyError(f"cannot set {key!r}")
            groups.setdefault(group, {})[name] = value
        cfg = self
        for group, vals in groups.items():
            cfg = replace(cfg, **{group: replace(getattr(cfg, group), **vals)})
        return cfg

    def get(self, key: str):
        group, _, name = key.partition(".")
        return getattr(getattr(self, group), name)

    def hash(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()[:16]


_SIMPLE = {
    "geometry": DeviceGeometry,
    "optics": ElectrodeOptics,
    "excitation_spectrum": ExcitationSpectrum,
    "rates": RateParams,
    "schottky": SchottkyParams,
    "transport": TransportParams,
    "detector": DetectorParams,
    "numerics": NumericsParams,
    "beam": BeamProfile,
}


def _line_of(text: str, table: str, key: str | None) -> int | None:
    """Best-effort line number of ``key`` inside ``[table]`` (or of the header)."""
    current = None
    head = re.compile(r"^\s*\[\[?\s*([^\]]+?)\s*\]\]?\s*(#.*)?$")
    for i, line in enumerate(text.splitlines(), start=1):
        m = head.match(line)
        if m:
            current = m.group(1)
            if key is None and current == table:
                return i
            continue
        if key is not None and current == table and re.match(rf"^\s*{re.escape(key)}\s*=", line):
            return i
    return None


def _coerce(cls, table: str, data: dict, text: str, path: str):
    known = {f.name: f for f in fields(cls)}
    out = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigParseError(f"{path}: unknown key {table}.{key}", _line_of(text, table, key))
        kind = str(known[key].type)
        if kind == "bool":
            ok = isinstance(value, bool)
        elif kind == "int":
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif kind.startswith("float"):
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            value = float(value) if ok else value
        else:
            ok = True
        if not ok:
            raise ConfigParseError(f"{path}: {table}.{key} has the wrong type ({type(value).__name__})",
                                   _line_of(text, table, key))
        out[key] = value
    return cls(**out)


def _peaks(items, text, path):
    out = []
    for k, item in enumerate(items):
        for key in item:
            if key not in ("center", "fwhm", "amplitude"):
                raise ConfigParseError(f"{path}: unknown key hole_spectrum.peaks[{k}].{key}",
                                       _line_of(text, "hole_spectrum.peaks", key))
        try:
            out.append(Peak(float(item["center"]), float(item["fwhm"]), float(item["amplitude"])))
        except KeyError as exc:
            raise ConfigParseError(f"{path}: hole_spectrum.peaks[{k}] lacks {exc.args[0]}",
                                   _line_of(text, "hole_spectrum.peaks", None)) from None
    return tuple(out)


def _protocol(name, data, beam, text, path):
    table = f"protocols.{name}"
    data = dict(data)
    segs = data.pop("segments", None)
    if not segs:
        raise ConfigParseError(f"{path}: {table} needs at least one [[{table}.segments]]",
                               _line_of(text, table, None))
    opts = {}
    for key, value in data.items():
        if key == "bin_width":
            opts[key] = float(value)
        elif key == "repetitions":
            opts[key] = int(value)
        else:
            raise ConfigParseError(f"{path}: unknown key {table}.{key}", _line_of(text, table, key))
    segments = tuple(_coerce(Segment, f"{table}.segments", s, text, path) for s in segs)
    return Protocol(segments, beam=beam, **opts)


def parse_text(text: str, path: str = "<string>") -> DeviceConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            m = re.search(r"line (\d+)", str(exc))
            line = int(m.group(1)) if m else None
        raise ConfigParseError(f"{path}: {exc}", line) from None
    kw = {}
    for table, value in doc.items():
        if table in _SIMPLE:
            if not isinstance(value, dict):
                raise ConfigParseError(f"{path}: {table} must be a table", _line_of(text, table, None))
            kw[table] = _coerce(_SIMPLE[table], table, value, text, path)
        elif table == "hole_spectrum":
            value = dict(value)
            peaks = value.pop("peaks", None)
            hs = _coerce(HoleGenerationSpectrum, table, value, text, path)
            if peaks is not None:
                hs = replace(hs, peaks=_peaks(peaks, text, path))
            kw[table] = hs
        elif table != "protocols":
            raise ConfigParseError(f"{path}: unknown table [{table}]", _line_of(text, table, None))
    beam = kw.get("beam", BeamProfile())
    if "protocols" in doc:
        kw["protocols"] = {name: _protocol(name, body, beam, text, path)
                           for name, body in doc["protocols"].items()}
    else:
        kw["protocols"] = {"turnoff": turnoff_protocol(beam)}
    cfg = DeviceConfig(**kw)
    cfg.validate()
    return cfg


def parse_config(path) -> DeviceConfig:
    """Read and validate a config file; ``"default"`` names the shipped one."""
    p = DEFAULT_PATH if str(path) == "default" else Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"{p}: {exc.strerror}") from None
    return parse_text(text, str(p))


def _value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _table(name: str, obj) -> list[str]:
    lines = [f"[{name}]"]
    for f in fields(obj):
        v = getattr(obj, f.name)
        if v is None or dataclasses.is_dataclass(v) or isinstance(v, tuple):
            continue
        lines.append(f"{f.name} = {_value(v)}")
    return lines


def serialize(cfg: DeviceConfig) -> str:
    """TOML text that :func:`parse_text` maps back to an equal config."""
    out = []
    for name in ("geometry", "optics", "excitation_spectrum"):
        out += _table(name, getattr(cfg, name)) + [""]
    out += ["[hole_spectrum]", f"baseline = {_value(cfg.hole_spectrum.baseline)}"]
    # an explicit empty list, or parsing would restore the default peaks
    out += ["peaks = []", ""] if not cfg.hole_spectrum.peaks else [""]
    for p in cfg.hole_spectrum.peaks:
        out += ["[[hole_spectrum.peaks]]", f"center = {_value(p.center)}", f"fwhm = {_value(p.fwhm)}",
                f"amplitude = {_value(p.amplitude)}", ""]
    for name in ("rates", "schottky", "transport", "detector", "numerics", "beam"):
        out += _table(name, getattr(cfg, name)) + [""]
    for name, proto in cfg.protocols.items():
        if proto.beam != cfg.beam:
            raise ValueError(f"protocol {name!r} uses a beam that differs from [beam]; cannot serialise")
        out += [f"[protocols.{name}]", f"bin_width = {_value(float(proto.bin_width))}",
                f"repetitions = {_value(int(proto.repetitions))}", ""]
        for seg in proto.segments:
            out += [f"[[protocols.{name}.segments]]"] + _table("", seg)[1:] + [""]
    return "\n".join(out)


def write_config(cfg: DeviceConfig, path) -> Path:
    path = Path(path)
    path.write_text(serialize(cfg), encoding="utf-8")
    return path
