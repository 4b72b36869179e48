"""Run configuration: strict JSON schema with unit-tagged physical values.

Dimensional values are written as ``"<number> <unit>"`` (for example
``"2.0 eV"`` or ``"72 fs"``) and converted to atomic units on load. The
canonical form stores every value in atomic units (Hz for repetition rates),
and its SHA-256 digest identifies the run in output headers.
"""

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .lindblad import DEFAULT_DT, TimeGrid
from .models import (
    CoupledEmitterParams,
    ExcitonBiexcitonParams,
    make_coupled_emitters,
    make_exciton_biexciton,
    make_two_level,
)
from .pulses import Pulse, pulse_train
from .regression import DetectionParams, default_stride, integration_window
from .scan import ScanConfig
from .units import UNITS, UnitError, fs_to_au, parse_quantity


class ConfigError(ValueError):
    """Schema violation; the message starts with the offending key path."""


# field -> (quantity kind or None for plain numbers/strings, required, default)
_MODEL_FIELDS = {
    "tls": {"omega": ("energy", True, None), "gamma": ("energy", True, None), "mu": ("dipole", True, None)},
    "exciton_biexciton": {
        "omega_x": ("energy", True, None),
        "delta": ("energy", False, "0 au"),
        "gamma": ("energy", True, None),
        "mu": ("dipole", True, None),
    },
    "coupled_emitters": {
        "omega1": ("energy", True, None),
        "omega2": ("energy", True, None),
        "g": ("energy", False, "0 au"),
        "gamma": ("energy", True, None),
        "mu": ("dipole", True, None),
    },
}

_PULSE_FIELDS = {
    "amplitude": ("field", True, None),
    "duration": ("time", True, None),
    "carrier": ("energy", True, None),
    "count": ("int", False, 2),
    "channels": ("list", False, None),
    "first_center": ("time", False, None),
}

_DETECTION_FIELDS = {
    "eta_c": ("number", True, None),
    "eta_f": ("number", True, None),
    "nu_rep": ("rate_hz", True, None),
    "gamma_f": ("energy", False, None),
    "fluorescence": ("str", False, "incoherent"),
}

_NUMERICS_FIELDS = {
    "dt": ("time", False, f"{DEFAULT_DT} au"),
    "pad": ("time", False, None),
    "t1_stride": ("int", False, None),
    "delay": ("time", False, None),
    "delay_min": ("time", False, "0 fs"),
    "delay_max": ("time", False, "220 fs"),
    "delay_step": ("time", False, "0.25 fs"),
}

_OUTPUT_FIELDS = {
    "directory": ("str", False, "out"),
    "precision": ("int", False, 9),
}

_BLOCKS = {
    "pulses": (_PULSE_FIELDS, True),
    "detection": (_DETECTION_FIELDS, True),
    "numerics": (_NUMERICS_FIELDS, False),
    "output": (_OUTPUT_FIELDS, False),
}


def _convert(path, kind, raw):
    if raw is None:
        return None
    if kind in ("energy", "time", "field", "dipole", "rate_hz"):
        if isinstance(raw, bool) or not isinstance(raw, str):
            raise ConfigError(f"{path}: expected a unit-tagged string such as '1.0 au', got {raw!r}")
        try:
            value, unit = parse_quantity(raw)
            return UNITS.to_au(value, unit, kind)
        except UnitError as e:
            raise ConfigError(f"{path}: {e}") from None
    if kind == "number":
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {raw!r}")
        return float(raw)
    if kind == "int":
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ConfigError(f"{path}: expected an integer, got {raw!r}")
        return raw
    if kind == "str":
        if not isinstance(raw, str):
            raise ConfigError(f"{path}: expected a string, got {raw!r}")
        return raw
    if kind == "list":
        if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
            raise ConfigError(f"{path}: expected a list of channel names, got {raw!r}")
        return list(raw)
    raise AssertionError(kind)


def _canonical_value(kind, value):
    if value is None:
        return None
    if kind == "rate_hz":
        return f"{value!r} Hz"
    if kind in ("energy", "time", "field", "dipole"):
        return f"{value!r} au"
    return value


def _parse_block(path, block, fields):
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = sorted(set(block) - set(fields))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown key")
    values, canon = {}, {}
    for key, (kind, required, default) in fields.items():
        if key in block:
            raw = block[key]
        elif required:
            raise ConfigError(f"{path}.{key}: missing required key")
        else:
            raw = default
        values[key] = _convert(f"{path}.{key}", kind, raw)
        canon[key] = _canonical_value(kind, values[key])
    return values, canon


@dataclass
class RunConfig:
    """Validated configuration in atomic units plus its canonical JSON form."""

    kind: str
    model: dict
    pulses: dict
    detection: dict
    numerics: dict
    output: dict
    canonical: dict

    @property
    def hash(self):
        text = json.dumps(self.canonical, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def to_json(self):
        return json.dumps(self.canonical, indent=2, sort_keys=True)

    def build_system(self):
        m = self.model
        if self.kind == "tls":
            return make_two_level(m["omega"], m["gamma"], m["mu"])
        if self.kind == "exciton_biexciton":
            return make_exciton_biexciton(ExcitonBiexcitonParams(m["omega_x"], m["delta"], m["gamma"], m["mu"]))
        return make_coupled_emitters(CoupledEmitterParams(m["omega1"], m["omega2"], m["g"], m["gamma"], m["mu"]))

    def template(self):
        p = self.pulses
        return Pulse(p["amplitude"], 0.0, p["duration"], p["carrier"])

    @property
    def channels(self):
        return tuple(self.pulses["channels"])

    @property
    def first_center(self):
        fc = self.pulses["first_center"]
        return 5.0 * self.pulses["duration"] if fc is None else fc

    def detection_params(self):
        d = self.detection
        gamma_f = d["gamma_f"] if d["gamma_f"] is not None else self.model["gamma"]
        return DetectionParams(d["eta_c"], d["eta_f"], d["nu_rep"], gamma_f)

    def drive(self, delay=None):
        delay = self.numerics["delay"] if delay is None else delay
        if delay is None:
            raise ConfigError("numerics.delay: a pulse delay is required for this command")
        return pulse_train(self.template(), self.first_center, delay, self.channels)

    def grid(self, system, drive):
        stride = self.numerics["t1_stride"]
        g = integration_window(system, drive, dt=self.numerics["dt"], pad=self.numerics["pad"])
        if stride is None:
            stride = default_stride(g.n_steps)
        return TimeGrid.covering(g.t_start, g.t_end, g.dt, multiple_of=stride), stride

    def scan_config(self, strict=False):
        n = self.numerics
        return ScanConfig(
            system=self.build_system(),
            template=self.template(),
            channels=self.channels,
            detection=self.detection_params(),
            t_min=n["delay_min"],
            t_max=n["delay_max"],
            t_step=n["delay_step"],
            first_center=self.first_center,
            dt=n["dt"],
            pad=n["pad"],
            strict=strict,
            fluorescence=self.detection["fluorescence"],
        )


def parse_config(text):
    """Parse and validate a JSON config document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"<root>: invalid JSON ({e})") from None
    return from_dict(doc)


def from_dict(doc):
    if not isinstance(doc, dict):
        raise ConfigError("<root>: expected an object")
    allowed = {"model"} | set(_BLOCKS)
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    if "model" not in doc:
        raise ConfigError("model: missing required block")
    model = doc["model"]
    if not isinstance(model, dict) or "kind" not in model:
        raise ConfigError("model.kind: missing required key")
    kind = model["kind"]
    if kind not in _MODEL_FIELDS:
        raise ConfigError(f"model.kind: unknown model {kind!r} (choose from {', '.join(_MODEL_FIELDS)})")
    mvals, mcanon = _parse_block("model", {k: v for k, v in model.items() if k != "kind"}, _MODEL_FIELDS[kind])
    canonical = {"model": {"kind": kind, **mcanon}}
    parsed = {}
    for name, (fields, required) in _BLOCKS.items():
        if name not in doc and required:
            raise ConfigError(f"{name}: missing required block")
        vals, canon = _parse_block(name, doc.get(name, {}), fields)
        parsed[name] = vals
        canonical[name] = canon

    cfg = RunConfig(kind, mvals, parsed["pulses"], parsed["detection"], parsed["numerics"], parsed["output"], canonical)
    _check_physics(cfg)
    return cfg


def _check_physics(cfg):
    system = cfg.build_system() if _model_ok(cfg) else None
    p = cfg.pulses
    for key in ("amplitude", "duration", "carrier"):
        if p[key] < 0 or (key != "amplitude" and p[key] == 0):
            raise ConfigError(f"pulses.{key}: must be positive")
    if p["count"] < 1:
        raise ConfigError("pulses.count: need at least one pulse")
    if p["channels"] is None:
        if len(system.drives) != 1:
            raise ConfigError(f"pulses.channels: required for model {cfg.kind!r} (channels: {sorted(system.drives)})")
        p["channels"] = [next(iter(system.drives))] * p["count"]
        cfg.canonical["pulses"]["channels"] = list(p["channels"])
    if len(p["channels"]) != p["count"]:
        raise ConfigError("pulses.channels: length must equal pulses.count")
    for i, ch in enumerate(p["channels"]):
        if ch not in system.drives:
            raise ConfigError(f"pulses.channels[{i}]: unknown channel {ch!r} (model has {sorted(system.drives)})")
    d = cfg.detection
    for key in ("eta_c", "eta_f"):
        if not 0.0 <= d[key] <= 1.0:
            raise ConfigError(f"detection.{key}: must lie in [0, 1]")
    if d["nu_rep"] <= 0:
        raise ConfigError("detection.nu_rep: must be positive")
    if d["gamma_f"] is not None and d["gamma_f"] <= 0:
        raise ConfigError("detection.gamma_f: must be positive")
    if d["fluorescence"] not in ("incoherent", "coherent"):
        raise ConfigError("detection.fluorescence: must be 'incoherent' or 'coherent'")
    n = cfg.numerics
    if n["dt"] <= 0:
        raise ConfigError("numerics.dt: must be positive")
    if n["pad"] is not None and n["pad"] <= 0:
        raise ConfigError("numerics.pad: must be positive")
    if n["t1_stride"] is not None and n["t1_stride"] < 1:
        raise ConfigError("numerics.t1_stride: must be >= 1")
    if n["delay"] is not None and n["delay"] < 0:
        raise ConfigError("numerics.delay: must be non-negative")
    if n["delay_max"] <= n["delay_min"]:
        raise ConfigError("numerics.delay_max: must exceed delay_min")
    if n["delay_step"] <= 0:
        raise ConfigError("numerics.delay_step: must be positive")
    if cfg.output["precision"] < 1:
        raise ConfigError("output.precision: must be >= 1")


def _model_ok(cfg):
    try:
        cfg.build_system()
    except ValueError as e:
        raise ConfigError(f"model: {e}") from None
    return True


def with_overrides(cfg, **overrides):
    """Re-parse ``cfg`` with dotted-key overrides, e.g. ``{"numerics.delay": "72 fs"}``."""
    doc = json.loads(json.dumps(cfg.canonical))
    for dotted, value in overrides.items():
        block, key = dotted.split(".")
        doc.setdefault(block, {})[key] = value
    return from_dict(doc)


PRESETS = ("fig1c", "fig2", "fig3")


def preset_text(name):
    name = name[:-5] if name.endswith(".json") else name
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    return resources.files("cpcs.presets").joinpath(f"{name}.json").read_text(encoding="utf-8")


def load_config(path_or_preset):
    """Load a config file, falling back to a bundled preset name (``fig2`` or ``fig2.json``)."""
    p = Path(path_or_preset)
    if p.is_file():
        return parse_config(p.read_text(encoding="utf-8"))
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    if stem in PRESETS:
        return parse_config(preset_text(stem))
    raise ConfigError(f"cannot read config {path_or_preset!r}")
