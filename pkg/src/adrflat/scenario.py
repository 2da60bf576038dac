"""Scenario files: TOML documents with one section per subsystem.

Sections are ``[plant] [nominal] [disturbance] [controller] [observer]
[reference] [sim]``. Every key is optional and falls back to the benchmark
defaults listed in ``DEFAULTS``; unknown sections or keys are rejected
with the offending line when it can be located. Parsing normalizes a file
into a plain dict, which is the round-trip unit: serialize(parse(text))
parses back to an identical dict.
"""

from __future__ import annotations

import sys
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .controller import ControllerSpec
from .errors import ScenarioError
from .plant import (
    DisturbanceSpec,
    NominalParams,
    PlantParams,
    constant_force,
    sincos_force,
    sine_force,
)
from .references import ConstantReference, SineReference, SmoothStepReference
from .simulate import Scenario

DEFAULTS = {
    "plant": {"m1": 0.1, "m2": 0.25, "b1": 2.5, "b2": 2.5, "b12": 1.25, "k": 100.0},
    "nominal": {"m1n": 0.065, "m2n": 0.0875, "b1n": 0.0, "b2n": 0.0, "kn": 265.0},
    "disturbance": {
        "f_ext": "sincos",
        "f_ext_amplitude": 25.0,
        "f_ext_freq1": 1.0,
        "f_ext_freq2": 3.0,
        "f_ext_sign": -1.0,
        "t_on": 2.5,
        "t_off": 10.0,
        "f_ud1": "none",
        "f_ud1_amplitude": 0.0,
        "f_ud1_freq": 1.0,
        "f_ud2": "none",
        "f_ud2_amplitude": 0.0,
        "f_ud2_freq": 1.0,
        "noise_std": 0.0,
    },
    "controller": {
        "variant": "polymatrix_robust",
        "poles": [-50.0, -50.0, -60.0, -60.0],
    },
    "observer": {"order": 2, "bandwidth": 1000.0, "literal_form": False},
    "reference": {
        "kind": "sine",
        "amplitude": 0.1,
        "frequency_hz": 0.5,
        "phase": 0.0,
        "rise_time": 0.5,
        "start_time": 0.0,
        "value": 0.0,
    },
    "sim": {
        "dt": 1e-5,
        "t_end": 10.0,
        "seed": 0,
        "log_every": 10,
        "engine": "fast",
        "structural_zeros": True,
        "truncate_missing": False,
    },
}

_FORCE_KINDS = ("none", "const", "sine", "sincos")
_VARIANTS = ("conventional", "brunovsky_robust", "polymatrix_robust", "none")
_REF_KINDS = ("sine", "step", "constant")
_ENGINES = ("fast", "reference")


def _find_line(text: str, section: str, key: str) -> Optional[int]:
    """Best-effort line number of a key inside its section."""
    in_section = False
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("["):
            in_section = stripped == f"[{section}]"
        elif in_section and stripped.split("=")[0].strip() == key:
            return i
    return None


def parse_scenario_text(text: str) -> dict:
    """Parse and normalize a scenario document into the full keyed dict."""
    try:
        raw = _toml.loads(text)
    except _toml.TOMLDecodeError as e:
        raise ScenarioError(f"TOML syntax error: {e}") from e
    cfg = {}
    for section, defaults in DEFAULTS.items():
        got = raw.pop(section, {})
        if not isinstance(got, dict):
            raise ScenarioError(f"section [{section}] must be a table")
        merged = dict(defaults)
        for key, value in got.items():
            if key not in defaults:
                line = _find_line(text, section, key)
                where = f" (line {line})" if line else ""
                raise ScenarioError(f"unknown key '{section}.{key}'{where}")
            merged[key] = value
        cfg[section] = merged
    if raw:
        stray = next(iter(raw))
        line = None
        for i, ln in enumerate(text.splitlines(), start=1):
            if ln.strip().startswith(f"[{stray}]") or ln.strip().split("=")[0].strip() == stray:
                line = i
                break
        where = f" (line {line})" if line else ""
        raise ScenarioError(f"unknown section or key '{stray}'{where}")
    _validate_cfg(cfg)
    return cfg


def load_scenario_file(path) -> dict:
    with open(path, "r") as fh:
        return parse_scenario_text(fh.read())


def _validate_cfg(cfg: dict) -> None:
    def need(cond, msg):
        if not cond:
            raise ScenarioError(msg)

    d = cfg["disturbance"]
    need(d["f_ext"] in _FORCE_KINDS, f"disturbance.f_ext must be one of {_FORCE_KINDS}")
    need(d["f_ud1"] in _FORCE_KINDS, f"disturbance.f_ud1 must be one of {_FORCE_KINDS}")
    need(d["f_ud2"] in _FORCE_KINDS, f"disturbance.f_ud2 must be one of {_FORCE_KINDS}")
    need(d["t_on"] <= d["t_off"], "disturbance.t_on must be <= t_off")
    noise = d["noise_std"]
    if isinstance(noise, list):
        need(len(noise) == 4, "disturbance.noise_std list must have 4 entries")
        need(all(v >= 0 for v in noise), "disturbance.noise_std must be >= 0")
    else:
        need(noise >= 0, "disturbance.noise_std must be >= 0")
    c = cfg["controller"]
    need(c["variant"] in _VARIANTS, f"controller.variant must be one of {_VARIANTS}")
    poles = c["poles"]
    need(isinstance(poles, list) and len(poles) == 4, "controller.poles must list 4 poles")
    for v in poles:
        if isinstance(v, list):
            need(len(v) == 2, "complex poles are [re, im] pairs")
    o = cfg["observer"]
    need(int(o["order"]) >= 0, "observer.order must be >= 0")
    need(o["bandwidth"] > 0, "observer.bandwidth must be > 0")
    r = cfg["reference"]
    need(r["kind"] in _REF_KINDS, f"reference.kind must be one of {_REF_KINDS}")
    s = cfg["sim"]
    need(s["dt"] > 0, "sim.dt must be > 0")
    need(s["t_end"] > 0, "sim.t_end must be > 0")
    need(int(s["log_every"]) >= 1, "sim.log_every must be >= 1")
    need(s["engine"] in _ENGINES, f"sim.engine must be one of {_ENGINES}")


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, list):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    raise ScenarioError(f"cannot serialize value {v!r}")


def serialize_scenario(cfg: dict) -> str:
    """Canonical TOML text with every key explicit."""
    lines = []
    for section in DEFAULTS:
        lines.append(f"[{section}]")
        for key in DEFAULTS[section]:
            lines.append(f"{key} = {_fmt_value(cfg[section][key])}")
        lines.append("")
    return "\n".join(lines)


def _force_from_cfg(kind: str, amplitude: float, f1: float, f2: float = None):
    if kind == "none":
        return None
    if kind == "const":
        return constant_force(amplitude)
    if kind == "sine":
        return sine_force(amplitude, f1)
    return sincos_force(amplitude, f1, f2)


def _poles_from_cfg(poles) -> tuple:
    out = []
    for v in poles:
        if isinstance(v, list):
            out.append(complex(v[0], v[1]))
        else:
            out.append(complex(float(v), 0.0))
    return tuple(out)


def build_scenario(cfg: dict) -> Scenario:
    """Instantiate the runtime scenario from a normalized dict."""
    p = cfg["plant"]
    plant = PlantParams(m1=p["m1"], m2=p["m2"], b1=p["b1"], b2=p["b2"], b12=p["b12"], k=p["k"])
    n = cfg["nominal"]
    nominal = NominalParams(m1n=n["m1n"], m2n=n["m2n"], b1n=n["b1n"], b2n=n["b2n"], kn=n["kn"])
    d = cfg["disturbance"]
    noise = d["noise_std"]
    disturbance = DisturbanceSpec(
        f_ext=_force_from_cfg(d["f_ext"], d["f_ext_amplitude"], d["f_ext_freq1"], d["f_ext_freq2"]),
        t_on=d["t_on"],
        t_off=d["t_off"],
        f_ext_sign=d["f_ext_sign"],
        f_ud1=_force_from_cfg(d["f_ud1"], d["f_ud1_amplitude"], d["f_ud1_freq"]),
        f_ud2=_force_from_cfg(d["f_ud2"], d["f_ud2_amplitude"], d["f_ud2_freq"]),
        measurement_noise_std=np.array(noise if isinstance(noise, list) else [noise] * 4),
    )
    o = cfg["observer"]
    c = cfg["controller"]
    if c["variant"] == "none":
        controller = None
    else:
        controller = ControllerSpec(
            variant=c["variant"],
            pole_set=_poles_from_cfg(c["poles"]),
            dob_order=int(o["order"]),
            dob_bandwidth=float(o["bandwidth"]),
        )
    r = cfg["reference"]
    if r["kind"] == "sine":
        reference = SineReference(
            amplitude=r["amplitude"], frequency_hz=r["frequency_hz"], phase=r["phase"]
        )
    elif r["kind"] == "step":
        reference = SmoothStepReference(
            amplitude=r["amplitude"], rise_time=r["rise_time"], start_time=r["start_time"]
        )
    else:
        reference = ConstantReference(value=r["value"])
    s = cfg["sim"]
    return Scenario(
        plant=plant,
        nominal=nominal,
        disturbance=disturbance,
        controller=controller,
        reference=reference,
        dt=float(s["dt"]),
        t_end=float(s["t_end"]),
        seed=int(s["seed"]),
        log_every=int(s["log_every"]),
        engine=s["engine"],
        dob_order=int(o["order"]),
        dob_bandwidth=float(o["bandwidth"]),
        literal_observer=bool(o["literal_form"]),
        structural_zeros=bool(s["structural_zeros"]),
        truncate_missing=bool(s["truncate_missing"]),
    )


def apply_overrides(cfg: dict, overrides: dict) -> dict:
    """Apply dotted-path overrides ('sim.dt') onto a normalized dict."""
    out = {s: dict(v) for s, v in cfg.items()}
    for path, value in overrides.items():
        if value is None:
            continue
        try:
            section, key = path.split(".")
        except ValueError as e:
            raise ScenarioError(f"override path '{path}' must be 'section.key'") from e
        if section not in out or key not in DEFAULTS[section]:
            raise ScenarioError(f"unknown override '{path}'")
        out[section][key] = value
    _validate_cfg(out)
    return out
