"""Flat ``key = value`` configuration files.

One assignment per line, ``#`` starts a comment.  Values are kept as
strings; the typed accessors convert them and report the source line on
failure.  Units at this boundary are the human ones (V, Hz, um, mT);
everything handed to the physics modules is SI.
"""
from __future__ import annotations

import math
import re

from .errors import ConfigError, ConstraintViolation
from .model import (
    E_CHARGE,
    SILICA_DENSITY,
    RigidBody,
    SpheroidSpec,
    TrapDrive,
    body_from_spheroid,
    validate_trap,
)

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


class Config:
    """Parsed configuration: ``values[key] -> str`` and ``lines[key] -> int``."""

    def __init__(self, values=None, lines=None):
        self.values = dict(values or {})
        self.lines = dict(lines or {})

    def __contains__(self, key):
        return key in self.values

    def keys(self):
        return sorted(self.values)

    def set(self, key, value, line=None):
        if not _KEY.match(key):
            raise ConfigError(f"invalid key {key!r}", line)
        self.values[key] = str(value).strip()
        self.lines[key] = line

    def get_str(self, key, default=None):
        if key not in self.values:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        return self.values[key]

    def get_float(self, key, default=None):
        if key not in self.values:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return float(default)
        try:
            value = float(self.values[key])
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {self.values[key]!r}", self.lines.get(key)) from None
        if not math.isfinite(value):
            raise ConfigError(f"{key}: value must be finite", self.lines.get(key))
        return value

    def get_int(self, key, default=None):
        value = self.get_float(key, default)
        if value != int(value):
            raise ConfigError(f"{key}: expected an integer", self.lines.get(key))
        return int(value)

    def get_vector(self, key, default=None, size=3):
        if key not in self.values:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return tuple(float(v) for v in default)
        parts = [p for p in re.split(r"[,\s]+", self.values[key].strip()) if p]
        try:
            out = tuple(float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"{key}: expected {size} comma-separated numbers", self.lines.get(key)) from None
        if len(out) != size:
            raise ConfigError(f"{key}: expected {size} comma-separated numbers", self.lines.get(key))
        return out

    def snapshot(self):
        """Deterministic ``key = value`` text of every setting."""
        return "".join(f"{k} = {self.values[k]}\n" for k in self.keys())


def parse_config(text: str) -> Config:
    cfg = Config()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", lineno)
        if key in cfg.values:
            raise ConfigError(f"duplicate key {key!r} (first on line {cfg.lines[key]})", lineno)
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno)
        cfg.set(key, value, lineno)
    return cfg


def load_config(path) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def apply_overrides(cfg: Config, assignments) -> Config:
    """Apply ``key=value`` strings (command-line ``--set``) on top of ``cfg``."""
    for item in assignments or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        cfg.set(key, value)
    return cfg


def _wrap(func, cfg, keys):
    try:
        return func()
    except ConstraintViolation as exc:
        line = next((cfg.lines.get(k) for k in keys if cfg.lines.get(k) is not None), None)
        raise ConfigError(str(exc), line) from exc


def trap_from_config(cfg: Config, freq_hz=None) -> TrapDrive:
    keys = ("trap.v0_volts", "trap.freq_hz", "trap.ell0_um", "trap.ax", "trap.ay", "trap.az")
    f = cfg.get_float("trap.freq_hz") if freq_hz is None else freq_hz

    def build():
        return validate_trap(
            TrapDrive(
                V0=cfg.get_float("trap.v0_volts"),
                omega_d=2.0 * math.pi * f,
                ell0=cfg.get_float("trap.ell0_um") / 1e6,
                a_x=cfg.get_float("trap.ax"),
                a_y=cfg.get_float("trap.ay"),
                a_z=cfg.get_float("trap.az"),
            )
        )

    return _wrap(build, cfg, keys)


def body_from_config(cfg: Config) -> RigidBody:
    gamma0 = 2.0 * math.pi * cfg.get_float("damping.gamma0_hz", 0.0)
    if "body.spheroid.a_um" in cfg:
        keys = ("body.spheroid.a_um", "body.spheroid.b_um", "body.spheroid.charges_e")

        def build():
            spec = SpheroidSpec(
                a_minor=cfg.get_float("body.spheroid.a_um") / 1e6,
                b_major=cfg.get_float("body.spheroid.b_um") / 1e6,
                q_tot=cfg.get_float("body.spheroid.charges_e") * E_CHARGE,
                density=cfg.get_float("body.spheroid.density", SILICA_DENSITY),
            )
            return body_from_spheroid(spec, gamma0=gamma0, quadrupole=cfg.get_str("body.quadrupole", "approx"))

        return _wrap(build, cfg, keys)
    keys = ("body.I1", "body.I2", "body.I3", "body.Q1", "body.Q2", "body.Q3")

    def build_explicit():
        return RigidBody(
            I1=cfg.get_float("body.I1"),
            I2=cfg.get_float("body.I2"),
            I3=cfg.get_float("body.I3"),
            Q1=cfg.get_float("body.Q1"),
            Q2=cfg.get_float("body.Q2"),
            Q3=cfg.get_float("body.Q3"),
            q_tot=cfg.get_float("body.charge_c"),
            mass=cfg.get_float("body.mass_kg"),
            gamma0=gamma0,
        )

    return _wrap(build_explicit, cfg, keys)


FIG3_CONFIG = """\
# rods of 15 um x 4 um carrying 2500 elementary charges
trap.v0_volts = 800
trap.freq_hz = 4500
trap.ell0_um = 30
trap.ax = -0.049
trap.ay = 0.054
trap.az = -0.005
body.spheroid.a_um = 4
body.spheroid.b_um = 15
body.spheroid.charges_e = 2500
body.spheroid.density = 2200
body.quadrupole = approx
damping.gamma0_hz = 1000
"""
