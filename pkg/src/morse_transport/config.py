"""Run configuration: one INI-style file with sections mirroring the
pipeline stages, plus dotted-path overrides from the command line.

Unknown sections or keys are errors; there is no silent typo tolerance.
All numbers are in reduced units (hbar = 1).
"""

from __future__ import annotations

import configparser
import copy
import io
from dataclasses import dataclass, field

from .errors import ConfigError

__all__ = ["RunConfig", "load_config", "apply_override", "default_config_text"]


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_horizon(s: str):
    v = s.strip().lower()
    if v == "auto":
        return "auto"
    return float(s)


def _parse_float_list(s: str):
    s = s.strip()
    if not s:
        return []
    return [float(x) for x in s.split(",")]


def _parse_str(s: str) -> str:
    return s.strip()


# schema: section -> key -> (parser, default)
_SCHEMA = {
    "morse": {
        "d": (float, 0.5),
        "a": (float, 1.0),
        "m": (float, 1.0),
        "kappa_max": (float, 3.0),
        "kappa_n": (int, 121),
    },
    "kernel": {
        "t_max": (float, 40.0),
        "n": (int, 800),
        "quad_tol": (float, 1e-9),
        "omega_max": (float, 5.0),
        "omega_n": (int, 201),
        "fourier_window": (float, 240.0),
        "fourier_dt": (float, 0.04),
        "fourier_omegas": (_parse_float_list, [0.5, 1.0, 2.0, 4.0]),
    },
    "fit": {
        "window_min": (float, 0.0),
        "window_max": (float, 40.0),
        "pin_dc": (_parse_bool, True),
        "init": (_parse_float_list, []),
    },
    "optimize": {
        "lambda": (float, -0.01),
        "p_dot0": (float, 1.0),
        "horizon": (_parse_horizon, "auto"),
        "fluence_target": (float, 7.03219),
        "lambda_sweep": (_parse_float_list, []),
        "trajectory_n": (int, 201),
    },
    "survival": {
        "kappa_max": (float, 8.0),
        "t_n": (int, 61),
        "quad_tol": (float, 1e-8),
        "mode_table": (_parse_str, ""),
        "initial": (_parse_str, "vacuum"),
        "k0_index": (int, 0),
    },
    "adiabaticity": {
        "kappa_min": (float, 0.02),
        "kappa_max": (float, 3.0),
        "kappa_n": (int, 50),
        "t_n": (int, 41),
        "margin": (float, 0.1),
    },
    "output": {
        "directory": (_parse_str, "out"),
        "formats": (_parse_str, "csv,json"),
        "svg": (_parse_bool, False),
    },
}

_INITIAL_STATES = ("vacuum", "one_phonon", "superposition")


@dataclass
class RunConfig:
    """Validated configuration for all pipeline stages."""

    sections: dict = field(default_factory=dict)

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]

    def get(self, section: str, key: str):
        return self.sections[section][key]

    def as_flat_dict(self) -> dict:
        return {f"{s}.{k}": v for s, d in sorted(self.sections.items())
                for k, v in sorted(d.items())}

    def validate(self) -> "RunConfig":
        m = self.sections["morse"]
        if m["d"] <= 0 or m["a"] <= 0 or m["m"] <= 0:
            raise ConfigError("morse parameters must be positive")
        k = self.sections["kernel"]
        if k["t_max"] <= 0 or k["n"] < 16:
            raise ConfigError("kernel grid needs t_max > 0 and n >= 16")
        o = self.sections["optimize"]
        if o["lambda"] == 0.0:
            raise ConfigError("optimize.lambda must be nonzero")
        if o["p_dot0"] == 0.0:
            raise ConfigError("optimize.p_dot0 must be nonzero")
        if o["horizon"] != "auto" and o["horizon"] <= 0:
            raise ConfigError("optimize.horizon must be positive or 'auto'")
        s = self.sections["survival"]
        if s["initial"] not in _INITIAL_STATES:
            raise ConfigError(
                f"survival.initial must be one of {_INITIAL_STATES}")
        if s["initial"] in ("one_phonon", "superposition") and not s["mode_table"]:
            raise ConfigError(
                f"survival.initial = {s['initial']!r} requires survival.mode_table")
        f = self.sections["fit"]
        if f["init"] and len(f["init"]) != 6:
            raise ConfigError("fit.init needs exactly 6 comma-separated values")
        if f["window_max"] <= f["window_min"]:
            raise ConfigError("fit window must be non-degenerate")
        return self


def _defaults() -> dict:
    return {s: {k: copy.deepcopy(spec[1]) for k, spec in d.items()}
            for s, d in _SCHEMA.items()}


def load_config(path=None, text=None) -> RunConfig:
    """Load and validate a config file (or raw text); missing keys take
    their defaults, unknown sections/keys raise ConfigError."""
    sections = _defaults()
    if path is not None or text is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            if text is None:
                with open(path, "r", encoding="utf-8") as fh:
                    parser.read_file(fh)
            else:
                parser.read_file(io.StringIO(text))
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        for sec in parser.sections():
            if sec not in _SCHEMA:
                raise ConfigError(f"unknown config section [{sec}]")
            for key, raw in parser.items(sec):
                if key not in _SCHEMA[sec]:
                    raise ConfigError(f"unknown config key {sec}.{key}")
                parse = _SCHEMA[sec][key][0]
                try:
                    sections[sec][key] = parse(raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {sec}.{key}: {exc}") from None
    return RunConfig(sections=sections).validate()


def apply_override(cfg: RunConfig, dotted: str) -> RunConfig:
    """Apply one 'section.key=value' override in place."""
    if "=" not in dotted:
        raise ConfigError(f"override must look like section.key=value: {dotted!r}")
    keypath, raw = dotted.split("=", 1)
    if "." not in keypath:
        raise ConfigError(f"override key must be dotted: {keypath!r}")
    sec, key = keypath.strip().split(".", 1)
    if sec not in _SCHEMA or key not in _SCHEMA[sec]:
        raise ConfigError(f"unknown config key {sec}.{key}")
    parse = _SCHEMA[sec][key][0]
    try:
        cfg.sections[sec][key] = parse(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {sec}.{key}: {exc}") from None
    cfg.validate()
    return cfg


def default_config_text() -> str:
    """Render the full default configuration as an annotated INI file."""
    out = ["# morse-transport run configuration (reduced units, hbar = 1)"]
    for sec, d in _SCHEMA.items():
        out.append(f"\n[{sec}]")
        for key, (_, default) in d.items():
            if isinstance(default, list):
                val = ",".join(str(v) for v in default)
            else:
                val = str(default)
            out.append(f"{key} = {val}")
    return "\n".join(out) + "\n"
