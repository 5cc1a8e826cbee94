"""Run configuration: defaults, INI-style file and command-line overrides.

A config file has ``[scenario]``, ``[learner]`` and ``[suite]`` sections with
flat ``key = value`` lines.  Unbounded buffer or deadline is written ``inf``.
Precedence is flag, then file, then ``CHAINDECODE_SEED`` (seed only), then
the built-in default.
"""
from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field, fields, replace

SEED_ENV = "CHAINDECODE_SEED"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _optional_int(text):
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        if math.isinf(text):
            return None
        return int(text)
    if text is None or str(text).strip().lower() in ("inf", "none", "unbounded", ""):
        return None
    value = int(text)
    if value < 0:
        raise ValueError("must be nonnegative")
    return value


def _bool(text):
    if isinstance(text, bool):
        return text
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).replace(",", " ").split())


def _optional_ints(text):
    if isinstance(text, (list, tuple)):
        return tuple(_optional_int(x) for x in text)
    return tuple(_optional_int(x) for x in str(text).replace(",", " ").split())


def _step(text):
    s = str(text).strip().lower()
    if s not in ("decay", "const"):
        raise ValueError("step must be 'decay' or 'const'")
    return s


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise ValueError("must be positive")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise ValueError("must be at least 1")
    return v


@dataclass(frozen=True)
class RunConfig:
    # [scenario]
    dsp_over_d0: float = 2.0
    pathloss_alpha: float = 2.0
    mean_snr_p: float = 20.0
    nabla_th: float = 0.1
    scheme: str = "OPCD"
    bmax: int | None = None
    tarq: int | None = None
    horizon: int = 100_000
    seed: int = 0
    seeds: int = 10
    jobs: int = 1
    # [learner]
    learner: bool = False
    beta0: float = 0.5
    rate_beta0: float | None = None
    step: str = "decay"
    nu0: float = 0.0
    rate0: float = 0.0
    # [suite]
    distances: tuple = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0)
    nabla_grid: tuple = (0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
    bmax_grid: tuple = (0, 1, 2, 3, 4, 6, 8, None)
    tarq_grid: tuple = (2, 4, 8, None)
    tracking_horizon: int = 10_000
    tracking_beta: float = 0.01
    fig8_dsp: float = 2.5
    fig7_dsp: float = 2.5
    fig6_dsp: float = 2.0


_PARSERS = {
    "dsp_over_d0": ("scenario", _positive_float),
    "pathloss_alpha": ("scenario", _positive_float),
    "mean_snr_p": ("scenario", _positive_float),
    "nabla_th": ("scenario", float),
    "scheme": ("scenario", lambda s: str(s).strip().upper()),
    "bmax": ("scenario", _optional_int),
    "tarq": ("scenario", _optional_int),
    "horizon": ("scenario", _positive_int),
    "seed": ("scenario", int),
    "seeds": ("scenario", _positive_int),
    "jobs": ("scenario", _positive_int),
    "learner": ("learner", _bool),
    "beta0": ("learner", _positive_float),
    "rate_beta0": ("learner", _positive_float),
    "step": ("learner", _step),
    "nu0": ("learner", float),
    "rate0": ("learner", float),
    "distances": ("suite", _floats),
    "nabla_grid": ("suite", _floats),
    "bmax_grid": ("suite", _optional_ints),
    "tarq_grid": ("suite", _optional_ints),
    "tracking_horizon": ("suite", _positive_int),
    "tracking_beta": ("suite", _positive_float),
    "fig8_dsp": ("suite", _positive_float),
    "fig7_dsp": ("suite", _positive_float),
    "fig6_dsp": ("suite", _positive_float),
}

assert set(_PARSERS) == {f.name for f in fields(RunConfig)}

SCHEMES = ("OPCD", "BIC", "NACD", "AO", "GENIE")


def _parse(key, value):
    try:
        return _PARSERS[key][1](value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for '{key}': {value!r} ({exc})") from None


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.scheme not in SCHEMES:
        raise ConfigError(f"invalid value for 'scheme': {cfg.scheme!r} (expected one of {', '.join(SCHEMES)})")
    if cfg.nabla_th < 0:
        raise ConfigError("invalid value for 'nabla_th': must be nonnegative")
    if cfg.tarq is not None and cfg.tarq < 1:
        raise ConfigError("invalid value for 'tarq': must be at least 1 or inf")
    if not 0.0 <= cfg.nu0 <= 2.0:
        raise ConfigError("invalid value for 'nu0': must lie in [0, 2]")
    if cfg.rate0 < 0:
        raise ConfigError("invalid value for 'rate0': must be nonnegative")
    return cfg


def read_config_file(path) -> dict:
    """Parse a config file into ``{key: value}``; unknown sections/keys are errors."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from None
    out = {}
    for section in parser.sections():
        if section not in ("scenario", "learner", "suite"):
            raise ConfigError(f"unknown config section '[{section}]'")
        for key, value in parser.items(section):
            if key not in _PARSERS or _PARSERS[key][0] != section:
                raise ConfigError(f"unknown config key '{key}' in section [{section}]")
            out[key] = _parse(key, value)
    return out


def build_config(file_path=None, overrides: dict | None = None, environ=None) -> RunConfig:
    """Merge defaults, the optional file, the seed env var and flag overrides."""
    environ = os.environ if environ is None else environ
    values = {}
    if SEED_ENV in environ:
        values["seed"] = _parse("seed", environ[SEED_ENV])
    if file_path is not None:
        values.update(read_config_file(file_path))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = _parse(key, value) if isinstance(value, str) else value
    return _validate(replace(RunConfig(), **values))
