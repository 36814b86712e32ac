"""JSON configuration with flat keys, environment overrides and named validation errors."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from .solver import RunConfig

ENV_PREFIX = "STOCHVORT_"


class ConfigError(ValueError):
    """Invalid configuration; the message names the violated constraint."""


@dataclass(frozen=True)
class Options:
    """Experiment-level keys that sit beside the run parameters."""

    samples: int = 1000
    probe_t: float | None = None
    probe_x: tuple[float, float] = (3.141592653589793, 3.141592653589793)
    snapshot_every: int = 0
    picard_tol: float = 1e-11
    picard_max_iter: int = 50
    eps: tuple[float, ...] = (0.05, 0.1, 0.2)
    deltas: tuple[float, ...] | None = None
    C_p: float = 1.0
    bandwidth: float | None = None


RUN_KEYS = {f.name: f for f in fields(RunConfig) if f.name != "extra"}
OPTION_KEYS = {f.name: f for f in fields(Options)}
ALL_KEYS = set(RUN_KEYS) | set(OPTION_KEYS)

_INT_KEYS = {"K", "n", "seed", "ic_seed", "noise_cutoff", "samples", "snapshot_every", "picard_max_iter"}
_BOOL_KEYS = {"nonlinear"}
_STR_KEYS = {"ic"}
_TUPLE_KEYS = {"probe_x", "eps", "deltas"}


def _coerce(key: str, value: Any) -> Any:
    if value is None:
        return None
    try:
        if key in _BOOL_KEYS:
            if isinstance(value, bool):
                return value
            raise TypeError
        if key in _INT_KEYS:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if key in _STR_KEYS:
            if not isinstance(value, str):
                raise TypeError
            return value
        if key in _TUPLE_KEYS:
            return tuple(float(v) for v in value)
        if isinstance(value, bool):
            raise TypeError
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r} has invalid value {value!r}") from None


def env_overrides(environ: Mapping[str, str] | None = None) -> dict:
    """Values from ``STOCHVORT_<KEY>`` variables, parsed as JSON when possible."""
    environ = os.environ if environ is None else environ
    out = {}
    lower = {k.lower(): k for k in ALL_KEYS}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX) :]
        key = key if key in ALL_KEYS else lower.get(key.lower())
        if key is None:
            raise ConfigError(f"environment variable {name} does not name a config key")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def build(raw: Mapping[str, Any], subcommand: str | None = None) -> tuple[RunConfig, Options]:
    """Validate a flat mapping into ``(RunConfig, Options)``."""
    unknown = sorted(set(raw) - ALL_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    vals = {k: _coerce(k, v) for k, v in raw.items()}
    nullable = {"noise_cutoff", "probe_t", "deltas", "bandwidth"}
    for k, v in vals.items():
        if v is None and k not in nullable:
            raise ConfigError(f"config key {k!r} must not be null")
    b = vals.get("b", RunConfig.b)
    if not b > 0:
        raise ConfigError(f"b = {b:g} rejected: requires b > 0 (the stochastic convolution converges only for b > 0)")
    p = vals.get("p", RunConfig.p)
    if not p > 2:
        raise ConfigError(f"p = {p:g} rejected: requires p > 2 (L^p setting of the truncated equation)")
    if subcommand == "malliavin" and not p > 4:
        raise ConfigError(f"p = {p:g} rejected: malliavin requires p > 4 (differentiability of the truncated solution)")
    if subcommand == "malliavin" and not b > 1:
        raise ConfigError(f"b = {b:g} rejected: malliavin requires b > 1 (trace-class covariance for the window bound)")
    N = vals.get("N", RunConfig.N)
    if not N >= 1:
        raise ConfigError(f"N = {N:g} rejected: requires N >= 1 (truncation level)")
    run_kw = {k: v for k, v in vals.items() if k in RUN_KEYS}
    opt_kw = {k: v for k, v in vals.items() if k in OPTION_KEYS}
    try:
        cfg = RunConfig(**run_kw)
        opts = Options(**opt_kw)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if opts.samples < 2:
        raise ConfigError("samples rejected: requires samples >= 2")
    if len(opts.probe_x) != 2:
        raise ConfigError("probe_x must have two coordinates")
    return cfg, opts


def load_raw(path: str | Path | None) -> dict:
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object of flat keys")
    return raw


def parse_config(
    path: str | Path | None,
    subcommand: str | None = None,
    environ: Mapping[str, str] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> tuple[RunConfig, Options]:
    """Defaults < file < ``STOCHVORT_*`` environment < explicit overrides."""
    raw = load_raw(path)
    raw.update(env_overrides(environ))
    raw.update(overrides or {})
    return build(raw, subcommand)


def config_dict(cfg: RunConfig, opts: Options) -> dict:
    d = cfg.to_dict()
    for f in fields(Options):
        v = getattr(opts, f.name)
        d[f.name] = list(v) if isinstance(v, tuple) else v
    return d

