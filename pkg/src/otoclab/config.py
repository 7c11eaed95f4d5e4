"""Experiment configuration: a flat ``key = value`` text format.

Grammar (one item per line)::

    # comment                       ignored, as are blank lines
    [section]                       optional grouping header
    key = value                     scalar entry
    [grid]                          entries below are sweep axes:
    b = 0.015625, 0.03125           comma-separated values

Sections other than ``[grid]`` only group keys; any known key may appear
in any of them.  Windows are written ``lo, hi``.  Every error carries the
offending line number.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Tuple

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "MODES",
    "parse_config",
    "serialize_config",
    "config_from_mapping",
    "EXACT_AUTO_MAX_N",
    "apply_overrides",
]

MODES = ("otoc", "classical", "rmt", "husimi", "sweep")
FITS = ("lyapunov", "power", "relaxation")
GRID_KEYS = ("K1", "K2", "b", "N", "epsilon")
SECTIONS = ("run", "model", "estimator", "fit", "classical", "rmt", "husimi", "grid")

# the exact estimator is chosen automatically up to this N
EXACT_AUTO_MAX_N = 64


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""

    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    # model
    N: int = 64
    K1: float = 9.0
    K2: float = 10.0
    b: float = 0.0
    alpha: float = 0.35
    beta: float = 0.0
    epsilon: float = 0.1
    ensemble: str = "CUE"
    # run
    t_max: int = 20
    seed: int = 0
    n_jobs: int = 1
    normalization: str = "trace-over-N2"
    # estimator
    estimator: str = "auto"
    n_probe: int = 64
    # fits
    fits: Tuple[str, ...] = ("lyapunov",)
    growth_window: Optional[Tuple[int, int]] = None
    relaxation_window: Optional[Tuple[int, int]] = None
    # classical
    n_samples: int = 10_000
    n_traj: int = 100
    t_steps: int = 10_000
    # rmt
    n_real: int = 200
    # husimi
    G: int = 64
    times: Tuple[int, ...] = (0, 2, 4, 6, 8, 12, 14, 16, 18, 20)
    center: Tuple[float, float, float, float] = (0.3, 0.2, 0.6, 0.4)
    subsystem: int = 1
    # sweep
    point_mode: str = "otoc"
    grid: Tuple[Tuple[str, Tuple[float, ...]], ...] = field(default=())

    @property
    def resolved_estimator(self):
        if self.estimator != "auto":
            return self.estimator
        return "exact" if self.N <= EXACT_AUTO_MAX_N else "stochastic"

    def grid_dict(self):
        return dict(self.grid)

    def replace(self, **changes):
        return replace(self, **changes)


KEYS = tuple(f.name for f in fields(ExperimentConfig) if f.name != "grid")


def _parse_float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError(f"{s!r} is not finite")
    return v


def _parse_int(s):
    f = float(s)
    if f != int(f):
        raise ValueError(f"{s!r} is not an integer")
    return int(f)


def _split(s):
    return [x.strip() for x in s.split(",") if x.strip()]


def _convert(key, raw):
    if key in ("mode", "ensemble", "estimator", "normalization", "point_mode"):
        return raw.strip()
    if key in ("N", "t_max", "seed", "n_jobs", "n_probe", "n_samples", "n_traj",
               "t_steps", "n_real", "G", "subsystem"):
        return _parse_int(raw)
    if key in ("growth_window", "relaxation_window"):
        if raw.strip().lower() in ("", "auto", "none"):
            return None
        parts = _split(raw)
        if len(parts) != 2:
            raise ValueError("window needs two integers 'lo, hi'")
        return (_parse_int(parts[0]), _parse_int(parts[1]))
    if key == "fits":
        if raw.strip().lower() == "none":
            return ()
        return tuple(_split(raw))
    if key == "times":
        return tuple(_parse_int(x) for x in _split(raw))
    if key == "center":
        parts = tuple(_parse_float(x) for x in _split(raw))
        if len(parts) != 4:
            raise ValueError("center needs four numbers 'q1, p1, q2, p2'")
        return parts
    return _parse_float(raw)


def _validate(cfg: ExperimentConfig, lines, end_line=None):
    def bad(key, msg):
        raise ConfigError(f"{key}: {msg}", lines.get(key))

    if cfg.mode not in MODES:
        bad("mode", f"must be one of {', '.join(MODES)}, got {cfg.mode!r}")
    if cfg.N < 2:
        bad("N", "must be >= 2")
    for k in ("alpha", "beta"):
        if not 0.0 <= getattr(cfg, k) < 1.0:
            bad(k, "must lie in [0, 1)")
    if not 0.0 <= cfg.epsilon <= 1.0:
        bad("epsilon", "must lie in [0, 1]")
    if cfg.ensemble not in ("CUE", "COE"):
        bad("ensemble", "must be CUE or COE")
    if cfg.t_max < 0:
        bad("t_max", "must be >= 0")
    if cfg.seed < 0:
        bad("seed", "must be >= 0")
    if cfg.n_jobs < 1:
        bad("n_jobs", "must be >= 1")
    if cfg.normalization not in ("trace-over-N2", "raw-trace"):
        bad("normalization", "must be trace-over-N2 or raw-trace")
    if cfg.estimator not in ("auto", "exact", "stochastic"):
        bad("estimator", "must be auto, exact or stochastic")
    if cfg.n_probe < 2:
        bad("n_probe", "must be >= 2")
    for f in cfg.fits:
        if f not in FITS:
            bad("fits", f"unknown fit {f!r}; choose from {', '.join(FITS)}")
    for k in ("growth_window", "relaxation_window"):
        w = getattr(cfg, k)
        if w is not None and not 0 <= w[0] <= w[1]:
            bad(k, "needs 0 <= lo <= hi")
    if cfg.n_samples < 100:
        bad("n_samples", "must be >= 100")
    if cfg.n_traj < 1:
        bad("n_traj", "must be >= 1")
    if cfg.t_steps < 100:
        bad("t_steps", "must be >= 100")
    if cfg.n_real < 2:
        bad("n_real", "must be >= 2")
    if cfg.G < 1:
        bad("G", "must be >= 1")
    if any(t < 0 for t in cfg.times):
        bad("times", "must be non-negative")
    if any(not 0.0 <= c < 1.0 for c in cfg.center):
        bad("center", "coordinates must lie in [0, 1)")
    if cfg.subsystem not in (1, 2):
        bad("subsystem", "must be 1 or 2")
    if cfg.point_mode not in MODES or cfg.point_mode == "sweep":
        bad("point_mode", "must be otoc, classical, rmt or husimi")
    if cfg.mode == "sweep":
        if not cfg.grid:
            raise ConfigError("sweep needs a non-empty [grid] section",
                              lines.get("grid", end_line))
        for k, vals in cfg.grid:
            if not vals:
                raise ConfigError(f"grid axis {k} is empty", lines.get("grid." + k))
    return cfg


def config_from_mapping(values, grid=(), lines=None, end_line=None):
    """Build and validate a config from already-converted values."""
    lines = lines or {}
    if "mode" not in values:
        raise ConfigError("missing required key 'mode'", end_line)
    try:
        cfg = ExperimentConfig(grid=tuple(grid), **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return _validate(cfg, lines, end_line)


def parse_config(text: str) -> ExperimentConfig:
    values, grid, lines = {}, [], {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if section == "grid":
            if key not in GRID_KEYS:
                raise ConfigError(
                    f"unknown grid axis {key!r}; choose from {', '.join(GRID_KEYS)}", lineno)
            if key in dict(grid):
                raise ConfigError(f"duplicate grid axis {key!r}", lineno)
            try:
                conv = _parse_int if key == "N" else _parse_float
                axis = tuple(conv(x) for x in _split(val))
            except ValueError as exc:
                raise ConfigError(f"grid axis {key}: {exc}", lineno) from None
            grid.append((key, axis))
            lines.setdefault("grid", lineno)
            lines["grid." + key] = lineno
            continue
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        try:
            values[key] = _convert(key, val)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno) from None
        lines[key] = lineno
    return config_from_mapping(values, grid, lines,
                               end_line=len(text.splitlines()) + 1)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


_LAYOUT = (
    ("run", ("mode", "point_mode", "t_max", "seed", "n_jobs", "normalization")),
    ("model", ("N", "K1", "K2", "b", "alpha", "beta", "epsilon", "ensemble")),
    ("estimator", ("estimator", "n_probe")),
    ("fit", ("fits", "growth_window", "relaxation_window")),
    ("classical", ("n_samples", "n_traj", "t_steps")),
    ("rmt", ("n_real",)),
    ("husimi", ("G", "times", "center", "subsystem")),
)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config`` of it returns an equal config."""
    out = []
    for section, keys in _LAYOUT:
        out.append(f"[{section}]")
        for k in keys:
            v = getattr(cfg, k)
            if k in ("growth_window", "relaxation_window") and v is None:
                v = "auto"
            elif k == "fits" and not v:
                v = "none"
            out.append(f"{k} = {_fmt(v)}")
        out.append("")
    if cfg.grid:
        out.append("[grid]")
        for k, vals in cfg.grid:
            out.append(f"{k} = {_fmt(tuple(vals))}")
        out.append("")
    return "\n".join(out)


def apply_overrides(cfg: ExperimentConfig, overrides, grid=None) -> ExperimentConfig:
    """Replace keys of ``cfg`` with textual ``overrides`` (``{key: text}``).

    ``grid`` maps sweep axes to comma-separated value text and replaces
    axes of the same name.  The result is validated again.
    """
    values = {f.name: getattr(cfg, f.name) for f in fields(cfg) if f.name != "grid"}
    for key, raw in overrides.items():
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    axes = dict(cfg.grid)
    for key, raw in (grid or {}).items():
        if key not in GRID_KEYS:
            raise ConfigError(f"unknown grid axis {key!r}; choose from {', '.join(GRID_KEYS)}")
        conv = _parse_int if key == "N" else _parse_float
        try:
            axes[key] = tuple(conv(x) for x in _split(raw))
        except ValueError as exc:
            raise ConfigError(f"grid axis {key}: {exc}") from None
    return config_from_mapping(values, tuple(axes.items()))
