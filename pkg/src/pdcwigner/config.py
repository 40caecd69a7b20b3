"""Flat dotted-key run configuration.

File format: one ``key = value`` per line, ``#`` starts a comment. Unknown
keys are rejected. Values are parsed with the type of the default.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .correlations import coherence_time
from .crystal import HARD_MAX_COUPLING, CrystalParams
from .detection import DetectorConfig
from .fields import FieldProbe
from .modes import ModeGrid, PhaseMatchKernel, build_mode_grid


class ConfigError(Exception):
    """Unreadable file, unknown key or unparsable value."""


class ValidationError(Exception):
    def __init__(self, diagnostics):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _opt_float(text: str) -> float | None:
    return None if text.strip().lower() in ("none", "") else float(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (default, parser, formatter)
SCHEMA = {
    "grid.n_pairs": (16, int, str),
    "grid.pump_frequency": (2.0, float, repr),
    "grid.bandwidth": (0.2, float, repr),
    "grid.center_e": (1.0, float, repr),
    "grid.center_o": (1.0, float, repr),
    "crystal.g": (0.05, float, repr),
    "crystal.pump_amplitude": (1 + 0j, lambda s: complex(s.replace(" ", "")), repr),
    "crystal.transit_time": (1.0, float, repr),
    "crystal.kernel_sigma": (None, _opt_float, repr),
    "crystal.max_coupling": (0.1, float, repr),
    "detector.distance": (10.0, float, repr),
    "detector.samples_per_corr_time": (4, int, str),
    "detector.window_corr_times": (50.0, float, repr),
    "detector.efficiency": (1.0, float, repr),
    "detector.delay": (0.0, float, repr),
    "run.realizations": (100_000, int, str),
    "run.seed": (20_240_917, int, str),
    "run.workers": (1, int, str),
    "run.chunk_size": (8192, int, str),
    "run.out": ("pdcwigner-out", str, str),
    "correlate.points": (16, int, str),
    "correlate.step_corr_times": (0.5, float, repr),
    "detect.windows_corr_times": ((5.0, 10.0, 20.0, 50.0), _floats, lambda v: ",".join(repr(x) for x in v)),
    "detect.angle": (np.pi / 4, float, repr),
    "scan.engine": ("gaussian", str, str),
    "scan.steps": (6, int, str),
    "bell.engine": ("clipped", str, str),
    "bell.efficiencies": ((0.3, 0.6, 1.0), _floats, lambda v: ",".join(repr(x) for x in v)),
    "bell.scan": (True, _bool, str),
}


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    key: str
    message: str

    def __str__(self):
        return f"{self.severity}: {self.key}: {self.message}"


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        raw[key] = value
    return raw


def load_config(path=None, overrides=()) -> dict:
    """Resolve defaults, file values and ``key=value`` overrides into typed values."""
    raw = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        raw.update(parse_text(text, str(p)))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        raw[key] = value
    cfg = {key: default for key, (default, _, _) in SCHEMA.items()}
    for key, value in raw.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            cfg[key] = SCHEMA[key][1](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from exc
    return cfg


def format_config(cfg: dict) -> str:
    return "".join(f"{key} = {SCHEMA[key][2](cfg[key])}\n" for key in SCHEMA)


def validate(cfg: dict) -> list[Diagnostic]:
    diags = []

    def err(key, msg):
        diags.append(Diagnostic("error", key, msg))

    wp, we, wo = cfg["grid.pump_frequency"], cfg["grid.center_e"], cfg["grid.center_o"]
    for key in ("grid.pump_frequency", "grid.center_e", "grid.center_o"):
        if cfg[key] <= 0:
            err(key, "frequency must be positive")
    if not np.isclose(we + wo, wp, rtol=1e-12, atol=0.0):
        err("grid.center_e", f"frequency matching condition violated: center_e + center_o = {we + wo!r} "
                             f"!= pump_frequency = {wp!r}")
    if cfg["grid.n_pairs"] < 1:
        err("grid.n_pairs", "need at least one pair per sector")
    if cfg["grid.bandwidth"] < 0 or cfg["grid.bandwidth"] >= min(we, wo):
        err("grid.bandwidth", "bandwidth must be non-negative and below both center frequencies")
    if cfg["crystal.transit_time"] <= 0:
        err("crystal.transit_time", "must be positive")
    if cfg["crystal.g"] < 0:
        err("crystal.g", "must be non-negative")
    sigma = cfg["crystal.kernel_sigma"]
    if sigma is not None and sigma <= 0:
        err("crystal.kernel_sigma", "must be positive or none")
    ceiling = cfg["crystal.max_coupling"]
    if not 0 < ceiling <= HARD_MAX_COUPLING:
        err("crystal.max_coupling", f"must lie in (0, {HARD_MAX_COUPLING}]")
    coupling = cfg["crystal.g"] * abs(cfg["crystal.pump_amplitude"])
    if coupling > ceiling:
        diags.append(Diagnostic("warning", "crystal.g",
                                f"g|V| = {coupling:g} exceeds the perturbative ceiling {ceiling:g}"))
    if cfg["detector.distance"] < 0:
        err("detector.distance", "must be non-negative")
    if cfg["detector.samples_per_corr_time"] < 1:
        err("detector.samples_per_corr_time", "must be >= 1")
    if cfg["detector.window_corr_times"] <= 0:
        err("detector.window_corr_times", "must be positive")
    if any(w <= 0 for w in cfg["detect.windows_corr_times"]) or not cfg["detect.windows_corr_times"]:
        err("detect.windows_corr_times", "need one or more positive window lengths")
    if not 0 < cfg["detector.efficiency"] <= 1:
        err("detector.efficiency", "must lie in (0, 1]")
    if not cfg["bell.efficiencies"] or any(not 0 < e <= 1 for e in cfg["bell.efficiencies"]):
        err("bell.efficiencies", "each efficiency must lie in (0, 1]")
    if cfg["run.realizations"] < 2:
        err("run.realizations", "need at least two realizations")
    if not 0 <= cfg["run.seed"] < 2 ** 64:
        err("run.seed", "must be a 64-bit unsigned integer")
    if cfg["run.workers"] < 1:
        err("run.workers", "must be >= 1")
    if cfg["run.chunk_size"] < 1:
        err("run.chunk_size", "must be >= 1")
    if cfg["correlate.points"] < 1:
        err("correlate.points", "must be >= 1")
    if cfg["scan.steps"] < 2:
        err("scan.steps", "need at least two angles per polarizer")
    for key in ("scan.engine", "bell.engine"):
        if cfg[key] not in ("gaussian", "direct", "clipped"):
            err(key, f"unknown engine {cfg[key]!r}")
    return diags


@dataclass(frozen=True)
class RunConfig:
    values: dict

    @classmethod
    def load(cls, path=None, overrides=()) -> "RunConfig":
        cfg = load_config(path, overrides)
        errors = [d for d in validate(cfg) if d.severity == "error"]
        if errors:
            raise ValidationError(errors)
        return cls(cfg)

    def __getitem__(self, key):
        return self.values[key]

    def grid(self) -> ModeGrid:
        v = self.values
        return build_mode_grid(v["grid.n_pairs"], v["grid.pump_frequency"], v["grid.bandwidth"],
                               v["grid.center_e"], v["grid.center_o"])

    def crystal(self) -> CrystalParams:
        v = self.values
        return CrystalParams(v["crystal.g"], v["crystal.pump_amplitude"], v["crystal.transit_time"],
                             v["grid.pump_frequency"], PhaseMatchKernel(v["crystal.kernel_sigma"]),
                             v["crystal.max_coupling"])

    def sample_step(self, grid: ModeGrid, params: CrystalParams) -> tuple[float, float]:
        """(correlation time, probe sample spacing)."""
        tc = coherence_time(grid, params)
        if not np.isfinite(tc):
            tc = 1.0
        return tc, tc / self.values["detector.samples_per_corr_time"]

    def detectors(self, grid: ModeGrid, params: CrystalParams, window_corr_times: float | None = None,
                  clip: bool = False) -> tuple[DetectorConfig, DetectorConfig]:
        v = self.values
        _, dt = self.sample_step(grid, params)
        n_corr = v["detector.window_corr_times"] if window_corr_times is None else window_corr_times
        n = max(1, int(round(n_corr * v["detector.samples_per_corr_time"])))
        return tuple(DetectorConfig(FieldProbe.uniform(beam, v["detector.distance"], dt, n), clip,
                                    v["detector.efficiency"]) for beam in (1, 2))
