"""Scenario configuration: INI-style files with strict key checking."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace

from ..geometry import DomainSpec, GeometryError, polydisk, unit_ball, unit_disk

CONFIG_VERSION = 1

SUITES = ("metric", "horospheres", "wolff", "dynamics", "herve")

_SCENARIO_KEYS = {"version", "domain", "suite", "seed", "out"}
_BUDGET_KEYS = {"samples", "pairs", "iterations", "orbit_steps", "starts", "cluster_radius"}
_TOLERANCE_KEYS = {"margin", "bounds", "invariance", "cluster", "wolff"}
_PLOT_KEYS = {"kind", "grid", "radius", "center", "map", "start", "steps"}
_SECTIONS = {"scenario", "maps", "budgets", "tolerances", "plot"}


class ConfigError(ValueError):
    """Malformed scenario configuration."""


@dataclass(frozen=True)
class Budgets:
    samples: int = 2000
    pairs: int = 200
    iterations: int = 50
    orbit_steps: int = 2000
    starts: int = 30
    cluster_radius: float = 1e-3


@dataclass(frozen=True)
class Tolerances:
    margin: float = 1e-9
    bounds: float = 1e-6
    invariance: float = 1e-7
    cluster: float = 1e-3
    wolff: float = 1e-6


@dataclass(frozen=True)
class PlotSpec:
    kind: str = "margin-grid"  # or "orbit-trace"
    grid: int = 201
    radius: float = 1.0
    center: tuple | None = None  # None: domain default boundary point
    map_text: str | None = None
    start: tuple | None = None  # None: origin
    steps: int = 60


@dataclass(frozen=True)
class ScenarioConfig:
    version: int = CONFIG_VERSION
    domain: DomainSpec = field(default_factory=lambda: polydisk(2))
    suite: str = "metric"
    seed: int = 42
    out: str | None = None
    maps: tuple = ()
    budgets: Budgets = field(default_factory=Budgets)
    tolerances: Tolerances = field(default_factory=Tolerances)
    plot: PlotSpec = field(default_factory=PlotSpec)
    tol_override: float | None = None

    def margin_tol(self) -> float:
        return self.tol_override if self.tol_override is not None else self.tolerances.margin

    def invariance_tol(self) -> float:
        return self.tol_override if self.tol_override is not None else self.tolerances.invariance


def parse_domain(text: str) -> DomainSpec:
    text = text.strip().lower()
    if text == "disk":
        return unit_disk()
    for name, factory in (("polydisk", polydisk), ("ball", unit_ball)):
        if text.startswith(name + ":"):
            try:
                dim = int(text.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"bad domain dimension in {text!r}") from None
            try:
                return factory(dim)
            except GeometryError as err:
                raise ConfigError(str(err)) from None
    raise ConfigError(f"unknown domain {text!r}; use disk, polydisk:N or ball:N")


def _parse_complex_pair(text: str, what: str) -> tuple:
    parts = [p.strip() for p in text.split(",")]
    try:
        return tuple(complex(p.replace("i", "j")) for p in parts)
    except ValueError:
        raise ConfigError(f"bad {what} {text!r}") from None


def _get_int(section, key, fallback):
    raw = section.get(key)
    if raw is None:
        return fallback
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {raw!r}") from None


def _get_float(section, key, fallback):
    raw = section.get(key)
    if raw is None:
        return fallback
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {raw!r}") from None


def load_config(path: str) -> ScenarioConfig:
    """Read a scenario file; unknown sections or keys are rejected."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    except configparser.Error as err:
        raise ConfigError(f"malformed config {path}: {err}") from None

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")

    if not parser.has_section("scenario"):
        raise ConfigError("missing [scenario] section")
    scen = parser["scenario"]
    for key in scen:
        if key not in _SCENARIO_KEYS:
            raise ConfigError(f"unknown key {key!r} in [scenario]")
    if "version" not in scen:
        raise ConfigError("missing version key in [scenario]")
    version = _get_int(scen, "version", None)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")
    if "domain" not in scen:
        raise ConfigError("missing domain key in [scenario]")
    domain = parse_domain(scen["domain"])
    suite = scen.get("suite", "metric").strip()
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; pick one of {', '.join(SUITES)}")
    seed = _get_int(scen, "seed", 42)
    out = scen.get("out") or None

    maps: list[str] = []
    if parser.has_section("maps"):
        items = sorted(parser["maps"].items())
        for key, value in items:
            if not key.startswith("map"):
                raise ConfigError(f"unknown key {key!r} in [maps]; use map1, map2, ...")
            maps.append(value.strip())

    budgets = Budgets()
    if parser.has_section("budgets"):
        sec = parser["budgets"]
        for key in sec:
            if key not in _BUDGET_KEYS:
                raise ConfigError(f"unknown key {key!r} in [budgets]")
        budgets = Budgets(
            samples=_get_int(sec, "samples", budgets.samples),
            pairs=_get_int(sec, "pairs", budgets.pairs),
            iterations=_get_int(sec, "iterations", budgets.iterations),
            orbit_steps=_get_int(sec, "orbit_steps", budgets.orbit_steps),
            starts=_get_int(sec, "starts", budgets.starts),
            cluster_radius=_get_float(sec, "cluster_radius", budgets.cluster_radius),
        )

    tolerances = Tolerances()
    if parser.has_section("tolerances"):
        sec = parser["tolerances"]
        for key in sec:
            if key not in _TOLERANCE_KEYS:
                raise ConfigError(f"unknown key {key!r} in [tolerances]")
        tolerances = Tolerances(
            margin=_get_float(sec, "margin", tolerances.margin),
            bounds=_get_float(sec, "bounds", tolerances.bounds),
            invariance=_get_float(sec, "invariance", tolerances.invariance),
            cluster=_get_float(sec, "cluster", tolerances.cluster),
            wolff=_get_float(sec, "wolff", tolerances.wolff),
        )

    plot = PlotSpec()
    if parser.has_section("plot"):
        sec = parser["plot"]
        for key in sec:
            if key not in _PLOT_KEYS:
                raise ConfigError(f"unknown key {key!r} in [plot]")
        kind = sec.get("kind", plot.kind).strip()
        if kind not in ("margin-grid", "orbit-trace"):
            raise ConfigError(f"unknown plot kind {kind!r}")
        plot = PlotSpec(
            kind=kind,
            grid=_get_int(sec, "grid", plot.grid),
            radius=_get_float(sec, "radius", plot.radius),
            center=_parse_complex_pair(sec["center"], "plot center") if "center" in sec else None,
            map_text=sec.get("map", None),
            start=_parse_complex_pair(sec["start"], "plot start") if "start" in sec else None,
            steps=_get_int(sec, "steps", plot.steps),
        )

    return ScenarioConfig(version=version, domain=domain, suite=suite, seed=seed,
                          out=out, maps=tuple(maps), budgets=budgets,
                          tolerances=tolerances, plot=plot)


def apply_overrides(config: ScenarioConfig, seed: int | None = None,
                    out: str | None = None, suite: str | None = None,
                    tol: float | None = None) -> ScenarioConfig:
    """Layer command-line values over a parsed configuration."""
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if out is not None:
        updates["out"] = out
    if suite is not None:
        if suite not in SUITES:
            raise ConfigError(f"unknown suite {suite!r}")
        updates["suite"] = suite
    if tol is not None:
        if tol <= 0:
            raise ConfigError("tolerance override must be positive")
        updates["tol_override"] = tol
    return replace(config, **updates) if updates else config
