#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Scenario configuration: defaults, loading, validation and CLI overrides.

A scenario is a JSON document merged over config/defaults.json. Angles may
be written as plain numbers or as pi expressions ("5*pi/4", "-pi/2").
"""

from __future__ import annotations

import copy
import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from circumnav.control.estimator import EstimatorParams, ResetMode
from circumnav.control.guidance import ControllerMode, GuidanceParams
from circumnav.errors import ParseError, ValidationError
from circumnav.report.export import ARTIFACTS
from circumnav.sim.dynamics import SimConfig, SpeedVariation
from circumnav.sim.geometry import CartesianState, TargetPosition

# Configure logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).resolve().parent / "config"
DEFAULTS_FILE = CONFIG_DIR / "defaults.json"
SCENARIO_DIR = CONFIG_DIR / "scenarios"

_PI_EXPR = re.compile(
    r"^\s*(?P<sign>[+-])?\s*(?:(?P<num>\d+(?:\.\d*)?)\s*\*?\s*)?pi\s*(?:/\s*(?P<den>\d+(?:\.\d*)?))?\s*$"
)


def configure_logging(level: str = "INFO") -> None:
    logging.getLogger().setLevel(getattr(logging, str(level).upper(), logging.INFO))


def parse_angle(value: Any) -> float:
    """
    Convert a number or a pi expression to radians.

    Args:
        value: int/float, numeric string, or e.g. "pi", "-pi/2", "5*pi/4"

    Returns:
        float angle

    Raises:
        ValueError: when the value is neither
    """
    if isinstance(value, bool):
        raise ValueError(f"expected an angle, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _PI_EXPR.match(value)
        if m:
            num = float(m.group("num")) if m.group("num") else 1.0
            den = float(m.group("den")) if m.group("den") else 1.0
            if den == 0.0:
                raise ValueError(f"division by zero in angle {value!r}")
            sign = -1.0 if m.group("sign") == "-" else 1.0
            return sign * num * math.pi / den
        return float(value)
    raise ValueError(f"expected an angle, got {value!r}")


def deep_merge(base: dict, override: dict) -> dict:
    """Recursively merge override into a copy of base."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def get_path(data: dict, dotted: str, default: Any = None) -> Any:
    node: Any = data
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


def set_path(data: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


@dataclass(frozen=True)
class AnalysisSettings:
    settling_band: float = 0.005
    range_tol: float = 1e-3
    rate_tol: float = 1e-3


@dataclass(frozen=True)
class ScenarioFile:
    name: str
    config: SimConfig
    output_prefix: str
    emit: Tuple[str, ...]
    analysis: AnalysisSettings = AnalysisSettings()
    sweep: Optional[Dict[str, List[Any]]] = None
    raw: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)
    source: Optional[str] = None


def _is_numeric(value: Any) -> bool:
    """True for finite numbers and pi expressions; bools do not count."""
    try:
        return math.isfinite(parse_angle(value))
    except ValueError:
        return False

class _Collector:
    """Gathers every violation before ValidationError is raised."""

    def __init__(self, data: dict):
        self.data = data
        self.errors: List[str] = []

    def number(self, path: str, positive: bool = False, required: bool = True) -> Optional[float]:
        value = get_path(self.data, path)
        if value is None:
            if required:
                self.errors.append(f"{path}: required")
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.errors.append(f"{path}: expected a number, got {value!r}")
            return None
        if not math.isfinite(value):
            self.errors.append(f"{path}: must be finite")
            return None
        if positive and value <= 0:
            self.errors.append(f"{path}: must be positive, got {value}")
            return None
        return float(value)

    def angle(self, path: str) -> Optional[float]:
        value = get_path(self.data, path)
        if value is None:
            self.errors.append(f"{path}: required")
            return None
        try:
            return parse_angle(value)
        except ValueError:
            self.errors.append(f"{path}: expected an angle, got {value!r}")
            return None

    def choice(self, path: str, parse):
        value = get_path(self.data, path)
        try:
            return parse(value)
        except (ValueError, TypeError):
            self.errors.append(f"{path}: invalid value {value!r}")
            return None


class ScenarioLoader:
    """
    Loader for scenario files.
    Handles defaults, bundled scenario lookup and validation.
    """

    def __init__(self, defaults: Optional[dict] = None):
        """
        Initialize the loader.

        Args:
            defaults (dict, optional): Default settings; read from config/defaults.json when omitted
        """
        self.defaults = defaults if defaults is not None else self._read_json(DEFAULTS_FILE)

    @property
    def log_level(self) -> str:
        return str(get_path(self.defaults, "logging.level", "INFO"))

    @staticmethod
    def _read_json(path: Path) -> dict:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ParseError(f"{path}: cannot read scenario ({e.strerror})") from e
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
        if not isinstance(data, dict):
            raise ParseError(f"{path}:1:1: top level must be an object")
        return data

    @staticmethod
    def bundled() -> List[str]:
        """Names of the scenarios shipped with the package."""
        return sorted(p.stem for p in SCENARIO_DIR.glob("*.json"))

    def resolve(self, name_or_path: str) -> Path:
        """
        Map a bundled scenario name or a file path to a path.

        Args:
            name_or_path (str): e.g. "standoff_full_info" or "my/scenario.json"

        Returns:
            Path: existing scenario file
        """
        candidate = Path(name_or_path)
        if candidate.is_file():
            return candidate
        bundled = SCENARIO_DIR / f"{name_or_path}.json"
        if bundled.is_file():
            return bundled
        raise ParseError(f"{name_or_path}: no such scenario file or bundled scenario")

    def load(self, name_or_path: str) -> ScenarioFile:
        """
        Load, merge and validate a scenario.

        Returns:
            ScenarioFile: the validated scenario
        """
        path = self.resolve(name_or_path)
        data = self._read_json(path)
        scenario = self.from_dict(data, default_name=path.stem, source=str(path))
        logger.info(f"Scenario '{scenario.name}' loaded from {path}")
        return scenario

    def from_dict(self, data: dict, default_name: str = "scenario", source: Optional[str] = None) -> ScenarioFile:
        merged = deep_merge(self.defaults, data)
        merged.pop("logging", None)
        name = merged.get("name") or default_name
        merged["name"] = name
        # estimator defaults only count once gains are given
        has_estimator = any(k in (data.get("estimator") or {}) for k in ("k1", "k2", "k3"))
        c = _Collector(merged)

        r_d = c.number("guidance.r_d", positive=True)
        k = c.number("guidance.k", positive=True)
        V = c.number("guidance.V", positive=True)
        x_T = c.number("target.x")
        y_T = c.number("target.y")
        x0 = c.number("initial_state.x")
        y0 = c.number("initial_state.y")
        psi0 = c.angle("initial_state.psi")

        h = c.number("simulation.step_size", positive=True)
        duration = c.number("simulation.duration", positive=True)
        tol = c.number("simulation.event_tolerance", positive=True)
        mode = c.choice("simulation.controller_mode", ControllerMode)
        strict = get_path(merged, "simulation.strict", False)
        if not isinstance(strict, bool):
            c.errors.append(f"simulation.strict: expected true/false, got {strict!r}")

        variation = None
        if get_path(merged, "simulation.speed_variation") is not None:
            amp = c.number("simulation.speed_variation.amplitude")
            period = c.number("simulation.speed_variation.period", positive=True)
            if amp is not None and not 0.0 <= amp < 1.0:
                c.errors.append(f"simulation.speed_variation.amplitude: must lie in [0, 1), got {amp}")
            elif amp is not None and period is not None:
                variation = SpeedVariation(amplitude=amp, period=period)

        estimator = None
        if has_estimator:
            k1 = c.number("estimator.k1", positive=True)
            k2 = c.number("estimator.k2", positive=True)
            k3 = c.number("estimator.k3", positive=True)
            reset_mode = c.choice("estimator.reset_mode", ResetMode.parse)
            initial = get_path(merged, "estimator.initial")
            if initial is not None and not (
                isinstance(initial, list) and len(initial) == 2
                and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in initial)
            ):
                c.errors.append(f"estimator.initial: expected [xhat1, xhat2], got {initial!r}")
                initial = None
            if None not in (k1, k2, k3, reset_mode):
                estimator = EstimatorParams(
                    k1=k1, k2=k2, k3=k3, reset_mode=reset_mode,
                    initial=tuple(float(v) for v in initial) if initial is not None else None,
                )
        if mode is ControllerMode.OUTPUT_FEEDBACK and not has_estimator:
            c.errors.append("estimator: output_feedback requires estimator.k1, estimator.k2 and estimator.k3")

        analysis = AnalysisSettings(
            settling_band=c.number("analysis.settling_band", positive=True) or 0.005,
            range_tol=c.number("analysis.range_tol", positive=True) or 1e-3,
            rate_tol=c.number("analysis.rate_tol", positive=True) or 1e-3,
        )

        emit = get_path(merged, "output.emit", [])
        if not isinstance(emit, list):
            c.errors.append(f"output.emit: expected a list, got {emit!r}")
            emit = []
        for item in emit:
            if item not in ARTIFACTS:
                c.errors.append(f"output.emit: unknown artifact {item!r} (expected one of {', '.join(ARTIFACTS)})")
        prefix = str(get_path(merged, "output.prefix", "out/{name}")).replace("{name}", name)

        sweep = self._validate_sweep(merged, c.errors)

        if c.errors:
            raise ValidationError(c.errors)

        config = SimConfig(
            target=TargetPosition(x_T, y_T),
            initial_state=CartesianState(x0, y0, psi0),
            guidance=GuidanceParams(r_d=r_d, k=k, V=V),
            estimator=estimator,
            step_size=h,
            duration=duration,
            event_tolerance=tol,
            controller_mode=mode,
            strict=strict,
            speed_variation=variation,
        )
        return ScenarioFile(
            name=name,
            config=config,
            output_prefix=prefix,
            emit=tuple(emit),
            analysis=analysis,
            sweep=sweep,
            raw=merged,
            source=source,
        )

    @staticmethod
    def _validate_sweep(merged: dict, errors: List[str]) -> Optional[Dict[str, List[Any]]]:
        sweep = merged.get("sweep")
        if sweep is None:
            return None
        grid = sweep.get("grid") if isinstance(sweep, dict) else None
        if not isinstance(grid, dict) or not grid:
            errors.append("sweep.grid: must be a non-empty mapping of field -> values")
            return None
        for path, values in grid.items():
            current = get_path(merged, path)
            if path.split(".")[0] in ("sweep", "output", "name"):
                errors.append(f"sweep.grid.{path}: field cannot be swept")
            elif current is None or isinstance(current, dict):
                errors.append(f"sweep.grid.{path}: no such field in the scenario")
            elif not _is_numeric(current):
                errors.append(f"sweep.grid.{path}: only numeric fields can be swept, found {current!r}")
            if not isinstance(values, list) or not values:
                errors.append(f"sweep.grid.{path}: must be a non-empty list")
                continue
            for i, value in enumerate(values):
                if not _is_numeric(value):
                    errors.append(f"sweep.grid.{path}[{i}]: expected a number or angle, got {value!r}")
        return {path: list(values) for path, values in grid.items() if isinstance(values, list)}


def load_scenario(name_or_path: str) -> ScenarioFile:
    return ScenarioLoader().load(name_or_path)


def apply_overrides(
    scenario: ScenarioFile,
    step: Optional[float] = None,
    duration: Optional[float] = None,
    out: Optional[str] = None,
    strict: Optional[bool] = None,
    reset_mode: Optional[str] = None,
) -> ScenarioFile:
    """
    Apply command-line overrides and revalidate.

    Args:
        scenario (ScenarioFile): loaded scenario
        step, duration, out, strict, reset_mode: values given on the command line; None keeps the scenario value

    Returns:
        ScenarioFile: a new scenario with the overrides applied
    """
    raw = copy.deepcopy(scenario.raw)
    if step is not None:
        set_path(raw, "simulation.step_size", step)
    if duration is not None:
        set_path(raw, "simulation.duration", duration)
    if strict is not None:
        set_path(raw, "simulation.strict", strict)
    if reset_mode is not None:
        set_path(raw, "estimator.reset_mode", reset_mode)
    if out is not None:
        set_path(raw, "output.prefix", out)
    loader = ScenarioLoader(defaults={})
    updated = loader.from_dict(raw, default_name=scenario.name, source=scenario.source)
    return replace(updated, raw=raw)
