#!/usr/bin/env python3
"""
Configuration - Run settings for the adaptive solver

Features:
- Tolerances and step-control knobs with validated defaults
- Benchmark parameter overrides
- key = value config files with '#' comments
- YAML config files (flat or nested sections)
- YAML export of the resolved configuration
- ELM_ADAPT_OUTPUT_DIR environment override
"""

import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import yaml

from .errors import ParseError, ValidationError

OUTPUT_DIR_ENV = "ELM_ADAPT_OUTPUT_DIR"

MODES = ("adaptive", "uniform", "algorithm1-only", "convergence", "trace-diagnostics")
TRACE_FIELDS = ("shear", "rotation", "stream", "abc")
TRACE_SCHEMES = ("midpoint", "explicit-midpoint")
COMPOSITIONS = ("strang", "lie")


@dataclass
class Tolerances:
    """Error tolerances and time-step control parameters."""
    tol_time: float = 1e-2
    tol_space: float = 1e-2
    tol_coarsen: Optional[float] = None
    delta1: float = 0.5
    delta2: float = 2.0
    theta: float = 0.5
    theta_mark: float = 0.5
    T: float = 1.0
    k0: float = 0.01
    k_min: float = 1e-8
    k_max: float = 0.25
    max_refine_loops: int = 20

    def __post_init__(self):
        if self.tol_coarsen is None:
            self.tol_coarsen = self.tol_space / 10.0
        self.validate()

    def validate(self):
        for name in ("tol_time", "tol_space", "tol_coarsen", "T", "k0", "k_min", "k_max"):
            value = getattr(self, name)
            if not value > 0:
                raise ValidationError(name, f"must be positive, got {value!r}")
        if not 0 < self.delta1 < 1:
            raise ValidationError("delta1", f"must lie in (0, 1), got {self.delta1!r}")
        if not self.delta2 > 1:
            raise ValidationError("delta2", f"must exceed 1, got {self.delta2!r}")
        if not 0 < self.theta < 1:
            raise ValidationError("theta", f"must lie in (0, 1), got {self.theta!r}")
        if not 0 < self.theta_mark <= 1:
            raise ValidationError("theta_mark", f"must lie in (0, 1], got {self.theta_mark!r}")
        if not self.k_min <= self.k0 <= self.k_max:
            raise ValidationError("k0", "need k_min <= k0 <= k_max")
        if self.max_refine_loops < 0:
            raise ValidationError("max_refine_loops", "must be non-negative")


@dataclass
class BenchmarkParams:
    """Overrides for benchmark parameters; None keeps the benchmark default."""
    epsilon: Optional[float] = None
    lam: Optional[float] = None
    x0: Optional[float] = None
    y0: Optional[float] = None
    b: Optional[float] = None

    def overrides(self) -> Dict[str, float]:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class RunConfig:
    """Complete run configuration."""
    benchmark: str = ""
    tolerances: Tolerances = None
    params: BenchmarkParams = None
    resolution: int = 64
    mode: str = "adaptive"
    output_dir: str = "output"
    snapshot_every: int = 10
    cg_rtol: float = 1e-12
    k_values: List[float] = None
    trace_field: str = "stream"
    trace_scheme: str = "midpoint"
    composition: str = "strang"

    def __post_init__(self):
        if self.tolerances is None:
            self.tolerances = Tolerances()
        if self.params is None:
            self.params = BenchmarkParams()
        if self.k_values is None:
            self.k_values = [0.05, 0.025, 0.0125]
        self.validate()

    @property
    def epsilon(self) -> Optional[float]:
        return self.params.epsilon

    def validate(self):
        from .benchmarks import BENCHMARKS

        if not self.benchmark:
            raise ValidationError("benchmark", "missing")
        if self.benchmark not in BENCHMARKS:
            raise ValidationError("benchmark", f"unknown benchmark '{self.benchmark}' "
                                               f"(choose from {', '.join(sorted(BENCHMARKS))})")
        if self.mode not in MODES:
            raise ValidationError("mode", f"unknown mode '{self.mode}'")
        if self.params.epsilon is not None and not self.params.epsilon > 0:
            raise ValidationError("epsilon", f"must be positive, got {self.params.epsilon!r}")
        if self.params.lam is not None and not self.params.lam > 0:
            raise ValidationError("lambda", f"must be positive, got {self.params.lam!r}")
        if self.resolution < 1:
            raise ValidationError("resolution", "must be at least 1")
        if self.snapshot_every < 0:
            raise ValidationError("snapshot_every", "must be non-negative")
        if not self.cg_rtol > 0:
            raise ValidationError("cg_rtol", "must be positive")
        if not self.k_values or any(not k > 0 for k in self.k_values):
            raise ValidationError("k_values", "need at least one positive step size")
        if self.trace_field not in TRACE_FIELDS:
            raise ValidationError("trace_field", f"unknown field '{self.trace_field}'")
        if self.trace_scheme not in TRACE_SCHEMES:
            raise ValidationError("trace_scheme", f"unknown scheme '{self.trace_scheme}'")
        if self.composition not in COMPOSITIONS:
            raise ValidationError("composition", f"unknown composition '{self.composition}'")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["params"] = self.params.overrides()
        return data


# key -> (section, attribute, converter); section None means RunConfig itself
def _float_list(text: str) -> List[float]:
    return [float(v) for v in str(text).replace(",", " ").split()]


_TOLERANCE_KEYS = {f.name: f for f in fields(Tolerances)}
_KEYS = {
    "benchmark": (None, "benchmark", str),
    "resolution": (None, "resolution", int),
    "mode": (None, "mode", str),
    "output_dir": (None, "output_dir", str),
    "snapshot_every": (None, "snapshot_every", int),
    "cg_rtol": (None, "cg_rtol", float),
    "k_values": (None, "k_values", _float_list),
    "trace_field": (None, "trace_field", str),
    "trace_scheme": (None, "trace_scheme", str),
    "composition": (None, "composition", str),
    "epsilon": ("params", "epsilon", float),
    "lambda": ("params", "lam", float),
    "x0": ("params", "x0", float),
    "y0": ("params", "y0", float),
    "b": ("params", "b", float),
}
for _name in _TOLERANCE_KEYS:
    _KEYS[_name] = ("tolerances", _name, int if _name == "max_refine_loops" else float)
_KEYS["final_time"] = ("tolerances", "T", float)


def _build(values: Dict[str, tuple]) -> RunConfig:
    sections: Dict[Optional[str], Dict[str, Any]] = {None: {}, "tolerances": {}, "params": {}}
    for section, attribute, value in values.values():
        sections[section][attribute] = value
    tolerances = Tolerances(**sections["tolerances"])
    params = BenchmarkParams(**sections["params"])
    return RunConfig(tolerances=tolerances, params=params, **sections[None])


def parse_config(text: str) -> RunConfig:
    """
    Parse a key = value configuration.

    Args:
        text: config file contents; '#' starts a comment

    Raises:
        ParseError: malformed line, unknown or repeated key, bad number
        ValidationError: missing or out-of-range values
    """
    values: Dict[str, tuple] = {}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(lineno, f"expected 'key = value', got '{line}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ParseError(lineno, f"unknown key '{key}'")
        section, attribute, convert = _KEYS[key]
        if (section, attribute) in seen:
            raise ParseError(lineno, f"duplicate key '{key}'")
        seen.add((section, attribute))
        try:
            converted = convert(value)
        except ValueError:
            raise ParseError(lineno, f"invalid value '{value}' for '{key}'") from None
        values[key] = (section, attribute, converted)
    return _build(values)


def config_from_dict(data: Mapping[str, Any]) -> RunConfig:
    """Build a RunConfig from a flat or sectioned mapping (YAML layout)."""
    flat: Dict[str, Any] = {}
    for key, value in (data or {}).items():
        if key in ("tolerances", "params") and isinstance(value, Mapping):
            for inner_key, inner_value in value.items():
                flat["lambda" if inner_key == "lam" else inner_key] = inner_value
        else:
            flat[key] = value

    values: Dict[str, tuple] = {}
    for position, (key, value) in enumerate(flat.items(), start=1):
        if key not in _KEYS:
            raise ParseError(position, f"unknown key '{key}'")
        section, attribute, convert = _KEYS[key]
        if value is None:
            continue
        try:
            converted = convert(value) if not isinstance(value, list) else [float(v) for v in value]
        except (TypeError, ValueError):
            raise ParseError(position, f"invalid value {value!r} for '{key}'") from None
        values[key] = (section, attribute, converted)
    return _build(values)


def load_config(path: Union[str, Path]) -> RunConfig:
    """Load a config file; .yaml/.yml go through PyYAML, anything else is key = value."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            raise ParseError(mark.line + 1 if mark else 0, str(e)) from None
        if data is not None and not isinstance(data, Mapping):
            raise ParseError(1, "top level of a YAML config must be a mapping")
        return config_from_dict(data or {})
    return parse_config(text)


def apply_environment(config: RunConfig, environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Apply the output directory override from the environment."""
    environ = os.environ if environ is None else environ
    override = environ.get(OUTPUT_DIR_ENV)
    if override:
        config.output_dir = override
    return config


def export_config(config: RunConfig, path: Union[str, Path]) -> Path:
    """Write the resolved configuration as YAML."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=False, default_flow_style=False)
    return path
