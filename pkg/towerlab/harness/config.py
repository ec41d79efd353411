"""
Run configuration

A RunConfig is a JSON object; every validation error names the key and,
when the config came from a file, the line it sits on.
"""

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple, Union

import numpy as np

from ..core.exceptions import ConfigurationError, InvalidParameterError
from ..core.validation import validate_choices, validate_integer, validate_positive
from ..greens import DomainSpec
from ..utils.constants import ExperimentKinds, NormDefaults, ProjectionModes, SolverMethods
from ..utils.json_support import JSONValidator

logger = logging.getLogger(__name__)

THRESHOLDS_PATH = Path(__file__).resolve().parent.parent / "data" / "thresholds.json"


class Sectors:
    """Which sectors linear-spectrum examines"""
    EVEN = "even"
    FULL = "full"
    BOTH = "both"

    ALL = [EVEN, FULL, BOTH]


@dataclass(frozen=True)
class SweepSpec:
    """Geometric lambda sweep from `start` to `stop`"""
    start: float
    stop: float
    points: int

    def __post_init__(self):
        validate_positive('from', self.start)
        validate_positive('to', self.stop)
        validate_integer('points', self.points, min_val=2)
        if self.start == self.stop:
            raise InvalidParameterError('to', self.stop, "Must differ from 'from'")

    def values(self) -> Tuple[float, ...]:
        return tuple(float(v) for v in np.geomspace(self.start, self.stop, self.points))

    def to_dict(self) -> dict:
        return {"from": self.start, "to": self.stop, "points": self.points}


@dataclass(frozen=True)
class RunConfig:
    kind: str
    k: int = 1
    lam: Optional[float] = None
    sweep: Optional[SweepSpec] = None
    domain: DomainSpec = field(default_factory=DomainSpec)
    p: Tuple[float, ...] = (NormDefaults.P,)
    density: Optional[float] = None
    tol: Optional[float] = None
    method: str = SolverMethods.NEWTON
    projection: str = ProjectionModes.EXACT
    modes: Optional[Tuple[int, ...]] = None
    sector: str = Sectors.BOTH
    alphas: Tuple[float, ...] = (2.0, 6.0, 10.0, 14.0)
    output: Optional[str] = None
    workers: int = 1
    seed: int = 0
    thresholds: Dict[str, Dict[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        validate_choices('kind', self.kind, ExperimentKinds.ALL)
        validate_integer('k', self.k, min_val=1)
        if self.lam is not None:
            validate_positive('lambda', self.lam)
        if self.lam is not None and self.sweep is not None:
            raise InvalidParameterError('sweep', self.sweep.to_dict(), "Give 'lambda' or 'sweep', not both")
        if self.kind != ExperimentKinds.LIMIT_CHECKS and self.lam is None and self.sweep is None:
            raise InvalidParameterError('lambda', None, f"'{self.kind}' needs 'lambda' or 'sweep'")
        for value in self.p:
            if not (isinstance(value, (int, float)) and 1.0 <= value < 2.0):
                raise InvalidParameterError('p', value, "Must satisfy 1 <= p < 2")
        if self.density is not None:
            validate_positive('density', self.density)
        if self.tol is not None:
            validate_positive('tol', self.tol)
        validate_choices('method', self.method, SolverMethods.ALL)
        validate_choices('projection', self.projection, ProjectionModes.ALL)
        validate_choices('sector', self.sector, Sectors.ALL)
        for m in self.modes or ():
            validate_integer('modes', m, min_val=0)
        for alpha in self.alphas:
            validate_positive('alphas', alpha)
            if alpha < 2:
                raise InvalidParameterError('alphas', alpha, "Must be >= 2")
        validate_integer('workers', self.workers, min_val=1)
        validate_integer('seed', self.seed, min_val=0)

    @property
    def lambdas(self) -> Tuple[float, ...]:
        if self.sweep is not None:
            return self.sweep.values()
        return () if self.lam is None else (self.lam,)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "kind": self.kind,
            "k": self.k,
            "domain": self.domain.to_dict(),
            "p": list(self.p),
            "method": self.method,
            "projection": self.projection,
            "sector": self.sector,
            "alphas": list(self.alphas),
            "workers": self.workers,
            "seed": self.seed,
        }
        if self.lam is not None:
            data["lambda"] = self.lam
        if self.sweep is not None:
            data["sweep"] = self.sweep.to_dict()
        for key, value in (("density", self.density), ("tol", self.tol), ("output", self.output)):
            if value is not None:
                data[key] = value
        if self.modes is not None:
            data["modes"] = list(self.modes)
        if self.thresholds:
            data["thresholds"] = copy.deepcopy(self.thresholds)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any], text: str = None, source: str = None) -> 'RunConfig':
        """Build and validate; errors carry the line of the offending key in `text`"""
        unknown = sorted(set(data) - _KEYS)
        if unknown:
            raise ConfigurationError(f"Unknown key '{unknown[0]}'",
                                     line=JSONValidator.find_key_line(text, unknown[0]), source=source)
        try:
            return cls(
                kind=data.get("kind"),
                k=data.get("k", 1),
                lam=_number(data.get("lambda"), "lambda"),
                sweep=_sweep(data.get("sweep")),
                domain=_domain(data.get("domain")),
                p=_floats(data.get("p", [NormDefaults.P]), "p"),
                density=_number(data.get("density"), "density"),
                tol=_number(data.get("tol"), "tol"),
                method=data.get("method", SolverMethods.NEWTON),
                projection=data.get("projection", ProjectionModes.EXACT),
                modes=None if data.get("modes") is None else tuple(_as_list(data["modes"])),
                sector=data.get("sector", Sectors.BOTH),
                alphas=_floats(data.get("alphas", [2.0, 6.0, 10.0, 14.0]), "alphas"),
                output=data.get("output"),
                workers=data.get("workers", 1),
                seed=data.get("seed", 0),
                thresholds=_thresholds(data.get("thresholds", {})),
            )
        except InvalidParameterError as e:
            key = _JSON_KEY.get(e.parameter, e.parameter)
            logger.error(f"Invalid config: {e}")
            raise ConfigurationError(str(e), line=JSONValidator.find_key_line(text, key),
                                     source=source)


_KEYS = {"kind", "k", "lambda", "sweep", "domain", "p", "density", "tol", "method",
         "projection", "modes", "sector", "alphas", "output", "workers", "seed", "thresholds"}

# parameter names raised by validators that differ from the JSON key
_JSON_KEY = {"domain.kind": "kind", "half_width_x": "a", "half_width_y": "b"}


def _as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _number(value, name: str) -> Optional[float]:
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidParameterError(name, value, "Must be a number")
    return float(value)


def _floats(value, name: str) -> Tuple[float, ...]:
    return tuple(_number(v, name) for v in _as_list(value))


def _sweep(value) -> Optional[SweepSpec]:
    if value is None:
        return None
    if not isinstance(value, dict):
        raise InvalidParameterError('sweep', value, "Must be an object with from/to/points")
    return SweepSpec(_number(value.get("from"), "from"), _number(value.get("to"), "to"), value.get("points"))


def _domain(value) -> DomainSpec:
    if value is None:
        return DomainSpec()
    if isinstance(value, str):
        value = {"kind": value}
    if not isinstance(value, dict):
        raise InvalidParameterError('domain', value, "Must be an object or a domain kind")
    return DomainSpec.from_dict(value)


def _thresholds(value) -> Dict[str, Dict[str, float]]:
    if not isinstance(value, dict) or not all(isinstance(v, dict) for v in value.values()):
        raise InvalidParameterError('thresholds', value, "Must map experiment kinds to objects")
    return copy.deepcopy(value)


# ========================================
# LOADING
# ========================================

def parse_override(text: str) -> Tuple[str, Any]:
    """'a.b=value' -> ('a.b', value); values parse as JSON, else stay strings"""
    if "=" not in text:
        raise ConfigurationError(f"Override '{text}' must look like key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigurationError(f"Override '{text}' has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_overrides(data: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """Copy of `data` with dotted-key overrides applied"""
    out = copy.deepcopy(data)
    for text in overrides:
        key, value = parse_override(text)
        parts = key.split(".")
        target = out
        for part in parts[:-1]:
            node = target.get(part)
            if isinstance(node, str) and part == "domain":
                node = {"kind": node}
            if not isinstance(node, dict):
                node = {}
            target[part] = node
            target = node
        target[parts[-1]] = value
        logger.debug(f"Override {key}={value!r}")
    return out


def load_config(path: Union[str, Path, None] = None, overrides: Iterable[str] = ()) -> RunConfig:
    """Load a RunConfig from a JSON file (optional), then apply overrides"""
    text, source, data = None, None, {}
    if path is not None:
        data, text = JSONValidator.load_json_file(path)
        source = str(path)
    data = apply_overrides(data, overrides)
    return RunConfig.from_dict(data, text=text, source=source)


def load_thresholds(overrides: Optional[Dict[str, Dict[str, float]]] = None,
                    path: Union[str, Path] = THRESHOLDS_PATH) -> Dict[str, Dict[str, float]]:
    """Versioned defaults merged with per-run overrides (per kind, per key)"""
    data, _ = JSONValidator.load_json_file(path)
    merged = {kind: dict(values) for kind, values in data.items() if isinstance(values, dict)}
    for kind, values in (overrides or {}).items():
        merged.setdefault(kind, {}).update(values)
    merged["version"] = data.get("version")
    return merged
