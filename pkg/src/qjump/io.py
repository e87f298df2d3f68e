"""Scenario configuration files and result serialization.

Config files are flat UTF-8 text, one ``key = value`` per line with ``#``
comments.  Results are CSV (a ``# key=value ...`` metadata line, a column
header, then rows) or JSON with the same three parts.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .model import DetectorParams, ICKind, InitialCondition, ModelParams

__all__ = [
    "SCENARIOS",
    "ScenarioConfig",
    "parse_config_text",
    "load_config",
    "format_value",
    "render_csv",
    "render_json",
    "write_output",
    "read_output",
]

SCENARIOS = ("reduced", "n_resolved", "trajectory", "ensemble", "zeno_sweep",
             "gaussian_check", "steady_check")
FORMATS = ("csv", "json")
STOCHASTIC = ("trajectory", "ensemble")


@dataclass
class ScenarioConfig:
    scenario: str
    params: ModelParams = field(default_factory=lambda: ModelParams(omega0=1.0, d1=16.0))
    ic: InitialCondition = field(default_factory=lambda: InitialCondition(ICKind.LEFT_LOCALIZED))
    t_end: float | None = None
    dt: float | None = None
    sample_dt: float | None = None
    window: float | None = None
    probe_time: float | None = None
    n_traj: int = 1000
    master_seed: int = 0
    ratios: tuple[float, ...] | None = None
    output_path: str | None = None
    format: str = "csv"

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}")
        for name in ("t_end", "dt", "sample_dt", "window", "probe_time"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value > 0.0):
                raise ConfigError(f"{name} must be a positive time, got {value!r}")
        if self.scenario in STOCHASTIC and self.n_traj < 1:
            raise ConfigError("n_traj must be >= 1 for stochastic scenarios")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.ratios is not None and any(not r > 0 for r in self.ratios):
            raise ConfigError("ratios must be positive")
        if self.output_path is None:
            self.output_path = f"{self.scenario}.{self.format}"

    def metadata(self) -> dict[str, Any]:
        meta: dict[str, Any] = {"scenario": self.scenario}
        meta.update(omega0=self.params.omega0, epsilon=self.params.epsilon, d1=self.params.d1,
                    ic=self.ic.kind.value, n0=self.ic.n0)
        for f in fields(self):
            if f.name in ("scenario", "params", "ic", "output_path", "format"):
                continue
            value = getattr(self, f.name)
            if value is None:
                continue
            if f.name == "ratios":
                value = ",".join(format_value(r) for r in value)
            meta[f.name] = value
        return meta


_FLOAT_KEYS = {"omega0", "epsilon", "d1", "transmission_open", "transmission_blocked", "bias",
               "t_end", "dt", "sample_dt", "window", "probe_time"}
_INT_KEYS = {"n0", "n_traj", "master_seed"}
_STR_KEYS = {"scenario", "ic", "output_path", "format", "ratios"}
KNOWN_KEYS = _FLOAT_KEYS | _INT_KEYS | _STR_KEYS


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _convert(key: str, value: str):
    try:
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _INT_KEYS:
            return int(value, 0)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r}") from None
    return value


def load_config(raw: Mapping[str, str]) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from string key/value pairs.

    ``d1`` may be given directly or derived from ``transmission_open`` and
    ``bias``; supplying both is an error.
    """
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    vals = {k: _convert(k, v) for k, v in raw.items()}
    if "scenario" not in vals:
        raise ConfigError("missing required key 'scenario'")

    detector_keys = {"transmission_open", "bias", "transmission_blocked"} & vals.keys()
    if detector_keys:
        if "d1" in vals:
            raise ConfigError("give either d1 or transmission_open/bias, not both")
        if not {"transmission_open", "bias"} <= vals.keys():
            raise ConfigError("transmission_open and bias must be given together")
        detector = DetectorParams(vals["transmission_open"], vals["bias"],
                                  vals.get("transmission_blocked", 0.0))
        params = ModelParams.from_detector(detector, vals.get("omega0", 1.0),
                                           vals.get("epsilon", 0.0))
    else:
        params = ModelParams(omega0=vals.get("omega0", 1.0), epsilon=vals.get("epsilon", 0.0),
                             d1=vals.get("d1", 16.0))
    ic = InitialCondition(vals.get("ic", ICKind.LEFT_LOCALIZED.value), vals.get("n0", 0))

    ratios = None
    if "ratios" in vals:
        try:
            ratios = tuple(float(r) for r in vals["ratios"].split(",") if r.strip())
        except ValueError:
            raise ConfigError(f"ratios: cannot parse {vals['ratios']!r}") from None
    kwargs = {k: vals[k] for k in ("t_end", "dt", "sample_dt", "window", "probe_time", "n_traj",
                                   "master_seed", "output_path", "format") if k in vals}
    return ScenarioConfig(scenario=vals["scenario"], params=params, ic=ic, ratios=ratios,
                          **kwargs)


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _meta_line(meta: Mapping[str, Any]) -> str:
    parts = []
    for key, value in meta.items():
        text = format_value(value)
        if any(c.isspace() for c in text) or "=" in key:
            raise ValueError(f"metadata entry {key!r} must not contain whitespace or '=' in its key")
        parts.append(f"{key}={text}")
    return "# " + " ".join(parts)


def render_csv(meta: Mapping[str, Any], columns: Sequence[str],
               data: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(_meta_line(meta) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in zip(*data):
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def _json_value(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else format_value(value)
    return value


def render_json(meta: Mapping[str, Any], columns: Sequence[str],
                data: Sequence[Sequence]) -> str:
    doc = {
        "metadata": {k: _json_value(v) for k, v in meta.items()},
        "columns": list(columns),
        "data": [[_json_value(v) for v in row] for row in zip(*data)],
    }
    return json.dumps(doc, indent=1) + "\n"


def write_output(path: str | Path, fmt: str, meta: Mapping[str, Any],
                 columns: Sequence[str], data: Sequence[Sequence]) -> str:
    text = render_csv(meta, columns, data) if fmt == "csv" else render_json(meta, columns, data)
    if str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_output(path: str | Path) -> tuple[dict[str, str], list[str], dict[str, np.ndarray]]:
    """Parse a CSV or JSON result file back into metadata, columns and arrays."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        meta = {k: format_value(v) for k, v in doc["metadata"].items()}
        columns = doc["columns"]
        rows = [[float(v) for v in row] for row in doc["data"]]
    else:
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# "):
            raise ValueError("missing metadata line")
        meta = dict(item.split("=", 1) for item in lines[0][2:].split())
        reader = csv.reader(lines[1:])
        columns = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    arr = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    return meta, columns, {c: arr[:, i] for i, c in enumerate(columns)}
