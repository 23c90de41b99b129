"""Run configuration: JSON schema, semantic checks and conversion to domain objects.

A configuration is checked completely before any computation starts.
Every problem is reported with the JSON path and, when it can be located,
the line in the source file.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from .discretize import Nonlinearity, ProblemSpec
from .errors import DomainError
from .mc import SimConfig

_POS = {"type": "number", "exclusiveMinimum": 0}
_POSINT = {"type": "integer", "minimum": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "L": _POS,
                "nonlinearity": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["name"],
                    "properties": {
                        "name": {"enum": list(Nonlinearity.KINDS)},
                        "c": {"type": "number"},
                        "mu": {"type": "number"},
                    },
                },
                "upsilon": _POS,
                "gamma": {"type": "number", "minimum": 0},
                "R": _POSINT,
                "boundary": {"enum": ["dirichlet"]},
            },
        },
        "discretization": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "N": _POSINT,
                "levels": {"type": "array", "items": _POSINT, "minItems": 3},
                "reference": _POSINT,
                "method": {"enum": ["fd", "spectral"]},
                "guess": {"enum": ["zero", "kink"]},
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "T": _POS,
                "dt": _POS,
                "M": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer", "minimum": 0},
                "init_scale": {"type": "number", "minimum": 0},
                "upsilon_sweep": {"type": "array", "items": _POS, "minItems": 1},
            },
        },
        "adi": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "j": _POSINT,
                "max_steps": _POSINT,
                "residual_tol": {"type": "number", "minimum": 0},
                "shifts": {
                    "oneOf": [
                        {"enum": ["wachspress"]},
                        {"type": "array", "items": {"type": "number", "exclusiveMaximum": 0},
                         "minItems": 1},
                    ]
                },
            },
        },
        "interval": {
            "type": "array", "items": {"type": "number", "exclusiveMaximum": 0},
            "minItems": 2, "maxItems": 2,
        },
        "outputs": {"type": "string"},
    },
}

DEFAULTS = {
    "problem": {"L": 1.0, "nonlinearity": {"name": "linear", "c": 0.0}, "upsilon": 0.1,
                "gamma": 2.0, "R": 1, "boundary": "dirichlet"},
    "discretization": {"N": 100, "levels": [25, 50, 100, 200], "reference": 801,
                       "method": "fd", "guess": "zero"},
    "sim": {"T": 1.0, "M": 1000, "seed": 0, "init_scale": 0.0},
    "adi": {"j": 20, "residual_tol": 1e-10, "shifts": "wachspress"},
}


class ConfigError(DomainError):
    """Invalid run configuration; ``messages`` lists every problem found."""

    def __init__(self, messages, source="<config>"):
        self.messages = list(messages)
        self.source = source
        super().__init__("\n".join(f"{source}: {m}" for m in self.messages))


@dataclass
class RunConfig:
    problem: ProblemSpec
    N: int
    levels: tuple
    reference: int
    method: str
    guess: str
    sim: SimConfig
    upsilon_sweep: tuple
    j: int
    max_steps: int | None
    residual_tol: float
    shifts: object
    interval: tuple | None = None
    outputs: str | None = None
    raw: dict = field(default_factory=dict, repr=False)


def _locate(text, path):
    """Best-effort 1-based line number of a JSON path inside ``text``."""
    if text is None:
        return None
    pos = 0
    line = None
    for key in path:
        if isinstance(key, int):
            continue
        i = text.find(f'"{key}"', pos)
        if i < 0:
            return line
        pos = i
        line = text.count("\n", 0, i) + 1
    return line


def _fmt(path, msg, text):
    where = ".".join(str(p) for p in path) or "<root>"
    line = _locate(text, list(path))
    return f"line {line}: {where}: {msg}" if line else f"{where}: {msg}"


def _merge(defaults, given):
    out = {}
    for k in set(defaults) | set(given):
        d, g = defaults.get(k), given.get(k)
        if isinstance(d, dict) and isinstance(g, dict) and k != "nonlinearity":
            out[k] = _merge(d, g)
        else:
            out[k] = g if k in given else d
    return out


def _semantic(cfg):
    msgs = []
    p, d, s, a = cfg["problem"], cfg["discretization"], cfg["sim"], cfg["adi"]
    if p["R"] > d["N"]:
        msgs.append((("problem", "R"), f"noise rank R={p['R']} exceeds N={d['N']}"))
    lv = d["levels"]
    if any(b <= x for x, b in zip(lv, lv[1:])):
        msgs.append((("discretization", "levels"), f"levels must be strictly increasing, got {lv}"))
    if d["reference"] < 2 * max(lv):
        msgs.append((("discretization", "reference"),
                     f"reference {d['reference']} must be at least twice the finest level {max(lv)}"))
    if p["R"] > min(lv):
        msgs.append((("discretization", "levels"), f"noise rank R={p['R']} exceeds coarsest level {min(lv)}"))
    if "dt" in s and s["dt"] > s["T"]:
        msgs.append((("sim", "dt"), f"dt={s['dt']} exceeds T={s['T']}"))
    if "interval" in cfg and cfg["interval"][0] > cfg["interval"][1]:
        msgs.append((("interval",), f"need a <= b, got {cfg['interval']}"))
    nl = p["nonlinearity"]
    if nl["name"] == "linear" and "mu" in nl:
        msgs.append((("problem", "nonlinearity", "mu"), "linear drift takes 'c', not 'mu'"))
    if nl["name"] != "linear" and "c" in nl:
        msgs.append((("problem", "nonlinearity", "c"), f"{nl['name']} drift takes 'mu', not 'c'"))
    if d["guess"] == "kink" and not (nl["name"] == "cubic" and nl.get("mu", 0) > 0):
        msgs.append((("discretization", "guess"), "kink guess needs cubic drift with mu > 0"))
    if d["method"] == "spectral" and d["guess"] != "zero":
        msgs.append((("discretization", "guess"), "spectral method supports only the zero guess"))
    if "max_steps" in a and a["max_steps"] < a["j"]:
        msgs.append((("adi", "max_steps"), f"max_steps={a['max_steps']} is below j={a['j']}"))
    return msgs


def parse_config(data, text=None, source="<config>"):
    """Validate a configuration mapping and build a :class:`RunConfig`.

    Raises
    ------
    ConfigError
        With one message per schema or semantic violation.
    """
    if not isinstance(data, dict):
        raise ConfigError(["top level must be a JSON object"], source)
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ConfigError([_fmt(e.absolute_path, e.message, text) for e in errors], source)
    cfg = _merge(DEFAULTS, data)
    msgs = _semantic(cfg)
    if msgs:
        raise ConfigError([_fmt(p, m, text) for p, m in msgs], source)
    p, d, s, a = cfg["problem"], cfg["discretization"], cfg["sim"], cfg["adi"]
    try:
        problem = ProblemSpec(L=float(p["L"]), nonlinearity=Nonlinearity.from_dict(p["nonlinearity"]),
                              upsilon=float(p["upsilon"]), gamma=float(p["gamma"]), R=int(p["R"]),
                              boundary=p["boundary"])
        sweep = {k: v for k, v in s.items() if k != "upsilon_sweep"}
        sim = SimConfig(**sweep)
    except DomainError as exc:
        raise ConfigError([str(exc)], source) from exc
    shifts = a["shifts"] if a["shifts"] == "wachspress" else tuple(float(x) for x in a["shifts"])
    return RunConfig(
        problem=problem, N=d["N"], levels=tuple(d["levels"]), reference=d["reference"],
        method=d["method"], guess=d["guess"], sim=sim,
        upsilon_sweep=tuple(s.get("upsilon_sweep", [problem.upsilon])),
        j=a["j"], max_steps=a.get("max_steps"), residual_tol=float(a["residual_tol"]),
        shifts=shifts, interval=tuple(cfg["interval"]) if "interval" in cfg else None,
        outputs=cfg.get("outputs"), raw=cfg)


def load_config(path):
    """Read and validate a JSON configuration file.

    ``OSError`` propagates unchanged (the CLI maps it to the I/O exit code).
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"line {exc.lineno}: invalid JSON: {exc.msg}"], str(path)) from exc
    return parse_config(data, text, str(path))


def kink_guess(L, mu, x):
    """Two-front profile vanishing at both ends, a Newton guess for bistable cubic drift."""
    s = math.sqrt(mu / 2.0)
    return np.tanh(s * x) * np.tanh(s * (L - x))
