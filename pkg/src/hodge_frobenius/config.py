"""Plain-text run configuration.

The format is ``[section]`` headers followed by ``key = value`` lines, with
``#`` comments.  Every key has a declared type; unknown sections or keys are
errors, reported with their line number.  Field expressions (boundary data,
``eta``, ``nu``) are arithmetic in ``x``, ``y``, ``r`` and ``theta`` and are
evaluated by a small AST walker, never by ``eval``.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


class Expr(str):
    """Source text of a field expression."""


def _to_bool(text):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    raise ValueError(f"expected true or false, got {text!r}")


def _to_int(text):
    value = int(text)
    return value


def _to_float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"expected a finite number, got {text!r}")
    return value


def _float_list(text):
    return tuple(_to_float(t.strip()) for t in text.split(",") if t.strip())


def _int_list(text):
    return tuple(_to_int(t.strip()) for t in text.split(",") if t.strip())


def _expr(text):
    compile_expression(text)
    return Expr(text)


PARSERS = {
    "float": _to_float, "int": _to_int, "bool": _to_bool, "str": str,
    "expr": _expr, "floats": _float_list, "ints": _int_list,
}

SCHEMA = {
    "problem": {
        "fixture": "str", "equation": "str", "dirichlet": "expr", "eta": "expr",
        "weight": "expr", "slope": "float", "excised_half_width": "float",
        "branch_cut": "bool",
    },
    "density": {"family": "str", "gamma": "float", "K": "float", "q": "float", "c": "float"},
    "grid": {"vertices": "int", "nx": "int", "ny": "int",
             "x0": "float", "x1": "float", "y0": "float", "y1": "float"},
    "solver": {"max_iterations": "int", "tolerance": "float", "damping": "float",
               "continuation_steps": "int", "subsonic_guard": "bool", "sonic_margin": "float"},
    "output": {"csv": "bool", "report": "str"},
    "analysis": {"q_max": "float", "samples": "int", "center_x": "float", "center_y": "float",
                 "radius": "float", "delta": "float", "ring_radii": "floats",
                 "resolutions": "ints", "dual_family": "str"},
    "eikonal": {"u": "expr", "nu": "expr", "sign": "int", "vertices": "int",
                "x0": "float", "x1": "float", "y0": "float", "y1": "float"},
    "verify": {"quick": "bool"},
}


@dataclass
class RunConfig:
    """Typed sections of a configuration file."""

    sections: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)

    def has(self, section, key=None):
        if key is None:
            return section in self.sections
        return key in self.sections.get(section, {})

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section, key):
        if not self.has(section, key):
            raise ConfigError(f"missing required key [{section}] {key}")
        return self.sections[section][key]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.sections == other.sections


def parse_config(text: str) -> RunConfig:
    """Parse configuration text; raises :class:`ConfigError` with the line number."""
    cfg = RunConfig()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("malformed section header", lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            if section in cfg.sections:
                raise ConfigError(f"duplicate section [{section}]", lineno)
            cfg.sections[section] = {}
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno)
        if section is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        kind = SCHEMA[section].get(key)
        if kind is None:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if key in cfg.sections[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno)
        try:
            cfg.sections[section][key] = PARSERS[kind](value)
        except (ValueError, SyntaxError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno) from None
        cfg.lines[(section, key)] = lineno
    return cfg


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def dump_config(cfg: RunConfig) -> str:
    """Serialise so that ``parse_config(dump_config(c)) == c``."""
    out = []
    for section, values in cfg.sections.items():
        out.append(f"[{section}]")
        out.extend(f"{k} = {_format(v)}" for k, v in values.items())
        out.append("")
    return "\n".join(out)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# -- expressions ----------------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "arctan2": np.arctan2, "atan2": np.arctan2,
    "arctan": np.arctan, "hypot": np.hypot, "tanh": np.tanh, "sinh": np.sinh,
    "cosh": np.cosh, "minimum": np.minimum, "maximum": np.maximum,
}
_CONSTS = {"pi": math.pi, "e": math.e}
VARIABLES = ("x", "y", "r", "theta")


def _walk(node, env):
    if isinstance(node, ast.Expression):
        return _walk(node.body, env)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in env:
            return env[node.id]
        if node.id in _CONSTS:
            return _CONSTS[node.id]
        raise ValueError(f"unknown name {node.id!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_walk(node.left, env), _walk(node.right, env))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        return _UNARY[type(node.op)](_walk(node.operand, env))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in _FUNCS and not node.keywords:
        return _FUNCS[node.func.id](*(_walk(a, env) for a in node.args))
    raise ValueError(f"unsupported expression element {type(node).__name__}")


def compile_expression(text):
    """Parse and validate ``text``; returns the AST."""
    tree = ast.parse(text.strip(), mode="eval")
    probe = {name: 0.5 for name in VARIABLES}
    with np.errstate(all="ignore"):
        _walk(tree, probe)
    return tree


def evaluate(text, X, Y):
    """Evaluate an expression on coordinate arrays."""
    env = {"x": X, "y": Y, "r": np.hypot(X, Y), "theta": np.arctan2(Y, X)}
    with np.errstate(divide="ignore", invalid="ignore"):
        value = _walk(compile_expression(text), env)
    return np.broadcast_to(np.asarray(value, dtype=float), np.shape(X)).copy()
