"""Experiment configuration: a flat ``section.key = value`` text format.

Grammar (one entry per line)::

    line    := blank | comment | entry
    comment := '#' anything
    entry   := section '.' key '=' value
    value   := scalar | scalar (',' scalar)*

Scalars are integers, floats (``inf`` allowed), ``true``/``false`` or bare
strings.  Lists are only accepted by list-valued keys (``run.seeds`` and the
``sweep.*`` axes).  Unknown keys, repeated keys and malformed lines are
rejected with the offending line number.
"""

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

from .exceptions import ConfigRejected
from .mechanisms import PrivacyParams
from .problems import builtin_problems
from .vaidya import VaidyaConfig

SWEEP_AXES = ("d", "M", "N", "eps")


@dataclass
class ExperimentConfig:
    """Everything a run or sweep needs.

    ``R`` is the Euclidean diameter of the hypercube domain; when given it
    sets the cube side to ``R / sqrt(d)``.  ``problem_params`` are forwarded
    to the catalog factory.
    """

    problem: str = "max-abs"
    problem_params: dict = field(default_factory=dict)
    d: int = 2
    M: int = 2
    N: Optional[int] = None
    R: Optional[float] = None
    K: Optional[int] = None
    eps: float = math.inf
    delta: float = 1e-5
    delta_err: float = 0.1
    gamma: float = 0.05
    eta: float = 0.9
    center_tol: float = 1e-8
    seeds: list = field(default_factory=lambda: [0])
    out: Optional[str] = None
    transcripts: Optional[str] = None
    wall_time: bool = True
    override_n_floor: bool = False
    baseline: bool = False
    baseline_rounds: int = 100
    baseline_step_size: Optional[float] = None
    baseline_batch_size: Optional[int] = None
    sweep: dict = field(default_factory=dict)

    def privacy(self):
        return PrivacyParams(self.eps, self.delta, self.delta_err)

    def vaidya(self):
        return VaidyaConfig(eta=self.eta, gamma=self.gamma, center_tol=self.center_tol)

    def problem_kwargs(self):
        kw = dict(self.problem_params)
        if self.R is not None:
            kw["side"] = self.R / math.sqrt(self.d)
        return kw

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


# key -> (field name, converter); converters raise ValueError on bad input
def _int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValueError("expected an integer")
    return v


def _float(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError("expected a number")
    return float(v)


def _bool(v):
    if not isinstance(v, bool):
        raise ValueError("expected true or false")
    return v


def _str(v):
    return str(v)


def _int_list(v):
    return [_int(x) for x in v]


def _float_list(v):
    return [_float(x) for x in v]


_KEYS = {
    "problem.key": ("problem", _str),
    "run.d": ("d", _int),
    "run.M": ("M", _int),
    "run.N": ("N", _int),
    "run.R": ("R", _float),
    "run.K": ("K", _int),
    "run.seeds": ("seeds", _int_list),
    "privacy.eps": ("eps", _float),
    "privacy.delta": ("delta", _float),
    "privacy.delta_err": ("delta_err", _float),
    "vaidya.gamma": ("gamma", _float),
    "vaidya.eta": ("eta", _float),
    "vaidya.center_tol": ("center_tol", _float),
    "output.path": ("out", _str),
    "output.transcripts": ("transcripts", _str),
    "output.wall_time": ("wall_time", _bool),
    "baseline.enabled": ("baseline", _bool),
    "baseline.rounds": ("baseline_rounds", _int),
    "baseline.step_size": ("baseline_step_size", _float),
    "baseline.batch_size": ("baseline_batch_size", _int),
}
_LIST_KEYS = {"run.seeds"} | {f"sweep.{a}" for a in SWEEP_AXES}


def _scalar(text):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("inf", "+inf"):
        return math.inf
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_config_text(text):
    """Parse config text into an :class:`ExperimentConfig`."""
    cfg = ExperimentConfig()
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or "." not in key:
            raise ConfigRejected(f"line {lineno}: expected 'section.key = value'")
        if key in seen:
            raise ConfigRejected(f"line {lineno}: duplicate key {key}")
        seen.add(key)
        items = [] if value == "" else [_scalar(v.strip()) for v in value.split(",")]
        if key in _LIST_KEYS:
            parsed = items
        elif len(items) != 1:
            raise ConfigRejected(f"line {lineno}: {key} takes exactly one value")
        else:
            parsed = items[0]
        section, name = key.split(".", 1)
        try:
            if section == "sweep":
                if name not in SWEEP_AXES:
                    raise ConfigRejected(f"line {lineno}: unknown sweep axis {name!r}")
                cfg.sweep[name] = (_float_list if name == "eps" else _int_list)(parsed)
            elif section == "problem" and key != "problem.key":
                cfg.problem_params[name] = _float(parsed)
            elif key in _KEYS:
                attr, conv = _KEYS[key]
                setattr(cfg, attr, conv(parsed))
            else:
                raise ConfigRejected(f"line {lineno}: unknown key {key}")
        except ValueError as exc:
            raise ConfigRejected(f"line {lineno}: {key}: {exc}") from None
    validate_config(cfg)
    return cfg


def read_config(path):
    with open(path) as fh:
        return parse_config_text(fh.read())


def validate_config(cfg):
    """Structural checks; numeric preconditions are left to ``derive_params``."""
    if cfg.problem not in builtin_problems():
        raise ConfigRejected(f"unknown problem {cfg.problem!r}")
    if not cfg.seeds:
        raise ConfigRejected("run.seeds is empty")
    for axis, values in cfg.sweep.items():
        if not values:
            raise ConfigRejected(f"sweep axis {axis} is empty")
    for name in ("d", "M"):
        if getattr(cfg, name) < 1:
            raise ConfigRejected(f"{name} must be positive")
    if cfg.N is not None and cfg.N < 3:
        raise ConfigRejected("N must be at least 3")
    return cfg
