"""Run configuration: a key-value tree read from YAML or JSON, with presets.

A config has the sections ``model``, ``psi``, ``alpha``, ``base``, ``grid``,
``mc``, ``point``, ``optimize`` and ``potts``. Each section is validated by
building the object it describes, and ``RunConfig.to_dict`` writes the
canonical form back, so parsing, serializing and parsing again is the identity.
"""

import copy
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .model import MixtureModel
from .optimize import OptimizeConfig
from .paths import DiscreteCdf, MatrixPath
from .pde import BaseMeasure, GridSpec

COMMANDS = ("eval-phi", "eval-functional", "minimize", "sde-check", "potts", "verify")

MC_DEFAULTS = {"seed": 0, "paths": 4096, "steps": 256, "replications": 32, "widths": None, "oracle": False}
POINT_DEFAULTS = {"s": 0.0, "t": 1.0, "x": None}
OPTIMIZE_DEFAULTS = {"K": None, "q_grid": None, "tol_f": 1e-13, "tol_m": 1e-8, "max_iters": 200, "fd_step": 1e-3}
POTTS_DEFAULTS = {"dim": 2, "betas": [[2, 1.0]], "case": None, "pairs": 5, "starts": 3, "K": 4}

_SK = {
    "model": {"dim": 1, "betas": [[2, 0.8]]},
    "psi": {"preset": "linear_1d", "z": 1.0},
    "alpha": {"qs": [0.0, 0.5, 1.0], "ms": [0.0, 1.0, 1.0]},
    "base": {"preset": "ising"},
}

PRESETS = {
    # D = 1 Ising base, xi = beta^2 r^2, Psi(s) = s, one-step alpha at q = 0.5
    "sk-rs": copy.deepcopy(_SK),
    "sk-high-temp": {**copy.deepcopy(_SK), "model": {"dim": 1, "betas": [[2, 0.3]]}, "optimize": {"K": 8}},
    "sk-minimize": {**copy.deepcopy(_SK), "optimize": {"K": 8}},
    "sk-two-level": {**copy.deepcopy(_SK), "alpha": {"qs": [0.0, 0.4, 1.0], "ms": [0.0, 0.6, 1.0]}},
    "sk-mixture": {
        **copy.deepcopy(_SK),
        "model": {"dim": 1, "betas": [[2, 0.7], [3, 0.5]]},
        "alpha": {"qs": [0.0, 0.3, 0.6, 1.0], "ms": [0.2, 0.5, 0.8, 1.0]},
    },
    "constant-psi": {
        **copy.deepcopy(_SK),
        "psi": {"preset": "constant", "value": [[1.0]]},
    },
    "potts2-beta2": {
        "model": {"dim": 2, "betas": [[2, 1.0]]},
        "psi": {"preset": "potts_star", "dim": 2},
        "alpha": {"qs": [0.0, 0.5, 1.0], "ms": [0.3, 0.7, 1.0]},
        "base": {"preset": "potts", "dim": 2},
        "grid": {"h": 0.1},
        "potts": {"dim": 2, "betas": [[2, 1.0]], "case": 2},
    },
    "potts2-mixed": {
        "model": {"dim": 2, "betas": [[2, 1.0], [3, 1.0]]},
        "psi": {"preset": "potts_star", "dim": 2},
        "alpha": {"qs": [0.0, 0.5, 1.0], "ms": [0.3, 0.7, 1.0]},
        "base": {"preset": "potts", "dim": 2},
        "grid": {"h": 0.1},
        "potts": {"dim": 2, "betas": [[2, 1.0], [3, 1.0]], "case": 1},
    },
    "potts3-beta2": {
        "model": {"dim": 3, "betas": [[2, 1.0]]},
        "psi": {"preset": "potts_star", "dim": 3},
        "alpha": {"qs": [0.0, 0.5, 1.0], "ms": [0.3, 0.7, 1.0]},
        "base": {"preset": "potts", "dim": 3},
        "grid": {"h": 0.2},
        "potts": {"dim": 3, "betas": [[2, 1.0]], "case": 2},
    },
}


class ConfigError(ValueError):
    """The configuration is malformed."""


def _merge(defaults, given, section):
    given = dict(given or {})
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")
    out = dict(defaults)
    out.update(given)
    return out


@dataclass
class RunConfig:
    model: MixtureModel = None
    psi: MatrixPath = None
    alpha: DiscreteCdf = None
    base: BaseMeasure = None
    grid: GridSpec = field(default_factory=GridSpec)
    mc: dict = field(default_factory=lambda: dict(MC_DEFAULTS))
    point: dict = field(default_factory=lambda: dict(POINT_DEFAULTS))
    optimize: dict = field(default_factory=lambda: dict(OPTIMIZE_DEFAULTS))
    potts: dict = field(default_factory=lambda: dict(POTTS_DEFAULTS))

    SECTIONS = ("model", "psi", "alpha", "base", "grid", "mc", "point", "optimize", "potts")

    @classmethod
    def from_dict(cls, cfg):
        if not isinstance(cfg, dict):
            raise ConfigError("a config must be a mapping")
        unknown = set(cfg) - set(cls.SECTIONS) - {"preset"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        if "preset" in cfg:
            name = cfg["preset"]
            if name not in PRESETS:
                raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
            merged = copy.deepcopy(PRESETS[name])
            merged.update({k: v for k, v in cfg.items() if k != "preset"})
            cfg = merged
        out = cls()
        model = cfg.get("model")
        if model is not None:
            out.model = MixtureModel.from_config(model)
        dim = out.model.dim if out.model else None
        if cfg.get("psi") is not None:
            out.psi = MatrixPath.from_config(cfg["psi"], dim)
        if cfg.get("alpha") is not None:
            a = cfg["alpha"]
            out.alpha = DiscreteCdf.one_step(float(a["one_step"])) if "one_step" in a else DiscreteCdf.from_config(a)
        if cfg.get("base") is not None:
            out.base = BaseMeasure.from_config(cfg["base"], dim)
        out.grid = GridSpec.from_config(cfg.get("grid"))
        out.mc = _merge(MC_DEFAULTS, cfg.get("mc"), "mc")
        out.point = _merge(POINT_DEFAULTS, cfg.get("point"), "point")
        out.optimize = _merge(OPTIMIZE_DEFAULTS, cfg.get("optimize"), "optimize")
        out.potts = _merge(POTTS_DEFAULTS, cfg.get("potts"), "potts")
        out._check_dims()
        return out

    def _check_dims(self):
        dims = {o.dim for o in (self.model, self.psi, self.base) if o is not None}
        if len(dims) > 1:
            raise ConfigError(f"model, psi and base dimensions disagree: {sorted(dims)}")
        if self.point["x"] is not None and dims and len(self.point["x"]) not in dims:
            raise ConfigError("point.x has the wrong dimension")

    def to_dict(self):
        out = {}
        for name, obj in (("model", self.model), ("psi", self.psi), ("alpha", self.alpha), ("base", self.base)):
            if obj is not None:
                out[name] = obj.to_config()
        out["grid"] = self.grid.to_config()
        out["mc"] = dict(self.mc)
        out["point"] = dict(self.point)
        out["optimize"] = dict(self.optimize)
        out["potts"] = dict(self.potts)
        return out

    def require(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigError(f"config is missing sections: {missing}")

    def optimize_config(self, workers=1):
        opt = dict(self.optimize)
        k, q_grid = opt.pop("K"), opt.pop("q_grid")
        if q_grid is None:
            if k is None:
                k = 4
            q_grid = [(l + 1) / int(k) for l in range(int(k))]
        return OptimizeConfig(tuple(q_grid), workers=workers, **opt)

    def point_x(self):
        if self.point["x"] is not None:
            return [float(v) for v in self.point["x"]]
        return [0.0] * self.model.dim


def load(path):
    """Read a YAML or JSON config file (JSON is a subset of YAML)."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(p) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return RunConfig.from_dict(data or {})
