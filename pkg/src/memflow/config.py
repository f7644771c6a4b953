"""Simulation configuration: INI files with strict validation.

Unknown sections or keys are fatal, so a typo cannot silently misconfigure
a long run.  Every numeric invariant is checked here, naming the offending
key; module code downstream can assume a valid configuration.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    pass


# model name -> parameter keys accepted in [model]
_MODEL_PARAMS = {
    "oldroyd-b": {"lam", "mu_p"},
    "psm-raw": {"lam", "alpha"},
    "psm-normalized": {"lam", "alpha"},
    "wagner-raw": {"lam", "beta"},
    "wagner-normalized": {"lam", "beta"},
    "doi-edwards": {"lam", "alpha", "max_mode"},
}

_SCHEMA = {
    "grid": {"n"},
    "flow": {"viscosity", "dt", "t_final", "cfl_safety"},
    "model": {"name", "lam", "mu_p", "alpha", "beta", "max_mode"},
    "history": {"eps_tail", "mu_min", "initial", "memory_cap_mb"},
    "velocity": {"kind", "amplitude", "seed", "band", "path"},
    "diagnostics": {
        "q",
        "r",
        "cadence",
        "det_tol",
        "stress_tol",
        "fatal_on_violation",
        "oracle",
    },
    "output": {"directory", "snapshot_every", "history_slices", "checkpoint"},
}

_REQUIRED = (("grid", "n"), ("flow", "viscosity"), ("flow", "dt"), ("flow", "t_final"), ("model", "name"))


@dataclass
class SimulationConfig:
    n: int
    viscosity: float
    dt: float
    t_final: float
    model_name: str
    model_params: dict = field(default_factory=dict)
    cfl_safety: float = 0.5
    eps_tail: float = 1e-6
    mu_min: float = 1.0
    initial_history: str = "identity"
    memory_cap_mb: float = 4096.0
    velocity_kind: str = "taylor-green"
    velocity_amplitude: float = 1.0
    velocity_seed: int = 0
    velocity_band: int = 4
    velocity_path: str = ""
    q: int = 8
    r: int = 4
    cadence: int = 1
    det_tol: float = 1e-2
    stress_tol: float = 1e-8
    fatal_on_violation: bool = False
    oracle: bool = False
    output_dir: str = ""
    snapshot_every: int = 0
    history_slices: tuple[int, ...] = ()
    checkpoint: bool = True

    def __post_init__(self):
        validate(self)

    @property
    def n_steps(self) -> int:
        return round(self.t_final / self.dt)


def validate(cfg: SimulationConfig):
    n = cfg.n
    if n < 16 or n & (n - 1):
        raise ConfigError(f"grid.n must be a power of two >= 16, got {n}")
    if cfg.viscosity <= 0:
        raise ConfigError("flow.viscosity must be positive")
    if cfg.dt <= 0:
        raise ConfigError("flow.dt must be positive")
    if cfg.t_final < cfg.dt:
        raise ConfigError("flow.t_final must cover at least one step")
    if not 0.0 < cfg.cfl_safety <= 1.0:
        raise ConfigError("flow.cfl_safety must lie in (0, 1]")
    if cfg.model_name not in _MODEL_PARAMS:
        raise ConfigError(f"model.name {cfg.model_name!r} not in catalog {sorted(_MODEL_PARAMS)}")
    extra = set(cfg.model_params) - _MODEL_PARAMS[cfg.model_name]
    if extra:
        raise ConfigError(f"model parameters {sorted(extra)} not valid for {cfg.model_name!r}")
    if not 0.0 < cfg.eps_tail < 0.1:
        raise ConfigError("history.eps_tail must lie in (0, 0.1)")
    if cfg.mu_min <= 0:
        raise ConfigError("history.mu_min must be positive")
    if cfg.memory_cap_mb <= 0:
        raise ConfigError("history.memory_cap_mb must be positive")
    if cfg.velocity_kind not in ("taylor-green", "random-band", "snapshot", "zero"):
        raise ConfigError(f"velocity.kind {cfg.velocity_kind!r} unknown")
    if cfg.velocity_kind == "snapshot" and not cfg.velocity_path:
        raise ConfigError("velocity.path required for velocity.kind = snapshot")
    if not (isinstance(cfg.q, int) and isinstance(cfg.r, int)) or cfg.q < 1 or cfg.r < 1:
        raise ConfigError("diagnostics.q and diagnostics.r must be positive integers")
    if 1.0 / cfg.q + 1.0 / cfg.r >= 0.5:
        raise ConfigError(
            f"diagnostics exponents must satisfy 1/q + 1/r < 1/2, got 1/{cfg.q} + 1/{cfg.r}"
        )
    if cfg.cadence < 1:
        raise ConfigError("diagnostics.cadence must be >= 1")
    if cfg.snapshot_every < 0:
        raise ConfigError("output.snapshot_every must be >= 0")


def parse_config(path) -> SimulationConfig:
    """Read and validate an INI configuration file (strict mode)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
    for section, key in _REQUIRED:
        if not parser.has_option(section, key):
            raise ConfigError(f"missing required key {key!r} in section [{section}]")

    def get(section, key, conv, default):
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            try:
                if conv is bool:
                    return parser.getboolean(section, key)
                return conv(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc
        return default

    model_name = parser.get("model", "name").strip()
    model_params = {}
    for key in parser["model"]:
        if key == "name":
            continue
        conv = int if key == "max_mode" else float
        model_params[key] = get("model", key, conv, None)

    slices_raw = get("output", "history_slices", str, "")
    try:
        history_slices = tuple(int(tok) for tok in slices_raw.replace(",", " ").split()) if slices_raw else ()
    except ValueError as exc:
        raise ConfigError(f"bad output.history_slices: {slices_raw!r}") from exc

    return SimulationConfig(
        n=get("grid", "n", int, None),
        viscosity=get("flow", "viscosity", float, None),
        dt=get("flow", "dt", float, None),
        t_final=get("flow", "t_final", float, None),
        cfl_safety=get("flow", "cfl_safety", float, 0.5),
        model_name=model_name,
        model_params=model_params,
        eps_tail=get("history", "eps_tail", float, 1e-6),
        mu_min=get("history", "mu_min", float, 1.0),
        initial_history=get("history", "initial", str, "identity"),
        memory_cap_mb=get("history", "memory_cap_mb", float, 4096.0),
        velocity_kind=get("velocity", "kind", str, "taylor-green"),
        velocity_amplitude=get("velocity", "amplitude", float, 1.0),
        velocity_seed=get("velocity", "seed", int, 0),
        velocity_band=get("velocity", "band", int, 4),
        velocity_path=get("velocity", "path", str, ""),
        q=get("diagnostics", "q", int, 8),
        r=get("diagnostics", "r", int, 4),
        cadence=get("diagnostics", "cadence", int, 1),
        det_tol=get("diagnostics", "det_tol", float, 1e-2),
        stress_tol=get("diagnostics", "stress_tol", float, 1e-8),
        fatal_on_violation=get("diagnostics", "fatal_on_violation", bool, False),
        oracle=get("diagnostics", "oracle", bool, False),
        output_dir=get("output", "directory", str, ""),
        snapshot_every=get("output", "snapshot_every", int, 0),
        history_slices=history_slices,
        checkpoint=get("output", "checkpoint", bool, True),
    )
