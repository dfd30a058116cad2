"""Experiment configuration: flat key = value sections in INI syntax.

Parsing is strict: unknown sections or keys are rejected (typo safety), every
value is type-checked, and all randomness is controlled by seeds named here,
so re-running a command with the same file reproduces its outputs byte for
byte.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, fields as dc_fields
from typing import Any


class ConfigError(ValueError):
    pass


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in raw.split(",") if tok.strip())


def _parse_str_list(raw: str) -> tuple[str, ...]:
    return tuple(tok.strip() for tok in raw.split(",") if tok.strip())


@dataclass(frozen=True)
class NetworkCfg:
    n: int = 10000
    p: float = 0.0008
    seed: int = 1


@dataclass(frozen=True)
class DynamicsCfg:
    eps: float = 0.1
    initial_rho: tuple[float, ...] = (0.9,)
    num_steps: int = 1000
    record_every: int = 1
    per_degree: bool = False
    sim_seed: int = 0


@dataclass(frozen=True)
class EnsembleCfg:
    n_copies: int = 2000
    horizon_T: int = 5
    master_seed: int = 0
    network_mode: str = "fixed"          # fixed | regenerate
    block_size: int = 256


@dataclass(frozen=True)
class ContinuationCfg:
    param_name: str = "eps"              # eps | p
    ds0: float = 0.01
    ds_min: float = 1e-5
    ds_max: float = 0.03
    n_points: int = 30
    newton_tol: float = 0.0              # 0 -> noise-floor automatic
    gmres_tol: float = 1e-3
    fd_eps: float = 1e-2
    param_fd_eps: float = 1e-3
    max_newton: int = 8
    arnoldi_m: int = 10
    n_eigs: int = 6
    eigs_every: int = 1                  # 0 disables eigenvalue computation
    families: tuple[str, ...] = ("high", "zero")
    seed_param_0: float = 0.1
    seed_param_1: float = 0.11
    seed_rho_high: float = 0.9
    seed_rho_low: float = 0.05
    seed_steps: int = 300
    seed_tail: int = 50
    zero_lo: float = 0.06
    zero_hi: float = 0.2
    zero_n: int = 8
    zero_refine_tol: float = 0.004
    param_min: float = -1e30
    param_max: float = 1e30


@dataclass(frozen=True)
class RareCfg:
    psi_grid_n: int = 41
    tau: int = 7
    n_real: int = 4000
    margin: float = 0.2
    node_rho: float = 0.9
    separatrix_lo: float = 0.02
    separatrix_hi: float = 0.9
    separatrix_tol: float = 1e-3
    basin_steps: int = 12
    basin_threshold: float = 0.5
    heal_steps: int = 4
    first_passage_seeds: int = 0
    first_passage_cap: int = 2000000
    gaussianity_steps: int = 40000
    ou_selftest: bool = False


@dataclass(frozen=True)
class MeanfieldCfg:
    kbar: int = 0                        # 0 -> round(n * p) from [network]
    eps_lo: float = 0.02
    eps_hi: float = 0.48
    eps_n: int = 93
    grid_n: int = 400
    ef_bifurcations: str = ""            # optional bifurcations.json to compare


@dataclass(frozen=True)
class OutputCfg:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class ExperimentConfig:
    network: NetworkCfg
    dynamics: DynamicsCfg
    ensemble: EnsembleCfg
    continuation: ContinuationCfg
    rare: RareCfg
    meanfield: MeanfieldCfg
    output: OutputCfg


_SECTIONS = {
    "network": NetworkCfg,
    "dynamics": DynamicsCfg,
    "ensemble": EnsembleCfg,
    "continuation": ContinuationCfg,
    "rare": RareCfg,
    "meanfield": MeanfieldCfg,
    "output": OutputCfg,
}

_PARSERS = {
    int: int,
    float: float,
    bool: _parse_bool,
    str: str,
    tuple[float, ...]: _parse_float_list,
    tuple[str, ...]: _parse_str_list,
}

_CHOICES = {
    ("ensemble", "network_mode"): ("fixed", "regenerate"),
    ("continuation", "param_name"): ("eps", "p"),
}


def _build_section(name: str, cls, raw: dict[str, str]):
    known = {f.name: f for f in dc_fields(cls)}
    values: dict[str, Any] = {}
    for key, raw_val in raw.items():
        if key not in known:
            raise ConfigError(f"unknown key '{key}' in section [{name}]")
        ftype = known[key].type
        if isinstance(ftype, str):  # postponed annotations
            ftype = {"int": int, "float": float, "bool": bool, "str": str,
                     "tuple[float, ...]": tuple[float, ...],
                     "tuple[str, ...]": tuple[str, ...]}[ftype]
        try:
            values[key] = _PARSERS[ftype](raw_val)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad value for [{name}] {key} = {raw_val!r}: {exc}")
        choices = _CHOICES.get((name, key))
        if choices is not None and values[key] not in choices:
            raise ConfigError(f"[{name}] {key} must be one of {choices}, "
                              f"got {values[key]!r}")
    return cls(**values)


def _validate(cfg: ExperimentConfig) -> None:
    if not (0.0 <= cfg.network.p <= 1.0):
        raise ConfigError("[network] p must lie in [0, 1]")
    if cfg.network.n < 1:
        raise ConfigError("[network] n must be >= 1")
    if not (0.0 < cfg.dynamics.eps < 0.5):
        raise ConfigError("[dynamics] eps must lie in (0, 0.5)")
    for rho in cfg.dynamics.initial_rho:
        if not (0.0 <= rho <= 1.0):
            raise ConfigError("[dynamics] initial_rho entries must lie in [0, 1]")
    if cfg.ensemble.n_copies < 1 or cfg.ensemble.horizon_T < 1:
        raise ConfigError("[ensemble] n_copies and horizon_T must be >= 1")
    for fam in cfg.continuation.families:
        if fam not in ("high", "low", "zero"):
            raise ConfigError(f"[continuation] unknown family {fam!r}")
    for fmt in cfg.output.formats:
        if fmt not in ("csv", "json"):
            raise ConfigError(f"[output] unknown format {fmt!r}")
    if cfg.rare.n_real < 100:
        raise ConfigError("[rare] n_real must be >= 100")


def load_config(path: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    sections: dict[str, Any] = {}
    for sec in parser.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        sections[sec] = _build_section(sec, _SECTIONS[sec], dict(parser[sec]))
    for name, cls in _SECTIONS.items():
        sections.setdefault(name, cls())
    cfg = ExperimentConfig(**sections)
    _validate(cfg)
    return cfg
