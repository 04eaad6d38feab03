"""Flat key-value run configuration.

Format: one ``section.key = value`` per line, UTF-8, ``#`` starts a comment.
Lists are comma separated; ``none`` marks an absent value. Every key has a
default, so an empty file is a valid configuration.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Optional

from . import catalog
from .catalog import Role
from .errors import ConfigError
from .sm import JUMP_KINDS, SmKind, SmSpec, default_beta_mu
from .solver import Scenario

DEFAULTS = {
    "scenario.a": "1.0",
    "scenario.horizon": "1.0",
    "scenario.x_min": "-6.0",
    "scenario.x_max": "6.0",
    "scenario.n_t": "8",
    "scenario.n_x": "101",
    "scenario.quad_nodes": "64",
    "scenario.picard_tol": "1e-10",
    "scenario.picard_max_iter": "50",
    "u0.name": "gaussian_bump",
    "u0.params": "1.0",
    "f.name": "zero",
    "f.params": "",
    "sigma.name": "constant",
    "sigma.params": "1.0",
    "sm.kind": "wiener",
    "sm.levels": "none",
    "sm.hurst": "none",
    "sm.alpha": "none",
    "sm.scale": "1.0",
    "sm.intensity": "none",
    "sm.jump_mean": "none",
    "sm.claimed_beta_mu": "auto",
    "sm.weight.name": "constant",
    "sm.weight.params": "1.0",
    "run.ensemble_size": "1",
    "run.base_seed": "0",
    "output.field_csv": "field.csv",
    "output.report_json": "report.json",
    "analysis.delta": "auto",
    "analysis.alphas": "0.75",
    "analysis.epsilons": "0.5",
    "analysis.spatial_lags": "1,8",
    "analysis.temporal_lags": "1,16",
}

SCENARIO_SECTIONS = ("scenario.", "u0.", "f.", "sigma.", "sm.")


@dataclass(frozen=True)
class Outputs:
    field_csv: Optional[str] = "field.csv"
    report_json: Optional[str] = "report.json"


@dataclass(frozen=True)
class Analysis:
    delta: float
    alphas: tuple = (0.75,)
    epsilons: tuple = (0.5,)
    spatial_lags: tuple = (1, 8)
    temporal_lags: tuple = (1, 16)


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    ensemble_size: int = 1
    base_seed: int = 0
    outputs: Outputs = field(default_factory=Outputs)
    analysis: Optional[Analysis] = None

    def with_seed(self, seed: int) -> "RunConfig":
        if seed < 0:
            raise ConfigError("seed must be unsigned")
        return replace(self, base_seed=seed, scenario=replace(self.scenario, seed=seed))


def read_pairs(text: str) -> dict:
    """Parse ``key = value`` lines into a dict, rejecting unknown or repeated keys."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _real(pairs, key, allow_none=False):
    text = pairs[key]
    if allow_none and text.lower() in ("none", "auto", ""):
        return None
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key}: malformed number {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite")
    return value


def _int(pairs, key, allow_none=False):
    text = pairs[key]
    if allow_none and text.lower() in ("none", "auto", ""):
        return None
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: malformed integer {text!r}") from None


def _reals(pairs, key):
    text = pairs[key].strip()
    if not text or text.lower() == "none":
        return ()
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"{key}: malformed number list {text!r}") from None


def _path(pairs, key):
    text = pairs[key].strip()
    return None if text.lower() in ("none", "") else text


def parse_config(text: str) -> RunConfig:
    """Build a fully validated RunConfig; assumption violations raise AssumptionError."""
    given = read_pairs(text)
    pairs = {**DEFAULTS, **given}

    u0 = catalog.make(Role.INITIAL_CONDITION, pairs["u0.name"], _reals(pairs, "u0.params"))
    f = catalog.make(Role.DRIFT, pairs["f.name"], _reals(pairs, "f.params"))
    sigma = catalog.make(Role.DIFFUSION, pairs["sigma.name"], _reals(pairs, "sigma.params"))

    kind = SmKind.parse(pairs["sm.kind"])
    sm_kw = {}
    if kind is SmKind.WEIGHTED_FBM:
        sm_kw["hurst"] = _real(pairs, "sm.hurst", allow_none=True)
        if sm_kw["hurst"] is None:
            raise ConfigError("sm.hurst is required for weighted_fbm")
        sm_kw["weight"] = catalog.make(Role.WEIGHT, pairs["sm.weight.name"],
                                       _reals(pairs, "sm.weight.params"))
    if kind is SmKind.ALPHA_STABLE:
        sm_kw["alpha"] = _real(pairs, "sm.alpha", allow_none=True)
        if sm_kw["alpha"] is None:
            raise ConfigError("sm.alpha is required for alpha_stable")
        sm_kw["scale"] = _real(pairs, "sm.scale")
    if kind is SmKind.COMPENSATED_POISSON:
        sm_kw["intensity"] = _real(pairs, "sm.intensity", allow_none=True)
        sm_kw["jump_mean"] = _real(pairs, "sm.jump_mean", allow_none=True)
    for key, name in (("sm.hurst", "hurst"), ("sm.alpha", "alpha"),
                      ("sm.intensity", "intensity"), ("sm.jump_mean", "jump_mean")):
        if key in given and given[key].lower() not in ("none", "") and name not in sm_kw:
            raise ConfigError(f"{key} does not apply to sm.kind = {kind.value}")
    beta_text = pairs["sm.claimed_beta_mu"].strip().lower()
    if beta_text == "auto":
        beta = default_beta_mu(kind, sm_kw.get("hurst"))
    elif beta_text == "none":
        beta = None
    else:
        beta = _real(pairs, "sm.claimed_beta_mu")
    if kind in JUMP_KINDS and beta is not None:
        raise ConfigError(f"A7 cannot be claimed for {kind.value}: paths have jumps")
    sm_spec = SmSpec(kind, claimed_beta_mu=beta, **sm_kw)

    scenario = Scenario(
        a=_real(pairs, "scenario.a"),
        horizon=_real(pairs, "scenario.horizon"),
        x_min=_real(pairs, "scenario.x_min"),
        x_max=_real(pairs, "scenario.x_max"),
        n_t=_int(pairs, "scenario.n_t"),
        n_x=_int(pairs, "scenario.n_x"),
        u0=u0, f=f, sigma=sigma, sm=sm_spec,
        sm_levels=_int(pairs, "sm.levels", allow_none=True),
        seed=0,
        quad_nodes=_int(pairs, "scenario.quad_nodes"),
        picard_tol=_real(pairs, "scenario.picard_tol"),
        picard_max_iter=_int(pairs, "scenario.picard_max_iter"),
    )
    if kind is SmKind.WEIGHTED_FBM and scenario.path_levels > 14:
        raise ConfigError("weighted_fbm paths support at most 14 levels")
    if scenario.path_levels > 24:
        raise ConfigError("sm.levels must not exceed 24")

    ensemble = _int(pairs, "run.ensemble_size")
    if ensemble < 1:
        raise ConfigError("run.ensemble_size must be at least 1")
    seed = _int(pairs, "run.base_seed")
    if seed < 0:
        raise ConfigError("run.base_seed must be unsigned")

    delta = _real(pairs, "analysis.delta", allow_none=True)
    if delta is None:
        delta = scenario.horizon / 16
    if not 0 < delta < scenario.horizon / 4:
        raise ConfigError(f"analysis.delta must lie in (0, T/4), got {delta}")
    alphas = _reals(pairs, "analysis.alphas")
    for alpha in alphas:
        if not 0.5 < alpha < 1:
            raise ConfigError(f"analysis.alphas: {alpha} outside (1/2, 1); the chaining estimate needs 1/2 < alpha < 1")
    epsilons = _reals(pairs, "analysis.epsilons")
    if any(not e > 0 for e in epsilons):
        raise ConfigError("analysis.epsilons must all be positive")
    lags = []
    for key in ("analysis.spatial_lags", "analysis.temporal_lags"):
        vals = _reals(pairs, key)
        if len(vals) != 2 or any(v != int(v) for v in vals) or not 1 <= vals[0] < vals[1]:
            raise ConfigError(f"{key} must be two integers 'min,max' with 1 <= min < max")
        lags.append((int(vals[0]), int(vals[1])))

    return RunConfig(
        scenario=replace(scenario, seed=seed),
        ensemble_size=ensemble,
        base_seed=seed,
        outputs=Outputs(_path(pairs, "output.field_csv"), _path(pairs, "output.report_json")),
        analysis=Analysis(delta, alphas, epsilons, lags[0], lags[1]),
    )


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, bool):
        raise TypeError("booleans are not config values")
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def to_pairs(cfg: RunConfig) -> dict:
    sc = cfg.scenario
    sm = sc.sm
    pairs = {
        "scenario.a": _fmt(sc.a),
        "scenario.horizon": _fmt(sc.horizon),
        "scenario.x_min": _fmt(sc.x_min),
        "scenario.x_max": _fmt(sc.x_max),
        "scenario.n_t": _fmt(sc.n_t),
        "scenario.n_x": _fmt(sc.n_x),
        "scenario.quad_nodes": _fmt(sc.quad_nodes),
        "scenario.picard_tol": _fmt(sc.picard_tol),
        "scenario.picard_max_iter": _fmt(sc.picard_max_iter),
        "u0.name": sc.u0.name, "u0.params": _fmt(sc.u0.params),
        "f.name": sc.f.name, "f.params": _fmt(sc.f.params),
        "sigma.name": sc.sigma.name, "sigma.params": _fmt(sc.sigma.params),
        "sm.kind": sm.kind.value,
        "sm.levels": _fmt(sc.sm_levels),
        "sm.claimed_beta_mu": _fmt(sm.claimed_beta_mu),
    }
    if sm.kind is SmKind.WEIGHTED_FBM:
        pairs["sm.hurst"] = _fmt(sm.hurst)
        pairs["sm.weight.name"] = sm.weight.name
        pairs["sm.weight.params"] = _fmt(sm.weight.params)
    if sm.kind is SmKind.ALPHA_STABLE:
        pairs["sm.alpha"] = _fmt(sm.alpha)
        pairs["sm.scale"] = _fmt(sm.scale)
    if sm.kind is SmKind.COMPENSATED_POISSON:
        pairs["sm.intensity"] = _fmt(sm.intensity)
        pairs["sm.jump_mean"] = _fmt(sm.jump_mean)
    pairs.update({
        "run.ensemble_size": _fmt(cfg.ensemble_size),
        "run.base_seed": _fmt(cfg.base_seed),
        "output.field_csv": cfg.outputs.field_csv or "none",
        "output.report_json": cfg.outputs.report_json or "none",
    })
    an = cfg.analysis
    if an is not None:
        pairs.update({
            "analysis.delta": _fmt(an.delta),
            "analysis.alphas": _fmt(an.alphas) or "none",
            "analysis.epsilons": _fmt(an.epsilons) or "none",
            "analysis.spatial_lags": _fmt(an.spatial_lags),
            "analysis.temporal_lags": _fmt(an.temporal_lags),
        })
    return pairs


def format_config(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_config(format_config(c)) == c``."""
    return "".join(f"{k} = {v}\n" for k, v in sorted(to_pairs(cfg).items()))


def scenario_text(cfg: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in sorted(to_pairs(cfg).items())
                   if k.startswith(SCENARIO_SECTIONS))


def scenario_hash(cfg: RunConfig) -> str:
    """SHA-256 of the canonical scenario sections; seeds and outputs excluded."""
    return hashlib.sha256(scenario_text(cfg).encode("utf-8")).hexdigest()


def with_override(cfg: RunConfig, key: str, value: str) -> RunConfig:
    """Re-parse the canonical text with one key replaced, so validation reruns."""
    pairs = to_pairs(cfg)
    if key not in DEFAULTS:
        raise ConfigError(f"unknown key {key!r}")
    pairs[key] = value
    return parse_config("".join(f"{k} = {v}\n" for k, v in pairs.items()))
