"""Batch drivers behind the CLI: ensemble simulation, analysis, and sweeps.

Every artifact is a deterministic function of the configuration text: field
CSVs use shortest round-trip float formatting and JSON is written with sorted
keys, so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import RunConfig, format_config, parse_config, scenario_hash, with_override
from .errors import ConfigError, ConvergenceError
from .regularity import MIN_FIT_R2, PASS_TOLERANCE, analyze, predicted_exponents
from .sm import RNG_ALGORITHM, sample_path
from .solver import Field, MildSolver, Solution

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
SWEEP_AXES = {
    "hurst": "sm.hurst",
    "sigma.holder_exponent": None,
    "n_t": "scenario.n_t",
    "n_x": "scenario.n_x",
}


class FieldFormatError(OSError):
    """A field CSV that does not match the documented layout."""


def member_seeds(cfg: RunConfig) -> list:
    return [cfg.base_seed + k for k in range(cfg.ensemble_size)]


def field_filename(cfg: RunConfig, seed: int) -> Optional[str]:
    name = cfg.outputs.field_csv
    if name is None:
        return None
    stem, dot, ext = name.rpartition(".")
    if not dot:
        stem, ext = name, "csv"
    return f"{stem}_s{seed}.{ext}"


def write_field_csv(path: Path, fld: Field) -> None:
    nt, nx = fld.values.shape
    t = np.repeat(fld.t_grid, nx).tolist()
    x = np.tile(fld.x_grid, nt).tolist()
    u = fld.values.ravel().tolist()
    body = "\n".join([f"{a!r},{b!r},{c!r}" for a, b, c in zip(t, x, u)])
    path.write_text("t,x,u\n" + body + "\n", encoding="utf-8")


def read_field_csv(path: Path, cfg: RunConfig) -> Field:
    sc = cfg.scenario
    text = Path(path).read_text(encoding="utf-8")
    head, _, rest = text.partition("\n")
    if head.strip() != "t,x,u":
        raise FieldFormatError(f"{path}: expected header 't,x,u'")
    try:
        data = np.loadtxt(io.StringIO(rest), delimiter=",", ndmin=2)
    except ValueError as exc:
        raise FieldFormatError(f"{path}: {exc}") from None
    nt, nx = len(sc.t_grid), sc.n_x
    if data.shape != (nt * nx, 3):
        raise FieldFormatError(f"{path}: expected {nt * nx} rows of 3 columns, got {data.shape}")
    t = data[:, 0].reshape(nt, nx)
    x = data[:, 1].reshape(nt, nx)
    if not (np.array_equal(t[:, 0], sc.t_grid) and np.array_equal(x[0], sc.x_grid)):
        raise FieldFormatError(f"{path}: grid does not match the scenario")
    return Field(data[:, 2].reshape(nt, nx).copy(), sc.t_grid, sc.x_grid)


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _solve_member(cfg: RunConfig, seed: int, solver: Optional[MildSolver] = None):
    sc = cfg.scenario
    path = sample_path(sc.sm, sc.horizon, sc.path_levels, seed)
    solver = solver or MildSolver(sc)
    return solver.solve(path)


def _worker(cfg_text: str, seed: int):
    cfg = parse_config(cfg_text)
    try:
        sol = _solve_member(cfg, seed)
    except ConvergenceError as exc:
        return seed, None, str(exc), exc.residuals
    return seed, sol, None, None


def _mid_index(cfg: RunConfig) -> int:
    return (cfg.scenario.n_x - 1) // 2


def run_simulate(cfg: RunConfig, out_dir=".", threads: int = 1) -> int:
    """Solve every ensemble member and write field CSVs plus manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = member_seeds(cfg)
    if threads > 1 and len(seeds) > 1:
        text = format_config(cfg)
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_worker, [text] * len(seeds), seeds))
    else:
        solver = MildSolver(cfg.scenario)
        results = []
        for seed in seeds:
            try:
                results.append((seed, _solve_member(cfg, seed, solver), None, None))
            except ConvergenceError as exc:
                results.append((seed, None, str(exc), exc.residuals))

    members = []
    failed = []
    j_mid = _mid_index(cfg)
    for seed, sol, err, residuals in results:
        entry = {"seed": seed, "field_csv": field_filename(cfg, seed)}
        if sol is None:
            entry.update(status="non-convergence", error=err, residuals=residuals, field_csv=None)
            failed.append(seed)
        else:
            entry.update(status="ok", iterations=sol.iterations, residuals=sol.residuals,
                         stochastic_at_T_xmid=float(sol.stochastic[-1, j_mid]))
            if entry["field_csv"] is not None:
                write_field_csv(out / entry["field_csv"], sol.field)
        members.append(entry)

    manifest = {
        "config": format_config(cfg),
        "members": members,
        "package_version": __version__,
        "rng": {"algorithm": RNG_ALGORITHM, "numpy_version": np.__version__},
        "scenario_hash": scenario_hash(cfg),
    }
    _dump_json(out / MANIFEST, manifest)
    if failed:
        raise ConvergenceError(f"Picard iteration failed for seeds {failed}")
    return 0


def _manifest_entry(csv_path: Path):
    manifest_path = csv_path.parent / MANIFEST
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FileNotFoundError(f"no {MANIFEST} next to {csv_path}") from None
    for entry in manifest["members"]:
        if entry.get("field_csv") == csv_path.name:
            return manifest["scenario_hash"], entry
    raise ConfigError(f"{csv_path.name} is not listed in {manifest_path}")


def _median(values):
    vals = [v for v in values if v is not None]
    return float(np.median(vals)) if vals else None


def _ensemble_status(medians, r2s, predicted) -> str:
    if predicted is None:
        return "not-applicable"
    med = _median(medians)
    if med is None:
        return "inconclusive"
    r2 = _median(r2s)
    if r2 is None or r2 < MIN_FIT_R2:
        return "inconclusive"
    return "pass" if med >= predicted - PASS_TOLERANCE else "fail"


def build_report(cfg: RunConfig, fields: Sequence) -> dict:
    """Analyze each field CSV and aggregate into the ensemble report dict."""
    if not fields:
        raise ConfigError("no inputs")
    sc = cfg.scenario
    an = cfg.analysis
    want = scenario_hash(cfg)
    per_seed = []
    for name in fields:
        p = Path(name)
        got, entry = _manifest_entry(p)
        if got != want:
            raise ConfigError(f"scenario hash mismatch for {p}: {got[:12]} != {want[:12]}")
        fld = read_field_csv(p, cfg)
        seed = entry["seed"]
        path = sample_path(sc.sm, sc.horizon, sc.path_levels, seed)
        rep = analyze(fld, sc, path, an.delta, an.alphas, an.epsilons,
                      an.spatial_lags, an.temporal_lags)
        d = rep.to_dict()
        d["seed"] = seed
        d["field_csv"] = p.name
        d["_r2"] = (_median([e.fit_r2 for e in rep.spatial_estimates if e]),
                    _median([e.fit_r2 for e in rep.temporal_estimates if e]))
        per_seed.append(d)
    per_seed.sort(key=lambda d: (d["seed"], d["field_csv"]))

    g1, g2 = predicted_exponents(sc.sigma.holder_exponent, sc.sm.claimed_beta_mu)
    sp = [d["spatial"]["median"] for d in per_seed]
    tm = [d["temporal"]["median"] for d in per_seed]
    sp_r2 = [d["_r2"][0] for d in per_seed]
    tm_r2 = [d["_r2"][1] for d in per_seed]
    for d in per_seed:
        del d["_r2"]

    besov = {}
    for alpha in an.alphas:
        key = repr(float(alpha))
        rows = [d["besov"][key] for d in per_seed]
        div = [x for r in rows for x in r["spatial_diverging"] + r["temporal_diverging"]]
        besov[key] = {
            "spatial_median": _median([x for r in rows for x in r["spatial"]]),
            "temporal_median": _median([x for r in rows for x in r["temporal"]]),
            "diverging_fraction": float(np.mean(div)) if div else 0.0,
        }
    dyadic = {}
    for eps in an.epsilons:
        key = repr(float(eps))
        entries = [d["dyadic"][key] for d in per_seed]
        finals = [e["partial_sums"][-1] for e in entries if e["converged"]]
        dyadic[key] = {
            "converged_fraction": float(np.mean([e["converged"] for e in entries])),
            "mean_final": float(np.mean(finals)) if finals else None,
        }
    beta_mu = sc.sm.claimed_beta_mu
    beta_sigma = sc.sigma.holder_exponent
    return {
        "besov": besov,
        "dyadic": dyadic,
        "flags": {"spatial": _ensemble_status(sp, sp_r2, g1),
                  "temporal": _ensemble_status(tm, tm_r2, g2)},
        "medians": {"spatial": _median(sp), "temporal": _median(tm)},
        "per_seed": per_seed,
        "predicted": {"gamma1": g1, "gamma2": g2},
        "remark_observed": {
            "gamma1_conjectured": beta_sigma,
            "gamma2_conjectured": None if beta_mu is None else min(beta_mu, beta_sigma),
            "spatial_median": _median(sp),
            "temporal_median": _median(tm),
        },
        "scenario_hash": want,
    }


def run_analyze(cfg: RunConfig, fields: Sequence, out_dir=".") -> int:
    """Write the aggregated regularity report JSON."""
    report = build_report(cfg, fields)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / (cfg.outputs.report_json or "report.json"), report)
    return 0


def sweep_config(cfg: RunConfig, param: str, value: str) -> RunConfig:
    if param not in SWEEP_AXES:
        raise ConfigError(f"invalid sweep axis {param!r}; choose from {', '.join(SWEEP_AXES)}")
    if param == "sigma.holder_exponent":
        from .catalog import HOLDER_PARAM_INDEX
        sigma = cfg.scenario.sigma
        if sigma.name not in HOLDER_PARAM_INDEX:
            raise ConfigError(f"sigma {sigma.name} has a fixed Hölder exponent; sweep needs holder_rough")
        params = list(sigma.params)
        params[HOLDER_PARAM_INDEX[sigma.name]] = value
        return with_override(cfg, "sigma.params", ",".join(str(p) for p in params))
    if param == "hurst" and cfg.scenario.sm.hurst is None:
        raise ConfigError("hurst sweep needs sm.kind = weighted_fbm")
    return with_override(cfg, SWEEP_AXES[param], value)


def run_sweep(cfg: RunConfig, param: str, values: Sequence[str], out_dir=".", threads: int = 1) -> int:
    """Simulate and analyze once per axis value; write sweep_<param>.csv."""
    if not values:
        raise ConfigError("sweep needs at least one value")
    configs = [(v, sweep_config(cfg, param, v)) for v in values]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for value, sub_cfg in configs:
        sub = out / f"sweep_{param}_{value}"
        run_simulate(sub_cfg, sub, threads)
        manifest = json.loads((sub / MANIFEST).read_text(encoding="utf-8"))
        csvs = [sub / m["field_csv"] for m in manifest["members"] if m["field_csv"]]
        stoch = [m["stochastic_at_T_xmid"] for m in manifest["members"]]
        med_sp = med_tm = None
        flags = {"spatial": "not-run", "temporal": "not-run"}
        pred = predicted_exponents(sub_cfg.scenario.sigma.holder_exponent,
                                   sub_cfg.scenario.sm.claimed_beta_mu)
        if csvs:
            run_analyze(sub_cfg, csvs, sub)
            report = json.loads((sub / (sub_cfg.outputs.report_json or "report.json")).read_text(encoding="utf-8"))
            med_sp, med_tm = report["medians"]["spatial"], report["medians"]["temporal"]
            flags = report["flags"]
        rows.append([param, value, pred[0], pred[1], med_sp, med_tm, flags["spatial"], flags["temporal"],
                     float(np.mean(stoch))])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["param", "value", "gamma1_predicted", "gamma2_predicted", "spatial_median",
                     "temporal_median", "spatial_flag", "temporal_flag", "stochastic_at_T_xmid_mean"])
    for row in rows:
        writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    (out / f"sweep_{param}.csv").write_text(buf.getvalue(), encoding="utf-8")
    return 0


def default_threads() -> int:
    text = os.environ.get("SM_HEAT_THREADS", "1")
    try:
        return max(1, int(text))
    except ValueError:
        raise ConfigError(f"SM_HEAT_THREADS must be an integer, got {text!r}") from None
