"""Sweep orchestration and result persistence (CSV tables plus a JSON sidecar)."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy

from wgqed.config import ExperimentConfig, config_to_dict
from wgqed.observables import (
    dicke_populations,
    extract_subradiant_feature,
    fit_risetime,
    g2,
    spectrum,
    steady_dicke_populations,
    sub_super_labels,
)
from wgqed.system import EmitterPairConfig
from wgqed.waveguide_green import coupling_map, ingest_field_map

TOLERANCE_PROFILES = {
    "default": {"refine_threshold": 0.02, "min_refine_levels": 0, "fit_rel_tol": 1e-8},
    "strict": {"refine_threshold": 0.005, "min_refine_levels": 5, "fit_rel_tol": 1e-10},
}


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def where(self, **match) -> Table:
        idx = {k: self.columns.index(k) for k in match}
        keep = tuple(r for r in self.rows
                     if all(_close(r[i], match[k]) for k, i in idx.items()))
        return Table(self.columns, keep)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")  # RFC 4180 line endings
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()


def _close(a, b) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        return math.isclose(float(a), float(b), rel_tol=1e-12, abs_tol=1e-15)
    return a == b


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass(frozen=True)
class ResultBundle:
    config: ExperimentConfig
    tables: Mapping[str, Table]
    provenance: Mapping = field(default_factory=dict)
    figure: str = ""

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, table in self.tables.items():
            p = out / f"{name}.csv"
            p.write_text(table.to_csv(), encoding="utf-8", newline="")
            written.append(p)
        side = out / "provenance.json"
        side.write_text(json.dumps(self.provenance, indent=2, sort_keys=True, default=str) + "\n",
                        encoding="utf-8")
        written.append(side)
        return written


# --- per-point workers (top level so they pickle) --------------------------

def parameter_columns(cfg: EmitterPairConfig) -> dict:
    """Full parameter tuple of one configuration, flattened for table rows."""
    e1, e2 = cfg.emitters
    w1, w2 = cfg.drive.amplitudes
    return {
        "separation_phase": cfg.separation_phase,
        "beta_1": e1.beta, "beta_2": e2.beta,
        "gamma0_1": e1.gamma0, "gamma0_2": e2.gamma0,
        "gamma_deph_1": e1.gamma_deph, "gamma_deph_2": e2.gamma_deph,
        "rabi_1": abs(w1), "rabi_2": abs(w2),
        "drive_phase_1": math.atan2(w1.imag, w1.real), "drive_phase_2": math.atan2(w2.imag, w2.real),
        "drive_mode": cfg.drive.mode,
        "j12": cfg.coupling.j12, "gamma12": cfg.coupling.gamma12,
    }


def _rows(params: dict, names: Sequence[str], values: Sequence[Sequence]) -> list[dict]:
    return [{**params, **dict(zip(names, v))} for v in values]


def _spectrum_point(cfg: ExperimentConfig, point: dict, tol: dict) -> dict:
    sysc = cfg.system.build(**point)
    params = parameter_columns(sysc)
    out: dict[str, list] = {"spectrum": [], "features": []}
    warnings = []
    levels = max(cfg.outputs.refine_levels, tol["min_refine_levels"])
    for mode in cfg.modes():
        s = spectrum(sysc, mode, cfg.outputs.detunings.points(), refine_levels=levels,
                     refine_threshold=tol["refine_threshold"])
        if "warning" in s.meta:
            warnings.append(s.meta["warning"])
        out["spectrum"] += _rows({**params, "mode": mode}, ("detuning", "intensity", "intensity_normalised"),
                                 zip(s.detunings, s.intensity, s.normalised))
        if cfg.outputs.subradiant_feature:
            f = extract_subradiant_feature(s)
            out["features"].append({**params, "mode": mode, "delta_T_sub": f.delta_T_sub,
                                    "peak_position": f.peak_position, "peak_width": f.peak_width,
                                    "detected": f.detected})
    return {"tables": out, "warnings": warnings}


def _g2_point(cfg: ExperimentConfig, point: dict, tol: dict) -> dict:
    sysc = cfg.system.build(**point)
    params = parameter_columns(sysc)
    taus = cfg.outputs.taus.points()
    if cfg.outputs.include_zero_delay and taus[0] != 0:
        taus = np.concatenate([[0.0], taus])
    out: dict[str, list] = {"g2": [], "risetime": []}
    consistency = []
    for mode in cfg.modes():
        r = g2(sysc, mode, tau_grid=taus)
        consistency.append(r.meta["tau0_consistency"])
        out["g2"] += _rows({**params, "mode": mode}, ("tau", "g2"), zip(r.tau, r.g2))
        if cfg.outputs.fit_risetime:
            fit = fit_risetime(r, rel_tol=tol["fit_rel_tol"])
            out["risetime"].append({**params, "mode": mode, "fit_gamma": fit.gamma,
                                    "risetime": fit.risetime, "fit_residual": fit.residual,
                                    "fit_iterations": fit.iterations})
    return {"tables": out, "tau0_consistency": max(consistency)}


def _populations_point(cfg: ExperimentConfig, point: dict, tol: dict) -> dict:
    sysc = cfg.system.build(**point)
    params = parameter_columns(sysc)
    out: dict[str, list] = {"steady": [], "traces": []}
    ss = steady_dicke_populations(sysc)
    sub, _ = sub_super_labels(sysc)
    out["steady"].append({**params, "sub_state": sub, "rho_gg": ss["g"], "rho_ee": ss["e"],
                          "rho_ss": ss["s"], "rho_aa": ss["a"], "rho_sub": ss["sub"],
                          "rho_sup": ss["sup"]})
    if not cfg.outputs.steady_only:
        p = dicke_populations(sysc, cfg.outputs.times.points())
        pops = p.populations
        out["traces"] = _rows({**params, "sub_state": sub},
                              ("t", "rho_gg", "rho_ee", "rho_ss", "rho_aa", "rho_sub", "rho_sup"),
                              zip(p.times, pops["g"], pops["e"], pops["s"], pops["a"],
                                  p.rho_sub, p.rho_sup))
    return {"tables": out}


_WORKERS = {"spectrum": _spectrum_point, "g2": _g2_point, "populations": _populations_point}


def _dispatch(args):
    cfg, point, tol = args
    return _WORKERS[cfg.command](cfg, point, tol)


def _assemble(results: list[dict], sweep_names: Sequence[str], points: list[dict]) -> dict[str, Table]:
    tables: dict[str, Table] = {}
    names = sorted({k for r in results for k, rows in r["tables"].items() if rows})
    for name in names:
        rows = []
        for point, res in zip(points, results):
            for row in res["tables"].get(name, []):
                rows.append({**{f"sweep_{k}": point[k] for k in sweep_names}, **row})
        cols = tuple(rows[0])
        tables[name] = Table(cols, tuple(tuple(r[c] for c in cols) for r in rows))
    return tables


def _coupling_map_tables(cfg: ExperimentConfig, base_dir: Path | None) -> tuple[dict[str, Table], dict]:
    path = Path(cfg.outputs.field_file)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    fmap = ingest_field_map(path)
    rates = dict(cfg.outputs.local_rates) or {p: fmap.gamma_local for p in cfg.outputs.positions}
    cm = coupling_map(fmap, cfg.outputs.positions, rates)
    rows = [{**r, "gamma_1": fmap.gamma_local, "gamma_2": rates[r["emitter2_position"]],
             "source_x_a": fmap.source_x, "source_y_a": fmap.source_y,
             "lattice_constant_nm": fmap.lattice_constant_nm} for r in cm.rows()]
    cols = tuple(rows[0])
    return {"coupling_map": Table(cols, tuple(tuple(r[c] for c in cols) for r in rows))}, fmap.metadata


def run_experiment(cfg: ExperimentConfig, *, workers: int = 1, tolerance_profile: str = "default",
                   base_dir=None) -> ResultBundle:
    """Evaluate every sweep point and collate tables in sweep order."""
    if tolerance_profile not in TOLERANCE_PROFILES:
        raise ValueError(f"unknown tolerance profile {tolerance_profile!r}")
    tol = dict(TOLERANCE_PROFILES[tolerance_profile])
    started = time.time()
    extra: dict = {}
    if cfg.command == "coupling-map":
        tables, extra["field_map_metadata"] = _coupling_map_tables(
            cfg, Path(base_dir) if base_dir else None)
        results = []
    else:
        points = cfg.points()
        jobs = [(cfg, p, tol) for p in points]
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(_dispatch, jobs))
        else:
            results = [_dispatch(j) for j in jobs]
        tables = _assemble(results, [a.name for a in cfg.sweep], points)
    warnings = sorted({w for r in results for w in r.get("warnings", [])})
    tau0 = [r["tau0_consistency"] for r in results if "tau0_consistency" in r]
    from wgqed import __version__

    provenance = {
        "engine_version": __version__,
        "figure": cfg.figure,
        "command": cfg.command,
        "config": config_to_dict(cfg),
        "tolerance_profile": tolerance_profile,
        "tolerances": tol,
        "workers": workers,
        "points": len(results) or 1,
        "warnings": warnings,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "started_unix": started,
        "elapsed_s": time.time() - started,
        **extra,
    }
    if tau0:
        provenance["max_tau0_consistency"] = max(tau0)
    return ResultBundle(cfg, tables, provenance, cfg.figure)


def with_outputs(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, outputs=replace(cfg.outputs, **kw))
