"""Named experiments reproducing the figures, each with numerical checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.signal import find_peaks

from wgqed.analytic import coupling_1d, single_emitter_intensities
from wgqed.config import ExperimentConfig, Grid, OutputSpec, SweepAxis, SystemSpec
from wgqed.dicke_core import DensityMatrix, DICKE_BASIS
from wgqed.experiments import ResultBundle, Table
from wgqed.observables import (
    CorrelationResult,
    RiseTimeFitError,
    dip_fwhm,
    fit_risetime,
    oscillation_period,
)
from wgqed.system import POPULATION_RABI
from wgqed.waveguide_green import Waveguide1D, generate_synthetic_1d_field, write_field_map

PI = math.pi
SUBRADIANT_PHASE = 35 * PI / 18
RISETIME_TABLE = {(0.99, 0.0): 100.0, (0.99, 0.01): 38.9, (0.99, 0.1): 6.2,
                  (0.9, 0.0): 10.0, (0.7, 0.0): 3.0}
FIG3_DEPHASING = (0.0, 0.016, 0.05, 0.1, 0.2, 0.5)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    config: ExperimentConfig
    checks: Callable[[ResultBundle], list[Check]]
    prepare: Callable[[Path], None] | None = None


def _check(name: str, passed, detail: str) -> Check:
    return Check(name, bool(passed), detail)


def _series(t: Table, x: str, y: str, **match):
    sub = t.where(**match) if match else t
    xs, ys = sub.column(x).astype(float), sub.column(y).astype(float)
    order = np.argsort(xs, kind="stable")
    return xs[order], ys[order]


def _tau0(b: ResultBundle) -> Check:
    err = b.provenance.get("max_tau0_consistency", float("nan"))
    return _check("regression tau=0 consistency", err <= 1e-9, f"max relative error {err:.2e} (<= 1e-9)")


# --- single emitter -------------------------------------------------------------------------

SINGLE = SystemSpec(separation_phase=0.0, beta=(1.0, 0.0), gamma_deph=(0.0, 0.0),
                    driven=(True, False), j12=0.0, gamma12=0.0)


def _checks_fig2a(b):
    t = b.tables["spectrum"]
    d, rt = _series(t, "detuning", "intensity", mode="RT")
    _, rf = _series(t, "detuning", "intensity", mode="RF")
    ref = single_emitter_intensities(d, beta=1.0, rabi=b.config.system.rabi)
    wings = rt[np.isclose(np.abs(d), 50.0)]
    return [
        _check("RT extinction at resonance", rt[d == 0][0] <= 1e-6, f"I_RT(0) = {rt[d == 0][0]:.2e} (<= 1e-6)"),
        _check("RT far wings", np.all(np.abs(wings - 1) <= 1e-3),
               f"I_RT(+-50) - 1 = {np.abs(wings - 1).max():.2e} (<= 1e-3)"),
        _check("RT matches single-emitter oracle", np.abs(rt - ref["RT"]).max() <= 1e-6,
               f"max deviation {np.abs(rt - ref['RT']).max():.2e} (<= 1e-6)"),
        _check("RF matches single-emitter oracle", np.abs(rf - ref["RF"]).max() <= 1e-6,
               f"max deviation {np.abs(rf - ref['RF']).max():.2e} (<= 1e-6)"),
    ]


def _g2_at(b, mode="RF"):
    return _series(b.tables["g2"], "tau", "g2", mode=mode)


def _checks_fig2b(b):
    tau, g = _g2_at(b)
    fit = fit_risetime(CorrelationResult(tau, g))
    return [
        _check("antibunching g2(0)", g[0] <= 1e-6, f"g2(0) = {g[0]:.2e} (<= 1e-6)"),
        _check("g2 recovers", abs(g[-1] - 1) <= 1e-3, f"|g2(1e3) - 1| = {abs(g[-1] - 1):.2e} (<= 1e-3)"),
        _check("recovery time 1/Gamma0", abs(fit.risetime - 1) <= 1e-4, f"rise time {fit.risetime:.6f}"),
        _tau0(b),
    ]


# --- ideal pairs ----------------------------------------------------------------------------

def _checks_fig2c(b):
    t = b.tables["spectrum"]
    d, rf = _series(t, "detuning", "intensity", mode="RF")
    _, rt = _series(t, "detuning", "intensity", mode="RT")
    pk, _ = find_peaks(rf)
    dips, _ = find_peaks(-rt)
    j = float(t.column("j12")[0])
    sym = len(pk) == 2 and abs(d[pk][0] + d[pk][1]) < 1e-9
    return [
        _check("RF shows two split peaks", sym and d[pk][1] > 0,
               f"peaks at {np.round(d[pk], 4).tolist()} (J12 = {j})"),
        _check("RT dips not individually resolved", len(dips) == 1, f"{len(dips)} local minima"),
    ]


def _checks_fig2d(b):
    tau, g = _g2_at(b)
    j = float(b.tables["g2"].column("j12")[0])
    expected = 2 * PI / (2 * j)
    period = oscillation_period(tau, g)
    return [
        _check("g2 oscillation period 2 pi / (2 J12)", abs(period / expected - 1) <= 0.05,
               f"measured {period:.4f}, expected {expected:.4f} (5%)"),
        _tau0(b),
    ]


def _checks_fig2e(b):
    t = b.tables["spectrum"]
    d, rt = _series(t, "detuning", "intensity", mode="RT")
    width = dip_fwhm(d, rt)
    single = dip_fwhm(d, single_emitter_intensities(d)["RT"])
    sysc = b.config.system.build()
    a = DensityMatrix.from_state(DICKE_BASIS[:, 3]).vector
    undriven = replace(b.config.system, rabi=0.0).build()
    resid = float(np.linalg.norm(undriven.liouvillian().matrix @ a))
    return [
        _check("RT dip FWHM doubled", abs(width / single / 2 - 1) <= 0.02,
               f"FWHM {width:.5f} vs single emitter {single:.5f} (ratio 2 within 2%)"),
        _check("antisymmetric state stationary", resid <= 1e-10, f"|L vec(|a><a|)| = {resid:.1e}"),
        _check("coupling purely dissipative", abs(sysc.coupling.j12) < 1e-12,
               f"J12 = {sysc.coupling.j12:.1e}, Gamma12 = {sysc.coupling.gamma12:.6f}"),
    ]


def _checks_fig2f(b):
    tau, g = _g2_at(b)
    try:
        fit = fit_risetime(CorrelationResult(tau, g))
        ok, detail = abs(fit.risetime / 0.5 - 1) <= 0.1, f"rise time {fit.risetime:.4f} (0.5 within 10%)"
    except RiseTimeFitError as exc:
        ok, detail = False, f"{exc}; g2 spans [{g.min():.6f}, {g.max():.6f}]"
    return [_check("rise time ~ 1/(2 Gamma0)", ok, detail), _tau0(b)]


def _checks_fig2g(b):
    f = b.tables["features"].where(mode="RT")
    pos = float(f.column("peak_position")[0])
    j = float(f.column("j12")[0])
    width = float(f.column("peak_width")[0])
    return [
        _check("sub-radiant feature at J12", abs(pos / j - 1) <= 0.05, f"position {pos:.5f}, J12 {j:.5f} (5%)"),
        _check("sub-radiant feature narrower than Gamma0", width <= 1.0, f"FWHM {width:.5f}"),
    ]


def _checks_fig2h(b):
    tau, g = _g2_at(b)
    late = np.abs(g[tau > 100] - 1).max()
    return [
        _check("oscillations persist beyond 100/Gamma0", late > 1e-3, f"max |g2 - 1| for tau > 100: {late:.3e}"),
        _tau0(b),
    ]


# --- dephasing ------------------------------------------------------------------------------

def _feature_series(b):
    return _series(b.tables["features"], "gamma_deph_1", "delta_T_sub", mode="RT")


def _checks_fig3a(b):
    f = b.tables["features"]
    out = []
    gd, dt = _feature_series(b)
    out.append(_check("feature vanished at 0.5 Gamma0", dt[np.isclose(gd, 0.5)][0] < 0.02,
                      f"Delta T_sub = {dt[np.isclose(gd, 0.5)][0]:.4f} (< 0.02)"))
    g12 = float(f.column("gamma12")[0])
    for gdv in (0.0, 0.016, 0.05):
        w = float(f.where(gamma_deph_1=gdv).column("peak_width")[0])
        want = 1 - g12 + 2 * gdv
        out.append(_check(f"feature FWHM at Gamma_deph={gdv}", abs(w / want - 1) <= 0.1,
                          f"{w:.5f} vs Gamma0 - Gamma12 + 2 Gamma_deph = {want:.5f} (10%)"))
    return out


def _checks_fig3b(b):
    gd, dt = _feature_series(b)
    at = dt[np.isclose(gd, 0.016)][0]
    pick = [dt[np.isclose(gd, v)][0] for v in (0.0, 0.05, 0.1, 0.2, 0.5)]
    mono = all(x >= y for x, y in zip(pick, pick[1:])) and pick[0] > pick[-1]
    return [
        _check("Delta T_sub calibration", abs(at - 0.32) <= 0.02, f"Delta T_sub(0.016) = {at:.4f} (0.32 +- 0.02)"),
        _check("Delta T_sub decreases with dephasing", mono, f"{np.round(pick, 4).tolist()}"),
    ]


def _checks_risetime_table(b):
    t = b.tables["risetime"]
    out = []
    for (beta, gd), ref in RISETIME_TABLE.items():
        val = float(t.where(beta_1=beta, gamma_deph_1=gd).column("risetime")[0])
        out.append(_check(f"rise time beta={beta} Gamma_deph={gd}", abs(val / ref - 1) <= 0.05,
                          f"{val:.3f} vs {ref} (5%)"))
    out.append(_tau0(b))
    return out


def _checks_risetime_map(b):
    t = b.tables["risetime"]
    betas = sorted(set(t.column("beta_1").astype(float)))
    dephs = sorted(set(t.column("gamma_deph_1").astype(float)))
    grid = np.array([[float(t.where(beta_1=bb, gamma_deph_1=gd).column("risetime")[0]) for gd in dephs]
                     for bb in betas])
    return [
        _check("rise time falls with dephasing", np.all(np.diff(grid, axis=1) < 0), f"{grid.shape} map"),
        _check("rise time grows with beta", np.all(np.diff(grid, axis=0) > 0), f"{grid.shape} map"),
    ]


# --- populations ----------------------------------------------------------------------------

def _checks_fig4a(b):
    s = b.tables["steady"]
    sub, sup = float(s.column("rho_sub")[0]), float(s.column("rho_sup")[0])
    tr = b.tables["traces"]
    t, rs = _series(tr, "t", "rho_sub")
    _, rp = _series(tr, "t", "rho_sup")
    return [
        _check("steady sub-radiant population", abs(sub - 0.5) <= 0.005, f"rho_sub = {sub:.5f} (0.5 +- 0.005)"),
        _check("super-radiant state unpopulated", rp.max() <= 1e-6,
               f"max rho_sup(t) = {rp.max():.2e}, steady {sup:.2e} (<= 1e-6)"),
        _check("trace reaches steady state", abs(rs[-1] - sub) <= 5e-3,
               f"rho_sub(t={t[-1]:g}) = {rs[-1]:.5f}"),
    ]


def _checks_fig4b(b):
    s = b.tables["steady"]
    gd, sub = _series(s, "gamma_deph_1", "rho_sub")
    _, sup = _series(s, "gamma_deph_1", "rho_sup")
    at = sub[np.isclose(gd, 0.1)][0]
    return [
        _check("sub-radiant population with dephasing", abs(at - 0.04) <= 0.01,
               f"rho_sub(0.1) = {at:.4f} (0.04 +- 0.01)"),
        _check("super-radiant state populated", np.all(sup[gd > 0] > 0), f"min rho_sup = {sup[gd > 0].min():.2e}"),
    ]


def _checks_fig4b_inset(b):
    s = b.tables["steady"]
    rabis = sorted(set(s.column("sweep_rabi").astype(float)))
    interior = []
    for om in rabis:
        gd, sup = _series(s, "gamma_deph_1", "rho_sup", sweep_rabi=om)
        k = int(np.argmax(sup))
        interior.append(0 < k < len(gd) - 1)
    return [_check("rho_sup maximum at interior dephasing", all(interior),
                   f"{sum(interior)}/{len(interior)} drive strengths")]


# --- Green-function pipeline ----------------------------------------------------------------

SYNTH_FILE = "field_synthetic_1d.txt"
SYNTH_POSITIONS = {p: (10 + (p - 1) / 12, 0.0) for p in range(1, 13)}


def _prepare_fig5(out_dir: Path) -> None:
    xs = np.arange(-12, 12 * 13 + 1) / 12
    ys = np.linspace(-0.5, 0.5, 5)
    fmap = generate_synthetic_1d_field(Waveguide1D(1.0), (0.0, 0.0), (xs, ys))
    write_field_map(fmap, Path(out_dir) / SYNTH_FILE)


def _checks_fig5(b):
    t = b.tables["coupling_map"]
    g, j = t.column("gamma12_over_norm").astype(float), t.column("j12_over_norm").astype(float)
    x = t.column("x_a").astype(float)
    jr, gr = coupling_1d(2 * PI * x)
    err = max(np.abs(g - gr).max(), np.abs(j - jr).max())
    return [
        _check("physical dissipative coupling", np.all(np.abs(g) <= 1 + 1e-6), f"max |Gamma12|/norm {np.abs(g).max():.9f}"),
        _check("synthetic map reproduces 1D couplings", err <= 1e-8, f"max deviation {err:.1e} (<= 1e-8)"),
    ]


# --- catalogue ------------------------------------------------------------------------------

def _cfg(name, command, system, figure, sweep=(), **outputs) -> ExperimentConfig:
    return ExperimentConfig(name, command, system, tuple(sweep), OutputSpec(**outputs), figure)


LOG_TAUS = Grid(1e-2, 1e3, 400, "log")

PRESETS: dict[str, Preset] = {p.name: p for p in [
    Preset("fig2a", "single emitter: RT extinction dip and RF peak",
           _cfg("fig2a", "spectrum", SINGLE, "fig2a", modes=("RT", "RF"), detunings=Grid(-50, 50, 2001)),
           _checks_fig2a),
    Preset("fig2b", "single emitter: RF antibunching",
           _cfg("fig2b", "g2", replace(SINGLE, mode="RF"), "fig2b", taus=LOG_TAUS), _checks_fig2b),
    Preset("fig2c", "ideal dispersive coupling (k dz = pi/2): spectra",
           _cfg("fig2c", "spectrum", SystemSpec(PI / 2), "fig2c", modes=("RT", "RF")), _checks_fig2c),
    Preset("fig2d", "ideal dispersive coupling: oscillating RF g2",
           _cfg("fig2d", "g2", SystemSpec(PI / 2, mode="RF"), "fig2d", taus=Grid(0, 40, 2001)),
           _checks_fig2d),
    Preset("fig2e", "ideal dissipative coupling (k dz = 2 pi): spectra",
           _cfg("fig2e", "spectrum", SystemSpec(2 * PI), "fig2e", modes=("RT", "RF")), _checks_fig2e),
    Preset("fig2f", "ideal dissipative coupling: RF g2",
           _cfg("fig2f", "g2", SystemSpec(2 * PI, mode="RF"), "fig2f", taus=LOG_TAUS), _checks_fig2f),
    Preset("fig2g", "k dz = 35 pi/18: sub-radiant feature in spectra",
           _cfg("fig2g", "spectrum", SystemSpec(SUBRADIANT_PHASE), "fig2g", modes=("RT", "RF"),
                subradiant_feature=True), _checks_fig2g),
    Preset("fig2h", "k dz = 35 pi/18: long-lived oscillating RF g2",
           _cfg("fig2h", "g2", SystemSpec(SUBRADIANT_PHASE, mode="RF"), "fig2h", taus=LOG_TAUS),
           _checks_fig2h),
    Preset("fig3a", "RT spectra at k dz = 35 pi/18 for increasing dephasing",
           _cfg("fig3a", "spectrum", SystemSpec(SUBRADIANT_PHASE), "fig3a",
                [SweepAxis("gamma_deph", FIG3_DEPHASING)], subradiant_feature=True), _checks_fig3a),
    Preset("fig3b", "sub-radiant feature magnitude versus dephasing",
           _cfg("fig3b", "spectrum", SystemSpec(SUBRADIANT_PHASE), "fig3b",
                [SweepAxis("gamma_deph", tuple(sorted({*FIG3_DEPHASING, 0.005, 0.01, 0.025, 0.075,
                                                        0.15, 0.3, 0.4})))],
                subradiant_feature=True), _checks_fig3b),
    Preset("risetime-table", "RF g2 rise times at k dz = pi, in-phase pumping",
           _cfg("risetime-table", "g2", SystemSpec(PI, mode="RF", relative_phase=0.0), "fig3-risetime",
                [SweepAxis("beta", (0.7, 0.9, 0.99)), SweepAxis("gamma_deph", (0.0, 0.01, 0.1))],
                taus=LOG_TAUS, fit_risetime=True), _checks_risetime_table),
    Preset("risetime-map", "2D map of the RF g2 rise time over (beta, dephasing)",
           _cfg("risetime-map", "g2", SystemSpec(PI, mode="RF", relative_phase=0.0), "fig3-risetime-map",
                [SweepAxis("beta", tuple(np.round(np.linspace(0.5, 0.99, 8), 6).tolist())),
                 SweepAxis("gamma_deph", (0.0, 0.005, 0.01, 0.02, 0.05, 0.1))],
                taus=LOG_TAUS, fit_risetime=True), _checks_risetime_map),
    Preset("fig4a", "Dicke populations after switching on an in-phase drive",
           _cfg("fig4a", "populations", SystemSpec(PI, mode="RF", relative_phase=0.0, rabi=POPULATION_RABI),
                "fig4a", times=Grid(0, 30000, 3001)), _checks_fig4a),
    Preset("fig4b", "steady Dicke populations versus dephasing",
           _cfg("fig4b", "populations", SystemSpec(PI, mode="RF", relative_phase=0.0, rabi=POPULATION_RABI),
                "fig4b", [SweepAxis("gamma_deph", tuple(np.round(np.linspace(0, 0.5, 26), 6).tolist()))],
                steady_only=True), _checks_fig4b),
    Preset("fig4b-inset", "steady super-radiant population over (dephasing, drive)",
           _cfg("fig4b-inset", "populations", SystemSpec(PI, mode="RF", relative_phase=0.0), "fig4b-inset",
                [SweepAxis("rabi", tuple(np.logspace(-3, -0.5, 20).tolist())),
                 SweepAxis("gamma_deph", tuple(np.linspace(0, 1, 20).tolist()))],
                steady_only=True), _checks_fig4b_inset),
    Preset("fig5-synthetic", "coupling map from a synthetic nanobeam field map",
           _cfg("fig5-synthetic", "coupling-map", SystemSpec(), "fig5-synthetic", field_file=SYNTH_FILE,
                positions=SYNTH_POSITIONS, local_rates={p: 1.0 for p in SYNTH_POSITIONS}),
           _checks_fig5, _prepare_fig5),
]}
