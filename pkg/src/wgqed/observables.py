"""Detected-field operators and the measurable quantities built from them.

Field operators use input-output normalisation: a guided pump of amplitude
``a`` drives emitter i with ``W_i = sqrt(beta_i Gamma_i / 2) a exp(i k z_i)``
and emitter i radiates ``i sqrt(beta_i Gamma_i / 2) exp(-+ i k z_i) s^i_ge`` into
the forward (backward) guided mode. For beta_1 = beta_2 this reproduces the
``i Gamma beta / 2`` scattering prefactors with the field measured in Rabi
units.
"""

from __future__ import annotations

import cmath
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit
from scipy.signal import find_peaks

from wgqed.dicke_core import DICKE_LABELS, DensityMatrix, dicke_transform, lowering
from wgqed.dynamics import evolve, regression_correlator, steady_state
from wgqed.system import EmitterPairConfig

LOW_POWER_THRESHOLD = 0.1
DEFAULT_DELTA_GRID = np.linspace(-6.0, 6.0, 801)
DEFAULT_TAU_GRID = np.logspace(-2, 3, 400)
FEATURE_NOISE_FLOOR = 1e-4
DARK_INTENSITY = 1e-12
ANTIBUNCHING_MARGIN = 1e-6


class DarkStateError(ValueError):
    """Steady-state detected intensity vanishes, so g2 is undefined."""


class RiseTimeFitError(RuntimeError):
    def __init__(self, msg: str, trace: Sequence[tuple[float, float]] = ()):
        super().__init__(msg)
        self.trace = list(trace)


# --- field operators -------------------------------------------------------

@dataclass(frozen=True)
class FieldOperatorSpec:
    direction: str
    include_pump: bool
    pump: complex
    coefficients: tuple[complex, complex]
    reference: float  # |pump amplitude|^2 used to normalise intensities

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ValueError(f"direction must be forward/backward, got {self.direction!r}")
        if self.include_pump and self.direction != "forward":
            raise ValueError("the pump only reaches the forward detector")

    def positive(self) -> np.ndarray:
        """E^+ as a 4x4 matrix (pump term is proportional to the identity)."""
        e = self.coefficients[0] * lowering(1) + self.coefficients[1] * lowering(2)
        e = e.astype(complex)
        if self.include_pump:
            e = e + self.pump * np.eye(4)
        return e

    def negative(self) -> np.ndarray:
        return self.positive().conj().T


def _guided_amplitude(config: EmitterPairConfig) -> complex:
    """Pump amplitude a (flux units) implied by the guided-mode drive."""
    k = config.waveguide.k
    for em, w in zip(config.emitters, config.drive.amplitudes):
        g = math.sqrt(em.beta * em.gamma0 / 2)
        if g > 0 and w != 0:
            return w * cmath.exp(-1j * k * em.position_z) / g
    # nothing couples: fall back on the beta = 1 equivalent amplitude
    w = max(config.drive.amplitudes, key=abs)
    return w / math.sqrt(0.5)


def field_spec(config: EmitterPairConfig, mode: str | None = None) -> FieldOperatorSpec:
    """Detected field for RT (forward, with pump), RR (backward) or RF.

    RF detects the scattered forward field with each emitter's phase set by
    its own drive, ``exp(-i arg W_i)``. With the usual free-space setting
    ``W_2 / W_1 = exp(i k dz)`` this is the forward guided phase; for in-phase
    pumping the detector sees the in-phase collective dipole.
    """
    mode = config.drive.mode if mode is None else mode
    k = config.waveguide.k
    amps = [math.sqrt(e.beta * e.gamma0 / 2) for e in config.emitters]
    zs = [e.position_z for e in config.emitters]
    if mode == "RT":
        a = _guided_amplitude(config)
        coeffs = tuple(1j * g * cmath.exp(-1j * k * z) for g, z in zip(amps, zs))
        return FieldOperatorSpec("forward", True, a, coeffs, abs(a) ** 2)
    if mode == "RR":
        a = _guided_amplitude(config)
        coeffs = tuple(1j * g * cmath.exp(1j * k * z) for g, z in zip(amps, zs))
        return FieldOperatorSpec("backward", False, a, coeffs, abs(a) ** 2)
    if mode == "RF":
        w = config.drive.amplitudes
        phases = [cmath.phase(wi) if wi != 0 else k * z for wi, z in zip(w, zs)]
        coeffs = tuple(1j * g * cmath.exp(-1j * p) for g, p in zip(amps, phases))
        ref = 2 * max(abs(wi) for wi in w) ** 2
        return FieldOperatorSpec("forward", False, 0j, coeffs, ref)
    raise ValueError(f"unknown mode {mode!r}")


def _real_nonneg(x: complex, what: str, tol: float = 1e-10) -> float:
    if abs(x.imag) > tol * max(1.0, abs(x.real)):
        raise ArithmeticError(f"{what} has imaginary residue {x.imag:.3e}")
    v = x.real
    if v < 0:
        if v < -1e-9 * max(1.0, abs(v)):
            raise ArithmeticError(f"{what} is negative ({v:.3e})")
        v = 0.0
    return v


def intensity(config: EmitterPairConfig, mode: str | None = None,
              rho: DensityMatrix | None = None) -> float:
    """Normalised steady-state intensity <E^- E^+> / |E_p|^2."""
    spec = field_spec(config, mode)
    if rho is None:
        rho = steady_state(config.liouvillian())
    if spec.reference == 0:
        return 0.0
    val = rho.expect(spec.negative() @ spec.positive()) / spec.reference
    return _real_nonneg(val, "intensity")


# --- spectra ---------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumResult:
    detunings: np.ndarray
    intensity: np.ndarray
    mode: str
    config: EmitterPairConfig
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))

    @property
    def normalised(self) -> np.ndarray:
        """Intensity scaled to its own maximum (used for RF figure parity)."""
        peak = self.intensity.max()
        return self.intensity / peak if peak > 0 else self.intensity


def _intensity_at(args):
    config, mode, d = args
    return intensity(config.with_detuning(d), mode)


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def spectrum(config: EmitterPairConfig, mode: str | None = None, delta_grid=None, *,
             refine_levels: int = 3, refine_threshold: float = 0.02,
             workers: int | None = None) -> SpectrumResult:
    """Steady-state intensity versus pump detuning.

    Intervals where the intensity jumps by more than ``refine_threshold``
    between neighbours are bisected up to ``refine_levels`` times.
    """
    mode = config.drive.mode if mode is None else mode
    grid = DEFAULT_DELTA_GRID if delta_grid is None else np.asarray(delta_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("detuning grid is empty")
    grid = np.unique(grid)
    meta = {"mode": mode, "refine_levels": refine_levels}
    if max(abs(w) for w in config.drive.amplitudes) > LOW_POWER_THRESHOLD:
        meta["warning"] = (f"drive exceeds the low-power threshold {LOW_POWER_THRESHOLD}; "
                           "spectra include saturation")

    values = dict(zip(grid, _map(_intensity_at, [(config, mode, d) for d in grid], workers)))
    for _ in range(refine_levels if grid.size > 1 else 0):
        xs = np.array(sorted(values))
        ys = np.array([values[x] for x in xs])
        jump = np.abs(np.diff(ys)) > refine_threshold
        mids = 0.5 * (xs[:-1] + xs[1:])[jump]
        if not mids.size:
            break
        for d, v in zip(mids, _map(_intensity_at, [(config, mode, d) for d in mids], workers)):
            values[d] = v
    xs = np.array(sorted(values))
    return SpectrumResult(xs, np.array([values[x] for x in xs]), mode, config, meta)


# --- correlations ----------------------------------------------------------

@dataclass(frozen=True)
class RiseTimeFit:
    gamma: float
    residual: float
    iterations: int

    @property
    def risetime(self) -> float:
        return 1.0 / self.gamma


@dataclass(frozen=True)
class CorrelationResult:
    tau: np.ndarray
    g2: np.ndarray
    risetime: RiseTimeFit | None = None
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))


def g2(config: EmitterPairConfig, mode: str | None = None, delta: float | None = None,
       tau_grid=None, *, fit: bool = False) -> CorrelationResult:
    """Stationary second-order correlation of the detected field."""
    mode = config.drive.mode if mode is None else mode
    if delta is not None:
        config = config.with_detuning(delta)
    taus = DEFAULT_TAU_GRID if tau_grid is None else np.asarray(tau_grid, dtype=float)
    spec = field_spec(config, mode)
    lv = config.liouvillian()
    rho = steady_state(lv)
    ep, em = spec.positive(), spec.negative()
    n = rho.expect(em @ ep)
    if spec.reference == 0 or abs(n) / spec.reference < DARK_INTENSITY:
        raise DarkStateError("dark state: g2 undefined (steady-state detected intensity is zero)")
    corr = regression_correlator(lv, rho, em, ep, taus, measure=em @ ep)
    vals = corr.values / n.real**2
    # regression at tau = 0 must equal the direct four-operator expectation
    direct = rho.expect(em @ em @ ep @ ep) / n.real**2
    corr0 = regression_correlator(lv, rho, em, ep, [0.0], measure=em @ ep).values[0] / n.real**2
    g = np.array([_real_nonneg(complex(v), "g2") for v in vals])
    meta = {"mode": mode, "delta": config.drive.detuning, "intensity": n.real / spec.reference,
            "tau0_consistency": float(abs(corr0 - direct) / max(abs(direct), 1.0))}
    if rho.meta.get("degenerate_kernel"):
        meta["degenerate_kernel"] = True
    res = CorrelationResult(taus, g, None, meta)
    if fit:
        res = CorrelationResult(taus, g, fit_risetime(res), meta)
    return res


def risetime_model(tau, gamma):
    """Single-emitter antibunching shape 1 - (G e^{-tG/2} - (G/2) e^{-tG}) / (G/2)."""
    tau = np.asarray(tau, dtype=float)
    return 1 - (gamma * np.exp(-tau * gamma / 2) - gamma / 2 * np.exp(-tau * gamma)) / (gamma / 2)


def _trapezoid_weights(t: np.ndarray) -> np.ndarray:
    if len(t) == 1:
        return np.ones(1)
    w = np.zeros_like(t)
    dt = np.diff(t)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


def fit_risetime(corr: CorrelationResult, *, max_iter: int = 200,
                 rel_tol: float = 1e-8) -> RiseTimeFit:
    """Fit the rise-time model to g2(tau) with damped Gauss-Newton steps.

    Residuals are weighted by trapezoid widths, so the fit minimises the
    integrated squared error and does not depend on how densely a region of
    the delay axis happens to be sampled.
    """
    t, y = np.asarray(corr.tau, float), np.asarray(corr.g2, float)
    if len(t) < 2:
        raise RiseTimeFitError("need at least two delays to fit a rise time")
    if not y[np.argmin(t)] < 1 - ANTIBUNCHING_MARGIN:
        raise RiseTimeFitError("g2 is not antibunched at the shortest delay")
    w = _trapezoid_weights(t)

    target = 1 - math.exp(-1)
    above = np.nonzero(y >= target)[0]
    t_star = t[above[0]] if above.size else t[-1]
    # invert (1 - e^{-G t/2})^2 = 1 - 1/e
    gamma = -2 * math.log(1 - math.sqrt(target)) / max(t_star, 1e-12)

    def cost(gm):
        r = risetime_model(t, gm) - y
        return float(np.sum(w * r * r)), r

    c, r = cost(gamma)
    lam = 1e-3
    trace = [(gamma, c)]
    for it in range(1, max_iter + 1):
        jac = t * np.exp(-gamma * t / 2) - t * np.exp(-gamma * t)
        jtj = float(np.sum(w * jac * jac))
        jtr = float(np.sum(w * jac * r))
        if jtj == 0:
            raise RiseTimeFitError("degenerate Jacobian in rise-time fit", trace)
        while True:
            step = -jtr / (jtj * (1 + lam))
            cand = gamma + step
            if cand > 0:
                c_new, r_new = cost(cand)
                if c_new <= c:
                    break
            lam *= 10
            if lam > 1e16:
                return RiseTimeFit(gamma, c, it)
        gamma, c, r = cand, c_new, r_new
        lam = max(lam / 10, 1e-12)
        trace.append((gamma, c))
        if abs(step) / gamma < rel_tol:
            return RiseTimeFit(gamma, c, it)
    raise RiseTimeFitError(f"rise-time fit did not converge in {max_iter} iterations "
                           f"(last residual {c:.3e})", trace)


# --- populations -----------------------------------------------------------

def sub_super_labels(config: EmitterPairConfig) -> tuple[str, str]:
    """(sub-radiant, super-radiant) Dicke labels; |a> is sub-radiant for Gamma12 >= 0."""
    return ("a", "s") if config.coupling.gamma12 >= 0 else ("s", "a")


@dataclass(frozen=True)
class PopulationResult:
    times: np.ndarray
    rho_sub: np.ndarray
    rho_sup: np.ndarray
    steady_sub: float
    steady_sup: float
    labels: tuple[str, str]
    populations: Mapping[str, np.ndarray] = field(default_factory=dict, compare=False)


def _dicke_diag(rho: np.ndarray) -> np.ndarray:
    return np.real(np.diag(dicke_transform(rho, "to_dicke")))


def dicke_populations(config: EmitterPairConfig, times, *, initial: DensityMatrix | None = None,
                      method: str = "expm") -> PopulationResult:
    """Dicke-state populations after switching the drive on at t = 0."""
    lv = config.liouvillian()
    rho0 = DensityMatrix.ground() if initial is None else initial
    ev = evolve(lv, rho0, times, method=method, t0=0.0)
    diag = np.array([_dicke_diag(s.entries) for s in ev.states])
    pops = {lab: diag[:, i] for i, lab in enumerate(DICKE_LABELS)}
    ss = _dicke_diag(steady_state(lv).entries)
    sub, sup = sub_super_labels(config)
    idx = {lab: i for i, lab in enumerate(DICKE_LABELS)}
    return PopulationResult(ev.times, pops[sub], pops[sup], float(ss[idx[sub]]),
                            float(ss[idx[sup]]), (sub, sup), pops)


def steady_dicke_populations(config: EmitterPairConfig) -> dict[str, float]:
    diag = _dicke_diag(steady_state(config.liouvillian()).entries)
    sub, sup = sub_super_labels(config)
    out = dict(zip(DICKE_LABELS, diag.tolist()))
    out["sub"], out["sup"] = out[sub], out[sup]
    return out


def population_sweep(make_config, gamma_dephs: Sequence[float], rabis: Sequence[float],
                     workers: int | None = None) -> np.ndarray:
    """Steady super-radiant population on a (rabi, gamma_deph) grid.

    ``make_config(gamma_deph, rabi)`` returns the configuration for one point;
    the result has shape ``(len(rabis), len(gamma_dephs))``.
    """
    pts = [(gd, om) for om in rabis for gd in gamma_dephs]
    vals = _map(lambda p: steady_dicke_populations(make_config(*p))["sup"], pts, workers)
    return np.array(vals).reshape(len(rabis), len(gamma_dephs))


# --- sub-radiant feature ---------------------------------------------------

@dataclass(frozen=True)
class SubradiantFeature:
    delta_T_sub: float
    peak_position: float
    peak_width: float
    detected: bool = True
    meta: Mapping = field(default_factory=dict, compare=False)


def _dip(d, depth, centre, hwhm):
    return 1 - depth / (1 + ((d - centre) / hwhm) ** 2)


def _dip_and_peak(d, depth, centre, hwhm, height, pos, phwhm):
    return _dip(d, depth, centre, hwhm) + height / (1 + ((d - pos) / phwhm) ** 2)


def extract_subradiant_feature(spec: SpectrumResult, *, min_points: int = 20) -> SubradiantFeature:
    """Magnitude, position and FWHM of the narrow sub-radiant feature in a spectrum.

    The broad (super-radiant) dip and the narrow feature are fitted jointly as
    two Lorentzians, which yields the feature position and FWHM. The magnitude
    is the height of the feature apex (the local maximum closest to the fitted
    position) above the floor of the broad dip. No local maximum, or a fitted
    amplitude below the noise floor, means the feature has vanished.
    """
    cfg = spec.config
    e1, e2 = cfg.emitters
    g0 = math.sqrt(e1.gamma0 * e2.gamma0)
    j12, g12 = cfg.coupling.j12, cfg.coupling.gamma12
    deph = 0.5 * (e1.gamma_deph + e2.gamma_deph)
    width_guess = max(g0 - abs(g12), 1e-6) + 2 * deph

    d, inten = spec.detunings, spec.intensity
    lo, hi = j12 - width_guess / 2, j12 + width_guess / 2
    meta = {"resampled": False}
    if np.sum((d >= lo) & (d <= hi)) < min_points:
        fine = np.linspace(j12 - 5 * width_guess, j12 + 5 * width_guess, 10 * min_points + 1)
        extra = spectrum(cfg, spec.mode, fine, refine_levels=0)
        merged = dict(zip(d, inten))
        merged.update(zip(extra.detunings, extra.intensity))
        d = np.array(sorted(merged))
        inten = np.array([merged[x] for x in d])
        meta["resampled"] = True

    win = np.abs(d - j12) < max(3 * width_guess, 0.05)
    try:
        with warnings.catch_warnings():
            # covariances are not used; a flat feature legitimately leaves them undefined
            warnings.simplefilter("ignore", OptimizeWarning)
            p_bg, _ = curve_fit(_dip, d[~win], inten[~win], p0=(1.0, 0.0, g0), maxfev=20000)
            p0 = (*p_bg, 0.5, j12, width_guess / 2)
            p, _ = curve_fit(_dip_and_peak, d, inten, p0=p0, maxfev=50000)
    except (RuntimeError, ValueError) as exc:
        return SubradiantFeature(0.0, float("nan"), float("nan"), False,
                                 {**meta, "reason": f"fit failed: {exc}"})
    pos, fwhm, height = float(p[4]), float(2 * abs(p[5])), float(p[3])
    meta.update(background_depth=float(p[0]), background_centre=float(p[1]),
                background_fwhm=float(2 * abs(p[2])), fitted_height=height)

    floor = float(inten[np.abs(d - p[1]) <= abs(p[2])].min()) if np.any(
        np.abs(d - p[1]) <= abs(p[2])) else float(inten.min())
    peaks, _ = find_peaks(inten)
    near = peaks[np.abs(d[peaks] - pos) <= max(2 * fwhm, width_guess)] if peaks.size else peaks
    if height < FEATURE_NOISE_FLOOR or near.size == 0:
        return SubradiantFeature(0.0, pos, fwhm, False, {**meta, "reason": "no feature above noise"})
    apex = near[np.argmin(np.abs(d[near] - pos))]
    mag = float(inten[apex] - floor)
    if mag < FEATURE_NOISE_FLOOR:
        return SubradiantFeature(0.0, pos, fwhm, False, {**meta, "reason": "no feature above noise"})
    meta.update(apex_detuning=float(d[apex]), apex_intensity=float(inten[apex]), floor=floor)
    return SubradiantFeature(mag, pos, fwhm, True, meta)


# --- trace utilities -------------------------------------------------------

def dip_fwhm(detunings, values, baseline: float = 1.0) -> float:
    """Full width of a transmission dip at half its depth below ``baseline``."""
    d = np.asarray(detunings, float)
    y = np.asarray(values, float)
    i0 = int(np.argmin(y))
    half = 0.5 * (baseline + y[i0])

    def crossing(step):
        i = i0
        while 0 <= i + step < len(y) and y[i + step] < half:
            i += step
        j = i + step
        if not 0 <= j < len(y):
            raise ValueError("dip does not recover to half depth inside the grid")
        return d[i] + (half - y[i]) * (d[j] - d[i]) / (y[j] - y[i])

    return float(crossing(1) - crossing(-1))


def oscillation_period(tau, values, floor: float = 1e-8) -> float:
    """Mean spacing of successive maxima of ``values - 1`` above ``floor``."""
    tau = np.asarray(tau, float)
    y = np.asarray(values, float) - 1
    peaks, _ = find_peaks(y)
    peaks = peaks[np.abs(y[peaks]) > floor]
    if len(peaks) < 2:
        raise ValueError("fewer than two resolvable oscillation maxima")
    return float(np.mean(np.diff(tau[peaks])))
