"""Steady states, time evolution and two-time correlators of the pair Liouvillian."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from wgqed.dicke_core import DIM, DensityMatrix, Liouvillian, unvec, vec

KERNEL_TOL = 1e-10
RESIDUAL_TOL = 1e-10
DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12


class StiffnessError(RuntimeError):
    """The adaptive integrator could not advance (step size underflow)."""


@dataclass(frozen=True)
class TimeEvolution:
    times: np.ndarray
    states: tuple[DensityMatrix, ...]

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        if t.ndim != 1 or len(t) != len(self.states):
            raise ValueError("times and states must have matching length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    def expect(self, op: np.ndarray) -> np.ndarray:
        return np.array([s.expect(op) for s in self.states])

    def stack(self) -> np.ndarray:
        return np.stack([s.entries for s in self.states])


@dataclass(frozen=True)
class TwoTimeCorrelator:
    tau_grid: np.ndarray
    values: np.ndarray
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))


def _as_matrix(lv) -> np.ndarray:
    return lv.matrix if isinstance(lv, Liouvillian) else np.asarray(lv)


def _normalise(rho: np.ndarray) -> np.ndarray:
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def _bordered_solve(m: np.ndarray) -> np.ndarray:
    """Solve L x = 0, Tr x = 1 by swapping the first (population) row for the trace row."""
    a = m.copy()
    b = np.zeros(m.shape[0], dtype=complex)
    a[0, :] = vec(np.eye(DIM))
    b[0] = 1.0
    x = np.linalg.solve(a, b)
    # one step of iterative refinement
    x += np.linalg.solve(a, b - a @ x)
    return x


def steady_state(lv, *, long_time: float = 1e6) -> DensityMatrix:
    """Stationary density matrix of ``lv``.

    The kernel dimension is read off the singular values. A one-dimensional
    kernel is solved directly with the trace constraint; a degenerate kernel
    falls back to propagating |g><g| for ``long_time`` and is flagged in
    ``meta["degenerate_kernel"]``.
    """
    m = _as_matrix(lv)
    sv = np.linalg.svd(m, compute_uv=False)
    scale = max(sv[0], 1.0)
    kernel_dim = int(np.sum(sv < KERNEL_TOL * scale))
    if kernel_dim <= 1:
        x = _bordered_solve(m)
        method = "null-space"
    else:
        x = vec(DensityMatrix.ground().entries)
        x = sla.expm(m * long_time) @ x
        method = "long-time propagation"
    rho = _normalise(unvec(x))
    residual = float(np.linalg.norm(m @ vec(rho)))
    if kernel_dim <= 1 and residual > RESIDUAL_TOL:
        # rank estimate too optimistic: fall back on the smallest right singular vector
        _, _, vh = np.linalg.svd(m)
        rho = _normalise(unvec(vh[-1].conj()))
        residual = float(np.linalg.norm(m @ vec(rho)))
        method = "svd"
    meta = {
        "method": method,
        "kernel_dim": max(kernel_dim, 1),
        "degenerate_kernel": kernel_dim > 1,
        "residual": residual,
        "smallest_singular_values": tuple(float(s) for s in sv[-3:]),
    }
    return DensityMatrix(rho, "bare", meta)


def _check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or len(t) == 0:
        raise ValueError("times must be a non-empty 1D sequence")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    return t


def evolve(lv, rho0, times, *, method: str = "expm", rtol: float = DEFAULT_RTOL,
           atol: float = DEFAULT_ATOL, t0: float | None = None) -> TimeEvolution:
    """Propagate rho0 (given at ``t0``, default ``times[0]``) to each output time.

    ``method="expm"`` steps with exact matrix exponentials between output
    times; ``method="rk"`` uses an adaptive embedded Runge-Kutta pair (DOP853).
    """
    m = _as_matrix(lv)
    t = _check_times(times)
    start = t[0] if t0 is None else float(t0)
    if start > t[0]:
        raise ValueError("t0 must not exceed the first output time")
    rho0 = rho0.to("bare").entries if isinstance(rho0, DensityMatrix) else np.asarray(rho0)
    x0 = vec(rho0).astype(complex)

    if method == "expm":
        out = np.empty((len(t), DIM * DIM), dtype=complex)
        x, prev = x0, start
        cache: dict[float, np.ndarray] = {}
        for k, tk in enumerate(t):
            dt = tk - prev
            if dt:
                key = round(dt, 15)
                if key not in cache:
                    cache[key] = sla.expm(m * dt)
                x = cache[key] @ x
            out[k] = x
            prev = tk
    elif method == "rk":
        sol = solve_ivp(lambda _, y: m @ y, (start, t[-1]), x0, method="DOP853",
                        t_eval=t, rtol=rtol, atol=atol)
        if sol.status != 0:
            rates = np.abs(np.linalg.eigvals(m).real)
            raise StiffnessError(
                f"integrator failed ({sol.message}); Liouvillian rates span "
                f"{rates[rates > 0].min():.3g} .. {rates.max():.3g} (stiffness ratio "
                f"{rates.max() / max(rates[rates > 0].min(), 1e-300):.3g}) - use method='expm'"
            )
        out = sol.y.T
    else:
        raise ValueError(f"unknown method {method!r}")

    states = tuple(DensityMatrix(0.5 * (r + r.conj().T), "bare")
                   for r in (unvec(v) for v in out))
    return TimeEvolution(t, states)


def propagate_vector(m: np.ndarray, x0: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """e^{m tau} x0 for each tau >= 0, stepping through the sorted grid."""
    taus = np.asarray(taus, dtype=float)
    order = np.argsort(taus, kind="stable")
    out = np.empty((len(taus), len(x0)), dtype=complex)
    x, prev = np.asarray(x0, dtype=complex), 0.0
    for idx in order:
        dt = taus[idx] - prev
        if dt:
            x = sla.expm(m * dt) @ x
        out[idx] = x
        prev = taus[idx]
    return out


def regression_correlator(lv, rho_ss, pre_ops: Sequence[np.ndarray] | np.ndarray,
                          post_ops: Sequence[np.ndarray] | np.ndarray,
                          tau_grid, measure: np.ndarray | None = None) -> TwoTimeCorrelator:
    """Stationary two-time correlator via the quantum regression theorem.

    Returns ``Tr[M e^{L tau}(C rho A)]`` where ``A`` is the product of
    ``pre_ops``, ``C`` the product of ``post_ops`` and ``M`` = ``measure``.
    With ``A = E^-``, ``C = E^+`` and ``M = E^- E^+`` this is the numerator of
    the intensity correlation. ``measure`` defaults to the identity.
    """
    m = _as_matrix(lv)
    taus = np.asarray(tau_grid, dtype=float)
    if np.any(taus < 0):
        raise ValueError("delays must be >= 0")
    a = _product(pre_ops)
    c = _product(post_ops)
    mm = np.eye(DIM) if measure is None else np.asarray(measure)
    rho = rho_ss.entries if isinstance(rho_ss, DensityMatrix) else np.asarray(rho_ss)

    meta = {}
    stationarity = float(np.linalg.norm(m @ vec(rho)))
    if stationarity > 1e-8:
        meta["warning"] = (f"input state is not stationary (|L rho| = {stationarity:.2e}); "
                           "the correlator is only the t -> infinity limit for a steady state")
        warnings.warn(meta["warning"], RuntimeWarning, stacklevel=2)

    x0 = vec(c @ rho @ a)
    xs = propagate_vector(m, x0, taus)
    mv = vec(mm.T)  # Tr[M X] = vec(M^T) . vec(X)
    values = xs @ mv
    return TwoTimeCorrelator(taus, values, meta)


def _product(ops) -> np.ndarray:
    if isinstance(ops, np.ndarray) and ops.ndim == 2:
        return ops
    out = np.eye(DIM, dtype=complex)
    for o in ops:
        out = out @ np.asarray(o)
    return out
