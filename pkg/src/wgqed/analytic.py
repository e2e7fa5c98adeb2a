"""Closed-form single-emitter results used as references by presets and scripts."""

from __future__ import annotations

import math

import numpy as np


def bloch_steady_state(rabi: complex, delta, gamma: float = 1.0, gamma_deph: float = 0.0):
    """(<s_ge>, rho_ee) of a driven two-level emitter, any drive strength.

    Hamiltonian ``-delta s_ee - (rabi* s_ge + rabi s_eg)``; the coherence decays at
    ``gamma/2 + gamma_deph``.
    """
    delta = np.asarray(delta, dtype=float)
    g_perp = gamma / 2 + gamma_deph
    w2 = abs(rabi) ** 2
    rho_ee = 2 * w2 * g_perp / (gamma * (g_perp**2 + delta**2) + 4 * w2 * g_perp)
    coherence = 1j * rabi * (1 - 2 * rho_ee) / (g_perp - 1j * delta)
    return coherence, rho_ee


def single_emitter_intensities(delta, *, beta: float = 1.0, gamma: float = 1.0,
                               gamma_deph: float = 0.0, rabi: float = 1e-7) -> dict:
    """Normalised RT and RR intensities under a guided pump, RF under a free-space one.

    The guided pump gives the emitter a Rabi frequency ``rabi sqrt(beta gamma)``;
    the free-space beam gives it ``rabi``.
    """
    g = math.sqrt(beta * gamma / 2)
    w = rabi * math.sqrt(beta * gamma)
    a = w / g if g else rabi * math.sqrt(2)
    s, pe = bloch_steady_state(w, delta, gamma, gamma_deph)
    scattered = g**2 * pe
    rt = (abs(a) ** 2 + 2 * np.real(np.conj(a) * 1j * g * s) + scattered) / abs(a) ** 2
    rr = scattered / abs(a) ** 2
    _, pe_rf = bloch_steady_state(rabi, delta, gamma, gamma_deph)
    rf = g**2 * pe_rf / (2 * abs(rabi) ** 2)
    return {"RT": rt, "RR": rr, "RF": rf}


def weak_drive_transmission(delta, *, beta: float = 1.0, gamma: float = 1.0,
                            gamma_deph: float = 0.0):
    """Coherent transmission amplitude t = 1 - beta G / (G + 2 G_deph - 2 i delta)."""
    delta = np.asarray(delta, dtype=float)
    return 1 - beta * gamma / (gamma + 2 * gamma_deph - 2j * delta)


def coupling_1d(phase, *, gamma0: float = 1.0, beta1: float = 1.0, beta2: float = 1.0):
    """(J12, Gamma12) of two emitters a guided phase ``k dz`` apart."""
    amp = gamma0 * math.sqrt(beta1 * beta2)
    phase = np.asarray(phase, dtype=float)
    return 0.5 * amp * np.sin(phase), amp * np.cos(phase)
