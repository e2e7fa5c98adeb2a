"""EmitterPairConfig: everything needed to build one Liouvillian."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

from wgqed.dicke_core import (
    CouplingParams,
    DriveParams,
    EmitterParams,
    Liouvillian,
    build_liouvillian,
)
from wgqed.waveguide_green import Waveguide1D, analytic_coupling

LOW_POWER_RABI = 1e-7
POPULATION_RABI = 0.01


@dataclass(frozen=True)
class EmitterPairConfig:
    emitters: tuple[EmitterParams, EmitterParams]
    drive: DriveParams
    coupling: CouplingParams
    waveguide: Waveguide1D = Waveguide1D()

    def __post_init__(self):
        object.__setattr__(self, "emitters", tuple(self.emitters))
        if len(self.emitters) != 2:
            raise ValueError("an EmitterPairConfig holds exactly two emitters")
        if self.drive.mode in ("RT", "RR") and not self.drive_phases_locked():
            raise ValueError("a guided pump locks the drive phases to k z_i; "
                             f"got amplitudes {self.drive.amplitudes}")

    @property
    def separation_phase(self) -> float:
        e1, e2 = self.emitters
        return self.waveguide.k * abs(e2.position_z - e1.position_z)

    def liouvillian(self) -> Liouvillian:
        return build_liouvillian(self.emitters, self.drive, self.coupling)

    def with_detuning(self, detuning: float) -> EmitterPairConfig:
        return replace(self, drive=replace(self.drive, detuning=float(detuning)))

    def drive_phases_locked(self, tol: float = 1e-9) -> bool:
        """True when the drive phases follow the guided mode, W_i ~ exp(i k z_i)."""
        w1, w2 = self.drive.amplitudes
        if w1 == 0 or w2 == 0:
            return True
        e1, e2 = self.emitters
        want = self.waveguide.k * (e2.position_z - e1.position_z)
        got = cmath.phase(w2) - cmath.phase(w1)
        return abs(cmath.exp(1j * got) - cmath.exp(1j * want)) < tol


def guided_rabi(emitter: EmitterParams, rabi: float, k: float) -> complex:
    """Rabi frequency imposed by a guided pump.

    ``rabi`` is the value an emitter with beta = 1 and Gamma = Gamma_0 = 1 would
    see; others scale with the square root of their waveguide decay rate.
    """
    return rabi * math.sqrt(emitter.beta * emitter.gamma0) * cmath.exp(1j * k * emitter.position_z)


def pair_config(separation_phase: float = 2 * math.pi, *, beta=1.0, gamma_deph=0.0,
                gamma0=1.0, rabi: float = LOW_POWER_RABI, detuning: float = 0.0,
                mode: str = "RT", relative_phase: float | None = None,
                driven=(True, True), lambda_wg: float = 1.0,
                coupling: CouplingParams | None = None) -> EmitterPairConfig:
    """Two emitters on a nanobeam, emitter 1 at z = 0.

    ``beta``, ``gamma_deph`` and ``gamma0`` take a scalar or a pair. In RT/RR
    the guided pump locks the drive phases to ``k z_i``. In RF the second
    emitter is driven with ``relative_phase`` (defaults to the separation
    phase); ``driven`` switches either free-space beam off.
    """
    def pair(v):
        return tuple(v) if isinstance(v, (tuple, list)) else (v, v)

    wg = Waveguide1D(lambda_wg)
    betas, dephs, gammas = pair(beta), pair(gamma_deph), pair(gamma0)
    z2 = separation_phase / wg.k
    emitters = (
        EmitterParams(gamma0=gammas[0], beta=betas[0], gamma_deph=dephs[0], position_z=0.0),
        EmitterParams(gamma0=gammas[1], beta=betas[1], gamma_deph=dephs[1], position_z=z2),
    )
    if mode in ("RT", "RR"):
        amps = tuple(guided_rabi(e, rabi, wg.k) for e in emitters)
    elif mode == "RF":
        phi = separation_phase if relative_phase is None else relative_phase
        amps = (complex(rabi), rabi * cmath.exp(1j * phi))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    amps = tuple(a if on else 0j for a, on in zip(amps, driven))
    drive = DriveParams(amps[0], amps[1], detuning, mode)
    if coupling is None:
        coupling = analytic_coupling(wg, emitters)
    return EmitterPairConfig(emitters, drive, coupling, wg)


def single_emitter_config(*, beta=1.0, gamma_deph=0.0, rabi=LOW_POWER_RABI, detuning=0.0,
                          mode="RT") -> EmitterPairConfig:
    """Emitter 1 alone: emitter 2 has beta = 0, no drive and no coupling."""
    return pair_config(0.0, beta=(beta, 0.0), gamma_deph=(gamma_deph, 0.0), rabi=rabi,
                       detuning=detuning, mode=mode, driven=(True, False),
                       coupling=CouplingParams(0.0, 0.0))
