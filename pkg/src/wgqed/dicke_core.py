"""Two-emitter Hilbert space, Hamiltonian, Lindblad dissipator and Liouvillian.

Bare basis ordering (index 0..3)::

    |1> = |g1 g2>,  |2> = |e1 e2>,  |3> = |g1 e2>,  |4> = |e1 g2>

Dicke basis ordering (index 0..3)::

    |g> = |g1 g2>,  |e> = |e1 e2>,
    |s> = (|e1 g2> + |g1 e2>)/sqrt(2),  |a> = (|e1 g2> - |g1 e2>)/sqrt(2)

Superoperators act on column-stacked density matrices,
``vec(A rho B) = kron(B.T, A) @ vec(rho)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

DIM = 4
BARE_LABELS = ("g1g2", "e1e2", "g1e2", "e1g2")
DICKE_LABELS = ("g", "e", "s", "a")
DRIVE_MODES = ("RT", "RR", "RF")

_SQ2 = 1.0 / math.sqrt(2.0)
# columns are the Dicke states expressed in the bare basis
DICKE_BASIS = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, _SQ2, -_SQ2],
        [0.0, 0.0, _SQ2, _SQ2],
    ]
)


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stack a square matrix."""
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int = DIM) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


def spre(a: np.ndarray) -> np.ndarray:
    """Superoperator for rho -> a @ rho."""
    return np.kron(np.eye(a.shape[0]), a)


def spost(b: np.ndarray) -> np.ndarray:
    """Superoperator for rho -> rho @ b."""
    return np.kron(b.T, np.eye(b.shape[0]))


def sprepost(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator for rho -> a @ rho @ b."""
    return np.kron(b.T, a)


def _require_finite(name: str, *values) -> None:
    for v in values:
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class EmitterParams:
    """One two-level emitter.

    ``omega0`` only serves as the detuning reference; the model works in the
    frame rotating at the pump frequency.
    """

    gamma0: float = 1.0
    beta: float = 1.0
    gamma_deph: float = 0.0
    position_z: float = 0.0
    omega0: float = 0.0

    def __post_init__(self):
        _require_finite("EmitterParams", self.gamma0, self.beta, self.gamma_deph,
                        self.position_z, self.omega0)
        if self.gamma0 <= 0:
            raise ValueError(f"gamma0 must be > 0, got {self.gamma0}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.gamma_deph < 0:
            raise ValueError(f"gamma_deph must be >= 0, got {self.gamma_deph}")


@dataclass(frozen=True)
class DriveParams:
    rabi_amplitude_1: complex = 0.0
    rabi_amplitude_2: complex = 0.0
    detuning: float = 0.0
    mode: str = "RT"

    def __post_init__(self):
        _require_finite("DriveParams", self.rabi_amplitude_1, self.rabi_amplitude_2,
                        self.detuning)
        if self.mode not in DRIVE_MODES:
            raise ValueError(f"drive mode must be one of {DRIVE_MODES}, got {self.mode!r}")
        object.__setattr__(self, "rabi_amplitude_1", complex(self.rabi_amplitude_1))
        object.__setattr__(self, "rabi_amplitude_2", complex(self.rabi_amplitude_2))

    @property
    def amplitudes(self) -> tuple[complex, complex]:
        return (self.rabi_amplitude_1, self.rabi_amplitude_2)


@dataclass(frozen=True)
class CouplingParams:
    """Waveguide-mediated dispersive (``j12``) and dissipative (``gamma12``) coupling."""

    j12: float = 0.0
    gamma12: float = 0.0

    def __post_init__(self):
        _require_finite("CouplingParams", self.j12, self.gamma12)


@dataclass(frozen=True)
class AtomicOperator:
    label: str
    entries: np.ndarray

    def __post_init__(self):
        self.entries.setflags(write=False)


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray
    basis: str = "bare"
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        arr = np.array(self.entries, dtype=complex)
        if arr.shape != (DIM, DIM):
            raise ValueError(f"density matrix must be 4x4, got {arr.shape}")
        if self.basis not in ("bare", "dicke"):
            raise ValueError(f"unknown basis {self.basis!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))

    @classmethod
    def from_state(cls, psi, basis: str = "bare") -> DensityMatrix:
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), basis)

    @classmethod
    def ground(cls) -> DensityMatrix:
        return cls.from_state([1, 0, 0, 0])

    def to(self, basis: str) -> DensityMatrix:
        if basis == self.basis:
            return self
        direction = "to_dicke" if basis == "dicke" else "to_bare"
        return DensityMatrix(dicke_transform(self.entries, direction), basis, self.meta)

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(np.asarray(op) @ self.entries))

    @property
    def vector(self) -> np.ndarray:
        return vec(self.entries)

    def check(self, herm_tol: float = 1e-12, trace_tol: float = 1e-9,
              pos_tol: float = 1e-9) -> None:
        """Raise ValueError if Hermiticity, trace or positivity is violated."""
        rho = self.entries
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > herm_tol:
            raise ValueError(f"not Hermitian: max|rho - rho^dag| = {herm:.3e}")
        tr = np.trace(rho)
        if abs(tr - 1.0) > trace_tol:
            raise ValueError(f"trace = {tr} deviates from 1")
        lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
        if lam < -pos_tol:
            raise ValueError(f"negative eigenvalue {lam:.3e}")


@dataclass(frozen=True)
class Liouvillian:
    """16x16 generator acting on the column-stacked density matrix."""

    matrix: np.ndarray
    basis: str = "bare"

    def __post_init__(self):
        arr = np.array(self.matrix, dtype=complex)
        if arr.shape != (DIM * DIM, DIM * DIM):
            raise ValueError(f"Liouvillian must be 16x16, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    def apply(self, rho) -> np.ndarray:
        if isinstance(rho, DensityMatrix):
            rho = rho.entries
        return unvec(self.matrix @ vec(rho))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.matrix)

    def to(self, basis: str) -> Liouvillian:
        if basis == self.basis:
            return self
        direction = "to_dicke" if basis == "dicke" else "to_bare"
        return Liouvillian(dicke_transform(self.matrix, direction), basis)


def build_atomic_operators() -> dict[str, AtomicOperator]:
    """The eight single-emitter projectors and ladder operators in the bare basis."""
    s1ge = np.zeros((DIM, DIM))
    s1ge[0, 3] = 1.0  # |g1g2><e1g2|
    s1ge[2, 1] = 1.0  # |g1e2><e1e2|
    s2ge = np.zeros((DIM, DIM))
    s2ge[0, 2] = 1.0  # |g1g2><g1e2|
    s2ge[3, 1] = 1.0  # |e1g2><e1e2|
    s1eg, s2eg = s1ge.T.copy(), s2ge.T.copy()
    s1ee, s2ee = s1eg @ s1ge, s2eg @ s2ge
    eye = np.eye(DIM)
    mats = {
        "s1_ge": s1ge, "s1_eg": s1eg, "s2_ge": s2ge, "s2_eg": s2eg,
        "s1_ee": s1ee, "s2_ee": s2ee, "s1_gg": eye - s1ee, "s2_gg": eye - s2ee,
    }
    return {k: AtomicOperator(k, v) for k, v in mats.items()}


_OPS = {k: v.entries for k, v in build_atomic_operators().items()}


def op(label: str) -> np.ndarray:
    """Shortcut returning the matrix of one atomic operator, e.g. ``op("s1_ge")``."""
    return _OPS[label]


def lowering(i: int) -> np.ndarray:
    return _OPS[f"s{i}_ge"]


def _check_pair(emitters) -> tuple[EmitterParams, EmitterParams]:
    if len(emitters) != 2:
        raise ValueError(f"expected two emitters, got {len(emitters)}")
    return tuple(emitters)


def build_hamiltonian(emitters, drive: DriveParams, coupling: CouplingParams) -> np.ndarray:
    """Effective Hamiltonian in the frame rotating at the pump frequency.

    H = -sum_i D_i s^i_ee - J12 (s^1_eg s^2_ge + s^2_eg s^1_ge)
        - sum_i (conj(W_i) s^i_ge + W_i s^i_eg)

    with D_i = drive.detuning + omega0_ref - omega0_i, where the reference is
    emitter 1's frequency. Self-shifts J_ii are taken as absorbed into omega0.
    """
    e1, e2 = _check_pair(emitters)
    delta = drive.detuning
    detunings = (delta, delta + e1.omega0 - e2.omega0)
    h = np.zeros((DIM, DIM), dtype=complex)
    for i, (d, w) in enumerate(zip(detunings, drive.amplitudes), start=1):
        h -= d * _OPS[f"s{i}_ee"]
        h -= np.conj(w) * _OPS[f"s{i}_ge"] + w * _OPS[f"s{i}_eg"]
    h -= coupling.j12 * (_OPS["s1_eg"] @ _OPS["s2_ge"] + _OPS["s2_eg"] @ _OPS["s1_ge"])
    return h


def decay_matrix(emitters, coupling: CouplingParams) -> np.ndarray:
    e1, e2 = _check_pair(emitters)
    return np.array([[e1.gamma0, coupling.gamma12], [coupling.gamma12, e2.gamma0]], dtype=float)


def dephasing_rates(emitter: EmitterParams) -> tuple[float, float]:
    """(Gamma_gg, Gamma_ee) for one emitter.

    Both projector channels run at gamma_deph, so the optical coherence picks
    up an extra decay of exactly gamma_deph on top of gamma0/2.
    """
    return emitter.gamma_deph, emitter.gamma_deph


def build_lindblad_dissipator(emitters, coupling: CouplingParams) -> np.ndarray:
    """Collective decay plus pure dephasing, as a 16x16 superoperator."""
    e1, e2 = _check_pair(emitters)
    bound = math.sqrt(e1.gamma0 * e2.gamma0)
    if abs(coupling.gamma12) > bound * (1 + 1e-12):
        raise ValueError(
            f"|gamma12| = {abs(coupling.gamma12):.6g} exceeds sqrt(G1 G2) = {bound:.6g}; "
            "the dissipator would not be completely positive"
        )
    gmat = decay_matrix(emitters, coupling)
    lowers = (lowering(1), lowering(2))
    d = np.zeros((DIM * DIM, DIM * DIM), dtype=complex)
    for i in range(2):
        for j in range(2):
            if gmat[i, j] == 0:
                continue
            a, b = lowers[i], lowers[j]
            ad_b = a.T @ b  # s^i_eg s^j_ge
            d += 0.5 * gmat[i, j] * (2 * sprepost(a, b.T) - spre(ad_b) - spost(ad_b))
    for i, em in enumerate((e1, e2), start=1):
        for rate, proj in zip(dephasing_rates(em), (_OPS[f"s{i}_gg"], _OPS[f"s{i}_ee"])):
            if rate:
                d += 0.5 * rate * (2 * sprepost(proj, proj) - spre(proj) - spost(proj))
    return d


def build_liouvillian(emitters, drive: DriveParams, coupling: CouplingParams) -> Liouvillian:
    h = build_hamiltonian(emitters, drive, coupling)
    lv = -1j * (spre(h) - spost(h)) + build_lindblad_dissipator(emitters, coupling)
    return Liouvillian(lv, "bare")


def dicke_transform(m: np.ndarray, direction: str = "to_dicke") -> np.ndarray:
    """Change basis of a 4x4 operator or a 16x16 superoperator.

    For operators ``m' = B^dag m B`` (``to_dicke``) or ``B m B^dag``
    (``to_bare``). Superoperators are conjugated by ``T = kron(B.T, B^dag)``,
    the map that sends vec(rho) to vec(B^dag rho B).
    """
    m = np.asarray(m)
    b = DICKE_BASIS
    if direction not in ("to_dicke", "to_bare"):
        raise ValueError(f"direction must be 'to_dicke' or 'to_bare', got {direction!r}")
    if m.shape == (DIM, DIM):
        return b.conj().T @ m @ b if direction == "to_dicke" else b @ m @ b.conj().T
    if m.shape == (DIM * DIM, DIM * DIM):
        t = np.kron(b.T, b.conj().T)
        tinv = t.conj().T
        return t @ m @ tinv if direction == "to_dicke" else tinv @ m @ t
    raise ValueError(f"expected a 4x4 or 16x16 matrix, got shape {m.shape}")


def dicke_populations_of(rho) -> dict[str, float]:
    """Diagonal of rho in the Dicke basis, keyed by state label."""
    if isinstance(rho, DensityMatrix):
        rho = rho.to("bare").entries
    diag = np.real(np.diag(dicke_transform(rho, "to_dicke")))
    return dict(zip(DICKE_LABELS, diag))
