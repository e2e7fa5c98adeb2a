"""Coupling constants from Green's functions.

Two routes lead to ``(J12, Gamma12)``:

* the analytic quasi-1D waveguide Green function, and
* gridded E_y maps emitted by a y-oriented dipole (e.g. exported from an
  external photonic-crystal solver), converted pointwise to G_yy.

Program units set hbar = mu0 = mu = 1, so ``E = omega^2 G d`` and

    J12     = omega^2     Re[d1* G d2]
    Gamma12 = 2 omega^2   Im[d1* G d2]

Phase convention: the guided-mode Green function is taken as
``i |G| exp(-i k |dz|)``, which makes J12 = Gamma0 sqrt(b1 b2) sin(k dz) / 2
and Gamma12 = Gamma0 sqrt(b1 b2) cos(k dz). Field maps must use the same
convention.

Field-map file format (UTF-8 text)::

    # comment lines start with '#'
    lattice_constant_nm = 240
    hole_diameter_nm = 160
    refractive_index = 3.5
    group_index = 5
    omega_p = 1.0
    dipole_moment = 1.0
    source_x_a = 0.0
    source_y_a = 0.0
    source_cell_position = 4
    gamma_local = 1.0
    component = yy              # optional, only yy is supported
    x_in_a  y_in_a  ReEy  ImEy  # one record per grid point, x fastest

Records are row-major (``y`` outer, ``x`` inner) on a strictly rectilinear
grid. Numbers are written with ``repr`` so a write/read cycle is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from wgqed.dicke_core import CouplingParams, EmitterParams

REQUIRED_KEYS = (
    "lattice_constant_nm",
    "hole_diameter_nm",
    "refractive_index",
    "group_index",
    "omega_p",
    "dipole_moment",
    "source_x_a",
    "source_y_a",
    "source_cell_position",
    "gamma_local",
)
OPTIONAL_KEYS = ("component",)


class FieldMapError(ValueError):
    """Base class for field-map parse and validation failures."""


class MalformedHeaderError(FieldMapError):
    pass


class MissingMetadataError(FieldMapError):
    pass


class MalformedRecordError(FieldMapError):
    pass


class NonRectilinearGridError(FieldMapError):
    pass


class NonFiniteFieldError(FieldMapError):
    pass


class SourceInHoleError(FieldMapError):
    pass


class UnsupportedComponentError(FieldMapError):
    pass


class GridCoverageError(FieldMapError):
    pass


class UnphysicalCouplingError(ValueError):
    pass


@dataclass(frozen=True)
class Waveguide1D:
    lambda_wg: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.lambda_wg) and self.lambda_wg > 0):
            raise ValueError(f"lambda_wg must be positive and finite, got {self.lambda_wg}")

    @property
    def k(self) -> float:
        return 2 * math.pi / self.lambda_wg


def green_1d(wg: Waveguide1D, emitters: Sequence[EmitterParams], omega_p: float = 1.0) -> complex:
    """Dipole-projected Green function between the two emitters of a nanobeam.

    Carries the ``1/(2 omega_p^2)`` prefactor (hbar = mu0 = 1) so that
    :func:`coupling_from_green` returns the closed-form couplings.
    """
    e1, e2 = emitters
    dz = abs(e2.position_z - e1.position_z)
    amp = math.sqrt(e1.gamma0 * e1.beta * e2.gamma0 * e2.beta)
    return 1j * amp / (2 * omega_p**2) * np.exp(-1j * wg.k * dz)


def coupling_from_green(green: complex, omega_p: float = 1.0, d1: complex = 1.0,
                        d2: complex = 1.0,
                        orientation: tuple[str, str] = ("y", "y")) -> CouplingParams:
    """J12 and Gamma12 from a Green tensor element.

    ``green`` is projected onto the dipoles as ``conj(d1) * green * d2``; with
    the default unit dipoles a pre-projected value passes through unchanged.
    """
    if tuple(orientation) != ("y", "y"):
        raise ValueError(
            f"only y-oriented dipoles (G_yy) are supported, got orientation {orientation!r}"
        )
    g = np.conj(d1) * complex(green) * d2
    return CouplingParams(j12=float(omega_p**2 * g.real), gamma12=float(2 * omega_p**2 * g.imag))


def analytic_coupling(wg: Waveguide1D, emitters: Sequence[EmitterParams]) -> CouplingParams:
    return coupling_from_green(green_1d(wg, emitters))


@dataclass(frozen=True)
class GreenFieldMap:
    """E_y sampled on a rectilinear (x, y) grid, coordinates in lattice constants."""

    x: np.ndarray
    y: np.ndarray
    field_y: np.ndarray  # shape (len(y), len(x))
    source_x: float
    source_y: float
    source_cell_position: int
    dipole_moment: float
    omega_p: float
    group_index: float
    lattice_constant_nm: float
    hole_diameter_nm: float
    refractive_index: float
    gamma_local: float
    extra: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("x", "y", "field_y"):
            arr = np.array(getattr(self, name), dtype=complex if name == "field_y" else float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "extra", MappingProxyType(dict(self.extra)))

    @property
    def metadata(self) -> dict:
        return {
            "lattice_constant_nm": self.lattice_constant_nm,
            "hole_diameter_nm": self.hole_diameter_nm,
            "refractive_index": self.refractive_index,
            "group_index": self.group_index,
            "omega_p": self.omega_p,
            "dipole_moment": self.dipole_moment,
            "source_x_a": self.source_x,
            "source_y_a": self.source_y,
            "source_cell_position": self.source_cell_position,
            "gamma_local": self.gamma_local,
        }

    def green_yy(self) -> np.ndarray:
        """G_yy(r, r') on the grid, from E = omega^2 G d."""
        return self.field_y / (self.omega_p**2 * self.dipole_moment)

    def green_at(self, x: float, y: float) -> complex:
        """Bilinear interpolation of G_yy at (x, y)."""
        return complex(_bilinear(self.x, self.y, self.green_yy(), x, y))

    def hole_radius_a(self) -> float:
        return 0.5 * self.hole_diameter_nm / self.lattice_constant_nm


def _bilinear(xs: np.ndarray, ys: np.ndarray, vals: np.ndarray, x: float, y: float):
    if not (xs[0] <= x <= xs[-1]) or not (ys[0] <= y <= ys[-1]):
        raise ValueError(
            f"position ({x}, {y}) lies outside the map grid "
            f"x in [{xs[0]}, {xs[-1]}], y in [{ys[0]}, {ys[-1]}]"
        )

    def bracket(axis, v):
        if len(axis) == 1:
            return 0, 0, 0.0
        i = int(np.clip(np.searchsorted(axis, v, side="right") - 1, 0, len(axis) - 2))
        t = (v - axis[i]) / (axis[i + 1] - axis[i])
        return i, i + 1, t

    i0, i1, tx = bracket(xs, x)
    j0, j1, ty = bracket(ys, y)
    return ((1 - tx) * (1 - ty) * vals[j0, i0] + tx * (1 - ty) * vals[j0, i1]
            + (1 - tx) * ty * vals[j1, i0] + tx * ty * vals[j1, i1])


def w1_hole_centers(x_range: tuple[float, float], y_range: tuple[float, float],
                    rows: int = 8) -> np.ndarray:
    """Hole centres of a W1 line-defect triangular lattice (units of a).

    The missing row sits at y = 0; row m has centres at
    ``x = n + (m mod 2)/2``, ``y = m sqrt(3)/2``.
    """
    centers = []
    for m in range(-rows, rows + 1):
        if m == 0:
            continue
        yc = m * math.sqrt(3) / 2
        if yc < y_range[0] - 1 or yc > y_range[1] + 1:
            continue
        off = 0.5 * (m % 2)
        for n in range(math.floor(x_range[0]) - 1, math.ceil(x_range[1]) + 2):
            centers.append((n + off, yc))
    return np.array(centers).reshape(-1, 2)


def point_in_hole(fmap: GreenFieldMap, x: float, y: float) -> bool:
    r = fmap.hole_radius_a()
    if r <= 0:
        return False
    centers = w1_hole_centers((x, x), (y, y))
    if len(centers) == 0:
        return False
    return bool(np.any(np.hypot(centers[:, 0] - x, centers[:, 1] - y) < r))


def validate_field_map(fmap: GreenFieldMap) -> GreenFieldMap:
    """Check finiteness, source placement and analysis-cell coverage."""
    if not np.all(np.isfinite(fmap.field_y.real)) or not np.all(np.isfinite(fmap.field_y.imag)):
        raise NonFiniteFieldError("field map contains non-finite E_y values")
    if fmap.omega_p <= 0 or fmap.dipole_moment == 0:
        raise MalformedHeaderError("omega_p must be > 0 and dipole_moment non-zero")
    if fmap.gamma_local <= 0:
        raise MalformedHeaderError(f"gamma_local must be > 0, got {fmap.gamma_local}")
    if not 1 <= fmap.source_cell_position <= 12:
        raise MalformedHeaderError(
            f"source_cell_position must be in 1..12, got {fmap.source_cell_position}"
        )
    if point_in_hole(fmap, fmap.source_x, fmap.source_y):
        raise SourceInHoleError(
            f"source at ({fmap.source_x}, {fmap.source_y}) a lies inside an air hole "
            f"of radius {fmap.hole_radius_a():.4g} a"
        )
    if fmap.hole_diameter_nm > 0:
        # photonic-crystal maps must reach the cell ten periods away from the source
        reach = max(fmap.x[-1] - fmap.source_x, fmap.source_x - fmap.x[0])
        if reach < 10.0:
            raise GridCoverageError(
                f"grid reaches only {reach:.3g} a from the source; the analysis cell "
                "10 unit cells away is not covered"
            )
    return fmap


def _parse_value(key: str, raw: str, lineno: int):
    if key == "component":
        return raw.strip().lower()
    try:
        val = float(raw)
    except ValueError:
        raise MalformedHeaderError(f"line {lineno}: value for {key!r} is not a number: {raw!r}")
    if key == "source_cell_position":
        if val != int(val):
            raise MalformedHeaderError(f"line {lineno}: source_cell_position must be an integer")
        return int(val)
    return val


def ingest_field_map(path) -> GreenFieldMap:
    """Parse and validate a field-map file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    header: dict = {}
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" in body:
            if records:
                raise MalformedHeaderError(f"line {lineno}: header line after data records")
            key, _, raw = body.partition("=")
            key = key.strip()
            if not key or not raw.strip():
                raise MalformedHeaderError(f"line {lineno}: expected 'key = value', got {line!r}")
            if key not in REQUIRED_KEYS and key not in OPTIONAL_KEYS:
                raise MalformedHeaderError(f"line {lineno}: unknown header key {key!r}")
            if key in header:
                raise MalformedHeaderError(f"line {lineno}: duplicate header key {key!r}")
            header[key] = _parse_value(key, raw, lineno)
            continue
        parts = body.split()
        if len(parts) != 4:
            raise MalformedRecordError(
                f"line {lineno}: expected 4 columns 'x y ReEy ImEy', got {len(parts)}"
            )
        try:
            records.append([float(p) for p in parts])
        except ValueError:
            raise MalformedRecordError(f"line {lineno}: unparsable number in {body!r}")

    if not header and not records:
        raise MalformedHeaderError(f"{path}: empty file")
    missing = [k for k in REQUIRED_KEYS if k not in header]
    if missing:
        raise MissingMetadataError(f"{path}: missing header keys {missing}")
    component = header.pop("component", "yy")
    if component != "yy":
        raise UnsupportedComponentError(
            f"Green tensor component {component!r} is not supported; only 'yy' is implemented"
        )
    if not records:
        raise MalformedRecordError(f"{path}: no data records")

    data = np.array(records)
    x, y = _rectilinear_axes(data[:, 0], data[:, 1])
    field_y = (data[:, 2] + 1j * data[:, 3]).reshape(len(y), len(x))
    fmap = GreenFieldMap(
        x=x, y=y, field_y=field_y,
        source_x=header["source_x_a"], source_y=header["source_y_a"],
        source_cell_position=header["source_cell_position"],
        dipole_moment=header["dipole_moment"], omega_p=header["omega_p"],
        group_index=header["group_index"], lattice_constant_nm=header["lattice_constant_nm"],
        hole_diameter_nm=header["hole_diameter_nm"], refractive_index=header["refractive_index"],
        gamma_local=header["gamma_local"], extra={"path": str(path)},
    )
    return validate_field_map(fmap)


def _rectilinear_axes(xcol: np.ndarray, ycol: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # x varies fastest: the first row fixes the x axis
    ny_guess = int(np.sum(xcol == xcol[0]))
    if ny_guess == 0 or len(xcol) % ny_guess:
        raise NonRectilinearGridError("grid points do not form complete rows")
    nx = len(xcol) // ny_guess
    xs = xcol[:nx]
    ys = ycol[::nx]
    expect_x = np.tile(xs, ny_guess)
    expect_y = np.repeat(ys, nx)
    if not (np.array_equal(xcol, expect_x) and np.array_equal(ycol, expect_y)):
        raise NonRectilinearGridError("grid is not rectilinear in row-major (y outer, x inner) order")
    if (nx > 1 and np.any(np.diff(xs) <= 0)) or (ny_guess > 1 and np.any(np.diff(ys) <= 0)):
        raise NonRectilinearGridError("grid axes must be strictly increasing")
    return xs, ys


def write_field_map(fmap: GreenFieldMap, path) -> Path:
    path = Path(path)
    lines = ["# wgqed field map: E_y of a y-oriented dipole, coordinates in units of a"]
    for key, val in fmap.metadata.items():
        lines.append(f"{key} = {val!r}")
    lines.append("component = yy")
    lines.append("# x_in_a y_in_a ReEy ImEy")
    for j, yv in enumerate(fmap.y):
        for i, xv in enumerate(fmap.x):
            e = fmap.field_y[j, i]
            lines.append(f"{float(xv)!r} {float(yv)!r} {float(e.real)!r} {float(e.imag)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def generate_synthetic_1d_field(wg: Waveguide1D, source: tuple[float, float],
                                grid: tuple[Sequence[float], Sequence[float]], *,
                                gamma0: float = 1.0, beta: float = 1.0,
                                omega_p: float = 1.0, dipole_moment: float = 1.0,
                                profile=None, source_cell_position: int = 4,
                                group_index: float = 1.0) -> GreenFieldMap:
    """Field of a dipole in an ideal nanobeam, i.e. the 1D Green function inverted.

    ``grid`` coordinates share the length unit of ``wg.lambda_wg`` (taken as the
    lattice constant). ``profile(y)`` is an optional real transverse mode
    envelope normalised to 1 at the source row; the local coupling efficiency
    at height y is then ``beta * profile(y)**2``.
    """
    xs = np.asarray(grid[0], dtype=float)
    ys = np.asarray(grid[1], dtype=float)
    xs_src, ys_src = source
    env = (lambda yy: np.ones_like(yy)) if profile is None else profile
    env_src = float(env(np.array([ys_src]))[0])
    xx, yy = np.meshgrid(xs, ys)
    # d^2 G = i Gamma0 sqrt(beta_src beta(y)) exp(-ik|dx|) / (2 omega^2)
    green = (1j * gamma0 * beta * env_src * env(yy) / (2 * omega_p**2 * dipole_moment**2)
             * np.exp(-1j * wg.k * np.abs(xx - xs_src)))
    field_y = omega_p**2 * dipole_moment * green
    return GreenFieldMap(
        x=xs, y=ys, field_y=field_y, source_x=float(xs_src), source_y=float(ys_src),
        source_cell_position=source_cell_position, dipole_moment=dipole_moment,
        omega_p=omega_p, group_index=group_index, lattice_constant_nm=1.0,
        hole_diameter_nm=0.0, refractive_index=1.0, gamma_local=gamma0,
    )


@dataclass(frozen=True)
class CouplingMap:
    positions: tuple[int, ...]
    gamma12_over_norm: np.ndarray
    j12_over_norm: np.ndarray
    emitter1_position: int
    group_index: float
    coordinates: tuple[tuple[float, float], ...] = ()

    def rows(self) -> list[dict]:
        return [
            {
                "emitter1_position": self.emitter1_position,
                "emitter2_position": p,
                "x_a": xy[0] if xy else math.nan,
                "y_a": xy[1] if xy else math.nan,
                "group_index": self.group_index,
                "gamma12_over_norm": float(g),
                "j12_over_norm": float(j),
            }
            for p, xy, g, j in zip(self.positions, self.coordinates or [()] * len(self.positions),
                                   self.gamma12_over_norm, self.j12_over_norm)
        ]


def coupling_map(map1: GreenFieldMap, positions2: Mapping[int, tuple[float, float]],
                 local_rates: Mapping[int, float], tol: float = 1e-6) -> CouplingMap:
    """Normalised J12, Gamma12 for emitter 2 at each tagged position.

    ``positions2`` maps an intra-cell index to (x, y) in lattice constants and
    ``local_rates`` the same index to the total decay rate Gamma_2 there;
    Gamma_1 is the map's ``gamma_local``.
    """
    idx = tuple(sorted(positions2))
    g_norm, j_norm, coords = [], [], []
    gamma1 = map1.gamma_local
    if gamma1 <= 0:
        raise ValueError(f"emitter-1 local rate must be > 0, got {gamma1}")
    for p in idx:
        if p not in local_rates:
            raise ValueError(f"no local decay rate supplied for position {p}")
        gamma2 = float(local_rates[p])
        if gamma2 <= 0:
            raise ValueError(f"local decay rate at position {p} must be > 0, got {gamma2}")
        x, y = positions2[p]
        g = map1.green_at(x, y)
        c = coupling_from_green(g, map1.omega_p, map1.dipole_moment, map1.dipole_moment)
        norm = math.sqrt(gamma1 * gamma2)
        gn, jn = c.gamma12 / norm, c.j12 / norm
        if abs(gn) > 1 + tol:
            raise UnphysicalCouplingError(
                f"position {p}: |Gamma12|/sqrt(G1 G2) = {abs(gn):.6g} exceeds 1; "
                "field map and local rates are inconsistent"
            )
        g_norm.append(gn)
        j_norm.append(jn)
        coords.append((float(x), float(y)))
    return CouplingMap(
        positions=idx, gamma12_over_norm=np.array(g_norm), j12_over_norm=np.array(j_norm),
        emitter1_position=map1.source_cell_position, group_index=map1.group_index,
        coordinates=tuple(coords),
    )


def shifted(fmap: GreenFieldMap, dx: float) -> GreenFieldMap:
    """Same map translated along the waveguide axis."""
    return replace(fmap, x=fmap.x + dx, source_x=fmap.source_x + dx)
