import math
import re
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import couplings_1d
from wgqed.dicke_core import EmitterParams
from wgqed.waveguide_green import (
    FieldMapError,
    GridCoverageError,
    MalformedHeaderError,
    MalformedRecordError,
    MissingMetadataError,
    NonFiniteFieldError,
    NonRectilinearGridError,
    SourceInHoleError,
    UnphysicalCouplingError,
    UnsupportedComponentError,
    Waveguide1D,
    analytic_coupling,
    coupling_from_green,
    coupling_map,
    generate_synthetic_1d_field,
    green_1d,
    ingest_field_map,
    shifted,
    write_field_map,
)

WG = Waveguide1D(1.0)
XS = np.arange(-12, 12 * 13 + 1) / 12
YS = np.linspace(-0.5, 0.5, 5)


def synthetic(source=(0.0, 0.0), xs=XS, ys=YS, **kw):
    return generate_synthetic_1d_field(WG, source, (xs, ys), **kw)


def pair(phase, beta1=1.0, beta2=1.0, gamma0=1.0):
    return (EmitterParams(gamma0=gamma0, beta=beta1, position_z=0.0),
            EmitterParams(gamma0=gamma0, beta=beta2, position_z=phase / WG.k))


# --- closed forms -----------------------------------------------------------

def test_ideal_dissipative_point():
    c = analytic_coupling(WG, pair(2 * math.pi))
    assert c.j12 == pytest.approx(0.0, abs=1e-14)
    assert c.gamma12 == pytest.approx(1.0, abs=1e-14)


def test_calibration_phase_substitution():
    ph = 35 * math.pi / 18
    c = analytic_coupling(WG, pair(ph))
    assert c.gamma12 == pytest.approx(math.cos(ph), abs=1e-14)
    assert c.j12 == pytest.approx(0.5 * math.sin(ph), abs=1e-14)


def test_real_green_gives_no_dissipative_coupling():
    c = coupling_from_green(0.37)
    assert c.gamma12 == 0.0 and c.j12 == pytest.approx(0.37)


def test_dipole_projection_and_prefactors():
    c = coupling_from_green(0.2 + 0.3j, omega_p=2.0, d1=1j, d2=1.0)
    g = np.conj(1j) * (0.2 + 0.3j)
    assert c.j12 == pytest.approx(4 * g.real)
    assert c.gamma12 == pytest.approx(8 * g.imag)


def test_rejects_other_tensor_components():
    with pytest.raises(ValueError, match="y-oriented"):
        coupling_from_green(1j, orientation=("x", "y"))


@given(st.floats(0, 4 * math.pi), st.floats(0, 1), st.floats(0, 1), st.floats(0.1, 3))
def test_closed_form_identity(phase, b1, b2, g0):
    c = analytic_coupling(WG, pair(phase, b1, b2, g0))
    assert (2 * c.j12) ** 2 + c.gamma12**2 == pytest.approx(g0**2 * b1 * b2, abs=1e-10)


def test_green_depends_on_separation_only():
    e1, e2 = pair(1.1)
    moved = (replace(e1, position_z=e1.position_z + 3.3), replace(e2, position_z=e2.position_z + 3.3))
    assert green_1d(WG, moved) == pytest.approx(green_1d(WG, (e1, e2)), abs=1e-14)
    assert green_1d(WG, (e2, e1)) == pytest.approx(green_1d(WG, (e1, e2)), abs=1e-14)


# --- field maps: round trip ------------------------------------------------------

def test_round_trip_is_exact(tmp_path):
    fmap = synthetic()
    back = ingest_field_map(write_field_map(fmap, tmp_path / "f.txt"))
    assert np.abs(back.green_yy() - fmap.green_yy()).max() <= 1e-10
    assert back.metadata == fmap.metadata
    assert np.array_equal(back.x, fmap.x) and np.array_equal(back.y, fmap.y)


def test_recovered_green_matches_generator(tmp_path):
    fmap = ingest_field_map(write_field_map(synthetic(), tmp_path / "f.txt"))
    for x in (0.0, 0.25, 3.5, 11.0):
        e2 = EmitterParams(position_z=x)
        assert fmap.green_at(x, 0.0) == pytest.approx(green_1d(WG, (EmitterParams(), e2)), abs=1e-10)


def test_36_separations_match_closed_forms(tmp_path):
    # sample separations sit on grid nodes, so no interpolation error enters
    xs = np.linspace(0, 1, 36)
    fmap = ingest_field_map(write_field_map(synthetic(xs=xs), tmp_path / "f.txt"))
    phases = WG.k * xs
    for ph in phases:
        c = coupling_from_green(fmap.green_at(ph / WG.k, 0.0))
        j, g = couplings_1d(ph)
        assert c.j12 == pytest.approx(j, abs=1e-8)
        assert c.gamma12 == pytest.approx(g, abs=1e-8)


def test_decimated_grid_gives_same_couplings():
    fine = synthetic()
    coarse = synthetic(xs=XS[::2], ys=YS[::2])
    pts = {p: (float(x), 0.0) for p, x in enumerate(XS[::2][12:60], start=1)}
    rates = {p: 1.0 for p in pts}
    a, b = coupling_map(fine, pts, rates), coupling_map(coarse, pts, rates)
    assert np.abs(a.gamma12_over_norm - b.gamma12_over_norm).max() <= 1e-6
    assert np.abs(a.j12_over_norm - b.j12_over_norm).max() <= 1e-6


@given(st.floats(-3.0, 3.0))
def test_joint_translation_leaves_couplings_invariant(dx):
    fmap = synthetic()
    pts = {1: (1.3, 0.0), 2: (4.75, 0.25)}
    rates = {1: 1.0, 2: 1.0}
    a = coupling_map(fmap, pts, rates)
    moved = {p: (x + dx, y) for p, (x, y) in pts.items()}
    b = coupling_map(shifted(fmap, dx), moved, rates)
    assert np.allclose(a.gamma12_over_norm, b.gamma12_over_norm, atol=1e-12)
    assert np.allclose(a.j12_over_norm, b.j12_over_norm, atol=1e-12)


def test_reciprocity():
    r1, r2 = (0.0, 0.0), (2.5, 0.25)
    g12 = synthetic(source=r1).green_at(*r2)
    g21 = synthetic(source=r2).green_at(*r1)
    assert abs(g12) == pytest.approx(abs(g21), abs=1e-14)
    assert g12 == pytest.approx(g21, abs=1e-14)


def test_transverse_profile_scales_local_coupling():
    fmap = synthetic(beta=0.8, profile=lambda y: np.cos(math.pi * y))
    c = coupling_from_green(fmap.green_at(0.0, 0.25))
    assert c.gamma12 == pytest.approx(0.8 * math.cos(math.pi * 0.25), abs=1e-12)


# --- coupling maps ------------------------------------------------------------------

def test_same_antinode_gives_full_dissipative_coupling():
    cmap = coupling_map(synthetic(), {1: (3.0, 0.0)}, {1: 1.0})
    assert cmap.gamma12_over_norm[0] == pytest.approx(1.0, abs=1e-12)
    assert cmap.j12_over_norm[0] == pytest.approx(0.0, abs=1e-12)


def test_rows_carry_positions():
    cmap = coupling_map(synthetic(), {2: (1.5, 0.0), 1: (1.0, 0.0)}, {1: 1.0, 2: 1.0})
    rows = cmap.rows()
    assert [r["emitter2_position"] for r in rows] == [1, 2]
    assert rows[1]["x_a"] == 1.5


@given(st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.floats(0.0, 12.0))
def test_consistent_maps_are_physical(g1, g2, x):
    # local rates derived from the same field are always consistent
    fmap = replace(synthetic(gamma0=math.sqrt(g1 * g2)), gamma_local=g1)
    cmap = coupling_map(fmap, {1: (x, 0.0)}, {1: g2})
    assert abs(cmap.gamma12_over_norm[0]) <= 1 + 1e-6


def test_inconsistent_rates_are_rejected():
    with pytest.raises(UnphysicalCouplingError, match="exceeds 1"):
        coupling_map(synthetic(gamma0=2.0), {1: (1.0, 0.0)}, {1: 1.0})


@pytest.mark.parametrize("rates", [{1: 0.0}, {1: -1.0}, {}])
def test_bad_local_rates(rates):
    with pytest.raises(ValueError, match="rate"):
        coupling_map(synthetic(), {1: (1.0, 0.0)}, rates)


def test_position_outside_grid():
    with pytest.raises(ValueError, match="outside the map grid"):
        coupling_map(synthetic(), {1: (500.0, 0.0)}, {1: 1.0})


# --- ingestion errors ----------------------------------------------------------------

def photonic_crystal_map():
    return replace(synthetic(), lattice_constant_nm=240.0, hole_diameter_nm=160.0,
                   refractive_index=3.5, group_index=5.0)


def test_photonic_crystal_geometry_accepted_and_echoed(tmp_path):
    back = ingest_field_map(write_field_map(photonic_crystal_map(), tmp_path / "pc.txt"))
    assert (back.lattice_constant_nm, back.hole_diameter_nm, back.refractive_index) == (240.0, 160.0, 3.5)
    assert back.metadata["group_index"] == 5.0


def _text(tmp_path):
    return write_field_map(photonic_crystal_map(), tmp_path / "ok.txt").read_text()


def _broken(tmp_path, text):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    return p


def _drop_records(text, drop):
    keep = []
    for line in text.splitlines():
        head = line.split()[0] if line.split() else ""
        is_record = "=" not in line and not line.startswith("#")
        if not (is_record and drop(float(head))):
            keep.append(line)
    return "\n".join(keep) + "\n"


MALFORMED = {
    "missing key": (lambda t: t.replace("gamma_local", "# gamma_local"), MissingMetadataError),
    "bad header value": (lambda t: t.replace("group_index = 5.0", "group_index = five"), MalformedHeaderError),
    "short record": (lambda t: t.replace("\n-1.0 -0.5 ", "\n-1.0 ", 1), MalformedRecordError),
    "non-rectilinear": (lambda t: t.replace("\n-1.0 -0.25 ", "\n-1.01 -0.25 ", 1), NonRectilinearGridError),
    "non-finite": (lambda t: re.sub(r"\n(0\.0 0\.0) \S+", r"\n\1 nan", t, count=1), NonFiniteFieldError),
    "source in hole": (lambda t: t.replace("source_x_a = 0.0", "source_x_a = 0.5")
                       .replace("source_y_a = 0.0", "source_y_a = 0.8660254037844386"), SourceInHoleError),
    "component": (lambda t: t.replace("component = yy", "component = xx"), UnsupportedComponentError),
    "coverage": (lambda t: _drop_records(t, lambda x: x >= 5), GridCoverageError),
}


@pytest.mark.parametrize("case", sorted(MALFORMED))
def test_malformed_files_raise_distinct_errors(tmp_path, case):
    mutate, err = MALFORMED[case]
    text = _text(tmp_path)
    bad = mutate(text)
    assert bad != text
    with pytest.raises(err):
        ingest_field_map(_broken(tmp_path, bad))


def test_error_classes_are_distinct():
    classes = [err for _, err in MALFORMED.values()]
    assert len(set(classes)) == len(classes) >= 6
    assert all(issubclass(c, FieldMapError) for c in classes)


def test_empty_and_missing_files(tmp_path):
    with pytest.raises(MalformedHeaderError, match="empty"):
        ingest_field_map(_broken(tmp_path, "# nothing\n"))
    with pytest.raises(FileNotFoundError):
        ingest_field_map(tmp_path / "absent.txt")
