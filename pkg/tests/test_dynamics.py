import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import pair_configs, waveguide_pairs
from oracles import bloch_steady, evolve_two_level, product_to_bare
from wgqed.dicke_core import (
    DICKE_BASIS,
    CouplingParams,
    DensityMatrix,
    DriveParams,
    EmitterParams,
    build_liouvillian,
    dicke_populations_of,
    op,
)
from wgqed.dynamics import StiffnessError, evolve, regression_correlator, steady_state
from wgqed.system import EmitterPairConfig, pair_config, single_emitter_config
from wgqed.waveguide_green import Waveguide1D


def test_undriven_steady_state_is_ground():
    lv = build_liouvillian((EmitterParams(), EmitterParams()), DriveParams(mode="RF"), CouplingParams())
    rho = steady_state(lv)
    assert np.allclose(rho.entries, DensityMatrix.ground().entries, atol=1e-14)
    assert rho.meta["residual"] <= 1e-10


def test_weak_drive_single_emitter_population():
    rabi = 1e-7
    cfg = single_emitter_config(rabi=rabi, mode="RF")
    pe = steady_state(cfg.liouvillian()).expect(op("s1_ee")).real
    assert pe == pytest.approx(4 * rabi**2, rel=1e-2)


@pytest.mark.parametrize("rabi,delta,gd", [(0.3, 0.0, 0.0), (0.7, -1.2, 0.4), (2.0, 0.5, 0.1)])
def test_single_emitter_matches_bloch_oracle(rabi, delta, gd):
    cfg = single_emitter_config(rabi=rabi, gamma_deph=gd, detuning=delta, mode="RF")
    rho = steady_state(cfg.liouvillian())
    ref = bloch_steady(rabi, delta, 1.0, gd)
    assert rho.expect(op("s1_ee")).real == pytest.approx(ref[1, 1].real, abs=1e-12)
    assert rho.expect(op("s1_ge")) == pytest.approx(ref[1, 0], abs=1e-12)


def test_sub_radiant_population_half():
    cfg = pair_config(math.pi, mode="RF", relative_phase=0.0, rabi=0.01)
    pops = dicke_populations_of(steady_state(cfg.liouvillian()))
    assert pops["s"] == pytest.approx(0.5, abs=5e-3)


def test_degenerate_kernel_falls_back_to_propagation():
    # no drive on |a>, which is dark: kernel spanned by |g><g| and |a><a|
    cfg = pair_config(2 * math.pi, rabi=0.0, mode="RF")
    rho = steady_state(cfg.liouvillian())
    assert rho.meta["degenerate_kernel"]
    assert rho.meta["method"] == "long-time propagation"
    assert np.allclose(rho.entries, DensityMatrix.ground().entries, atol=1e-12)


@given(pair_configs())
def test_steady_state_residual_and_validity(cfg):
    rho = steady_state(cfg.liouvillian())
    if not rho.meta["degenerate_kernel"]:
        assert rho.meta["residual"] <= 1e-10
    rho.check()


def test_single_decay_exponential():
    em = (EmitterParams(), EmitterParams(beta=0))
    lv = build_liouvillian(em, DriveParams(mode="RF"), CouplingParams())
    rho0 = np.zeros((4, 4))
    rho0[3, 3] = 1
    t = np.linspace(0, 5, 6)
    for method in ("expm", "rk"):
        ev = evolve(lv, DensityMatrix(rho0, "bare"), t, method=method)
        assert np.allclose(ev.expect(op("s1_ee")).real, np.exp(-t), atol=1e-8)


@given(waveguide_pairs())
def test_expm_and_rk_agree(cfg):
    t = np.array([0.0, 0.7, 2.5, 6.0])
    lv = cfg.liouvillian()
    a = evolve(lv, DensityMatrix.ground(), t, method="expm").stack()
    b = evolve(lv, DensityMatrix.ground(), t, method="rk").stack()
    assert np.abs(a - b).max() <= 1e-8


@given(pair_configs())
def test_evolution_preserves_state_properties(cfg):
    ev = evolve(cfg.liouvillian(), DensityMatrix.ground(), np.linspace(0, 20, 9))
    for s in ev.states:
        r = s.entries
        assert abs(np.trace(r) - 1) <= 1e-9
        assert np.abs(r - r.conj().T).max() <= 1e-10
        assert np.linalg.eigvalsh(r).min() >= -1e-8


@given(waveguide_pairs(), st.sampled_from([0.0, 0.3]))
def test_long_time_limit_is_steady_state(cfg, extra_deph):
    # only configurations with a spectral gap well above 1/200 are meaningful here
    lv = cfg.liouvillian()
    rates = np.sort(-lv.eigenvalues().real)
    if rates[1] < 0.15:
        return
    rho_t = evolve(lv, DensityMatrix.ground(), [0.0, 200.0]).states[-1].entries
    assert np.abs(rho_t - steady_state(lv).entries).max() <= 1e-6


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.2, 2), st.floats(0.2, 2),
       st.floats(0, 0.5), st.floats(0, 0.5), st.floats(-2, 2))
def test_decoupled_pair_factorises(r1, r2, g1, g2, d1, d2, delta):
    e1 = EmitterParams(gamma0=g1, gamma_deph=d1)
    e2 = EmitterParams(gamma0=g2, gamma_deph=d2)
    cfg = EmitterPairConfig((e1, e2), DriveParams(r1, 1j * r2, delta, "RF"), CouplingParams(), Waveguide1D())
    times = [0.3, 1.7, 4.0]
    rho1 = np.array([[0.7, 0.2 - 0.1j], [0.2 + 0.1j, 0.3]])
    rho2 = np.array([[0.4, 0.1j], [-0.1j, 0.6]])
    ev = evolve(cfg.liouvillian(), DensityMatrix(product_to_bare(np.kron(rho1, rho2)), "bare"),
                [0.0, *times])
    a = evolve_two_level(rho1, times, rabi=r1, delta=delta, gamma=g1, gamma_deph=d1)
    b = evolve_two_level(rho2, times, rabi=1j * r2, delta=delta, gamma=g2, gamma_deph=d2)
    for k in range(3):
        want = product_to_bare(np.kron(a[k], b[k]))
        assert np.abs(ev.states[k + 1].entries - want).max() <= 1e-8


def test_evolve_rejects_bad_times():
    lv = single_emitter_config().liouvillian()
    with pytest.raises(ValueError):
        evolve(lv, DensityMatrix.ground(), [1.0, 0.5])
    with pytest.raises(ValueError):
        evolve(lv, DensityMatrix.ground(), [0.0, 1.0], method="euler")


def test_rk_reports_stiff_regime(monkeypatch):
    import wgqed.dynamics as dyn

    class Failed:
        status, message = -1, "Required step size is less than spacing between numbers."

    monkeypatch.setattr(dyn, "solve_ivp", lambda *a, **k: Failed())
    with pytest.raises(StiffnessError, match="stiffness ratio"):
        evolve(single_emitter_config().liouvillian(), DensityMatrix.ground(), [0.0, 1.0], method="rk")


def test_correlator_without_conditioning_is_constant():
    cfg = pair_config(35 * math.pi / 18, rabi=0.2, mode="RF")
    lv = cfg.liouvillian()
    rho = steady_state(lv)
    c = regression_correlator(lv, rho, np.eye(4), np.eye(4), [0.0, 1.0, 10.0], measure=op("s1_ee"))
    assert np.allclose(c.values, rho.expect(op("s1_ee")), atol=1e-12)


@given(waveguide_pairs())
def test_correlator_tau_zero_matches_direct(cfg):
    lv = cfg.liouvillian()
    rho = steady_state(lv)
    a, c, m = op("s1_eg") + op("s2_eg"), op("s1_ge") - 0.3j * op("s2_ge"), op("s2_ee")
    val = regression_correlator(lv, rho, a, c, [0.0], measure=m).values[0]
    assert abs(val - rho.expect(a @ m @ c)) <= 1e-9 * max(1.0, abs(val))


def test_correlator_warns_on_non_stationary_input():
    lv = pair_config(math.pi / 3, rabi=0.3, mode="RF").liouvillian()
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        c = regression_correlator(lv, DensityMatrix.ground(), np.eye(4), np.eye(4), [0.0, 1.0])
    assert "warning" in c.meta and w


def test_correlator_rejects_negative_delay():
    lv = single_emitter_config().liouvillian()
    with pytest.raises(ValueError):
        regression_correlator(lv, steady_state(lv), np.eye(4), np.eye(4), [-1.0])
