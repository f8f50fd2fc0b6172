import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as si

import oracles
from relayflux import materials as mat
from relayflux import scattering as sc
from relayflux import transport as tr
from relayflux.constants import C0, HBAR

W_SPP = mat.surface_polariton_frequency(mat.SIC)
BASE = tr.SystemConfig()
FAST = tr.Numerics(rtol=1e-4)


def _eps(model, w):
    return complex(model.permittivity(w))


def test_config_validation():
    for bad in (dict(d=0.0), dict(delta=-1e-9), dict(t1=0.0), dict(T1=-1.0), dict(T2=0.0)):
        with pytest.raises(ValueError):
            replace(BASE, **bad)


def test_relay_temperature_default_is_balance():
    assert tr.relay_temperature(BASE) == pytest.approx(
        float(oracles.balance_temperature(W_SPP, 400, 300)), rel=1e-12)
    assert tr.relay_temperature(replace(BASE, T2=321.0)) == 321.0


def test_two_body_trivial_examples():
    for x in (0.01, 0.3, 1.0):
        assert tr._two_body(np.array(1j), np.array(1j), x) == pytest.approx(4 * x / (1 + x) ** 2, rel=1e-15)
    assert tr._two_body(np.array(1j), np.array(1j), 1.0) == 1.0


def test_lossless_body_transmits_nothing():
    cfg = replace(BASE, material1=mat.Drude(omega_p=2.5e14, gamma_p=0.0))
    w = 1.2e14
    k = np.linspace(1.01, 50, 100) * w / C0
    for pol in sc.POLARIZATIONS:
        assert np.all(tr.transmission_two_slab(w, k, pol, cfg) == 0)


def test_propagative_modes_rejected():
    with pytest.raises(ValueError):
        tr.transmission_two_slab(W_SPP, 0.5 * W_SPP / C0, "TM", BASE)
    with pytest.raises(ValueError):
        tr.transmission_three_slab(W_SPP, 0.5 * W_SPP / C0, "TE", BASE)
    with pytest.raises(ValueError):
        tr.transmission_two_slab(W_SPP, 2 * W_SPP / C0, "XX", BASE)


@pytest.mark.parametrize("pol", sc.POLARIZATIONS)
@pytest.mark.parametrize("x", [1.05, 3.0, 10.0, 25.0])
def test_two_slab_against_transfer_matrix(pol, x):
    k = x * W_SPP / C0
    e = _eps(mat.SIC, W_SPP)
    r1, _ = oracles.stack_response([(e, 5e-6)], W_SPP, k, pol)
    gap = math.exp(-2 * float(oracles.kz(1, W_SPP, k).imag) * 200e-9)
    ref = oracles.two_body(r1, r1, gap)
    got = tr.transmission_two_slab(W_SPP, k, pol, BASE)
    assert got == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("pol", sc.POLARIZATIONS)
@pytest.mark.parametrize("x", [1.05, 3.0, 10.0, 25.0])
@pytest.mark.parametrize("delta", [20e-9, 265e-9, 800e-9])
@pytest.mark.parametrize("wr", [0.9, 1.0, 1.02])
def test_three_slab_against_intermediate_scatterer(pol, x, delta, wr):
    w = wr * W_SPP
    k = x * w / C0
    d = 200e-9
    e1, e2 = _eps(mat.SIC, w), _eps(mat.matched_drude(), w)
    rho1, _ = oracles.stack_response([(e1, 5e-6)], w, k, pol)
    r_mid, t_mid = oracles.stack_response([(1.0, d), (e2, delta), (1.0, d)], w, k, pol)
    t12_ref = oracles.intermediate_scatterer(rho1, rho1, r_mid, r_mid, t_mid)
    rho12, _ = oracles.stack_response([(e2, delta), (1.0, d), (e1, 5e-6)], w, k, pol)
    gap = math.exp(-2 * float(oracles.kz(1, w, k).imag) * d)
    t23_ref = oracles.two_body(rho12, rho1, gap)
    t12, t23 = tr.transmission_three_slab(w, k, pol, replace(BASE, delta=delta))
    assert t12 == pytest.approx(t12_ref, rel=1e-8, abs=1e-300)
    assert t23 == pytest.approx(t23_ref, rel=1e-8)


def test_delta_zero_and_vacuum_relay_reductions():
    w = np.linspace(0.8, 1.2, 12)[:, None] * W_SPP
    k = np.geomspace(1.01, 80, 12)[None, :] * w / C0
    two_2d = replace(BASE, d=400e-9)
    for pol in sc.POLARIZATIONS:
        ref = tr.transmission_two_slab(w, k, pol, two_2d)
        t12, t23 = tr.transmission_three_slab(w, k, pol, replace(BASE, delta=0.0))
        assert np.allclose(t12, ref, rtol=1e-10, atol=0)
        assert np.allclose(t23, ref, rtol=1e-10, atol=0)
        vac = replace(BASE, material2=mat.Vacuum(), delta=150e-9)
        ref = tr.transmission_two_slab(w, k, pol, replace(BASE, d=550e-9))
        t12, t23 = tr.transmission_three_slab(w, k, pol, vac)
        assert np.allclose(t12, ref, rtol=1e-10, atol=1e-300)
        assert np.allclose(t23, ref, rtol=1e-10, atol=1e-300)


def test_thick_relay_limit():
    cfg = replace(BASE, delta=100 * BASE.d)
    w = W_SPP
    k = np.geomspace(1.001, 60, 200) * w / C0
    drude = mat.matched_drude()
    for pol in sc.POLARIZATIONS:
        t12, t23 = tr.transmission_three_slab(w, k, pol, cfg)
        rho2 = sc.fresnel_interface(w, k, drude.permittivity(w), pol)
        rho3 = sc.slab_response(w, k, mat.SIC.permittivity(w), 5e-6, pol).rho
        gap = sc.gap_factor(w, k, BASE.d).real
        ref = tr._two_body(rho2, rho3, gap)
        assert np.all(t12 < 1e-9)
        assert np.allclose(t23, ref, rtol=1e-6, atol=0)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(1.0001, 500.0), st.floats(50e-9, 800e-9),
       st.floats(0.0, 1e-6), st.floats(1e-4, 0.3), st.sampled_from(sc.POLARIZATIONS))
def test_landauer_bound_property(wr, x, d, delta, ratio, pol):
    cfg = replace(BASE, d=d, delta=delta,
                  material2=mat.matched_drude(damping_ratio=ratio))
    w = wr * W_SPP
    k = x * w / C0
    t2 = tr.transmission_two_slab(w, k, pol, cfg)
    t12, t23 = tr.transmission_three_slab(w, k, pol, cfg)
    for t in (t2, t12, t23):
        assert 0 <= t <= 1 + 1e-9


def _random_nodes(rng, n, lo=1.0001, hi=400.0):
    w = rng.uniform(0.05, 3.0, n) * W_SPP
    k = np.exp(rng.uniform(math.log(lo), math.log(hi), n)) * w / C0
    return w, k


@pytest.mark.parametrize("balance", [False, True])
@pytest.mark.parametrize("mat2", ["drude-matched", "vacuum", "sic-palik"])
def test_compiled_kernel_matches_numpy_reference(balance, mat2):
    rng = np.random.default_rng(21)
    cfg = replace(BASE, material2=mat.get_model(mat2), T2=340.0)
    deltas = [0.0, 30e-9, 265e-9, 1e-6]
    kern = tr._Kernel(cfg, cfg.d, deltas, two_slab=True, balance=balance)
    w, k = _random_nodes(rng, 4000)
    fast, ref = kern(w, k), kern.reference(w, k)
    scale = np.abs(ref[:, :1 + len(deltas)]).max(axis=1, keepdims=True)
    # near the light line the two routes round differently (kz via k0^2 - k^2)
    assert np.all(np.abs(fast - ref) <= 1e-9 * scale + 1e-300)


def test_kernel_grid_validation():
    kern = tr._Kernel(BASE, BASE.d, [100e-9])
    with pytest.raises(ValueError):
        kern.on_grid(np.array([W_SPP]), np.array([0, 0]), np.array([1e7]))
    with pytest.raises(IndexError):
        kern.on_grid(np.array([W_SPP]), np.array([1]), np.array([1e7]))
    with pytest.raises(ValueError):
        kern.on_grid(np.array([W_SPP]), np.array([0]), np.array([1e5]))


def _spectral_oracle(w, cfg, d):
    n13 = float(oracles.occupation(w, cfg.T1) - oracles.occupation(w, cfg.T3))
    k0 = w / C0

    def integrand(u, pol):
        k = k0 + u / d
        return tr.transmission_two_slab(w, k, pol, replace(cfg, d=d)) * k / d

    total = 0.0
    for pol in sc.POLARIZATIONS:
        for a, b in ((0, 1e-3), (1e-3, 0.1), (0.1, 1), (1, 5), (5, 20), (20, 80), (80, 400)):
            total += si.quad(integrand, a, b, args=(pol,), limit=400, epsabs=0, epsrel=1e-11)[0]
    return HBAR * w * n13 * total / (2 * math.pi)


@pytest.mark.parametrize("wr", [0.9, 1.0, 1.05])
def test_spectral_flux_against_scipy(wr):
    w = wr * W_SPP
    got = tr.spectral_flux_two_slab(w, BASE, tr.Numerics(rtol=1e-7))
    assert got == pytest.approx(_spectral_oracle(w, BASE, BASE.d), rel=1e-6)


def test_spectral_equilibrium_is_zero():
    eq = replace(BASE, T1=300.0, T3=300.0, T2=300.0)
    assert tr.spectral_flux_two_slab(W_SPP, eq, FAST) == 0.0
    assert tr.spectral_flux_three_slab(W_SPP, replace(eq, delta=200e-9), FAST) == 0.0


def test_spectral_two_slab_monotone_in_distance():
    vals = [tr.spectral_flux_two_slab(W_SPP, replace(BASE, d=d), FAST) for d in (100e-9, 200e-9, 400e-9)]
    assert vals[0] > vals[1] > vals[2] > 0


def test_spectral_delta_zero_equals_two_slab_at_double_gap():
    num = tr.Numerics(rtol=1e-8)
    for w in (0.95 * W_SPP, W_SPP):
        three = tr.spectral_flux_three_slab(w, replace(BASE, delta=0.0), num)
        two = tr.spectral_flux_two_slab(w, replace(BASE, d=2 * BASE.d), num)
        assert three == pytest.approx(two, rel=1e-7)


def test_spectral_enhancement_at_surface_mode():
    three = tr.spectral_flux_three_slab(W_SPP, replace(BASE, delta=265e-9), FAST)
    two = tr.spectral_flux_two_slab(W_SPP, BASE, FAST)
    assert three > two > 0


def test_total_flux_equilibrium_and_sign():
    assert tr.total_flux(replace(BASE, T3=400.0), tr.TWO_SLAB, FAST) == 0.0
    fwd = tr.total_flux(BASE, tr.TWO_SLAB, FAST)
    rev = tr.total_flux(replace(BASE, T1=300.0, T3=400.0, T2=357.0), tr.TWO_SLAB, FAST)
    assert fwd > 0
    assert rev == -fwd


def test_total_flux_decreases_with_distance():
    near = tr.total_flux(BASE, tr.TWO_SLAB, FAST)
    far = tr.total_flux(replace(BASE, d=400e-9), tr.TWO_SLAB, FAST)
    assert near > far > 0


def test_tm_dominates():
    cfg = replace(BASE, delta=265e-9)
    te = tr.total_flux(cfg, tr.THREE_SLAB, FAST, polarizations=("TE",))
    tm = tr.total_flux(cfg, tr.THREE_SLAB, FAST, polarizations=("TM",))
    both = tr.total_flux(cfg, tr.THREE_SLAB, FAST)
    assert tm > te > 0
    assert both == pytest.approx(te + tm, rel=3e-4)


def test_total_flux_nonconvergence_reports():
    starved = tr.Numerics(rtol=1e-9, max_iter=1)
    with pytest.raises(tr.NonConvergenceError) as info:
        tr.total_flux(BASE, tr.TWO_SLAB, starved)
    assert info.value.estimate > 0 and info.value.error > 0


@pytest.mark.parametrize("scale, ok", [(1e-12, True), (1e3, False)])
def test_inner_misses_judged_against_budget(monkeypatch, scale, ok):
    # one inner integral per call reports a miss with error = scale * |value|
    real = tr.k_integrals

    def lossy(kernel, omegas, numerics=tr.DEFAULT_NUMERICS, atol=0.0):
        r = real(kernel, omegas, numerics, atol)
        conv = r.converged.copy()
        conv[0] = False
        err = r.error.copy()
        err[0] = scale * np.abs(r.value[0])
        return tr.KIntegral(r.value, err, conv, r.u_max)

    clean = tr.flux_integral(BASE, tr.TWO_SLAB, FAST)
    monkeypatch.setattr(tr, "k_integrals", lossy)
    res = tr.flux_integral(BASE, tr.TWO_SLAB, FAST)
    assert res.value[0] == clean.value[0]
    assert res.converged is ok
    assert res.error[0] >= clean.error[0]


def test_flux_row_cells_independent():
    row = tr.flux_row(BASE, [0.0, 265e-9], FAST)
    alone = tr.flux_integral(replace(BASE, delta=265e-9), tr.THREE_SLAB, FAST)
    assert row.converged
    assert row.phi3s[1] == alone.value[0]
    assert row.phi3s[0] / row.phi2s < 1 < row.phi3s[1] / row.phi2s


def test_net_power_trivial_cases():
    cfg = replace(BASE, delta=100e-9)
    eq = replace(cfg, T1=300.0, T2=300.0, T3=300.0)
    assert tr.net_power_body2(eq, FAST) == 0.0
    assert tr.net_power_body2(replace(cfg, T2=300.0), FAST) > 0


def test_net_power_mirror_symmetry():
    cfg = replace(BASE, delta=150e-9, t1=3e-6, T2=350.0)
    p = tr.net_power_body2(cfg, FAST)
    q = tr.net_power_body2(cfg.mirrored(), FAST)
    assert q == pytest.approx(p, rel=1e-3)


def test_net_power_small_at_balance_temperature():
    cfg = replace(BASE, d=100e-9, delta=100e-9)
    p2 = tr.net_power_body2(cfg, FAST)
    phi = tr.total_flux(cfg, tr.THREE_SLAB, FAST)
    assert abs(p2) < 0.02 * phi


def test_refine_without_relay_returns_balance():
    assert tr.refine_relay_temperature(BASE) == tr.relay_temperature(BASE)
    vac = replace(BASE, delta=50e-9, material2=mat.Vacuum())
    assert tr.refine_relay_temperature(vac) == tr.relay_temperature(BASE)
    same = replace(BASE, T1=300.0, T3=300.0, delta=50e-9)
    assert tr.refine_relay_temperature(same) == 300.0
