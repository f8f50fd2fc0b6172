import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from relayflux import materials as mat

SIC = mat.SIC
DRUDE = mat.Drude(omega_p=2.527e14, gamma_p=2.527e11)


def test_vacuum_is_exactly_one():
    eps = mat.permittivity(mat.Vacuum(), 1.787e14)
    assert eps == 1 + 0j
    arr = mat.permittivity(mat.Vacuum(), np.array([1e12, 1e15]))
    assert np.all(arr == 1)


def test_drude_value_against_oracle():
    w = 1.787e14
    eps = mat.permittivity(DRUDE, w)
    ref = complex(oracles.eps_drude(w, 2.527e14, 2.527e11))
    assert eps == pytest.approx(ref, rel=1e-14)
    assert eps.real == pytest.approx(-1.0, abs=2e-3)
    assert eps.imag == pytest.approx(0.002828, rel=2e-3)


def test_sic_value_against_oracle():
    w = 1.787e14
    eps = mat.permittivity(SIC, w)
    ref = complex(oracles.eps_drude_lorentz(w, 6.7, 1.827e14, 1.495e14, 0.9e12))
    assert eps == pytest.approx(ref, rel=1e-13)
    assert eps.real == pytest.approx(-1.01, abs=0.01)
    assert eps.imag == pytest.approx(0.129, abs=0.002)


@pytest.mark.parametrize("w", [0.0, -1e14, float("nan")])
def test_nonpositive_frequency_rejected(w):
    with pytest.raises(ValueError):
        mat.permittivity(SIC, w)


@pytest.mark.parametrize("kwargs", [dict(omega_p=0, gamma_p=1), dict(omega_p=1, gamma_p=-1)])
def test_drude_invariants(kwargs):
    with pytest.raises(ValueError):
        mat.Drude(**kwargs)


@pytest.mark.parametrize("kwargs", [
    dict(eps_inf=1.0, omega_l=2, omega_t=1, gamma=1),
    dict(eps_inf=6, omega_l=1, omega_t=2, gamma=1),
    dict(eps_inf=6, omega_l=2, omega_t=1, gamma=0),
])
def test_drude_lorentz_invariants(kwargs):
    with pytest.raises(ValueError):
        mat.DrudeLorentz(**kwargs)


def test_lossless_drude_spp_exact():
    m = mat.Drude(omega_p=2.0e14, gamma_p=0.0)
    assert mat.surface_polariton_frequency(m) == 2.0e14 / math.sqrt(2.0)


def test_sic_spp_matches_reported_value():
    w = mat.surface_polariton_frequency(SIC)
    assert abs(w / 1.787e14 - 1) < 0.01
    eps = mat.permittivity(SIC, w)
    assert abs(eps.real + 1) < 1e-9 * abs(eps)


def test_sic_spp_is_upper_crossing():
    w = mat.surface_polariton_frequency(SIC)
    assert SIC.omega_t < w < SIC.omega_l
    above = np.linspace(w * (1 + 1e-6), SIC.omega_l, 200)
    assert np.all(np.real(SIC.permittivity(above)) > -1)


def test_damped_drude_spp_shift_is_tiny():
    w = mat.surface_polariton_frequency(DRUDE)
    assert abs(w / 1.787e14 - 1) < 1e-3
    assert abs(w / (2.527e14 / math.sqrt(2)) - 1) < 1e-5
    assert abs(DRUDE.permittivity(w).real + 1) < 1e-9 * abs(DRUDE.permittivity(w))


def test_spp_without_root():
    with pytest.raises(mat.NoRootError):
        mat.surface_polariton_frequency(mat.Vacuum())
    with pytest.raises(mat.NoRootError):
        mat.surface_polariton_frequency(SIC, bracket=(1e12, 1e13))
    with pytest.raises(mat.NoRootError):
        mat.surface_polariton_frequency(mat.Drude(omega_p=1e14, gamma_p=1e14))


def test_matched_drude_recipe():
    relay = mat.matched_drude()
    w_sic = mat.surface_polariton_frequency(SIC)
    assert relay.omega_p == pytest.approx(math.sqrt(2) * w_sic, rel=1e-15)
    assert relay.gamma_p == pytest.approx(1e-3 * relay.omega_p, rel=1e-15)
    assert abs(mat.surface_polariton_frequency(relay) / w_sic - 1) < 1e-3


def test_drude_high_frequency_limit():
    assert abs(DRUDE.permittivity(100 * DRUDE.omega_p) - 1) < 3e-4


def test_passivity_random_sample():
    rng = np.random.default_rng(7)
    w = 10 ** rng.uniform(12, 16, 10_000)
    for model in mat.BUILTIN_MODELS.values():
        assert np.all(np.imag(mat.permittivity(model, w)) >= 0)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e12, 1e16), st.floats(1e13, 1e15), st.floats(0, 1e14))
def test_drude_matches_oracle_and_is_passive(w, wp, g):
    eps = mat.Drude(omega_p=wp, gamma_p=g).permittivity(w)
    ref = complex(oracles.eps_drude(w, wp, g))
    assert abs(eps - ref) <= 1e-12 * abs(ref)
    assert eps.imag >= 0


@settings(max_examples=200, deadline=None)
@given(st.floats(1e12, 1e16), st.floats(1.01, 20), st.floats(1e13, 1e15), st.floats(0.01, 0.99),
       st.floats(1e10, 1e13))
def test_drude_lorentz_matches_oracle_and_is_passive(w, einf, wl, ratio, g):
    m = mat.DrudeLorentz(eps_inf=einf, omega_l=wl, omega_t=ratio * wl, gamma=g)
    eps = m.permittivity(w)
    ref = complex(oracles.eps_drude_lorentz(w, einf, wl, ratio * wl, g))
    assert abs(eps - ref) <= 1e-10 * abs(ref)
    assert eps.imag >= 0


def test_registry_and_custom_models():
    assert mat.get_model("sic-palik") is SIC
    assert isinstance(mat.get_model("vacuum"), mat.Vacuum)
    with pytest.raises(KeyError):
        mat.get_model("gold")
    m = mat.model_from_dict({"kind": "drude", "omega_p": 2e14, "damping_ratio": 0.01})
    assert m == mat.Drude(omega_p=2e14, gamma_p=2e12)
    dl = mat.model_from_dict(SIC.to_dict())
    assert dl == SIC
    with pytest.raises(ValueError):
        mat.model_from_dict({"kind": "lorentz"})
