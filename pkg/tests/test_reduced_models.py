import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmspde import reduced_models as rm
from cmspde.exp_filters import FilterChain, chain_step
from cmspde.spde_sim import Grid, project_amplitude
from cmspde.stochastic_core import (InvalidParameterError, NumericalBlowupError,
                                    ensemble_increments)


def test_psi_coefficient_identity():
    lhs = rm.PSI1_COMPONENT ** 2 + rm.PSI2_COMPONENT ** 2
    assert abs(lhs / rm.PSI_COMBINED ** 2 - 1) < 1e-12
    assert rm.PSI_COMBINED == pytest.approx(0.0067676, abs=1e-7)
    assert rm.PSI2_SUBSTITUTED == 3 * rm.PSI2_COMPONENT


@pytest.mark.parametrize("gamma, sigma, rate", [(-0.03, 0.5, 0.03 - 0.25 / 88),
                                                (-0.03, 2.0, 0.03 - 4 / 88),
                                                (0.1, 0.0, -0.1)])
def test_weak_linear_rate(gamma, sigma, rate):
    assert rm.weak_linear_rate(rm.ModelParams(gamma, sigma)) == pytest.approx(rate, abs=1e-15)


def test_deterministic_equilibrium():
    assert rm.deterministic_equilibrium(-0.03) == pytest.approx(0.6)
    assert rm.deterministic_equilibrium(0.2) == 0.0


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-3, 3), gamma=st.floats(-1, 1), phi=st.floats(-10, 10))
def test_models_reduce_to_deterministic_without_noise(a, gamma, phi):
    p = rm.ModelParams(gamma, 0.0)
    z = np.linspace(-1, 1, 7)
    det = -gamma * a - a ** 3 / 12
    assert rm.naive_rhs(rm.StrongModelState(a, z), p) == pytest.approx(det, abs=1e-12)
    assert rm.normal_form_rhs(rm.StrongModelState(a, z), p, phi) == pytest.approx(det, abs=1e-12)
    assert rm.weak_rhs(rm.WeakModelState(a), p, phi, [phi, -phi]) == pytest.approx(det, abs=1e-12)


def test_normal_form_noise_coefficient_values():
    p = rm.ModelParams(-0.03, 2.0)
    c = rm.normal_form_noise_coefficient(0.5, 0.2, 0.1, p)
    expected = 2 * 0.5 * (1 / 6 + 0.03 / 18) - 4 * 0.5 * (0.2 - 0.3) / 44
    assert c == pytest.approx(expected, abs=1e-15)


def test_weak_noise_coefficients():
    p = rm.ModelParams(0.0, 2.0)
    np.testing.assert_allclose(rm.weak_noise_coefficients(p), [1 / 3, 4 * rm.PSI_COMBINED])
    comp = rm.weak_noise_coefficients(p, "component", rm.PSI2_SUBSTITUTED)
    np.testing.assert_allclose(comp, [1 / 3, 4 * rm.PSI1_COMPONENT, 12 / 1936])
    with pytest.raises(InvalidParameterError):
        rm.weak_noise_coefficients(p, "other")


def test_state_validation_and_names():
    s = rm.StrongModelState(0.3, np.arange(7.0))
    assert s.z_A == 0.0 and s.z_G == 6.0
    with pytest.raises(InvalidParameterError):
        rm.StrongModelState(0.3, np.zeros(4))
    with pytest.raises(InvalidParameterError):
        rm.ModelParams(0.0, -1.0)


@pytest.mark.parametrize("variant", ["naive", "normal_form"])
def test_step_matches_kernel(variant, backend):
    p = rm.ModelParams(-0.03, 0.7)
    dt = 0.01
    dW = ensemble_increments(8, range(3), 500, dt)[:, :, 0]
    ens = rm.simulate_strong(p, variant, 0.4, dW, dt, backend=backend)
    for m in range(3):
        s = rm.StrongModelState(0.4)
        for w in dW[m]:
            s = rm.step_strong_model(s, p, variant, w, dt)
        assert ens.a[m, -1] == pytest.approx(s.a, rel=1e-11)
        np.testing.assert_allclose(ens.z[m, -1], s.z, rtol=1e-10, atol=1e-14)


def test_bank_matches_filter_chains():
    # z_A..z_G are E2, E2E2, E3E2, E2E3E2, E4E2, E4E3E2 and E3E2E2 of the driver.
    dt = 0.01
    dW = ensemble_increments(1, [0], 800, dt)[0, :, 0]
    ens = rm.simulate_strong(rm.ModelParams(0.0, 0.3), "naive", 0.1, dW[None], dt)
    chains = [FilterChain.of(*m) for m in
              [(2,), (2, 2), (2, 3), (2, 3, 2), (2, 4), (2, 3, 4), (2, 2, 3)]]
    for w in dW:
        chains = [chain_step(c, w, dt) for c in chains]
    np.testing.assert_allclose(ens.z[0, -1], [c.output for c in chains], rtol=1e-10, atol=1e-15)


def test_strong_variants_agree_without_noise():
    dW = ensemble_increments(1, [0], 2000, 0.1)[:, :, 0]
    p = rm.ModelParams(-0.03, 0.0)
    nv = rm.simulate_strong(p, "naive", 0.2, dW, 0.1)
    nf = rm.simulate_strong(p, "normal_form", 0.2, dW, 0.1)
    np.testing.assert_allclose(nv.a, nf.a, rtol=1e-14)
    assert nv.a[0, -1] == pytest.approx(0.6, rel=1e-3)


def test_weak_step_matches_kernel(backend):
    p = rm.ModelParams(-0.03, 2.0)
    dt = 0.1
    for form, k in (("combined", 1), ("component", 2)):
        dphi = ensemble_increments(3, range(2), 300, dt, 1, stream=0)[:, :, 0]
        dpsi = ensemble_increments(3, range(2), 300, dt, k, stream=1)
        ens = rm.simulate_weak(p, 0.5, dphi, dpsi, dt, psi_form=form, backend=backend)
        for m in range(2):
            s = rm.WeakModelState(0.5)
            for i in range(300):
                s = rm.step_weak_model(s, p, dphi[m, i], dpsi[m, i], dt)
            assert ens.a[m, -1] == pytest.approx(s.a, rel=1e-11)


def test_weak_ensemble_mismatched_psi_rejected():
    p = rm.ModelParams(0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        rm.simulate_weak(p, 0.5, np.zeros((1, 5)), np.zeros((1, 5, 1)), 0.1, psi_form="component")


def test_weak_model_restabilises():
    # Same gamma, two noise levels: sigma = 0.5 keeps the finite amplitude,
    # sigma = 2 pushes it back to zero.
    low = rm.run_weak_ensemble(rm.ModelParams(-0.03, 0.5), 0.5, 0, 200, 300.0, 1.0)
    high = rm.run_weak_ensemble(rm.ModelParams(-0.03, 2.0), 0.5, 0, 200, 300.0, 1.0)
    assert 0.3 < np.median(np.abs(low.a[:, -1])) < 0.9
    assert np.median(np.abs(high.a[:, -1])) < 0.05
    assert low.n_blowups == 0 and high.n_blowups == 0


def test_reconstruct_field_without_filters():
    g = Grid(31)
    p = rm.ModelParams(-0.03, 1.0)
    u = rm.reconstruct_field(0.4, rm.StrongModelState(0.4), p, g)
    np.testing.assert_allclose(u.u, 0.4 * np.sin(g.x) - 0.16 / 6 * np.sin(2 * g.x), atol=1e-15)
    assert project_amplitude(u, g) == pytest.approx(0.4, abs=1e-14)


def test_reconstruct_field_filter_terms():
    g = Grid(31)
    p = rm.ModelParams(0.1, 2.0)
    z = np.array([1.0, 0.5, 0.2, 0.0, 0.3, 0.1, 0.4])
    u = rm.reconstruct_field(0.0, z, p, g)
    np.testing.assert_allclose(u.u, 2.0 * (1.0 - 0.05) * np.sin(2 * g.x), atol=1e-14)
    u = rm.reconstruct_field(1.0, z, p, g)
    sin3 = (2 / np.pi) * g.dx * (u.u @ np.sin(3 * g.x))
    assert sin3 == pytest.approx(-1.5 * 2.0 * (0.2 - 0.1 * 0.4), abs=1e-13)


def test_sinx_amplitude_map():
    p = rm.ModelParams(0.0, 1.0)
    assert rm.normal_form_sinx_amplitude(0.5, np.zeros(7), p) == 0.5
    z = np.zeros(7)
    z[0] = 0.6
    assert rm.normal_form_sinx_amplitude(0.5, z, p) == pytest.approx(0.5 * (1 - 0.1))


def test_all_blowups_reported():
    dW = np.zeros((2, 50))
    ens = rm.simulate_strong(rm.ModelParams(-5.0, 0.0), "naive", 1e4, dW, 1.0)
    assert ens.n_blowups == 2
    with pytest.raises(NumericalBlowupError):
        rm.check_trajectory(ens)
