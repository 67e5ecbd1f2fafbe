import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cimsde import sde
from cimsde.errors import InputError, IntegrationDivergedError
from cimsde.params import PhysicalParams, PumpSchedule, derive_normalized


def test_g_values():
    assert derive_normalized(PhysicalParams(kappa=0.1)).g == pytest.approx(0.1 / math.sqrt(20))
    assert derive_normalized(PhysicalParams(kappa=0.01)).g == pytest.approx(0.002236, rel=1e-3)
    assert PhysicalParams(gamma_s=1, gamma_p=1, kappa=math.sqrt(2)).g == pytest.approx(1.0)
    assert derive_normalized(PhysicalParams(), g=0.02).g == 0.02


def test_small_pump_ratio_warns():
    with pytest.warns(UserWarning):
        derive_normalized(PhysicalParams(gamma_p=0.5))


def test_invalid_rates():
    with pytest.raises(InputError):
        PhysicalParams(gamma_p=0)
    with pytest.raises(InputError):
        PhysicalParams(xi=-0.1)
    with pytest.raises(InputError):
        PumpSchedule(T=0)


def test_pump_rate():
    s = PumpSchedule(0.0, 1.5, 200.0)
    assert s.rate(100.0) == 0.75
    assert s.rate(0.0) == 0.0 and s.rate(200.0) == 1.5 and s.rate(400.0) == 1.5


def test_drift_examples():
    z = np.zeros(1, complex)
    assert np.all(np.concatenate(sde.drift_adiabatic(z, z, 0.7, 0.1, 0.0)) == 0)
    r = np.full(1, math.sqrt(1.0) + 0j)
    de, dm = sde.drift_adiabatic(r, r, 2.0, 0.0, 0.0)
    assert abs(de[0]) < 1e-15 and abs(dm[0]) < 1e-15
    de, dm = sde.drift_adiabatic(np.array([1 + 0j]), np.array([0j]), 0.0, 0.1, 0.0)
    assert de[0] == pytest.approx(-1.1) and dm[0] == 0


def test_diffusion_examples():
    g = 0.02
    be, _ = sde.diffusion_adiabatic(np.array([0j]), np.array([0j]), 1.0, g)
    assert be[0] == pytest.approx(g)
    be, _ = sde.diffusion_adiabatic(np.array([0j]), np.array([0j]), 0.0, g)
    assert be[0] == 0
    be, _ = sde.diffusion_adiabatic(np.array([1 + 0j]), np.array([0j]), 0.5, g)
    assert be[0].real == 0 and be[0].imag == pytest.approx(g * math.sqrt(0.5))


def test_step_examples():
    z = np.zeros(3, complex)
    e, m = sde.step_adiabatic((z, z), 0.0, 0.0, 0.01, None, 0.02, 0.0)
    assert np.all(e == 0) and np.all(m == 0)
    r = np.full(3, 1.0 + 0j)
    e, m = sde.step_adiabatic((r, r), 2.0, 0.0, 0.01, None, 0.02, 0.0)
    assert np.all(e == r) and np.all(m == r)
    e, m = sde.step_adiabatic((z, z), 0.0, 0.3, 0.01, None, 0.02, 0.0)
    assert np.allclose(e, 0.003) and np.allclose(m, 0.003)


def test_step_divergence_guard():
    r = np.full(2, 50.0 + 0j)
    with pytest.raises(IntegrationDivergedError):
        sde.step_adiabatic((r, r), 1.5, 0.0, 0.01, None, 0.02, 0.0, bound=10 * math.sqrt(1.5))
    bad = np.array([np.nan + 0j, 0j])
    with pytest.raises(IntegrationDivergedError):
        sde.step_adiabatic((bad, bad), 1.0, 0.0, 0.01, None, 0.02, 0.0)


@settings(max_examples=60, deadline=None)
@given(st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3),
       st.floats(0, 2.5), st.floats(0, 1), st.complex_numbers(max_magnitude=2))
def test_drift_equivariance(eta, mu, p, xi, f):
    a = sde.drift_adiabatic(np.array([eta]), np.array([mu]), p, xi, f)
    b = sde.drift_adiabatic(np.array([-eta]), np.array([-mu]), p, xi, -f)
    assert np.allclose(a[0], -b[0]) and np.allclose(a[1], -b[1])


def test_real_paths_stay_real():
    e, m = sde.integrate_adiabatic_noiseless(0.3, 0.2, 1.5, 0.01, 2000)
    assert np.all(e.imag == 0) and np.all(m.imag == 0)


def test_full_pump_zero_and_relaxation():
    ph = PhysicalParams()
    out = sde.integrate_full_pump_noiseless(0, 0, 0, 0, 0.0, ph, 0.001, 100)
    assert np.all(out == 0)
    eps_p = 0.5 * ph.eps_th
    out = sde.integrate_full_pump_noiseless(0, 0, 0, 0, eps_p, ph, 0.001, 5000)
    assert out[-1, 2].real == pytest.approx(eps_p / ph.gamma_p, rel=1e-6)


def test_full_pump_step_matches_integrator():
    ph = PhysicalParams()
    sig = (np.array([3.0 + 0j]), np.array([2.0 + 0j]))
    pump = (np.array([1.0 + 0j]), np.array([1.0 + 0j]))
    s, p = sde.step_full_pump(sig, pump, 60.0, 0.0, ph, 1e-3)
    ref = sde.integrate_full_pump_noiseless(3.0, 2.0, 1.0, 1.0, 60.0, ph, 1e-3, 1)
    assert np.allclose([s[0][0], s[1][0], p[0][0], p[1][0]], ref[1])


@pytest.mark.parametrize("ratio,tol", [(100, 0.01), (10, 0.1)])
def test_adiabatic_elimination(ratio, tol):
    from cimsde.validate import adiabatic_agreement
    assert adiabatic_agreement(PhysicalParams(gamma_p=ratio)) < tol


def test_weak_convergence_at_fixed_point():
    from cimsde.validate import check_dtau
    assert check_dtau(0.01).passed
    assert not check_dtau(0.5).passed
