import math

import numpy as np
import pytest
from scipy.optimize import brentq

from cimsde.errors import InputError
from cimsde.gaussian import (GaussianState, gaussian_feedback, gaussian_observables, gaussian_photon_number,
                             gaussian_prob_x_positive, gaussian_rates, gaussian_record, gaussian_step,
                             run_gaussian_trial)
from cimsde.ising import IsingProblem, ring_antiferromagnet
from cimsde.params import PhysicalParams, PumpSchedule
from cimsde.validate import gaussian_variance

PHYS = PhysicalParams()


def test_vacuum_rates():
    d_mu, d_var, noise = gaussian_rates([0.0], [0.25], 0.0, 0.0, PHYS.replace(xi=0.7))
    assert d_mu[0] == 0 and noise == 0
    _, d_var, _ = gaussian_rates([0.0], [0.25], 0.0, 0.0, PHYS.replace(xi=0.0))
    assert d_var[0] == pytest.approx(-PHYS.kappa ** 2 / (4 * PHYS.gamma_p), rel=1e-12)


def test_vacuum_step_is_stationary_in_mean():
    s = gaussian_step(GaussianState.vacuum(3), 0.0, 0.0, PHYS, 0.01, dW_meas=np.ones(3))
    assert np.all(s.mu == 0)


def _var_root(p, phys):
    """Stationary variance of the full (kappa^2-corrected) moment equation at mu=0."""
    eps = p * phys.eps_th
    return brentq(lambda v: gaussian_rates([0.0], [v], eps, 0.0, phys)[1][0], 0.05, 50.0)


@pytest.mark.parametrize("p", [0.0, 0.25, 0.5, 0.8])
def test_variance_fixed_point(p):
    phys = PHYS.replace(xi=0.0, zeta=0.0)
    closed = (1 + p) / (4 * (1 - p))
    v = gaussian_variance(p, phys, T=60.0)
    assert v == pytest.approx(_var_root(p, phys), rel=1e-4)
    # Well below threshold the kappa^2 correction to the closed form is small.
    if p <= 0.5:
        assert abs(v - closed) / closed < 10 * phys.kappa ** 2 / phys.gamma_p
    if p == 0.5:
        assert abs(v - 0.75) / 0.75 < 0.05


def test_feedback_examples():
    pr = IsingProblem(2, ((0, 1, -1.0),))
    a = 1.3
    st = GaussianState([a, -a], [0.25, 0.25])
    rec = gaussian_record(st, 0.0, 0.01)
    assert gaussian_feedback(st, rec, pr, 0.3) == pytest.approx([0.3 * a, -0.3 * a])
    assert np.all(gaussian_feedback(st, rec, pr, 0.0) == 0)
    with pytest.raises(InputError):
        gaussian_feedback(GaussianState.vacuum(3), np.zeros(3), pr, 0.3)


def test_observables_examples():
    m, v = gaussian_observables(GaussianState.vacuum(1))
    assert m[0] == 0 and v[0] == 1
    m, v = gaussian_observables(GaussianState([25.0], [0.75]))
    assert m[0] == 50 and v[0] == 3
    assert gaussian_prob_x_positive(GaussianState.vacuum(2))[0] == 0.5
    assert gaussian_photon_number(GaussianState.vacuum(1))[0] == pytest.approx(0, abs=1e-15)


def test_state_validation():
    with pytest.raises(InputError):
        GaussianState([0.0], [0.0])
    with pytest.raises(InputError):
        GaussianState([0.0, 1.0], [0.25])


def test_noiseless_runs_identical():
    pr = ring_antiferromagnet(4)
    phys = PHYS.replace(xi=0.0)
    init = GaussianState([0.01, -0.02, 0.0, 0.005], [0.25] * 4)
    a = run_gaussian_trial(pr, phys, PumpSchedule(0, 1.2, 30), seed=1, initial=init, traces=True)
    b = run_gaussian_trial(pr, phys, PumpSchedule(0, 1.2, 30), seed=99, initial=init, traces=True)
    assert np.array_equal(a.trace.data, b.trace.data)


def test_mirror_symmetry():
    pr = ring_antiferromagnet(4)
    phys = PHYS.replace(xi=0.0)
    mu0 = np.array([0.01, -0.02, 0.0, 0.005])
    a = run_gaussian_trial(pr, phys, PumpSchedule(0, 1.2, 30), initial=GaussianState(mu0, [0.25] * 4))
    b = run_gaussian_trial(pr, phys, PumpSchedule(0, 1.2, 30), initial=GaussianState(-mu0, [0.25] * 4))
    assert np.allclose(a.final.mu, -b.final.mu, rtol=0, atol=1e-12)
    assert np.array_equal(a.final.var, b.final.var)


def test_measurement_never_increases_variance():
    v = np.linspace(0.01, 5, 200)
    mu = np.linspace(-3, 3, 200)
    _, with_xi, _ = gaussian_rates(mu, v, 0.3 * PHYS.eps_th, 0.0, PHYS.replace(xi=0.5))
    _, without, _ = gaussian_rates(mu, v, 0.3 * PHYS.eps_th, 0.0, PHYS.replace(xi=0.0))
    diff = with_xi - without
    assert np.all(diff <= 0)
    assert np.all(diff[np.abs(v - 0.25) > 1e-9] < 0)


def test_variance_floor_counted():
    phys = PHYS.replace(xi=200.0)
    st = GaussianState([0.0], [3.0])
    out = gaussian_step(st, 0.0, 0.0, phys, 0.01)
    assert out.var[0] == 1e-6 and out.floor_hits == 1


def test_bifurcation_near_effective_threshold():
    from cimsde.experiment import bifurcation_point
    pr = ring_antiferromagnet(2)
    pts = [bifurcation_point(run_gaussian_trial(pr, PHYS, PumpSchedule(0, 1.5, 200), seed=s,
                                                traces=True).trace) for s in range(9)]
    assert abs(np.median(pts) - 0.7) < 0.1
