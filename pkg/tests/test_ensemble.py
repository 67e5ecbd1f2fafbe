import math

import numpy as np
import pytest
from scipy.special import ndtr

from cimsde import ensemble as E
from cimsde import sde
from cimsde.errors import InputError, IntegrationDivergedError
from cimsde.ising import IsingProblem, ring_antiferromagnet
from cimsde.measurement import MeasurementRecord
from cimsde.params import NormalizedParams, PhysicalParams, PumpSchedule, derive_normalized

G = 0.02


def ens_from_x(x, g=G, logw=None):
    """One DOPO whose particles have real in-phase values ``x`` (quadrature units)."""
    x = np.atleast_2d(np.asarray(x, float))
    amp = x * g / 2
    lw = np.full(x.shape, -math.log(x.shape[1])) if logw is None else np.atleast_2d(logw)
    return E.Ensemble(amp + 0j, amp + 0j, lw, g)


def params(p_end=1.5, T=10.0, xi=0.1, zeta=0.3, p_start=0.0, dtau=0.01, g=None):
    return derive_normalized(PhysicalParams(xi=xi, zeta=zeta), T=T, dtau=dtau, p_start=p_start,
                             p_end=p_end, g=g)


def test_reweight_examples():
    ens = ens_from_x([[0.3, 0.3, 0.3]])
    rec = MeasurementRecord(np.zeros(1), np.array([0.5]))
    assert np.allclose(E.reweight(ens, rec, 0.1, 0.01).weights(), 1 / 3)
    ens = ens_from_x([[1.0, 0.0, -1.0]])
    zero = MeasurementRecord(np.zeros(1), np.zeros(1))
    assert np.allclose(E.reweight(ens, zero, 0.1, 1e-14).weights(), 1 / 3)
    # At finite dtau the Ito term alone contracts the spread.
    w = E.reweight(ens, zero, 0.1, 0.01).weights()[0]
    raw = np.exp(-0.5 * 0.1 * 0.01 * np.array([1.0, 0.0, 1.0]))
    assert w == pytest.approx(raw / raw.sum(), rel=1e-12)
    # sqrt(xi') dW = 0.1; a vanishing step removes the Ito correction.
    w = E.reweight(ens, MeasurementRecord(np.zeros(1), np.array([0.1])), 1.0, 1e-14).weights()[0]
    assert w == pytest.approx([0.3672, 0.3322, 0.3006], abs=1e-4)


def test_reweight_shape_error():
    with pytest.raises(InputError):
        E.reweight(ens_from_x([[0.0, 1.0]]), MeasurementRecord(np.zeros(2), np.zeros(2)), 0.1, 0.01)


def test_resample_examples():
    rng = np.random.default_rng(0)
    ens = ens_from_x([np.linspace(-1, 1, 8)])
    assert E.effective_sample_size(ens)[0] == pytest.approx(8)
    out = E.resample(ens, rng=rng)
    assert np.array_equal(out.eta, ens.eta)
    lw = np.full(8, -60.0)
    lw[3] = 0.0
    ens = ens_from_x([np.linspace(-1, 1, 8)], logw=lw)
    out = E.resample(ens, rng=rng)
    assert np.all(out.eta == ens.eta[0, 3])
    assert np.allclose(out.weights(), 1 / 8)


def test_observable_examples():
    half = E.Ensemble(np.full((1, 4), 0.5 + 0j), np.full((1, 4), 0.5 + 0j), np.zeros((1, 4)), G)
    assert E.mean_x(half, 0) == pytest.approx(50)
    vac = E.Ensemble.vacuum(2, 16, G)
    assert E.mean_x(vac, 1) == 0 and E.photon_number(vac, 0) == 0
    assert E.variance_x(vac, 0) == pytest.approx(1) and E.skewness_x(vac, 0) == 0
    assert E.prob_x_positive(vac, 0) == 0.5
    coh = E.Ensemble(np.full((1, 3), 0.2 + 0j), np.full((1, 3), 0.2 + 0j), np.zeros((1, 3)), G)
    assert E.photon_number(coh, 0) == pytest.approx(100)
    two = ens_from_x([[1.0, -1.0]])
    assert E.variance_x(two, 0) == pytest.approx(2)
    sym = ens_from_x([[-2.0, -0.5, 0.5, 2.0]])
    assert abs(E.skewness_x(sym, 0)) < 1e-12
    assert E.prob_x_positive(ens_from_x([[50.0]]), 0) == pytest.approx(1, abs=1e-16)
    assert E.prob_x_positive(ens_from_x([[1.0]]), 0) == pytest.approx(ndtr(1.0), abs=1e-12)


def test_prob_complement():
    rng = np.random.default_rng(1)
    ens = ens_from_x(rng.normal(scale=3, size=(4, 50)), logw=rng.normal(size=(4, 50)))
    o = ens.observables()
    assert np.allclose(o["prob_x_positive"] + o["prob_x_negative"], 1, atol=1e-12, rtol=0)


def test_permutation_invariance():
    rng = np.random.default_rng(2)
    n, m = 3, 40
    ens = E.Ensemble(rng.normal(size=(n, m)) * G + 1j * G * rng.normal(size=(n, m)),
                     rng.normal(size=(n, m)) * G, rng.normal(size=(n, m)), G)
    perm = rng.permutation(m)
    shuf = E.Ensemble(ens.eta[:, perm], ens.mu[:, perm], ens.logw[:, perm], G)
    a, b = ens.observables(), shuf.observables()
    for k in a:
        assert np.allclose(a[k], b[k], rtol=1e-12, atol=1e-12)


def test_weights_normalized_along_run():
    pr = ring_antiferromagnet(3)
    checks = []

    def cb(step, ens):
        checks.append(abs(np.exp(ens.logw).sum(axis=1) - 1).max())

    E.run_trial(pr, params(T=5.0), m=64, seed=3, callback=cb)
    assert checks and max(checks) < 1e-12


def test_single_dopo_fixed_point():
    """Uncoupled DOPO at p=2 settles at <X> = (eta+mu)/g = 2 sqrt(p-1)/g."""
    p, g = 2.0, 0.02
    par = NormalizedParams(g=g, xi_norm=0.0, zeta_norm=0.0, dtau=0.01, ramp=PumpSchedule.constant(p, 15.0))
    init = E.Ensemble.coherent(1, 500, g, 0.1 / g)
    r = E.run_trial(IsingProblem(1, ()), par, m=500, seed=0, initial=init)
    assert abs(r.mean_x[0]) == pytest.approx(2 * math.sqrt(p - 1) / g, rel=0.05)
    assert r.success


def test_below_threshold_means_small():
    pr = ring_antiferromagnet(2)
    par = params(p_end=0.5, T=20.0, xi=0.0, zeta=0.0)
    r = E.run_trial(pr, par, m=400, seed=1)
    assert np.all(np.abs(r.mean_x) < 1.0)


def test_imaginary_mean_consistent_with_zero():
    pr = ring_antiferromagnet(2)
    r = E.run_trial(pr, params(T=20.0), m=2000, seed=4)
    ens = r.final
    w = ens.weights()
    im = ((ens.eta + ens.mu).imag / ens.g)
    mean = (w * im).sum(axis=1)
    se = np.sqrt((w ** 2 * (im - mean[:, None]) ** 2).sum(axis=1))
    assert np.all(np.abs(mean) < 3 * se + 1e-12)


def test_pipeline_matches_plain_sde():
    """With xi=zeta=0 the ensemble is a plain Monte Carlo of the single-DOPO SDE."""
    g, p, m, steps, dtau = 0.05, 1.2, 4000, 300, 0.01
    par = NormalizedParams(g=g, xi_norm=0.0, zeta_norm=0.0, dtau=dtau, ramp=PumpSchedule.constant(p, steps * dtau))
    r = E.run_trial(IsingProblem(1, ()), par, m=m, seed=5)
    a = (r.final.eta * r.final.mu).real[0] / g ** 2
    rng = np.random.default_rng(6)
    eta = np.zeros(m, complex)
    mu = np.zeros(m, complex)
    for k in range(steps):
        noise = tuple(rng.standard_normal(m) * math.sqrt(dtau) for _ in range(2))
        eta, mu = sde.step_adiabatic((eta, mu), p, 0.0, dtau, noise, g, 0.0)
    b = (eta * mu).real / g ** 2
    se = math.sqrt(a.var() / m + b.var() / m)
    assert abs(a.mean() - b.mean()) < 4 * se


def test_divergence_handling():
    pr = IsingProblem(1, ())
    par = params(p_end=1.0, T=1.0)
    far = E.Ensemble.coherent(1, 10, par.g, 100.0 / par.g)
    with pytest.raises(IntegrationDivergedError):
        E.run_trial(pr, par, m=10, initial=far)
    r = E.run_trial(pr, par, m=10, initial=far, raise_errors=False)
    assert not r.valid and not r.success and r.error


def test_determinism_and_block_invariance(monkeypatch):
    pr = ring_antiferromagnet(3)
    par = params(T=3.0)
    a = E.run_trial(pr, par, m=32, seed=11, traces=True)
    b = E.run_trial(pr, par, m=32, seed=11, traces=True)
    assert np.array_equal(a.trace.data, b.trace.data)
    monkeypatch.setattr(E, "_BLOCK_DRAWS", 2 * 3 * 32 * 7)
    c = E.run_trial(pr, par, m=32, seed=11, traces=True)
    assert np.array_equal(a.trace.data, c.trace.data)
    assert np.array_equal(a.final.eta, c.final.eta)


def test_tie_is_failure():
    pr = ring_antiferromagnet(2)
    spins, ok, tie, e = E.score(pr, np.array([0.0, 1.0]))
    assert tie and not ok and math.isnan(e)
    spins, ok, tie, e = E.score(pr, np.array([-3.0, 1.0]))
    assert ok and not tie and e == -1


def test_trace_columns_and_csv(tmp_path):
    from cimsde.trace import CSV_COLUMNS, read_trace_csv
    r = E.run_trial(ring_antiferromagnet(2), params(T=2.0), m=50, seed=0, traces=True, trace_every=5)
    assert len(r.trace) == 40
    path = tmp_path / "t.csv"
    r.trace.write_csv(path)
    back = read_trace_csv(path)
    assert tuple(back) == CSV_COLUMNS
    assert np.array_equal(back["mean_x"], r.trace["mean_x"].reshape(-1))
    assert np.all(back["photon_number"] > -1.0)
