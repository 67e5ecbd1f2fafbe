"""Invariant suite: fixed points, estimator bias, step-size convergence,
pump elimination and the marginal-probability kernel."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from . import kernels, sde
from ._pykernels import systematic_indices
from .ensemble import Ensemble, reweight_logw, run_trial
from .gaussian import GaussianState, run_gaussian_trial
from .ising import IsingProblem
from .params import NormalizedParams, PhysicalParams, PumpSchedule, derive_normalized


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""
    warnings: list[str] = field(default_factory=list)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        s = f"[{tag}] {self.name}: measured={self.measured:.6g} tol={self.tolerance:.3g}"
        if self.detail:
            s += f"  ({self.detail})"
        for w in self.warnings:
            s += f"\n       warning: {w}"
        return s


def _single(n=1) -> IsingProblem:
    return IsingProblem(n, ())


# -- deterministic checks --------------------------------------------------
def check_fixed_points(p: float = 2.0) -> Check:
    """Noiseless drift vanishes at the origin and at ``eta = mu = sqrt(p-1)``."""
    r = math.sqrt(p - 1.0)
    worst = 0.0
    for e in (0.0, r, -r):
        de, dm = sde.drift_adiabatic(np.array([e + 0j]), np.array([e + 0j]), p, 0.0, 0.0)
        worst = max(worst, float(np.abs(de).max()), float(np.abs(dm).max()))
    return Check("fixed_points", worst < 1e-12, worst, 1e-12, f"p={p}, amplitudes 0, +-{r:.4g}")


def check_prob_kernel(g: float = 0.02) -> Check:
    """P(x>0) of vacuum is 1/2; one particle at X=1 gives Phi(1); P(+)+P(-)=1."""
    vac = Ensemble.vacuum(1, 8, g).observables()
    one = Ensemble.coherent(1, 1, g, 0.5).observables()
    rng = np.random.default_rng(7)
    m = 64
    ens = Ensemble(g * rng.normal(size=(3, m)) * 3 + 0j, g * rng.normal(size=(3, m)) + 0j,
                   rng.normal(size=(3, m)), g)
    o = ens.observables()
    errs = [
        abs(vac["prob_x_positive"][0] - 0.5),
        abs(one["prob_x_positive"][0] - float(ndtr(1.0))),
        float(np.abs(o["prob_x_positive"] + o["prob_x_negative"] - 1.0).max()),
    ]
    return Check("prob_kernel", max(errs) < 1e-6 and errs[2] < 1e-12, max(errs), 1e-6,
                 f"vacuum={vac['prob_x_positive'][0]:.12g}, X=1 -> {one['prob_x_positive'][0]:.8f}")


def adiabatic_agreement(phys: PhysicalParams, p: float = 1.5, eta0: float = 0.1, T: float = 12.0,
                        dt: float | None = None) -> float:
    """Max relative deviation of the noiseless full-pump signal from the
    adiabatic one, after ``10/gamma_p`` of pump relaxation.

    The pump starts at its slaved value so only the fast transient and the
    finite ``gamma_s/gamma_p`` corrections remain.
    """
    g = phys.g
    dt = dt if dt is not None else min(1e-3, 0.01 / phys.gamma_p) / phys.gamma_s
    n = int(round(T / (phys.gamma_s * dt)))
    a0 = eta0 / g
    eps_p = p * phys.eps_th
    ap0 = (eps_p - 0.5 * phys.kappa * a0 * a0) / phys.gamma_p
    full = sde.integrate_full_pump_noiseless(a0, a0, ap0, ap0, eps_p, phys, dt, n)
    ad_e, _ = sde.integrate_adiabatic_noiseless(eta0, eta0, p, phys.gamma_s * dt, n,
                                                xi_norm=phys.xi / phys.gamma_s)
    t = np.arange(n + 1) * dt
    sel = t >= 10.0 / phys.gamma_p
    ref = np.abs(ad_e[sel])
    return float(np.max(np.abs(g * full[sel, 0] - ad_e[sel]) / ref))


def check_adiabatic(phys: PhysicalParams) -> Check:
    ratio = phys.gamma_p / phys.gamma_s
    err = adiabatic_agreement(phys)
    # The slaving error is first order in gamma_s/gamma_p.
    tol = max(0.01, 1.0 / ratio)
    warn = []
    if ratio < 10:
        warn.append(f"gamma_p/gamma_s = {ratio:.3g}: pump elimination is weakly justified, "
                    f"relative error {err:.2%}")
    return Check("adiabatic_agreement", err <= tol, err, tol, f"gamma_p/gamma_s={ratio:.3g}", warn)


# -- stochastic checks -----------------------------------------------------
def gaussian_variance(p: float, phys: PhysicalParams | None = None, T: float = 40.0,
                      dtau: float = 0.01, seed: int = 0) -> float:
    """In-phase variance ``sigma^2`` reached at constant pump without measurement."""
    phys = (phys or PhysicalParams()).replace(xi=0.0, zeta=0.0)
    r = run_gaussian_trial(_single(), phys, PumpSchedule.constant(p, T), dtau=dtau, seed=seed)
    return float(r.final.var[0])


def check_gaussian_variance(phys: PhysicalParams, p: float = 0.5) -> Check:
    v = gaussian_variance(p, phys)
    want = (1 + p) / (4 * (1 - p))
    rel = abs(v - want) / want
    return Check("gaussian_variance", rel < 0.05, rel, 0.05, f"sigma^2={v:.5g} vs {want:.5g} at p={p}")


def resampling_bias(reps: int = 10_000, m: int = 16, steps: int = 32, seed: int = 0,
                    dtau: float = 0.1, xi_norm: float = 1.0, p: float = 1.2, g: float = 0.05):
    """Weighted vs systematically-resampled ``<X>`` on the same weighted ensembles.

    Each repetition evolves ``m`` particles for ``steps`` reweighted steps
    (no resampling along the way), then compares the weighted mean with the
    plain mean after one systematic resampling.  Returns ``(mean diff, SE)``.
    """
    ss = np.random.SeedSequence(seed)
    rng_z, rng_u = (np.random.default_rng(s) for s in ss.spawn(2))
    eta = np.zeros((reps, m), complex)
    mu = np.zeros((reps, m), complex)
    logw = np.full((reps, m), -math.log(m))
    K = kernels.get(None)
    # Rows are uncoupled; chunking keeps the dense zero coupling matrix small.
    for lo in range(0, reps, 1024):
        sl = slice(lo, min(reps, lo + 1024))
        _evolve(K, eta[sl], mu[sl], logw[sl], rng_z, steps, dtau, xi_norm, p, g)
    x = (eta + mu).real / g
    w = np.exp(logw)
    w /= w.sum(axis=1, keepdims=True)
    weighted = (w * x).sum(axis=1)
    u = rng_u.random(reps)
    resampled = np.array([x[r, systematic_indices(w[r], u[r])].mean() for r in range(reps)])
    d = resampled - weighted
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(reps))


def _evolve(K, eta, mu, logw, rng, steps, dtau, xi_norm, p, g):
    n, m = eta.shape
    e, u, w = eta.copy(), mu.copy(), np.exp(logw)
    J = np.zeros((n, n))
    pump = np.full(steps, p)
    z_eta = rng.standard_normal((steps, n, m))
    z_mu = rng.standard_normal((steps, n, m))
    z_meas = rng.standard_normal((steps, n))
    u_res = np.zeros((steps, n))
    done, _, status = K.exact_block(e, u, w, J, pump, z_eta, z_mu, z_meas, u_res, g, xi_norm, 0.0,
                                    dtau, 0.0, math.inf, None)
    if status != kernels.OK:
        raise RuntimeError(f"evolution failed at step {done}")
    eta[:], mu[:] = e, u
    with np.errstate(divide="ignore"):
        logw[:] = np.log(w)


def check_resampling(reps: int = 10_000) -> Check:
    diff, se = resampling_bias(reps)
    z = abs(diff) / se
    return Check("resampling_unbiased", z < 3.0, z, 3.0, f"mean diff {diff:.3g} +- {se:.2g} (in SE units)")


def martingale_weights(samples: int = 10_000, m: int = 32, xi_norm: float = 0.1, dtau: float = 0.01,
                       seed: int = 0, spread: float = 3.0):
    """Unnormalised total weight after one reweighting step.

    Particles with fixed in-phase values and random normalised weights are
    multiplied by the exponential innovation factor for ``samples``
    independent record increments.  Returns ``(mean, SE)``; the mean should be 1.
    """
    rng = np.random.default_rng(seed)
    x = rng.normal(scale=spread, size=m)
    w = rng.random(m)
    w /= w.sum()
    xbar = w @ x
    dev = x - xbar
    dW = rng.normal(scale=math.sqrt(dtau), size=(samples, 1))
    fac = np.exp(math.sqrt(xi_norm) * dev * dW - 0.5 * xi_norm * dev * dev * dtau)
    tot = fac @ w
    # Consistency with the library update: normalised weights must match.
    lw = reweight_logw(np.log(w), x, dW[0], xi_norm, dtau)
    assert np.allclose(np.exp(lw), w * fac[0] / tot[0])
    return float(tot.mean()), float(tot.std(ddof=1) / math.sqrt(samples))


def check_martingale(samples: int = 10_000) -> Check:
    mean, se = martingale_weights(samples)
    z = abs(mean - 1.0) / se
    return Check("reweight_martingale", z < 3.0, z, 3.0, f"E[total weight]={mean:.6f} +- {se:.2g}")


def dtau_shift(dtau: float, p: float = 2.0, m: int = 2000, T: float = 10.0, g: float = 0.02,
               seed: int = 0) -> tuple[float, float]:
    """Time-averaged ``<X>`` (second half of the run) at step ``dtau`` and
    ``dtau/2``, single DOPO started at its fixed point, no measurement.

    Returns ``(relative shift, relative standard error of the shift)``.
    """
    vals, ses = [], []
    for k, dt in enumerate((dtau, dtau / 2)):
        params = NormalizedParams(g=g, xi_norm=0.0, zeta_norm=0.0, dtau=dt, ramp=PumpSchedule.constant(p, T))
        init = Ensemble.coherent(1, m, g, math.sqrt(p - 1.0) / g)
        r = run_trial(_single(), params, m=m, seed=[seed, k], traces=True, initial=init)
        tr = r.trace
        x = tr["mean_x"][tr.tau >= T / 2, 0]
        vals.append(x.mean())
        # Block means over unit time give an honest error for correlated samples.
        nb = max(2, int(T / 2))
        blocks = np.array([b.mean() for b in np.array_split(x, nb)])
        ses.append(blocks.std(ddof=1) / math.sqrt(nb))
    ref = abs(vals[1])
    return abs(vals[0] - vals[1]) / ref, math.hypot(*ses) / ref


def check_dtau(dtau: float, z_max: float = 3.0) -> Check:
    """Halving the step must not move the stationary ``<X>`` by more than
    ``z_max`` standard errors (Euler keeps the noiseless fixed point exactly,
    so any shift comes from the noise discretisation)."""
    shift, se = dtau_shift(dtau)
    z = shift / se
    return Check("dtau_convergence", z < z_max, z, z_max,
                 f"relative <X> shift {shift:.3g} between dtau={dtau:g} and {dtau / 2:g}, in SE units")


def run_validation(phys: PhysicalParams | None = None, dtau: float = 0.01, quick: bool = False) -> list[Check]:
    """Run every check; ``quick`` lowers the Monte Carlo repetitions."""
    phys = phys or PhysicalParams()
    reps = 2000 if quick else 10_000
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return [
            check_fixed_points(),
            check_prob_kernel(),
            check_gaussian_variance(phys),
            check_martingale(reps),
            check_resampling(reps),
            check_dtau(dtau),
            check_adiabatic(phys),
        ]


def format_report(checks: list[Check]) -> str:
    n_ok = sum(c.passed for c in checks)
    lines = [c.line() for c in checks]
    lines.append(f"{n_ok}/{len(checks)} checks passed")
    return "\n".join(lines)
