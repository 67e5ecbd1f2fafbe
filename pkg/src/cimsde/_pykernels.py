"""Pure numpy implementation of the per-step trial loops.

Mirrors ``_kernels.pyx`` step for step and is used when the compiled
extension is unavailable.  All arrays are modified in place.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

from .sde import diffusion_adiabatic, drift_adiabatic

TRACE_COLUMNS = (
    "mean_x",
    "mean_x_imag",
    "photon_number",
    "variance_x",
    "skewness_x",
    "prob_x_positive",
    "prob_x_negative",
    "measured_x",
    "feedback_f",
)
NCOL = len(TRACE_COLUMNS)

OK, DIVERGED, DEGENERATE = 0, 1, 2

_SQRT1_2 = math.sqrt(0.5)


def _phi(x):
    return 0.5 * erfc(-x * _SQRT1_2)


def ensemble_moments(eta, mu, w, g):
    """Observable columns 0..6 for each row of an ``(N, M)`` ensemble."""
    x = eta + mu
    a, b = x.real, x.imag
    wsum = w.sum(axis=1)
    mx = (w * a).sum(axis=1) / g
    mxi = (w * b).sum(axis=1) / g
    n = (w * (eta * mu).real).sum(axis=1) / (g * g)
    e2 = (w * (a * a - b * b)).sum(axis=1) / (g * g)
    e3 = (w * (a * a * a - 3.0 * a * b * b)).sum(axis=1) / (g * g * g)
    x2 = e2 + 1.0
    x3 = e3 + 3.0 * mx
    var = x2 - mx * mx
    skew = x3 - 3.0 * mx * x2 + 2.0 * mx * mx * mx
    ppos = (w * _phi(a / g)).sum(axis=1) / wsum
    pneg = (w * _phi(-a / g)).sum(axis=1) / wsum
    return np.stack([mx, mxi, n, var, skew, ppos, pneg], axis=1)


def systematic_indices(w, u):
    """Systematic resampling indices for one normalised weight row."""
    m = w.shape[0]
    cum = np.cumsum(w)
    cum[-1] = 1.0
    pos = (u + np.arange(m)) / m
    idx = np.searchsorted(cum, pos, side="left")
    return np.minimum(idx, m - 1)


def exact_block(eta, mu, w, J, pump, z_eta, z_mu, z_meas, u_res, g, xi_norm,
                zeta_norm, dtau, ess_frac, bound, traces=None):
    """Advance the particle ensemble over ``len(pump)`` steps.

    ``w`` holds normalised linear weights and is updated in place, like
    ``eta`` and ``mu``.  Returns ``(steps_done, n_resampled, status)``; on
    a non-OK status ``steps_done`` is the index of the failing step.
    """
    n_dopo, m = eta.shape
    sq = math.sqrt(dtau)
    sxi = math.sqrt(xi_norm)
    n_res = 0
    done, status = pump.shape[0], OK
    for s in range(pump.shape[0]):
        p = pump[s]
        xr = (eta + mu).real
        xbar = (w * xr).sum(axis=1)
        if xi_norm > 0:
            xt = xbar + g * z_meas[s] / (sxi * sq)
        else:
            xt = xbar.copy()
        f = zeta_norm * (J @ (0.5 * xt))
        if traces is not None:
            traces[s, :, :7] = ensemble_moments(eta, mu, w, g)
            traces[s, :, 7] = xt / g
            traces[s, :, 8] = f
        d_eta, d_mu = drift_adiabatic(eta, mu, p, xi_norm, f[:, None])
        b_eta, b_mu = diffusion_adiabatic(eta, mu, p, g)
        eta += d_eta * dtau + b_eta * (z_eta[s] * sq)
        mu += d_mu * dtau + b_mu * (z_mu[s] * sq)
        if xi_norm > 0:
            dev = (xr - xbar[:, None]) / g
            w *= np.exp(sxi * dev * (z_meas[s, :, None] * sq) - 0.5 * xi_norm * dtau * dev * dev)
        a2 = eta.real ** 2 + eta.imag ** 2
        b2 = mu.real ** 2 + mu.imag ** 2
        if not (np.isfinite(a2).all() and np.isfinite(b2).all()) or \
                a2.max() > bound * bound or b2.max() > bound * bound:
            done, status = s, DIVERGED
            break
        tot = w.sum(axis=1)
        if not (np.all(tot > 0) and np.all(np.isfinite(tot))):
            done, status = s, DEGENERATE
            break
        w /= tot[:, None]
        ess = 1.0 / (w * w).sum(axis=1)
        for i in np.flatnonzero(ess < ess_frac * m):
            idx = systematic_indices(w[i], u_res[s, i])
            eta[i] = eta[i, idx]
            mu[i] = mu[i, idx]
            w[i] = 1.0 / m
            n_res += 1
    return done, n_res, status


def gaussian_block(mu, var, J, eps_p, z_meas, gamma_s, gamma_p, kappa, xi, zeta, dt,
                   var_floor, traces=None):
    """Advance the Gaussian-ansatz state over ``len(eps_p)`` steps.

    Returns ``(steps_done, floor_hits, status)``.
    """
    sq = math.sqrt(dt)
    sxi = math.sqrt(xi)
    c = kappa * kappa / (2.0 * gamma_p)
    gnorm = kappa / math.sqrt(2.0 * gamma_p * gamma_s)
    hits = 0
    for s in range(eps_p.shape[0]):
        a = kappa * eps_p[s] / gamma_p
        if xi > 0:
            dw = z_meas[s] * sq
            x_rec = 2.0 * mu + dw / (sxi * dt)
        else:
            dw = np.zeros_like(mu)
            x_rec = 2.0 * mu
        eps_s = zeta * (J @ (0.5 * x_rec))
        if traces is not None:
            sd = np.sqrt(var)
            traces[s, :, 0] = 2.0 * mu
            traces[s, :, 1] = 0.0
            traces[s, :, 2] = mu * mu + var + 1.0 / (16.0 * var) - 0.5
            traces[s, :, 3] = 4.0 * var
            traces[s, :, 4] = 0.0
            traces[s, :, 5] = _phi(mu / sd)
            traces[s, :, 6] = _phi(-mu / sd)
            traces[s, :, 7] = x_rec
            traces[s, :, 8] = gnorm * eps_s / gamma_s
        v = var
        q = v - 0.25
        d_mu = (sxi * q * dw
                + (-gamma_s * mu + a * mu
                   - c * (mu * mu * mu + (mu / v) * q * (3.0 * v - 0.25))
                   + eps_s) * dt)
        d_var = (-2.0 * gamma_s * q + 2.0 * a * (v + 0.25)
                 - c * (0.625 + 6.0 * v * v + 6.0 * v * mu * mu - 0.5 * v
                        + 1.5 * mu * mu - 3.0 / (32.0 * v))
                 - 4.0 * xi * q * q) * dt
        mu += d_mu
        var += d_var
        if not (np.isfinite(mu).all() and np.isfinite(var).all()):
            return s, hits, DIVERGED
        low = var < var_floor
        if low.any():
            hits += int(low.sum())
            var[low] = var_floor
    return eps_p.shape[0], hits, OK
