"""Drift and diffusion of the DOPO signal-field SDEs.

Two forms are provided:

* the normalised, adiabatically eliminated equations for ``(eta, mu)``
  (``eta = g alpha_s``, ``mu = g beta_s``, ``tau = gamma_s t``), used by the
  particle ensemble;
* the unnormalised full-pump equations for ``(alpha_s, beta_s, alpha_p, beta_p)``,
  kept for checking the adiabatic elimination.

All functions accept scalars or numpy arrays and broadcast.  Positive-P
amplitudes are complex; the diffusion amplitude uses the principal square
root so it turns imaginary once ``eta**2`` exceeds the pump.
"""

from __future__ import annotations

import numpy as np

from .errors import IntegrationDivergedError
from .params import PhysicalParams


def drift_adiabatic(eta, mu, p, xi_norm, f):
    """Deterministic part of ``d(eta, mu)/dtau``."""
    eta = np.asarray(eta, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    loss = 1.0 + xi_norm
    d_eta = -loss * eta + mu * (p - eta * eta) + f
    d_mu = -loss * mu + eta * (p - mu * mu) + f
    return d_eta, d_mu


def diffusion_adiabatic(eta, mu, p, g):
    """Noise amplitudes ``g sqrt(p - eta**2)`` and ``g sqrt(p - mu**2)``.

    Each multiplies its own independent real Wiener increment.
    """
    eta = np.asarray(eta, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    return g * np.sqrt(p - eta * eta), g * np.sqrt(p - mu * mu)


def step_adiabatic(state, p, f, dtau, noise, g, xi_norm, step=0, bound=np.inf):
    """One Euler-Maruyama step of the normalised signal SDE.

    Parameters
    ----------
    state : tuple of arrays
        ``(eta, mu)``.
    noise : tuple of arrays or None
        Wiener increments ``(d_omega_eta, d_omega_mu)``, each ``N(0, dtau)``.
        ``None`` gives the noiseless (drift-only) step.
    step : int
        Step index reported if the update diverges.
    bound : float
        ``|eta|`` or ``|mu|`` above this raises :class:`IntegrationDivergedError`.
    """
    eta, mu = state
    d_eta, d_mu = drift_adiabatic(eta, mu, p, xi_norm, f)
    new_eta = eta + d_eta * dtau
    new_mu = mu + d_mu * dtau
    if noise is not None:
        b_eta, b_mu = diffusion_adiabatic(eta, mu, p, g)
        new_eta = new_eta + b_eta * noise[0]
        new_mu = new_mu + b_mu * noise[1]
    _guard(new_eta, new_mu, step, bound)
    return new_eta, new_mu


def _guard(a, b, step, bound):
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise IntegrationDivergedError(step, f"non-finite amplitude at step {step}")
    if np.isfinite(bound) and (np.any(np.abs(a) > bound) or np.any(np.abs(b) > bound)):
        raise IntegrationDivergedError(step, f"amplitude exceeded {bound:g} at step {step}")


def full_pump_drift(alpha_s, beta_s, alpha_p, beta_p, eps_p, eps_s, phys: PhysicalParams):
    """Drift of the four full-pump amplitudes.

    The pump is depleted by ``-(kappa/2) alpha_s**2``; with this sign, setting
    the pump derivative to zero recovers the eliminated signal equation.
    """
    ks = phys.gamma_s + phys.xi
    d_as = -ks * alpha_s + phys.kappa * beta_s * alpha_p + eps_s
    d_bs = -ks * beta_s + phys.kappa * alpha_s * beta_p + eps_s
    d_ap = -phys.gamma_p * alpha_p - 0.5 * phys.kappa * alpha_s * alpha_s + eps_p
    d_bp = -phys.gamma_p * beta_p - 0.5 * phys.kappa * beta_s * beta_s + eps_p
    return d_as, d_bs, d_ap, d_bp


def step_full_pump(signal, pump, eps_p, eps_s, phys: PhysicalParams, dt, noise=None,
                   step=0, bound=np.inf):
    """Euler-Maruyama step of the full signal + pump SDEs (unnormalised).

    ``noise`` holds the signal Wiener increments ``(dW_alpha, dW_beta)``,
    each ``N(0, dt)``; the pump equations carry no noise.
    Returns ``((alpha_s, beta_s), (alpha_p, beta_p))``.
    """
    a_s, b_s = (np.asarray(v, dtype=complex) for v in signal)
    a_p, b_p = (np.asarray(v, dtype=complex) for v in pump)
    d_as, d_bs, d_ap, d_bp = full_pump_drift(a_s, b_s, a_p, b_p, eps_p, eps_s, phys)
    n_as = a_s + d_as * dt
    n_bs = b_s + d_bs * dt
    if noise is not None:
        n_as = n_as + np.sqrt(phys.kappa * a_p) * noise[0]
        n_bs = n_bs + np.sqrt(phys.kappa * b_p) * noise[1]
    n_ap = a_p + d_ap * dt
    n_bp = b_p + d_bp * dt
    _guard(n_as, n_bs, step, bound)
    return (n_as, n_bs), (n_ap, n_bp)


def integrate_adiabatic_noiseless(eta0, mu0, p, dtau, n_steps, xi_norm=0.0, f=0.0):
    """Drift-only trajectory of the normalised equations.

    ``p`` may be a scalar or a callable of ``tau``.  Returns arrays of
    length ``n_steps + 1`` for ``eta`` and ``mu``.
    """
    pf = p if callable(p) else (lambda _t: p)
    eta = np.empty(n_steps + 1, dtype=complex)
    mu = np.empty(n_steps + 1, dtype=complex)
    eta[0], mu[0] = eta0, mu0
    e, m = complex(eta0), complex(mu0)
    loss = 1.0 + xi_norm
    for k in range(n_steps):
        pk = pf(k * dtau)
        e, m = (e + (-loss * e + m * (pk - e * e) + f) * dtau,
                m + (-loss * m + e * (pk - m * m) + f) * dtau)
        eta[k + 1], mu[k + 1] = e, m
    return eta, mu


def integrate_full_pump_noiseless(alpha_s0, beta_s0, alpha_p0, beta_p0, eps_p, phys,
                                  dt, n_steps, eps_s=0.0):
    """Drift-only trajectory of the full-pump equations (``eps_p`` scalar or callable of t)."""
    ef = eps_p if callable(eps_p) else (lambda _t: eps_p)
    out = np.empty((n_steps + 1, 4), dtype=complex)
    a_s, b_s, a_p, b_p = (complex(v) for v in (alpha_s0, beta_s0, alpha_p0, beta_p0))
    out[0] = a_s, b_s, a_p, b_p
    ks, kap, gp = phys.gamma_s + phys.xi, phys.kappa, phys.gamma_p
    for k in range(n_steps):
        ep = ef(k * dt)
        a_s, b_s, a_p, b_p = (
            a_s + (-ks * a_s + kap * b_s * a_p + eps_s) * dt,
            b_s + (-ks * b_s + kap * a_s * b_p + eps_s) * dt,
            a_p + (-gp * a_p - 0.5 * kap * a_s * a_s + ep) * dt,
            b_p + (-gp * b_p - 0.5 * kap * b_s * b_s + ep) * dt,
        )
        out[k + 1] = a_s, b_s, a_p, b_p
    return out
