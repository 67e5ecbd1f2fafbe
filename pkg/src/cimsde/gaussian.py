"""Gaussian-approximation backend: a displaced squeezed vacuum per DOPO.

State per DOPO is the real mean displacement ``mu`` (coherent-amplitude
units) and the in-phase variance ``var`` in the ``x = (a + a^dag)/2``
convention, so the vacuum has ``var = 1/4``.  Equations are integrated in
unnormalised time with ``dt = dtau / gamma_s``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import kernels
from .ensemble import TrialResult, score
from .errors import InputError, IntegrationDivergedError
from .ising import IsingProblem
from .measurement import trial_streams
from .params import DEFAULT_DTAU, PhysicalParams, PumpSchedule
from .trace import Trace

VACUUM_VAR = 0.25
VAR_FLOOR = 1e-6


@dataclass
class GaussianState:
    mu: np.ndarray
    var: np.ndarray
    floor_hits: int = 0

    def __post_init__(self):
        self.mu = np.array(self.mu, dtype=float, ndmin=1)
        self.var = np.array(self.var, dtype=float, ndmin=1)
        if self.mu.shape != self.var.shape:
            raise InputError("mu and var must have the same shape")
        if np.any(self.var <= 0):
            raise InputError("variance must be positive")

    @classmethod
    def vacuum(cls, n: int) -> "GaussianState":
        return cls(np.zeros(n), np.full(n, VACUUM_VAR))

    def copy(self) -> "GaussianState":
        return GaussianState(self.mu.copy(), self.var.copy(), self.floor_hits)


def gaussian_rates(mu, var, eps_p, eps_s, phys: PhysicalParams):
    """Drift of ``mu`` and ``var`` plus the measurement-noise coefficient of ``mu``.

    The measurement term of the variance uses ``(var - 1/4)**2`` so that it
    vanishes at the vacuum and is never positive.
    """
    mu = np.asarray(mu, dtype=float)
    v = np.asarray(var, dtype=float)
    a = phys.kappa * eps_p / phys.gamma_p
    c = phys.kappa ** 2 / (2.0 * phys.gamma_p)
    q = v - VACUUM_VAR
    d_mu = (-phys.gamma_s * mu + a * mu
            - c * (mu ** 3 + (mu / v) * q * (3.0 * v - 0.25))
            + eps_s)
    d_var = (-2.0 * phys.gamma_s * q + 2.0 * a * (v + 0.25)
             - c * (0.625 + 6.0 * v * v + 6.0 * v * mu * mu - 0.5 * v + 1.5 * mu * mu
                    - 3.0 / (32.0 * v))
             - 4.0 * phys.xi * q * q)
    noise = math.sqrt(phys.xi) * q
    return d_mu, d_var, noise


def gaussian_step(state: GaussianState, eps_p: float, eps_s, phys: PhysicalParams, dt: float,
                  dW_meas=None, var_floor: float = VAR_FLOOR) -> GaussianState:
    """One Euler-Maruyama step.

    ``dW_meas`` is the shared measurement increment (``N(0, dt)``) per DOPO;
    ``None`` means no measurement noise.  Variances that fall below
    ``var_floor`` are clamped and counted in ``floor_hits``.
    """
    if dt <= 0:
        raise InputError("dt must be > 0")
    d_mu, d_var, noise = gaussian_rates(state.mu, state.var, eps_p, eps_s, phys)
    mu = state.mu + d_mu * dt
    if dW_meas is not None:
        mu = mu + noise * np.asarray(dW_meas, dtype=float)
    var = state.var + d_var * dt
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(var))):
        raise IntegrationDivergedError(0, "Gaussian state became non-finite")
    low = var < var_floor
    var = np.where(low, var_floor, var)
    return GaussianState(mu, var, state.floor_hits + int(low.sum()))


def gaussian_record(state: GaussianState, xi: float, dt: float, dW_meas=None) -> np.ndarray:
    """Measured in-phase values ``X_i = 2 mu_i + dW_i / (sqrt(xi) dt)``."""
    x = 2.0 * state.mu
    if xi > 0 and dW_meas is not None:
        x = x + np.asarray(dW_meas, dtype=float) / (math.sqrt(xi) * dt)
    return x


def gaussian_feedback(state: GaussianState, record, problem: IsingProblem, zeta: float) -> np.ndarray:
    """Injected field ``eps_s_i = zeta sum_j J_ij X_j / 2``.

    ``record`` holds the measured ``X_j``; without measurement noise this is
    ``zeta sum_j J_ij mu_j``.
    """
    x = np.asarray(record, dtype=float)
    if x.shape != (problem.n,) or state.mu.shape != (problem.n,):
        raise InputError(f"expected {problem.n} DOPOs")
    return zeta * (problem.coupling_matrix @ (0.5 * x))


def gaussian_observables(state: GaussianState) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of ``X = a + a^dag``: ``(2 mu, 4 var)``."""
    return 2.0 * state.mu, 4.0 * state.var


def gaussian_prob_x_positive(state: GaussianState) -> np.ndarray:
    return ndtr(state.mu / np.sqrt(state.var))


def gaussian_photon_number(state: GaussianState) -> np.ndarray:
    """``mu^2 + sinh^2 r`` for a pure squeezed state with in-phase variance ``var``."""
    v = state.var
    return state.mu ** 2 + v + 1.0 / (16.0 * v) - 0.5


def run_gaussian_trial(
    problem: IsingProblem,
    phys: PhysicalParams,
    schedule: PumpSchedule,
    dtau: float = DEFAULT_DTAU,
    seed=0,
    *,
    traces: bool = False,
    trace_every: int = 1,
    initial: GaussianState | None = None,
    var_floor: float = VAR_FLOOR,
    kernel: str | None = None,
    raise_errors: bool = True,
) -> TrialResult:
    """Integrate the Gaussian ansatz along the pump ramp.

    The measurement stream is drawn exactly as in the particle backend, so a
    seed gives both backends the same standard-normal record noise.
    ``TrialResult.counter`` holds the number of variance-floor clamps.
    """
    K = kernels.get(kernel)
    n = problem.n
    state = initial.copy() if initial is not None else GaussianState.vacuum(n)
    mu, var = state.mu.copy(), state.var.copy()
    J = np.ascontiguousarray(problem.coupling_matrix, dtype=float)
    dt = dtau / phys.gamma_s
    n_steps = int(round(schedule.T / dtau))
    streams = trial_streams(seed, n)
    block = max(1, min(n_steps, 1 << 16))
    parts, hits = [], state.floor_hits
    t0 = time.perf_counter()
    for start in range(0, n_steps, block):
        b = min(block, n_steps - start)
        steps = np.arange(start, start + b)
        taus = steps * dtau
        pump = np.asarray(schedule.rate(taus), dtype=float).reshape(b)
        eps_p = np.ascontiguousarray(pump * phys.eps_th)
        z_meas = np.ascontiguousarray(streams.measurement.standard(b))
        buf = np.zeros((b, n, kernels.NCOL)) if traces else None
        done, h, status = K.gaussian_block(
            mu, var, J, eps_p, z_meas, phys.gamma_s, phys.gamma_p, phys.kappa,
            phys.xi, phys.zeta, dt, var_floor, buf,
        )
        hits += h
        if traces:
            keep = (steps[:done] % trace_every) == 0
            parts.append(Trace(steps[:done][keep], taus[:done][keep], pump[:done][keep], buf[:done][keep]))
        if status != kernels.OK:
            err = IntegrationDivergedError(start + done)
            if raise_errors:
                raise err
            return TrialResult(
                spins=np.zeros(n, dtype=np.int64), mean_x=np.full(n, np.nan), success=False,
                valid=False, error=str(err), n_steps=start + done, counter=hits,
                wall_time=time.perf_counter() - t0,
                trace=Trace.concat(parts) if traces else None,
                final=GaussianState(mu, np.abs(var) + var_floor, hits),
            )
    final = GaussianState(mu, var, hits)
    mean_x, _ = gaussian_observables(final)
    spins, ok, tie, e = score(problem, mean_x)
    return TrialResult(
        spins=spins, mean_x=mean_x, success=ok, tie=tie, energy=e, n_steps=n_steps,
        counter=hits, wall_time=time.perf_counter() - t0,
        trace=Trace.concat(parts) if traces else None, final=final,
    )
