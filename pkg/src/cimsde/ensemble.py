"""Exact backend: weighted positive-P particle ensembles with replicator reweighting.

Each DOPO carries ``M`` particles ``(eta, mu)`` with real log-weights.  The
homodyne record multiplies particle ``k`` of DOPO ``i`` by

    exp( sqrt(xi') d_k dW_i - xi' d_k**2 dtau / 2 ),   d_k = Re(x_k - <x>_i) / g,

(the Ito-corrected exponential of the innovation term), after which weights
are renormalised and, when the effective sample size drops below a fraction
of ``M``, the ensemble is systematically resampled.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from ._pykernels import ensemble_moments, systematic_indices
from .errors import DegenerateEnsembleError, InputError, IntegrationDivergedError
from .ising import IsingProblem, energy, is_success
from .measurement import MeasurementRecord, trial_streams
from .params import NormalizedParams
from .trace import Trace

DEFAULT_M = 10_000
ESS_THRESHOLD = 0.5
_BLOCK_DRAWS = 1 << 21


@dataclass
class Ensemble:
    """Particles of all DOPOs; rows are DOPOs, columns are particles."""

    eta: np.ndarray
    mu: np.ndarray
    logw: np.ndarray
    g: float

    def __post_init__(self):
        self.eta = np.ascontiguousarray(self.eta, dtype=np.complex128)
        self.mu = np.ascontiguousarray(self.mu, dtype=np.complex128)
        self.logw = np.ascontiguousarray(self.logw, dtype=np.float64)
        if self.eta.ndim != 2 or self.eta.shape != self.mu.shape or self.eta.shape != self.logw.shape:
            raise InputError("eta, mu and logw must share one (N, M) shape")

    @property
    def n(self) -> int:
        return self.eta.shape[0]

    @property
    def m(self) -> int:
        return self.eta.shape[1]

    @classmethod
    def coherent(cls, n: int, m: int, g: float, alpha=0.0) -> "Ensemble":
        """All particles at ``eta = mu = g alpha`` (a coherent state; vacuum for 0)."""
        amp = np.broadcast_to(np.asarray(alpha, dtype=complex) * g, (n,))[:, None]
        eta = np.repeat(amp, m, axis=1)
        return cls(eta, eta.copy(), np.full((n, m), -math.log(m)), g)

    vacuum = classmethod(lambda cls, n, m, g: cls.coherent(n, m, g, 0.0))

    def weights(self) -> np.ndarray:
        w = np.exp(self.logw)
        return w / w.sum(axis=1, keepdims=True)

    def copy(self) -> "Ensemble":
        return Ensemble(self.eta.copy(), self.mu.copy(), self.logw.copy(), self.g)

    def observables(self) -> dict[str, np.ndarray]:
        """All per-DOPO observables at once (quadrature units ``a + a^dag``)."""
        cols = ensemble_moments(self.eta, self.mu, self.weights(), self.g)
        names = kernels.TRACE_COLUMNS[:7]
        return {name: cols[:, c] for c, name in enumerate(names)}


def normalize_logw(logw: np.ndarray) -> np.ndarray:
    """Shift log-weights so each row's weights sum to one."""
    top = logw.max(axis=-1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise DegenerateEnsembleError(-1)
    tot = np.exp(logw - top).sum(axis=-1, keepdims=True)
    return logw - (top + np.log(tot))


def reweight_logw(logw, x, dW, xi_norm, dtau):
    """Replicator update of log-weights along the last axis.

    ``x`` are particle in-phase values in quadrature units (``Re(eta+mu)/g``);
    ``dW`` is the measurement increment per row.  Returns normalised log-weights.
    """
    logw = np.asarray(logw, dtype=float)
    x = np.asarray(x, dtype=float)
    w = np.exp(normalize_logw(logw))
    xbar = (w * x).sum(axis=-1, keepdims=True)
    dev = x - xbar
    dW = np.asarray(dW, dtype=float)[..., None]
    sxi = math.sqrt(xi_norm)
    return normalize_logw(logw + sxi * dev * dW - 0.5 * xi_norm * dev * dev * dtau)


def reweight(ensemble: Ensemble, record: MeasurementRecord, xi_norm: float, dtau: float) -> Ensemble:
    """Apply one step of measurement-conditioned reweighting."""
    dW = np.asarray(record.dW_meas, dtype=float)
    if dW.shape != (ensemble.n,):
        raise InputError(f"record length {dW.shape} does not match {ensemble.n} DOPOs")
    x = (ensemble.eta + ensemble.mu).real / ensemble.g
    logw = reweight_logw(ensemble.logw, x, dW, xi_norm, dtau)
    return replace(ensemble, logw=logw)


def effective_sample_size(ensemble: Ensemble) -> np.ndarray:
    w = ensemble.weights()
    return 1.0 / (w * w).sum(axis=1)


def resample(ensemble: Ensemble, threshold: float = ESS_THRESHOLD, rng=None) -> Ensemble:
    """Systematic resampling of every DOPO whose ESS is below ``threshold * M``."""
    rng = rng if rng is not None else np.random.default_rng()
    w = ensemble.weights()
    ess = 1.0 / (w * w).sum(axis=1)
    u = rng.random(ensemble.n)
    out = ensemble.copy()
    for i in np.flatnonzero(ess < threshold * ensemble.m):
        idx = systematic_indices(w[i], u[i])
        out.eta[i] = ensemble.eta[i, idx]
        out.mu[i] = ensemble.mu[i, idx]
        out.logw[i] = -math.log(ensemble.m)
    return out


def mean_x(ensemble: Ensemble, i: int) -> float:
    """``<X_i> = E_w[Re(eta + mu)] / g``."""
    return float(ensemble.observables()["mean_x"][i])


def mean_x_imag(ensemble: Ensemble, i: int) -> float:
    """Imaginary part of the weighted mean of ``(eta + mu)/g``; zero in expectation."""
    return float(ensemble.observables()["mean_x_imag"][i])


def photon_number(ensemble: Ensemble, i: int) -> float:
    return float(ensemble.observables()["photon_number"][i])


def variance_x(ensemble: Ensemble, i: int) -> float:
    """``<X^2> - <X>^2`` with ``<X^2> = E[x^2]/g^2 + 1`` (vacuum gives 1)."""
    return float(ensemble.observables()["variance_x"][i])


def skewness_x(ensemble: Ensemble, i: int) -> float:
    """Third central moment ``<(X - <X>)^3>``."""
    return float(ensemble.observables()["skewness_x"][i])


def prob_x_positive(ensemble: Ensemble, i: int) -> float:
    """``P(X > 0)``: each particle contributes a unit-variance Gaussian at ``Re(eta+mu)/g``."""
    return float(ensemble.observables()["prob_x_positive"][i])


def prob_x_negative(ensemble: Ensemble, i: int) -> float:
    return float(ensemble.observables()["prob_x_negative"][i])


@dataclass
class TrialResult:
    """Outcome of one annealing run.

    ``spins`` holds ``sign(<X_i>)`` with 0 for an exact tie.  An invalid
    trial (divergence or weight collapse) has ``valid=False`` and ``error`` set.
    """

    spins: np.ndarray
    mean_x: np.ndarray
    success: bool
    valid: bool = True
    tie: bool = False
    energy: float = math.nan
    error: str = ""
    n_steps: int = 0
    counter: int = 0
    wall_time: float = 0.0
    trace: Trace | None = None
    final: object = field(default=None, repr=False)


def score(problem: IsingProblem, final_mean: np.ndarray) -> tuple[np.ndarray, bool, bool, float]:
    spins = np.sign(final_mean).astype(np.int64)
    tie = bool(np.any(spins == 0))
    if tie:
        return spins, False, True, math.nan
    return spins, is_success(problem, spins), False, energy(problem, spins)


def _log_weights(w: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(w)


def _block_size(n_steps: int, per_step: int) -> int:
    return max(1, min(n_steps, _BLOCK_DRAWS // max(per_step, 1)))


def run_trial(
    problem: IsingProblem,
    params: NormalizedParams,
    m: int = DEFAULT_M,
    seed=0,
    *,
    traces: bool = False,
    trace_every: int = 1,
    initial: Ensemble | None = None,
    ess_threshold: float = ESS_THRESHOLD,
    kernel: str | None = None,
    callback=None,
    raise_errors: bool = True,
) -> TrialResult:
    """Integrate the particle ensemble along the pump ramp.

    Per step: weighted means, homodyne record, feedback field, Euler-Maruyama
    update of all particles (independent diffusion noise, shared record),
    replicator reweighting and conditional resampling.

    Parameters
    ----------
    seed : int or numpy.random.SeedSequence
        Determines every random stream of the trial.
    traces : bool
        Record observables every ``trace_every`` steps.
    initial : Ensemble, optional
        Starting particles (default: vacuum).
    callback : callable, optional
        ``callback(step, ensemble)`` after each block of steps.
    raise_errors : bool
        If False, divergence/degeneracy returns an invalid result instead of raising.
    """
    if m < 1:
        raise InputError("particle count must be >= 1")
    K = kernels.get(kernel)
    n = problem.n
    ens = (initial.copy() if initial is not None else Ensemble.vacuum(n, m, params.g))
    if ens.n != n:
        raise InputError(f"initial ensemble has {ens.n} DOPOs, problem has {n}")
    m = ens.m
    # Linear weights for the whole run; logs only at the boundaries, so the
    # result does not depend on how steps are split into blocks.
    w = np.ascontiguousarray(np.exp(normalize_logw(ens.logw)))
    J = np.ascontiguousarray(problem.coupling_matrix, dtype=float)
    n_steps = params.n_steps
    streams = trial_streams(seed, n)
    block = _block_size(n_steps, 2 * n * m)
    parts = []
    n_res = 0
    t0 = time.perf_counter()
    for start in range(0, n_steps, block):
        b = min(block, n_steps - start)
        steps = np.arange(start, start + b)
        taus = steps * params.dtau
        pump = np.ascontiguousarray(params.ramp.rate(taus), dtype=float).reshape(b)
        z_eta = streams.diffusion_eta.standard_normal((b, n, m))
        z_mu = streams.diffusion_mu.standard_normal((b, n, m))
        z_meas = np.ascontiguousarray(streams.measurement.standard(b))
        u_res = streams.resampling.random((b, n))
        buf = np.zeros((b, n, kernels.NCOL)) if traces else None
        done, nr, status = K.exact_block(
            ens.eta, ens.mu, w, J, pump, z_eta, z_mu, z_meas, u_res,
            params.g, params.xi_norm, params.zeta_norm, params.dtau,
            ess_threshold, params.divergence_bound, buf,
        )
        n_res += nr
        if traces:
            keep = (steps[:done] % trace_every) == 0
            parts.append(Trace(steps[:done][keep], taus[:done][keep], pump[:done][keep], buf[:done][keep]))
        if status != kernels.OK:
            ens.logw = _log_weights(w)
            err = (IntegrationDivergedError(start + done) if status == kernels.DIVERGED
                   else DegenerateEnsembleError(start + done))
            if raise_errors:
                raise err
            return TrialResult(
                spins=np.zeros(n, dtype=np.int64), mean_x=np.full(n, np.nan), success=False,
                valid=False, error=str(err), n_steps=start + done, counter=n_res,
                wall_time=time.perf_counter() - t0,
                trace=Trace.concat(parts) if traces else None, final=ens,
            )
        if callback is not None:
            ens.logw = _log_weights(w)
            callback(start + b, ens)
    ens.logw = _log_weights(w)
    final_mean = ens.observables()["mean_x"]
    spins, ok, tie, e = score(problem, final_mean)
    return TrialResult(
        spins=spins, mean_x=final_mean, success=ok, tie=tie, energy=e, n_steps=n_steps,
        counter=n_res, wall_time=time.perf_counter() - t0,
        trace=Trace.concat(parts) if traces else None, final=ens,
    )
