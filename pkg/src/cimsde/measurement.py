"""Homodyne records, feedback fields and the per-trial random streams.

Records are kept in the normalised amplitude scale of ``eta + mu``
(``X_tilde = g X``).  The feedback converts the record to displacement
units with a factor 1/2 (``<X> = 2 <alpha>`` for ``X = a + a^dag``), which
puts the antiferromagnetic N=2 threshold at ``p = 1 + xi' - zeta'`` for the
exact backend and at ``1 - zeta'`` for the Gaussian backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .ising import IsingProblem


@dataclass(frozen=True)
class MeasurementRecord:
    """One time step of homodyne readouts for all DOPOs.

    Attributes
    ----------
    x_tilde : ndarray
        Readouts ``g X_i`` (same scale as ``eta + mu``).
    dW_meas : ndarray
        Wiener increments, ``N(0, dtau)``, that produced the readouts.
    tau : float
    g : float
    """

    x_tilde: np.ndarray
    dW_meas: np.ndarray
    tau: float = 0.0
    g: float = 1.0

    @property
    def x_measured(self) -> np.ndarray:
        """Readouts in units of the quadrature ``a + a^dag``."""
        return self.x_tilde / self.g

    def __len__(self):
        return len(self.x_tilde)


@dataclass(frozen=True)
class FeedbackField:
    f: np.ndarray


def homodyne_sample(mean_x, xi_norm, g, dtau, rng=None, dW=None, tau=0.0) -> MeasurementRecord:
    """Draw ``X_tilde_i = mean_x_i + g dW_i / (sqrt(xi') dtau)``.

    ``mean_x`` is the ensemble mean of ``eta + mu`` per DOPO.  Pass ``dW`` to
    supply the increments explicitly; otherwise they are drawn from ``rng``.
    """
    if not xi_norm > 0:
        raise InputError("homodyne sampling needs xi_norm > 0")
    mean_x = np.real(np.asarray(mean_x)).astype(float)
    if dW is None:
        if rng is None:
            raise InputError("either rng or dW must be given")
        dW = rng.standard_normal(mean_x.shape) * math.sqrt(dtau)
    dW = np.asarray(dW, dtype=float)
    if dW.shape != mean_x.shape:
        raise InputError(f"dW shape {dW.shape} does not match {mean_x.shape}")
    x_tilde = mean_x + g * dW / (math.sqrt(xi_norm) * dtau)
    if not np.all(np.isfinite(x_tilde)):
        raise InputError("non-finite homodyne record")
    return MeasurementRecord(x_tilde, dW, tau, g)


def feedback_field(record: MeasurementRecord, problem: IsingProblem, zeta_norm: float) -> FeedbackField:
    """``f_i = zeta' sum_j J_ij X_tilde_j / 2``."""
    x = np.asarray(record.x_tilde if isinstance(record, MeasurementRecord) else record)
    if x.shape != (problem.n,):
        raise InputError(f"record length {x.shape} does not match n={problem.n}")
    f = zeta_norm * (problem.coupling_matrix @ (0.5 * x))
    return FeedbackField(f.astype(complex))


def _as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


class RecordStream:
    """Deterministic measurement noise for ``n`` DOPOs.

    Successive calls continue the same stream, so the sequence does not
    depend on how the caller chunks it.
    """

    def __init__(self, seed, n: int):
        self.n = int(n)
        self._rng = np.random.Generator(np.random.PCG64(_as_seed_sequence(seed)))

    def standard(self, steps: int) -> np.ndarray:
        """``(steps, n)`` standard normal draws."""
        return self._rng.standard_normal((steps, self.n))

    def increments(self, steps: int, dtau: float) -> np.ndarray:
        return self.standard(steps) * math.sqrt(dtau)


def record_stream(seed, n: int) -> RecordStream:
    return RecordStream(seed, n)


@dataclass
class TrialStreams:
    """Independent generators for one trial.

    ``measurement`` feeds the homodyne record shared by all particles;
    ``diffusion_eta``/``diffusion_mu`` feed per-particle noise; ``resampling`` feeds the
    systematic-resampling offsets.
    """

    measurement: RecordStream
    diffusion_eta: np.random.Generator
    diffusion_mu: np.random.Generator
    resampling: np.random.Generator


def trial_streams(seed, n: int) -> TrialStreams:
    meas, d_eta, d_mu, res = _as_seed_sequence(seed).spawn(4)
    gen = lambda ss: np.random.Generator(np.random.PCG64(ss))  # noqa: E731
    return TrialStreams(RecordStream(meas, n), gen(d_eta), gen(d_mu), gen(res))
