"""Physical rates, normalised constants and the pump ramp."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError

DEFAULT_T = 200.0
DEFAULT_DTAU = 0.01


@dataclass(frozen=True)
class PhysicalParams:
    """Rates in units of 1/time; ``zeta`` is the dimensionless feedback gain.

    Defaults are the two-DOPO parameter set (gamma_s=1, gamma_p=10,
    kappa=0.1, xi=0.1, zeta=0.3).
    """

    gamma_s: float = 1.0
    gamma_p: float = 10.0
    kappa: float = 0.1
    xi: float = 0.1
    zeta: float = 0.3

    def __post_init__(self):
        for name in ("gamma_s", "gamma_p", "kappa"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InputError(f"{name} must be a positive finite rate, got {v!r}")
        for name in ("xi", "zeta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InputError(f"{name} must be >= 0, got {v!r}")

    @property
    def eps_th(self) -> float:
        """Threshold pump amplitude ``gamma_s * gamma_p / kappa``."""
        return self.gamma_s * self.gamma_p / self.kappa

    @property
    def g(self) -> float:
        return self.kappa / math.sqrt(2.0 * self.gamma_p * self.gamma_s)

    def replace(self, **changes) -> "PhysicalParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class PumpSchedule:
    """Linear ramp of the normalised pump rate ``p = kappa eps_p / (gamma_s gamma_p)``.

    ``p(tau)`` interpolates from ``p_start`` to ``p_end`` over ``[0, T]`` and
    is clamped to the endpoint range outside it.
    """

    p_start: float = 0.0
    p_end: float = 1.5
    T: float = DEFAULT_T

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise InputError(f"ramp duration T must be > 0, got {self.T!r}")
        if not (math.isfinite(self.p_start) and math.isfinite(self.p_end)):
            raise InputError("pump endpoints must be finite")

    def rate(self, tau):
        tau = np.asarray(tau, dtype=float)
        p = self.p_start + (self.p_end - self.p_start) * tau / self.T
        lo, hi = min(self.p_start, self.p_end), max(self.p_start, self.p_end)
        out = np.clip(p, lo, hi)
        return float(out) if out.ndim == 0 else out

    @classmethod
    def constant(cls, p: float, T: float = DEFAULT_T) -> "PumpSchedule":
        return cls(p, p, T)


def pump_rate(sched: PumpSchedule, tau):
    return sched.rate(tau)


@dataclass(frozen=True)
class NormalizedParams:
    """Constants of the normalised signal SDE (time ``tau = gamma_s t``)."""

    g: float
    xi_norm: float
    zeta_norm: float
    dtau: float
    ramp: PumpSchedule
    eps_th: float = math.nan

    def __post_init__(self):
        if not (math.isfinite(self.g) and self.g > 0):
            raise InputError(f"g must be > 0, got {self.g!r}")
        if not (math.isfinite(self.dtau) and self.dtau > 0):
            raise InputError(f"dtau must be > 0, got {self.dtau!r}")
        if self.xi_norm < 0 or self.zeta_norm < 0:
            raise InputError("xi_norm and zeta_norm must be >= 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.ramp.T / self.dtau))

    @property
    def divergence_bound(self) -> float:
        """Amplitude beyond which a trajectory is declared diverged."""
        p_max = max(abs(self.ramp.p_start), abs(self.ramp.p_end), 1.0)
        return 10.0 * math.sqrt(p_max)

    def replace(self, **changes) -> "NormalizedParams":
        return replace(self, **changes)


def derive_normalized(
    phys: PhysicalParams,
    T: float = DEFAULT_T,
    dtau: float = DEFAULT_DTAU,
    p_start: float = 0.0,
    p_end: float = 1.5,
    g: float | None = None,
) -> NormalizedParams:
    """Map physical rates to the normalised SDE constants.

    ``g = kappa / sqrt(2 gamma_p gamma_s)`` unless ``g`` is given explicitly
    (the rounded literature values 0.02 / 0.002 can be reproduced that way).
    """
    if phys.gamma_p / phys.gamma_s < 1.0:
        warnings.warn(
            f"gamma_p/gamma_s = {phys.gamma_p / phys.gamma_s:.3g} < 1: "
            "adiabatic pump elimination is not justified",
            stacklevel=2,
        )
    return NormalizedParams(
        g=phys.g if g is None else float(g),
        xi_norm=phys.xi / phys.gamma_s,
        zeta_norm=phys.zeta / phys.gamma_s,
        dtau=float(dtau),
        ramp=PumpSchedule(p_start, p_end, T),
        eps_th=phys.eps_th,
    )
