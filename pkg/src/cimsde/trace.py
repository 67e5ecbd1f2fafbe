"""Observable traces shared by both backends, and their CSV form."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .kernels import TRACE_COLUMNS

CSV_COLUMNS = (
    "tau", "p", "dopo_index", "mean_x", "photon_number", "variance_x", "skewness_x",
    "prob_x_positive", "measured_x", "feedback_f", "prob_x_negative",
)


@dataclass
class Trace:
    """Per-step observables.

    ``data[k, i, c]`` holds column ``TRACE_COLUMNS[c]`` of DOPO ``i`` at
    integration step ``step[k]`` (time ``tau[k]``).  Quadrature quantities
    are in units of ``a + a^dag``.
    """

    step: np.ndarray
    tau: np.ndarray
    p: np.ndarray
    data: np.ndarray

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, :, TRACE_COLUMNS.index(name)]

    def __len__(self):
        return len(self.tau)

    @classmethod
    def concat(cls, parts: list["Trace"]) -> "Trace":
        if not parts:
            return cls(np.empty(0, dtype=np.int64), np.empty(0), np.empty(0),
                       np.empty((0, 0, len(TRACE_COLUMNS))))
        return cls(
            np.concatenate([t.step for t in parts]),
            np.concatenate([t.tau for t in parts]),
            np.concatenate([t.p for t in parts]),
            np.concatenate([t.data for t in parts]),
        )

    def write_csv(self, path: str | os.PathLike) -> None:
        """One row per (step, DOPO); floats written with ``repr`` for exact round trips."""
        cols = [TRACE_COLUMNS.index(c) for c in CSV_COLUMNS[3:]]
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(CSV_COLUMNS)
            for k in range(len(self.tau)):
                tau, p = repr(float(self.tau[k])), repr(float(self.p[k]))
                for i in range(self.data.shape[1]):
                    out.writerow([tau, p, i] + [repr(float(self.data[k, i, c])) for c in cols])

    def write_record_csv(self, path: str | os.PathLike) -> None:
        """Measurement-record dump: step, i, measured X, feedback f."""
        mx = self["measured_x"]
        fb = self["feedback_f"]
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(("step", "i", "x_measured", "f"))
            for k in range(len(self.tau)):
                for i in range(mx.shape[1]):
                    out.writerow([int(self.step[k]), i, repr(float(mx[k, i])), repr(float(fb[k, i]))])


def read_trace_csv(path: str | os.PathLike) -> dict[str, np.ndarray]:
    """Load a trace CSV back into column arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    arr = np.array(body, dtype=float) if body else np.empty((0, len(header)))
    return {name: arr[:, k] for k, name in enumerate(header)}
