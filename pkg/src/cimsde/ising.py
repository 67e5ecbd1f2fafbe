"""Ising problem instances, energies and the brute-force ground-state oracle.

Energy convention: ``E(s) = -sum_{(i,j)} J_ij s_i s_j``.  With this sign the
measurement-feedback rule ``eps_i = zeta * sum_j J_ij X_j`` pushes the DOPO
network toward low-energy configurations; e.g. the antiferromagnetic ring
(``J = -1``) is minimised by alternating spins.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import CapabilityError, InputError

MAX_BRUTEFORCE_N = 24


@dataclass(frozen=True)
class IsingProblem:
    """Weighted edge list over ``n`` spins.

    Edges are stored as ``(i, j, J_ij)`` with ``i < j``; construction
    normalises the orientation and rejects duplicates and self-loops.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...] = ()
    _ground: list = field(default_factory=list, init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InputError(f"spin count must be an integer >= 1, got {self.n!r}")
        seen = set()
        canon = []
        for edge in self.edges:
            if len(edge) != 3:
                raise InputError(f"edge must be (i, j, J), got {edge!r}")
            i, j, w = edge
            if int(i) != i or int(j) != j:
                raise InputError(f"non-integer edge index in {edge!r}")
            i, j, w = int(i), int(j), float(w)
            if i == j:
                raise InputError(f"self-loop on spin {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InputError(f"edge {edge!r} out of range for n={self.n}")
            if not math.isfinite(w):
                raise InputError(f"non-finite coupling on edge {edge!r}")
            if i > j:
                i, j = j, i
            if (i, j) in seen:
                raise InputError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
            canon.append((i, j, w))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "edges", tuple(canon))

    @cached_property
    def coupling_matrix(self) -> np.ndarray:
        """Dense symmetric ``J`` with zero diagonal."""
        J = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            J[i, j] = w
            J[j, i] = w
        J.setflags(write=False)
        return J

    def ground_states(self) -> tuple[float, list[np.ndarray]]:
        """Cached :func:`ground_states_bruteforce` result."""
        if not self._ground:
            self._ground.append(ground_states_bruteforce(self))
        return self._ground[0]


def _check_spins(problem: IsingProblem, s) -> np.ndarray:
    s = np.asarray(s)
    if s.ndim != 1 or s.shape[0] != problem.n:
        raise InputError(f"spin vector of length {problem.n} expected, got shape {s.shape}")
    if not np.all((s == 1) | (s == -1)):
        raise InputError("spins must be exactly +1 or -1")
    return s.astype(np.int64)


def energy(problem: IsingProblem, s) -> float:
    """Return ``-sum_{(i,j) in E} J_ij s_i s_j``."""
    s = _check_spins(problem, s)
    return -float(sum(w * s[i] * s[j] for i, j, w in problem.edges))


def ring_antiferromagnet(n: int) -> IsingProblem:
    """Nearest-neighbour ring with ``J = -1``; the n=2 wrap edge is merged."""
    if int(n) != n or n < 2:
        raise InputError(f"ring needs n >= 2, got {n!r}")
    n = int(n)
    pairs = {tuple(sorted((i, (i + 1) % n))) for i in range(n)}
    return IsingProblem(n, tuple((i, j, -1.0) for i, j in sorted(pairs)))


def all_configs(n: int) -> np.ndarray:
    """All ``2**n`` spin vectors as rows of a ``(2**n, n)`` int8 array."""
    codes = np.arange(2**n, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(n - 1, -1, -1)) & 1
    return (1 - 2 * bits).astype(np.int8)


def ground_states_bruteforce(problem: IsingProblem) -> tuple[float, list[np.ndarray]]:
    """Exhaustively enumerate all configurations.

    Returns the minimum energy and every minimiser, in enumeration order.
    Enumeration is chunked so memory stays bounded up to ``n = 24``.
    """
    n = problem.n
    if n > MAX_BRUTEFORCE_N:
        raise CapabilityError(f"brute force limited to n <= {MAX_BRUTEFORCE_N}, got n={n}")
    if not problem.edges:
        return 0.0, [c.astype(np.int64) for c in all_configs(n)]

    ii = np.array([e[0] for e in problem.edges])
    jj = np.array([e[1] for e in problem.edges])
    ww = np.array([e[2] for e in problem.edges])
    chunk_bits = min(n, 16)
    hi_bits = n - chunk_bits
    low = all_configs(chunk_bits).astype(np.float64)
    best = math.inf
    winners: list[np.ndarray] = []
    for hi in range(2**hi_bits):
        if hi_bits:
            head = 1 - 2 * ((hi >> np.arange(hi_bits - 1, -1, -1)) & 1)
            block = np.hstack([np.broadcast_to(head, (low.shape[0], hi_bits)), low])
        else:
            block = low
        e = -(block[:, ii] * block[:, jj]) @ ww
        m = e.min()
        tol = 1e-9 * max(1.0, abs(m))
        if m < best - tol:
            best = m
            winners = []
        if m <= best + tol:
            for row in block[np.abs(e - best) <= tol]:
                winners.append(row.astype(np.int64))
    return float(best), winners


def is_success(problem: IsingProblem, s) -> bool:
    """True iff ``energy(s)`` equals the brute-force minimum."""
    e_min, _ = problem.ground_states()
    return abs(energy(problem, s) - e_min) <= 1e-9 * max(1.0, abs(e_min))


def load_problem(path: str | os.PathLike) -> IsingProblem:
    """Read ``n`` on the first line, then one ``i j J_ij`` edge per line.

    Blank lines and ``#`` comments are ignored.
    """
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if line:
                rows.append((lineno, line.split()))
    if not rows:
        raise InputError(f"{path}: empty problem file")
    lineno, head = rows[0]
    if len(head) != 1:
        raise InputError(f"{path}:{lineno}: first line must hold the spin count")
    try:
        n = int(head[0])
        edges = [(int(t[0]), int(t[1]), float(t[2])) for _, t in rows[1:] if len(t) == 3]
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    bad = [ln for ln, t in rows[1:] if len(t) != 3]
    if bad:
        raise InputError(f"{path}:{bad[0]}: expected 'i j J_ij'")
    return IsingProblem(n, tuple(edges))


def save_problem(problem: IsingProblem, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(f"{problem.n}\n")
        for i, j, w in problem.edges:
            fh.write(f"{i} {j} {w!r}\n")


def make_problem(generator: str, size: int) -> IsingProblem:
    """Build a named instance; only the ring is needed by the experiments."""
    if generator in ("ring", "ring_antiferromagnet"):
        return ring_antiferromagnet(size)
    raise InputError(f"unknown problem generator {generator!r}")
