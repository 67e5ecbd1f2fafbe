"""Experiment configuration, trial batches, sweeps and result files."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ensemble import ESS_THRESHOLD, TrialResult, run_trial
from .errors import CimError, ConfigError
from .gaussian import run_gaussian_trial
from .ising import IsingProblem, load_problem, make_problem
from .params import DEFAULT_DTAU, DEFAULT_T, PhysicalParams, PumpSchedule, derive_normalized

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

OUTPUT_ENV = "CIMSDE_OUTPUT_DIR"
BACKENDS = ("exact", "gaussian")
DESK_M, DESK_TRIALS = 1000, 100
FULL_M, FULL_TRIALS = 10_000, 1000

_PHYS_KEYS = ("gamma_s", "gamma_p", "kappa", "xi", "zeta")
SWEEPABLE = _PHYS_KEYS + ("p_start", "p_end", "T", "dtau", "g", "M")
_INT_KEYS = {"n", "M", "trials", "seed", "workers"}
_FLOAT_KEYS = set(_PHYS_KEYS) | {"p_start", "p_end", "T", "dtau", "g", "ess_threshold"}
_STR_KEYS = {"problem", "problem_file", "backend", "output_dir", "kernel", "sweep_param"}
_BOOL_KEYS = {"full_scale"}
KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _BOOL_KEYS | {"sweep_values"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a batch of trials.

    ``problem`` is a generator name (``ring``) used with ``n``, unless
    ``problem_file`` points at an edge-list file.  ``sweep_param`` names one
    of :data:`SWEEPABLE`; with no sweep there is a single point.
    """

    problem: str = "ring"
    n: int = 2
    problem_file: str | None = None
    backend: str = "exact"
    phys: PhysicalParams = field(default_factory=PhysicalParams)
    p_start: float = 0.0
    p_end: float = 1.5
    T: float = DEFAULT_T
    dtau: float = DEFAULT_DTAU
    g: float | None = None
    M: int = DESK_M
    trials: int = DESK_TRIALS
    seed: int = 0
    sweep_param: str | None = None
    sweep_values: tuple = ()
    output_dir: str | None = None
    workers: int = 1
    ess_threshold: float = ESS_THRESHOLD
    kernel: str | None = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError("backend", f"must be one of {BACKENDS}, got {self.backend!r}")
        if self.trials < 1:
            raise ConfigError("trials", f"must be >= 1, got {self.trials}")
        if self.M < 1:
            raise ConfigError("M", f"must be >= 1, got {self.M}")
        if self.workers < 1:
            raise ConfigError("workers", f"must be >= 1, got {self.workers}")
        if self.seed < 0:
            raise ConfigError("seed", "must be a non-negative integer")
        if not 0.0 <= self.ess_threshold <= 1.0:
            raise ConfigError("ess_threshold", "must lie in [0, 1]")
        if self.sweep_param is not None:
            if self.sweep_param not in SWEEPABLE:
                raise ConfigError("sweep_param", f"cannot sweep {self.sweep_param!r}; choose from {SWEEPABLE}")
            vals = self.sweep_values
            if len(vals) == 0:
                raise ConfigError("sweep_values", "empty sweep")
            if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in vals):
                raise ConfigError("sweep_values", "values must be finite numbers")
            if any(b < a for a, b in zip(vals, vals[1:])):
                raise ConfigError("sweep_values", "values must be sorted ascending")
        elif self.sweep_values:
            raise ConfigError("sweep_param", "sweep_values given without sweep_param")
        # Surface bad physics as config errors naming the key.
        for v in self.points():
            try:
                self.point_params(v)
            except ConfigError:
                raise
            except CimError as exc:
                raise ConfigError(self.sweep_param or "params", str(exc)) from None

    # -- resolution ------------------------------------------------------
    def points(self) -> tuple:
        return tuple(self.sweep_values) if self.sweep_param else (None,)

    def load_problem(self) -> IsingProblem:
        try:
            if self.problem_file:
                return load_problem(self.problem_file)
            return make_problem(self.problem, self.n)
        except OSError as exc:
            raise ConfigError("problem_file", str(exc)) from None
        except CimError as exc:
            raise ConfigError("problem_file" if self.problem_file else "problem", str(exc)) from None

    def point_params(self, value=None) -> dict:
        """Resolved settings at one sweep value (``None``: no sweep)."""
        d = {k: getattr(self, k) for k in ("p_start", "p_end", "T", "dtau", "g", "M")}
        phys = self.phys
        if self.sweep_param is not None and value is not None:
            if self.sweep_param in _PHYS_KEYS:
                try:
                    phys = phys.replace(**{self.sweep_param: float(value)})
                except CimError as exc:
                    raise ConfigError(self.sweep_param, str(exc)) from None
            elif self.sweep_param == "M":
                d["M"] = int(value)
            else:
                d[self.sweep_param] = float(value)
        if not (d["T"] > 0 and d["dtau"] > 0):
            raise ConfigError("T" if not d["T"] > 0 else "dtau", "must be > 0")
        if d["M"] < 1:
            raise ConfigError("M", "must be >= 1")
        d["phys"] = phys
        return d

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("phys")
        d.update(dataclasses.asdict(self.phys))
        d["sweep_values"] = list(self.sweep_values)
        return d


def _coerce(key: str, value):
    if key not in KNOWN_KEYS:
        raise ConfigError(key, "unknown configuration key")
    if value is None:
        return None
    try:
        if key in _INT_KEYS:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(f"expected an integer, got {value!r}")
            return int(value)
        if key in _FLOAT_KEYS:
            if isinstance(value, bool):
                raise ValueError(f"expected a number, got {value!r}")
            return float(value)
        if key in _BOOL_KEYS:
            if isinstance(value, str):
                if value.lower() in ("true", "1", "yes"):
                    return True
                if value.lower() in ("false", "0", "no"):
                    return False
                raise ValueError(f"expected a boolean, got {value!r}")
            return bool(value)
        if key == "sweep_values":
            if isinstance(value, (int, float)):
                value = [value]
            return tuple(float(v) for v in value)
        return None if value is None else str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from None


def _flatten(raw: dict) -> dict:
    flat = {}
    for k, v in raw.items():
        if isinstance(v, dict):
            if k == "sweep":
                for sk, sv in v.items():
                    name = {"param": "sweep_param", "values": "sweep_values"}.get(sk)
                    if name is None:
                        raise ConfigError(f"sweep.{sk}", "unknown configuration key")
                    flat[name] = sv
            else:
                # Tables only group keys; their names carry no meaning.
                flat.update(_flatten(v))
        else:
            flat[k] = v
    return flat


def parse_override(text: str) -> tuple[str, object]:
    """Split ``key=value``; the value is parsed as a TOML literal when possible."""
    if "=" not in text:
        raise ConfigError(text, "override must look like key=value")
    key, val = (s.strip() for s in text.split("=", 1))
    try:
        parsed = tomllib.loads(f"v = {val}")["v"]
    except tomllib.TOMLDecodeError:
        parsed = val
    return key, parsed


def config_from_mapping(raw: dict, overrides=()) -> ExperimentConfig:
    """Build a config from a (possibly nested) mapping plus ``key=value`` overrides."""
    flat = _flatten(dict(raw))
    for item in overrides:
        k, v = parse_override(item) if isinstance(item, str) else item
        flat[k] = v
    vals = {k: _coerce(k, v) for k, v in flat.items()}
    full = vals.pop("full_scale", False)
    if full:
        vals.setdefault("M", FULL_M)
        vals.setdefault("trials", FULL_TRIALS)
    phys_kw = {k: vals.pop(k) for k in _PHYS_KEYS if k in vals}
    try:
        phys = PhysicalParams(**phys_kw)
    except CimError as exc:
        bad = next((k for k in phys_kw if k in str(exc)), "params")
        raise ConfigError(bad, str(exc)) from None
    if "output_dir" not in vals and os.environ.get(OUTPUT_ENV):
        vals["output_dir"] = os.environ[OUTPUT_ENV]
    return ExperimentConfig(phys=phys, **vals)


def load_config(path: str | os.PathLike | None = None, overrides=()) -> ExperimentConfig:
    """Read a TOML file (optional) and apply ``key=value`` overrides."""
    raw = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError("config", str(exc)) from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("config", f"{path}: {exc}") from None
    return config_from_mapping(raw, overrides)


# -- seeds ---------------------------------------------------------------
def trial_seed(base_seed: int, value, t: int) -> np.random.SeedSequence:
    """Seed of trial ``t`` at sweep value ``value``; independent of scheduling."""
    key = "none" if value is None else repr(float(value))
    h = hashlib.blake2b(f"{key}|{t}".encode(), digest_size=8).digest()
    return np.random.SeedSequence([int(base_seed), int.from_bytes(h, "little")])


# -- single trials ---------------------------------------------------------
def run_single(config: ExperimentConfig, value=None, t: int = 0, *, traces: bool = False,
               trace_every: int = 1, problem: IsingProblem | None = None,
               raise_errors: bool = False) -> TrialResult:
    pp = config.point_params(value)
    problem = problem or config.load_problem()
    seed = trial_seed(config.seed, value, t)
    if config.backend == "exact":
        norm = derive_normalized(pp["phys"], T=pp["T"], dtau=pp["dtau"],
                                 p_start=pp["p_start"], p_end=pp["p_end"], g=pp["g"])
        return run_trial(problem, norm, m=pp["M"], seed=seed, traces=traces, trace_every=trace_every,
                         ess_threshold=config.ess_threshold, kernel=config.kernel,
                         raise_errors=raise_errors)
    sched = PumpSchedule(pp["p_start"], pp["p_end"], pp["T"])
    return run_gaussian_trial(problem, pp["phys"], sched, dtau=pp["dtau"], seed=seed, traces=traces,
                              trace_every=trace_every, kernel=config.kernel, raise_errors=raise_errors)


def _trial_task(args):
    cfg_dict, value, t = args
    cfg = config_from_mapping(cfg_dict)
    r = run_single(cfg, value, t)
    return dict(
        trial=t, valid=r.valid, success=r.success, tie=r.tie, energy=r.energy,
        spins=r.spins.tolist(), mean_x=r.mean_x.tolist(), counter=r.counter,
        error=r.error, wall_time=r.wall_time,
    )


# -- sweeps ---------------------------------------------------------------
@dataclass
class SweepPoint:
    value: float | None
    trials: int
    successes: int
    failures: int
    invalid: int
    ties: int
    mean_wall_time: float
    rows: list = field(default_factory=list, repr=False)

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials

    @property
    def stderr(self) -> float:
        """Binomial standard error of the success rate."""
        p = self.success_rate
        return math.sqrt(p * (1.0 - p) / self.trials)


@dataclass
class SweepResult:
    param: str | None
    points: list[SweepPoint]
    files: list[Path] = field(default_factory=list)

    def rates(self) -> dict:
        return {p.value: p.success_rate for p in self.points}


def _aggregate(value, rows) -> SweepPoint:
    valid = [r for r in rows if r["valid"]]
    succ = sum(1 for r in valid if r["success"])
    inv = len(rows) - len(valid)
    return SweepPoint(
        value=value, trials=len(rows), successes=succ, failures=len(valid) - succ, invalid=inv,
        ties=sum(1 for r in valid if r["tie"]),
        mean_wall_time=float(np.mean([r["wall_time"] for r in rows])) if rows else 0.0,
        rows=rows,
    )


def _fmt(x) -> str:
    return repr(float(x))


def _point_name(param, value, k) -> str:
    return f"point_{k:03d}.csv" if param is None else f"point_{k:03d}_{param}={value!r}.csv"


POINT_COLUMNS = ("trial", "valid", "success", "tie", "energy", "spins", "counter", "error", "mean_x")
SUMMARY_COLUMNS = ("param", "value", "trials", "success", "failure", "invalid", "ties",
                   "success_rate", "stderr")


def write_sweep_csv(result: SweepResult, out_dir: str | os.PathLike) -> list[Path]:
    """One CSV per sweep point plus ``summary.csv``.  Wall times are kept out
    of the CSVs (they go to ``timing.json``) so reruns are byte-identical."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for k, pt in enumerate(result.points):
        path = out / _point_name(result.param, pt.value, k)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(POINT_COLUMNS)
            for r in pt.rows:
                spins = "".join("+" if s > 0 else "-" if s < 0 else "0" for s in r["spins"])
                w.writerow([r["trial"], int(r["valid"]), int(r["success"]), int(r["tie"]),
                            _fmt(r["energy"]), spins, r["counter"], r["error"],
                            ";".join(_fmt(x) for x in r["mean_x"])])
        files.append(path)
    path = out / "summary.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for pt in result.points:
            w.writerow([result.param or "", "" if pt.value is None else _fmt(pt.value), pt.trials,
                        pt.successes, pt.failures, pt.invalid, pt.ties,
                        _fmt(pt.success_rate), _fmt(pt.stderr)])
    files.append(path)
    with open(out / "timing.json", "w") as fh:
        json.dump({"mean_wall_time": [pt.mean_wall_time for pt in result.points]}, fh, indent=1)
    return files


def run_batch(config: ExperimentConfig, *, workers: int | None = None, write: bool = True,
              progress=None) -> SweepResult:
    """Run ``config.trials`` trials at every sweep point.

    Per-trial divergence or weight collapse marks the trial invalid instead of
    aborting.  Results depend only on the config, never on ``workers``.
    """
    workers = config.workers if workers is None else workers
    config.load_problem()  # fail early on a bad problem source
    cfg_dict = config.to_dict()
    cfg_dict.pop("output_dir", None)
    tasks = [(cfg_dict, v, t) for v in config.points() for t in range(config.trials)]
    if workers <= 1:
        rows = []
        for task in tasks:
            rows.append(_trial_task(task))
            if progress:
                progress(len(rows), len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_trial_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    points = []
    for k, v in enumerate(config.points()):
        chunk = rows[k * config.trials:(k + 1) * config.trials]
        points.append(_aggregate(v, sorted(chunk, key=lambda r: r["trial"])))
    result = SweepResult(config.sweep_param, points)
    if write and config.output_dir:
        result.files = write_sweep_csv(result, config.output_dir)
    return result


# -- traced single trials -------------------------------------------------
def run_traced_trials(config: ExperimentConfig, backends=BACKENDS, t: int = 0,
                      trace_every: int = 10) -> dict:
    """Single traced trial per backend; writes ``trace_<backend>.csv`` and
    ``record_<backend>.csv`` into ``config.output_dir`` when set.

    Returns ``{backend: TrialResult}``.
    """
    out = {}
    problem = config.load_problem()
    for b in backends:
        cfg = dataclasses.replace(config, backend=b)
        r = run_single(cfg, None, t, traces=True, trace_every=trace_every, problem=problem)
        out[b] = r
        if config.output_dir and r.trace is not None:
            d = Path(config.output_dir)
            d.mkdir(parents=True, exist_ok=True)
            r.trace.write_csv(d / f"trace_{b}.csv")
            r.trace.write_record_csv(d / f"record_{b}.csv")
    return out


def bifurcation_point(trace, floor_window=(0.1, 0.5), factor: float = 5.0, p_min: float | None = None,
                      pair=(0, 1)) -> float:
    """Pump rate where ``|<X_i> - <X_j>|`` first exceeds ``factor`` times its
    RMS over the pump window ``floor_window``.

    Only steps with ``p > p_min`` (default: upper end of the window) count.
    Returns NaN if the threshold is never crossed.
    """
    p = np.asarray(trace.p)
    x = trace["mean_x"]
    d = np.abs(x[:, pair[0]] - x[:, pair[1]])
    lo, hi = floor_window
    sel = (p >= lo) & (p <= hi)
    if not np.any(sel):
        raise ValueError("no trace samples inside the noise-floor window")
    floor = math.sqrt(float(np.mean(d[sel] ** 2)))
    p_min = hi if p_min is None else p_min
    hit = np.nonzero((p > p_min) & (d > factor * floor))[0]
    return float(p[hit[0]]) if hit.size else math.nan
