"""Experiment grids over (generation method, scaling rule) pairs.

Three modes are supported:

esn-grid        sine/square classification with an echo state network
cs-grid         sparse recovery from noisy linear observations
isometry-sweep  near-isometry intervals against the matrix size

Every run derives its random streams from the base seed and a counter built
from (method index, scaling index, repetition, purpose), so a run's inputs do
not depend on which other runs are in the grid or on how many worker
processes execute it. Results are written as CSV and JSON.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import csrecovery as cs
from .datasets import CLASSES, gen_wave_dataset
from .ensembles import GEN_TAGS, IDENTITY_TAG, SCALE_TAGS, GenMethod, ScaleMethod, WeightSpec, build
from .errors import DegenerateMatrixError, IsolabError, SingularityError, ValidationError
from .esn import (EsnConfig, ReservoirStates, accuracy, classify_pointwise, one_hot, run_reservoir,
                  separation_ratio, train_readout)
from .isometry import DEFAULT_SAMPLES, estimate_nii, estimate_rii
from .numerics import RngStream, Seed, spectral_radius

log = logging.getLogger(__name__)

MODES = ("esn-grid", "cs-grid", "isometry-sweep")
FORMATS = ("csv", "json")
THREADS_ENV = "ISOLAB_THREADS"

# Purpose tags for the per-run substreams.
WEIGHTS, TRAIN_DATA, TEST_DATA, NII, SIGNAL, NOISE, RII = range(7)
_PURPOSES = 16
_MAX_REPS = 2 ** 20

# Failures that exclude a run from aggregation instead of aborting the grid.
RUN_FAILURES = (DegenerateMatrixError, SingularityError)


def run_seed(base: int, method: str, scaling: str, rep: int, purpose: int, extra: int = 0) -> Seed:
    """Substream for one (method, scaling, repetition, purpose) cell.

    The stream index is a mixed-radix counter, so distinct cells can never
    share a stream. ``extra`` separates sweep sizes.
    """
    if not 0 <= rep < _MAX_REPS:
        raise ValidationError(f"repetition index {rep} out of range")
    mi = (GEN_TAGS + (IDENTITY_TAG,)).index(method)
    si = SCALE_TAGS.index(scaling)
    stream = (((extra * 8 + mi) * 8 + si) * _MAX_REPS + rep) * _PURPOSES + purpose
    return Seed(base, stream)


# ---------------------------------------------------------------- configuration

@dataclass(frozen=True)
class EsnGridSettings:
    n_nodes: int = 200
    period: int = 100
    repeats: int = 20
    n_per_class: int = 1
    test_per_class: int = 1
    noise_sigma: float = 0.05
    noise_as_variance: bool = False
    accuracy: str = "held-out"  # or "train"
    leak: float = 1.0
    input_scale: float = 1.0
    bias: float = math.pi / 4
    washout: int = 0
    ridge_lambda: float | None = None
    sparsity_fraction: float = 0.2
    nii_samples: int = DEFAULT_SAMPLES


@dataclass(frozen=True)
class CsGridSettings:
    rows: int = 200
    cols: int = 800
    sparsity: int = 30
    noise_sigma: float = 0.05
    noise_as_variance: bool = False
    constraint: str = cs.CORRELATION
    delta: float | None = None  # None: universal threshold
    estimator: str = "gauss-dantzig"  # or "dantzig"
    reweight: int = 1  # reweighted l1 passes before the refit (gauss-dantzig only)
    reweight_eps: float = 0.1
    table2_r4_as: str = "R5"  # or "R4strict"
    rii_sparsity: int = 30
    rii_samples: int = DEFAULT_SAMPLES
    nii_samples: int = DEFAULT_SAMPLES
    sparsity_fraction: float = 0.2


@dataclass(frozen=True)
class SweepSettings:
    sizes: tuple[int, ...] = (50, 100, 200, 400)
    samples: int = DEFAULT_SAMPLES
    sparsity_fraction: float = 0.2


_DEFAULT_SCALINGS = {
    "esn-grid": SCALE_TAGS,
    "cs-grid": ("R1", "R2", "R4"),
    "isometry-sweep": ("R1", "R2"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    methods: tuple[str, ...] = GEN_TAGS
    scalings: tuple[str, ...] | None = None  # None: the mode's default list
    repetitions: int = 20
    seed: int = 0
    esn: EsnGridSettings = field(default_factory=EsnGridSettings)
    cs: CsGridSettings = field(default_factory=CsGridSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    out_dir: str = "results"
    formats: tuple[str, ...] = FORMATS

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.scalings is None:
            object.__setattr__(self, "scalings", _DEFAULT_SCALINGS[self.mode])
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "scalings", tuple(self.scalings))
        allowed = GEN_TAGS + ((IDENTITY_TAG,) if self.mode == "isometry-sweep" else ())
        for m in self.methods:
            if m not in allowed:
                raise ValidationError(f"unknown method {m!r}")
        for s in self.scalings:
            if s not in SCALE_TAGS:
                raise ValidationError(f"unknown scaling {s!r}")
        if not self.methods or not self.scalings:
            raise ValidationError("methods and scalings must be non-empty")
        if len(set(self.methods)) != len(self.methods) or len(set(self.scalings)) != len(self.scalings):
            raise ValidationError("methods and scalings must not repeat")
        if not 1 <= self.repetitions < _MAX_REPS:
            raise ValidationError("repetitions must be positive")
        Seed(self.seed)
        for f in self.formats:
            if f not in FORMATS:
                raise ValidationError(f"unknown output format {f!r}")
        if self.mode == "cs-grid":
            c = self.cs
            if c.table2_r4_as not in ("R5", "R4strict"):
                raise ValidationError("table2_r4_as must be R5 or R4strict")
            if c.constraint not in (cs.CORRELATION, cs.RESIDUAL):
                raise ValidationError(f"unknown constraint form {c.constraint!r}")
            if c.estimator not in ("gauss-dantzig", "dantzig"):
                raise ValidationError(f"unknown estimator {c.estimator!r}")
            for s in self.scalings:
                if s == "R3" or (s == "R4" and c.table2_r4_as == "R4strict"):
                    raise ValidationError(f"{s} needs a square matrix and cannot be used for recovery")
        if self.mode == "esn-grid" and self.esn.accuracy not in ("held-out", "train"):
            raise ValidationError("esn.accuracy must be held-out or train")
        if self.mode == "isometry-sweep" and (not self.sweep.sizes or min(self.sweep.sizes) < 1):
            raise ValidationError("sweep sizes must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {"esn": EsnGridSettings, "cs": CsGridSettings}
_GRID_KEYS = ("methods", "scalings", "repetitions")
_MODE_SECTION = {"esn-grid": "esn", "cs-grid": "cs", "isometry-sweep": None}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"not a boolean: {text!r}")


def _convert(text: str, kind: Any, key: str):
    text = text.strip()
    try:
        if kind in (bool, "bool"):
            return _parse_bool(text)
        if kind in (int, "int"):
            return int(text)
        if kind in (float, "float"):
            return float(text)
        if kind in ("float | None",):
            return None if text.lower() in ("none", "auto", "universal", "") else float(text)
    except ValueError as exc:
        raise ValidationError(f"{key}: cannot parse {text!r}") from exc
    return text


def _split_list(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if "." not in key:
            raise ValidationError(f"{source}:{lineno}: key {key!r} needs a namespace (esn., cs., rng., out.)")
        if key in values:
            raise ValidationError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def load_config_file(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config_text(text, str(path))


def build_config(mode: str, values: dict[str, str] | None = None, **overrides) -> ExperimentConfig:
    """Assemble an :class:`ExperimentConfig` from flat key/value strings.

    Keys of the other grid's namespace are accepted and ignored so one file
    can hold both grids. ``overrides`` (already typed) win over ``values``.
    """
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}")
    values = dict(values or {})
    top: dict[str, Any] = {}
    sections: dict[str, dict[str, Any]] = {"esn": {}, "cs": {}}
    own = _MODE_SECTION[mode]
    for key, text in values.items():
        ns, name = key.split(".", 1)
        if ns == "rng":
            if name != "seed":
                raise ValidationError(f"unknown key {key!r}")
            top["seed"] = _convert(text, int, key)
        elif ns == "out":
            if name == "dir":
                top["out_dir"] = text
            elif name == "formats":
                top["formats"] = _split_list(text)
            else:
                raise ValidationError(f"unknown key {key!r}")
        elif ns in _SECTIONS:
            if name in _GRID_KEYS:
                if ns == own:
                    top[name] = _convert(text, int, key) if name == "repetitions" else _split_list(text)
                continue
            kinds = {f.name: f.type for f in fields(_SECTIONS[ns])}
            if name not in kinds:
                raise ValidationError(f"unknown key {key!r}")
            sections[ns][name] = _convert(text, kinds[name], key)
        else:
            raise ValidationError(f"unknown namespace in key {key!r}")
    esn_over = overrides.pop("esn", {})
    cs_over = overrides.pop("cs", {})
    sweep_over = overrides.pop("sweep", {})
    top.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(
        mode=mode,
        esn=replace(EsnGridSettings(), **sections["esn"], **esn_over),
        cs=replace(CsGridSettings(), **sections["cs"], **cs_over),
        sweep=replace(SweepSettings(), **sweep_over),
        **top,
    )


# ---------------------------------------------------------------- results

@dataclass(frozen=True)
class AggregateRow:
    method: str
    scaling: str
    rho_mean: float | None
    rho_std: float | None
    metrics: dict[str, tuple[float | None, float | None]]  # name -> (mean, std)
    a_mean: float | None
    b_mean: float | None
    reps: int
    failures: int


@dataclass
class GridResult:
    mode: str
    rows: list[AggregateRow]
    records: list[dict]  # one per run, in grid order
    metric_names: tuple[str, ...]
    series: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)


def _mean_std(values: Sequence[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def aggregate(records: Sequence[dict], pairs: Sequence[tuple[str, str]],
              metric_names: Sequence[str]) -> list[AggregateRow]:
    """Per-pair arithmetic means over the successful runs, in ``pairs`` order."""
    rows = []
    for method, scaling in pairs:
        mine = [r for r in records if r["method"] == method and r["scaling"] == scaling]
        ok = [r for r in mine if r["status"] == "ok"]
        rho = _mean_std([r["rho"] for r in ok])
        metrics = {m: _mean_std([r[m] for r in ok if r.get(m) is not None]) for m in metric_names}
        rows.append(AggregateRow(method, scaling, rho[0], rho[1], metrics,
                                 _mean_std([r["a"] for r in ok])[0],
                                 _mean_std([r["b"] for r in ok])[0],
                                 len(ok), len(mine) - len(ok)))
    return rows


# ---------------------------------------------------------------- parallel map

def thread_count(requested: int | None = None) -> int:
    if requested is not None:
        n = requested
    else:
        env = os.environ.get(THREADS_ENV)
        try:
            n = int(env) if env else (os.cpu_count() or 1)
        except ValueError as exc:
            raise ValidationError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    if n < 1:
        raise ValidationError("thread count must be positive")
    return n


def _limit_blas():
    # One BLAS thread per worker: results then do not depend on the degree of
    # parallelism, which keeps grid outputs bit-identical.
    threadpool_limits(1)


def _call(job):
    fn, args = job
    with threadpool_limits(1):
        return fn(*args)


def parallel_map(fn: Callable, arg_list: Sequence[tuple], threads: int | None = None) -> list:
    """Ordered map over worker processes (in-process when one thread)."""
    n = thread_count(threads)
    jobs = [(fn, a) for a in arg_list]
    if n == 1 or len(jobs) <= 1:
        return [_call(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n, initializer=_limit_blas) as pool:
        return list(pool.map(_call, jobs))


# ---------------------------------------------------------------- esn grid

ESN_METRICS = ("acc", "acc_sine", "acc_square", "spectral_radius", "sep")


def _noise_std(sigma: float, as_variance: bool) -> float:
    return math.sqrt(sigma) if as_variance else sigma


def _drive(cfg: EsnConfig, w_scaled, dataset) -> list[ReservoirStates]:
    return [run_reservoir(cfg, s.input, w_scaled).with_label(s.label) for s in dataset.sequences]


def _esn_job(cfg: ExperimentConfig, method: str, scaling: str, rep: int) -> dict:
    e = cfg.esn
    rec: dict[str, Any] = {"method": method, "scaling": scaling, "rep": rep}
    seed = lambda purpose: run_seed(cfg.seed, method, scaling, rep, purpose)
    spec = WeightSpec(GenMethod(method, e.sparsity_fraction), ScaleMethod(scaling, e.nii_samples),
                      e.n_nodes, e.n_nodes, seed(WEIGHTS))
    try:
        w, rho = build(spec)
        w_scaled = rho * w
        ecfg = EsnConfig(e.n_nodes, e.leak, e.input_scale, e.bias, weight_spec=spec,
                         ridge_lambda=e.ridge_lambda, washout=e.washout)
        sigma = _noise_std(e.noise_sigma, e.noise_as_variance)
        train = gen_wave_dataset(e.period, e.repeats, e.n_per_class, sigma, RngStream(seed(TRAIN_DATA)))
        test = gen_wave_dataset(e.period, e.repeats, e.test_per_class, sigma, RngStream(seed(TEST_DATA)))
        train_runs, test_runs = _drive(ecfg, w_scaled, train), _drive(ecfg, w_scaled, test)
        x_train, x_test = ReservoirStates.concat(train_runs), ReservoirStates.concat(test_runs)
        readout = train_readout(x_train, one_hot(x_train.labels, len(CLASSES)), ecfg.ridge_lambda)
        for tag, x in (("train", x_train), ("test", x_test)):
            acc = accuracy(classify_pointwise(readout, x), x.labels, len(CLASSES))
            rec[f"{tag}_acc"] = acc.overall
            rec[f"{tag}_acc_sine"], rec[f"{tag}_acc_square"] = acc.per_class
        pick = "test" if e.accuracy == "held-out" else "train"
        for m in ("acc", "acc_sine", "acc_square"):
            rec[m] = rec[f"{pick}_{m}"]
        rec["spectral_radius"] = spectral_radius(w_scaled)
        runs = train_runs + test_runs
        rec["sep"] = separation_ratio(runs, [int(r.labels[0]) for r in runs], len(CLASSES))[1]
        iv = estimate_nii(w, rho, e.nii_samples, RngStream(seed(NII)))
    except RUN_FAILURES as exc:
        rec.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        return rec
    rec.update(status="ok", rho=rho, a=iv.lower, b=iv.upper, ridge_lambda=readout.lambda_used)
    return rec


def run_esn_grid(cfg: ExperimentConfig, threads: int | None = None) -> GridResult:
    if cfg.mode != "esn-grid":
        raise ValidationError("run_esn_grid needs mode esn-grid")
    pairs = [(m, s) for m in cfg.methods for s in cfg.scalings]
    args = [(cfg, m, s, r) for m, s in pairs for r in range(cfg.repetitions)]
    log.info("esn grid: %d pairs x %d repetitions", len(pairs), cfg.repetitions)
    records = parallel_map(_esn_job, args, threads)
    return GridResult("esn-grid", aggregate(records, pairs, ESN_METRICS), records, ESN_METRICS,
                      metadata=_metadata(cfg))


# ---------------------------------------------------------------- cs grid

CS_METRICS = ("mse",)


def effective_cs_scaling(cfg: ExperimentConfig, scaling: str) -> str:
    """Rule actually applied for a cs-grid row label (``R4`` rows map to R5 by default)."""
    if scaling == "R4" and cfg.cs.table2_r4_as == "R5":
        return "R5"
    return scaling


def _cs_job(cfg: ExperimentConfig, method: str, scaling: str, rep: int) -> tuple[dict, dict | None]:
    c = cfg.cs
    rec: dict[str, Any] = {"method": method, "scaling": scaling, "rep": rep}
    seed = lambda purpose: run_seed(cfg.seed, method, scaling, rep, purpose)
    rule = effective_cs_scaling(cfg, scaling)
    rec["rule"] = rule
    spec = WeightSpec(GenMethod(method, c.sparsity_fraction), ScaleMethod(rule, c.nii_samples),
                      c.rows, c.cols, seed(WEIGHTS))
    try:
        w, rho = build(spec)
        signal = cs.gen_sparse_signal(c.cols, c.sparsity, RngStream(seed(SIGNAL)))
        sigma = _noise_std(c.noise_sigma, c.noise_as_variance)
        inst = cs.observe(signal, w, rho, sigma, RngStream(seed(NOISE)))
        if c.estimator == "gauss-dantzig":
            res = cs.gauss_dantzig_select(inst, c.delta, c.constraint, reweight=c.reweight,
                                          reweight_eps=c.reweight_eps)
        else:
            res = cs.dantzig_select(inst, c.delta, c.constraint)
        iv = estimate_rii(w, rho, c.rii_sparsity, c.rii_samples, RngStream(seed(RII)))
    except RUN_FAILURES as exc:
        rec.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        return rec, None
    rec.update(status="ok", rho=rho, mse=res.mse, a=iv.lower, b=iv.upper,
               delta=res.constraint_level, solver_status=res.solver_status,
               iterations=res.iterations, duality_gap=res.duality_gap,
               constraint_violation=res.constraint_violation,
               support_size=int(np.count_nonzero(res.estimate)))
    scatter = None
    if rep == 0:
        scatter = {"beta": signal.dense().tolist(), "beta_hat": res.estimate.tolist()}
    return rec, scatter


def run_cs_grid(cfg: ExperimentConfig, threads: int | None = None) -> GridResult:
    if cfg.mode != "cs-grid":
        raise ValidationError("run_cs_grid needs mode cs-grid")
    pairs = [(m, s) for m in cfg.methods for s in cfg.scalings]
    args = [(cfg, m, s, r) for m, s in pairs for r in range(cfg.repetitions)]
    log.info("cs grid: %d pairs x %d repetitions", len(pairs), cfg.repetitions)
    out = parallel_map(_cs_job, args, threads)
    records = [r for r, _ in out]
    series = {"recovery_scatter": [dict(method=r["method"], scaling=r["scaling"], **s)
                                   for r, s in out if s is not None]}
    meta = _metadata(cfg)
    meta["lp_nonoptimal_runs"] = sum(1 for r in records
                                     if r["status"] == "ok" and r["solver_status"] != "optimal")
    return GridResult("cs-grid", aggregate(records, pairs, CS_METRICS), records, CS_METRICS,
                      series, meta)


# ---------------------------------------------------------------- isometry sweep

SWEEP_METRICS = ("n",)


def _sweep_job(cfg: ExperimentConfig, method: str, n: int, scaling: str, rep: int) -> dict:
    sw = cfg.sweep
    size_index = cfg.sweep.sizes.index(n)
    seed = lambda purpose: run_seed(cfg.seed, method, scaling, rep, purpose, extra=size_index + 1)
    rec: dict[str, Any] = {"method": method, "scaling": scaling, "n": n, "rep": rep}
    spec = WeightSpec(GenMethod(method, sw.sparsity_fraction), ScaleMethod(scaling, sw.samples),
                      n, n, seed(WEIGHTS))
    try:
        w, rho = build(spec)
        iv = estimate_nii(w, rho, sw.samples, RngStream(seed(NII)))
    except RUN_FAILURES as exc:
        rec.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        return rec
    rec.update(status="ok", rho=rho, a=iv.lower, b=iv.upper)
    return rec


def run_isometry_sweep(cfg: ExperimentConfig, threads: int | None = None) -> GridResult:
    """Mean near-isometry endpoints per (method, N, scaling).

    Rows carry ``n`` as a metric column; plot-ready series hold one (N, a, b)
    curve per method and scaling.
    """
    if cfg.mode != "isometry-sweep":
        raise ValidationError("run_isometry_sweep needs mode isometry-sweep")
    sizes = cfg.sweep.sizes
    args = [(cfg, m, n, s, r) for m in cfg.methods for n in sizes for s in cfg.scalings
            for r in range(cfg.repetitions)]
    records = parallel_map(_sweep_job, args, threads)
    rows, curves = [], []
    for m in cfg.methods:
        for s in cfg.scalings:
            curve = {"method": m, "scaling": s, "n": [], "a": [], "b": []}
            for n in sizes:
                sub = [r for r in records if r["n"] == n]
                row = aggregate(sub, [(m, s)], SWEEP_METRICS)[0]
                rows.append(row)
                curve["n"].append(n)
                curve["a"].append(row.a_mean)
                curve["b"].append(row.b_mean)
            curves.append(curve)
    # Aggregation above went per size; keep rows ordered method, N, scaling.
    order = {(m, n, s): i for i, (m, n, s) in enumerate(
        (m, n, s) for m in cfg.methods for n in sizes for s in cfg.scalings)}
    rows.sort(key=lambda r: order[(r.method, int(r.metrics["n"][0]), r.scaling)])
    return GridResult("isometry-sweep", rows, records, SWEEP_METRICS, {"nii_vs_n": curves},
                      _metadata(cfg))


def run(cfg: ExperimentConfig, threads: int | None = None) -> GridResult:
    runner = {"esn-grid": run_esn_grid, "cs-grid": run_cs_grid,
              "isometry-sweep": run_isometry_sweep}[cfg.mode]
    return runner(cfg, threads)


def _metadata(cfg: ExperimentConfig) -> dict:
    meta: dict[str, Any] = {"config": cfg.to_dict()}
    if cfg.mode == "cs-grid":
        meta["table2_r4_as"] = cfg.cs.table2_r4_as
        meta["noise_reading"] = "variance" if cfg.cs.noise_as_variance else "std"
    elif cfg.mode == "esn-grid":
        meta["accuracy_reported"] = cfg.esn.accuracy
        meta["noise_reading"] = "variance" if cfg.esn.noise_as_variance else "std"
    return meta


# ---------------------------------------------------------------- output

def csv_header(metric_names: Sequence[str]) -> list[str]:
    cols = ["method", "scaling", "rho_mean", "rho_std"]
    for m in metric_names:
        cols += [f"{m}_mean", f"{m}_std"]
    return cols + ["a_mean", "b_mean", "reps", "failures"]


def row_to_dict(row: AggregateRow, metric_names: Sequence[str]) -> dict:
    d: dict[str, Any] = {"method": row.method, "scaling": row.scaling,
                         "rho_mean": row.rho_mean, "rho_std": row.rho_std}
    for m in metric_names:
        d[f"{m}_mean"], d[f"{m}_std"] = row.metrics[m]
    d.update(a_mean=row.a_mean, b_mean=row.b_mean, reps=row.reps, failures=row.failures)
    return d


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def check_consistency(result: GridResult) -> None:
    """Recompute every aggregate from the raw records and compare exactly."""
    by_key: dict[tuple, list[dict]] = {}
    for r in result.records:
        by_key.setdefault((r["method"], r["scaling"], r.get("n")), []).append(r)
    for row in result.rows:
        n = int(row.metrics["n"][0]) if "n" in row.metrics else None
        redo = aggregate(by_key.get((row.method, row.scaling, n), []),
                         [(row.method, row.scaling)], result.metric_names)[0]
        if redo != row:
            raise IsolabError(f"aggregate for {row.method}/{row.scaling} disagrees with its raw records")


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def emit_results(result: GridResult, destination, formats: Sequence[str] = FORMATS) -> list[Path]:
    """Write aggregate rows, raw records and plot series under ``destination``.

    Files are named after the mode: ``<mode>.csv``, ``<mode>.json``,
    ``<mode>_runs.json`` and ``<mode>_series.json``.
    """
    check_consistency(result)
    dest = Path(destination)
    try:
        dest.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot create {dest}: {exc.strerror}") from exc
    header = csv_header(result.metric_names)
    rows = [row_to_dict(r, result.metric_names) for r in result.rows]
    written = []
    if "csv" in formats:
        lines = [",".join(header)] + [",".join(_fmt(d[c]) for c in header) for d in rows]
        p = dest / f"{result.mode}.csv"
        _write(p, "\n".join(lines) + "\n")
        written.append(p)
    if "json" in formats:
        p = dest / f"{result.mode}.json"
        _write(p, _dumps({"columns": header, "rows": rows, "metadata": result.metadata}))
        written.append(p)
    p = dest / f"{result.mode}_runs.json"
    _write(p, _dumps(result.records))
    written.append(p)
    if result.series:
        p = dest / f"{result.mode}_series.json"
        _write(p, _dumps(result.series))
        written.append(p)
    return written


def read_csv_rows(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
