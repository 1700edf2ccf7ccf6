"""Experiment runner: trials over (strategy, sigma), MAE aggregation, scaling fits, CSV/JSON output.

Per-trial seeds come from ``SeedSequence([root_seed, trial, sigma bits])``.  The
strategy is deliberately left out of the key so that every strategy in a trial
sees the same initial design, the same weight samples and the same noise stream
(common random numbers); records are therefore independent of worker count and
of how many trials were requested.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import multiprocessing as mp
import os
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import yaml
from scipy import stats

from noisybq import oracle as _oracle
from noisybq.integrands import Integrand, NoisyOracle, WeightDensity, make_weight, parse_integrand
from noisybq.kernel import KernelSpec
from noisybq.quadrature import GpConfig, StrategyConfig, run_strategy

log = logging.getLogger(__name__)

DEFAULT_CHECKPOINTS = (4, 8, 16, 32, 64, 125, 250)
CSV_HEADER = ("strategy", "sigma", "trial", "t", "abs_error")


class ConfigError(ValueError):
    pass


class OracleFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    integrand: str
    strategies: tuple[StrategyConfig, ...]
    sigmas: tuple[float, ...]
    T_max: int
    kernel: KernelSpec | None = None
    fit_hyperparams: bool = False
    lam: float | None = None
    weight: dict = field(default_factory=lambda: {"kind": "uniform"})
    checkpoints: tuple[int, ...] = DEFAULT_CHECKPOINTS
    n_trials: int = 100
    root_seed: int = 0
    oracle: _oracle.OracleConfig = _oracle.OracleConfig()
    output: str | None = None
    workers: int = 1
    T_min_cut: int = 16

    def __post_init__(self):
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if self.T_max < 1:
            raise ConfigError("T_max must be >= 1")
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        if not self.sigmas or any(not (s >= 0 and math.isfinite(s)) for s in self.sigmas):
            raise ConfigError("sigmas must be a nonempty list of finite values >= 0")
        if any(not 1 <= t <= self.T_max for t in self.checkpoints):
            raise ConfigError(f"checkpoints must lie in [1, T_max={self.T_max}]")
        needs_gp = any(s.kind != "mc" and s.rho > 0 for s in self.strategies)
        if needs_gp and self.kernel is None and not self.fit_hyperparams:
            raise ConfigError("MVS strategies need a kernel (nu, lengthscale, scale) or fit_hyperparams: true")

    @classmethod
    def from_dict(cls, raw: dict) -> ExperimentConfig:
        raw = dict(raw)
        try:
            T_max = int(raw.pop("T_max"))
            integrand = str(raw.pop("integrand"))
            sigmas = tuple(float(s) for s in raw.pop("sigmas"))
            strat_raw = raw.pop("strategies")
        except KeyError as exc:
            raise ConfigError(f"missing required key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        try:
            strategies = tuple(_strategy(s, T_max) for s in strat_raw)
            kernel = raw.pop("kernel", None)
            if kernel is not None:
                kernel = KernelSpec(float(kernel["nu"]), float(kernel["lengthscale"]), float(kernel.get("scale", 1.0)))
            weight = raw.pop("weight", {"kind": "uniform"})
            if isinstance(weight, str):
                weight = {"kind": weight}
            oracle_cfg = _oracle.OracleConfig(**(raw.pop("oracle", None) or {}))
            if "checkpoints" in raw:
                raw["checkpoints"] = tuple(int(t) for t in raw["checkpoints"])
            else:
                raw["checkpoints"] = tuple(t for t in DEFAULT_CHECKPOINTS if t <= T_max) or (T_max,)
            cfg = cls(integrand=integrand, strategies=strategies, sigmas=sigmas, T_max=T_max, kernel=kernel,
                      weight=dict(weight), oracle=oracle_cfg, **raw)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid config: {exc}") from None
        return cfg

    @classmethod
    def from_yaml(cls, path) -> ExperimentConfig:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh)
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: expected a mapping at the top level")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        out = {
            "integrand": self.integrand,
            "weight": self.weight,
            "kernel": None if self.kernel is None else asdict(self.kernel),
            "fit_hyperparams": self.fit_hyperparams,
            "lam": self.lam,
            "strategies": [asdict(s) for s in self.strategies],
            "sigmas": list(self.sigmas),
            "T_max": self.T_max,
            "checkpoints": list(self.checkpoints),
            "n_trials": self.n_trials,
            "root_seed": self.root_seed,
            "oracle": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.oracle).items()},
            "output": self.output,
            "T_min_cut": self.T_min_cut,
        }
        return out

    def replace(self, **changes) -> ExperimentConfig:
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return ExperimentConfig(**fields)

    def gp_config(self) -> GpConfig | None:
        if self.kernel is None and not self.fit_hyperparams:
            return None
        nu = self.kernel.nu if self.kernel is not None else 1.5
        return GpConfig(kernel=self.kernel, lam=self.lam, fit=self.fit_hyperparams, nu_fixed=nu)

    def make_weight(self, d: int) -> WeightDensity:
        params = {k: v for k, v in self.weight.items() if k != "kind"}
        return make_weight(self.weight.get("kind", "uniform"), params, d=d)


def _strategy(raw, T_max: int) -> StrategyConfig:
    if isinstance(raw, str):
        raw = {"kind": raw}
    raw = dict(raw)
    raw.setdefault("T", T_max)
    if raw["T"] != T_max:
        raise ConfigError("strategy budgets must equal T_max")
    return StrategyConfig(**raw)


@dataclass(frozen=True)
class TrialRecord:
    strategy: str
    sigma: float
    trial: int
    checkpoints: tuple[int, ...]
    errors: tuple[float, ...]
    final_error: float
    truth: float = float("nan")
    truth_err: float = 0.0
    status: str = "ok"
    wall_time: float = field(default=0.0, compare=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class Truth:
    value: float
    err_estimate: float
    method: str
    converged: bool = True


@dataclass(frozen=True)
class AggregateRow:
    strategy: str
    sigma: float
    t: int
    mean: float
    std: float
    n: int


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r2: float
    t_min: int
    t_max: int
    n_points: int
    degenerate: bool = False
    strategy: str = ""
    sigma: float = float("nan")


def ground_truth(f: Integrand, weight: WeightDensity, cfg: _oracle.OracleConfig = _oracle.OracleConfig()) -> Truth:
    """Known integral when the integrand carries one (uniform weight), else the oracle."""
    if f.true_integral is not None and (weight.is_uniform or f.name == "constant"):
        return Truth(float(f.true_integral), 0.0, "exact")
    res = _oracle.integrate(f, weight, cfg)
    if not (res.converged and math.isfinite(res.value)):
        raise OracleFailure(
            f"oracle did not converge for {f.name}: value={res.value!r}, err_estimate={res.err_estimate:.3g} "
            f"({res.method}, {res.n_evals} evaluations)"
        )
    return Truth(res.value, res.err_estimate, res.method)


def trial_seed(root_seed: int, trial: int, sigma: float) -> np.random.SeedSequence:
    hi, lo = struct.unpack("<II", struct.pack("<d", float(sigma)))
    return np.random.SeedSequence([int(root_seed), int(trial), hi, lo])


@lru_cache(maxsize=4)
def _build(integrand: str) -> Integrand:
    return parse_integrand(integrand)


def run_trial(cfg: ExperimentConfig, strategy: StrategyConfig, sigma: float, trial: int,
              f: Integrand, weight: WeightDensity, truth: Truth) -> TrialRecord:
    sample_ss, noise_ss = trial_seed(cfg.root_seed, trial, sigma).spawn(2)
    start = time.perf_counter()
    label = strategy.label
    try:
        trace = run_strategy(
            NoisyOracle(f, sigma, np.random.default_rng(noise_ss)), weight, strategy,
            np.random.default_rng(sample_ss), cfg.gp_config(), cfg.checkpoints,
        )
    except Exception as exc:  # recorded and skipped by aggregation
        log.warning("trial %d (%s, sigma=%g) failed: %s", trial, label, sigma, exc)
        return TrialRecord(label, sigma, trial, (), (), float("nan"), truth.value, truth.err_estimate,
                           f"error: {exc}", time.perf_counter() - start)
    errors = tuple(float(abs(e - truth.value)) for e in trace.estimates)
    return TrialRecord(label, sigma, trial, tuple(int(t) for t in trace.checkpoints), errors, errors[-1],
                       truth.value, truth.err_estimate, "ok", time.perf_counter() - start)


_POOL_STATE: dict = {}


def _pool_task(task):
    cfg, f, weight, truth = _POOL_STATE["ctx"]
    s_idx, sigma, trial = task
    return run_trial(cfg, cfg.strategies[s_idx], sigma, trial, f, weight, truth)


def resolve_workers(requested: int | None) -> int:
    env = os.environ.get("BQ_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"BQ_WORKERS must be an integer, got {env!r}") from None
    return max(1, int(requested or 1))


def run_experiment(cfg: ExperimentConfig, workers: int | None = None, truth: Truth | None = None) -> list[TrialRecord]:
    """Run every (strategy, sigma, trial) cell; records come back in a fixed order."""
    try:
        f = _build(cfg.integrand)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"cannot build integrand {cfg.integrand!r}: {exc}") from None
    try:
        weight = cfg.make_weight(f.dim)
    except ValueError as exc:
        raise ConfigError(f"invalid weight: {exc}") from None
    if truth is None:
        truth = ground_truth(f, weight, cfg.oracle)
    tasks = [(i, float(sigma), trial) for i in range(len(cfg.strategies))
             for sigma in cfg.sigmas for trial in range(cfg.n_trials)]
    n_workers = min(resolve_workers(workers if workers is not None else cfg.workers), len(tasks))
    if n_workers > 1 and "fork" in mp.get_all_start_methods():
        _POOL_STATE["ctx"] = (cfg, f, weight, truth)
        try:
            with ProcessPoolExecutor(n_workers, mp_context=mp.get_context("fork")) as pool:
                return list(pool.map(_pool_task, tasks, chunksize=max(1, len(tasks) // (4 * n_workers))))
        finally:
            _POOL_STATE.clear()
    return [run_trial(cfg, cfg.strategies[i], sigma, trial, f, weight, truth) for i, sigma, trial in tasks]


def aggregate(records) -> list[AggregateRow]:
    """Mean and sample std of |I_t - I| per (strategy, sigma, t), sorted by key."""
    cells: dict = {}
    for rec in records:
        if not rec.ok:
            continue
        for t, err in zip(rec.checkpoints, rec.errors):
            cells.setdefault((rec.strategy, rec.sigma, t), []).append((rec.trial, err))
    rows = []
    for (strategy, sigma, t), vals in sorted(cells.items()):
        # sum in trial order so the result does not depend on record order
        errs = np.array([e for _, e in sorted(vals)])
        std = float(errs.std(ddof=1)) if errs.size > 1 else 0.0
        rows.append(AggregateRow(strategy, sigma, int(t), float(errs.mean()), std, int(errs.size)))
    return rows


def fit_scaling(rows, T_min_cut: int = 16, strategy: str = "", sigma: float = float("nan")) -> ScalingFit:
    """OLS of log2(mean error) on log2(t) over checkpoints t >= T_min_cut.

    ``rows`` is a sequence of ``AggregateRow`` (one cell) or of (t, mean) pairs.
    """
    pts = [(r.t, r.mean) if isinstance(r, AggregateRow) else (int(r[0]), float(r[1])) for r in rows]
    pts = sorted(p for p in pts if p[0] >= T_min_cut)
    if len(pts) < 4:
        raise ValueError(f"scaling fit needs >= 4 checkpoints at t >= {T_min_cut}, got {len(pts)}")
    ts = np.array([p[0] for p in pts], float)
    errs = np.array([p[1] for p in pts], float)
    if np.any(errs <= 0) or not np.all(np.isfinite(errs)):
        return ScalingFit(float("nan"), float("nan"), float("nan"), int(ts[0]), int(ts[-1]), len(pts), True,
                          strategy, sigma)
    res = stats.linregress(np.log2(ts), np.log2(errs))
    return ScalingFit(float(res.slope), float(res.intercept), float(res.rvalue**2), int(ts[0]), int(ts[-1]),
                      len(pts), False, strategy, sigma)


def fit_all(rows: list[AggregateRow], T_min_cut: int = 16) -> list[ScalingFit]:
    cells: dict = {}
    for r in rows:
        cells.setdefault((r.strategy, r.sigma), []).append(r)
    fits = []
    for (strategy, sigma), cell in sorted(cells.items()):
        try:
            fits.append(fit_scaling(cell, T_min_cut, strategy, sigma))
        except ValueError as exc:
            log.info("no fit for %s sigma=%g: %s", strategy, sigma, exc)
    return fits


def split_sweep(cfg: ExperimentConfig, splits, workers: int | None = None, truth: Truth | None = None):
    """Final-error mean/std per split fraction; returns (table rows, records).

    Every split runs the two-batch estimator; split 0 and split 1 are its
    degenerate plain-MC and MVS-only modes and reuse the same per-trial seeds.
    """
    splits = [float(s) for s in splits]
    if any(not 0.0 <= s <= 1.0 for s in splits):
        raise ConfigError("splits must lie in [0, 1]")
    base = cfg.strategies[0]
    strategies = tuple(StrategyConfig("mvs-mc", cfg.T_max, s, base.interleave, base.candidate_count,
                                      base.gamma, base.n_init) for s in splits)
    records = run_experiment(cfg.replace(strategies=strategies), workers, truth)
    table = []
    for s, strat in zip(splits, strategies):
        for sigma in cfg.sigmas:
            errs = np.array([r.final_error for r in records if r.ok and r.strategy == strat.label and r.sigma == sigma])
            std = float(errs.std(ddof=1)) if errs.size > 1 else 0.0
            table.append({"split": s, "sigma": sigma, "mean": float(errs.mean()) if errs.size else float("nan"),
                          "std": std, "n": int(errs.size)})
    return table, records


# --- output ------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(records, path) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in records:
            if not rec.ok:
                continue
            for t, err in zip(rec.checkpoints, rec.errors):
                writer.writerow([rec.strategy, _fmt(rec.sigma), rec.trial, t, _fmt(err)])


def read_csv(path) -> list[TrialRecord]:
    groups: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                strategy, sigma, trial, t, err = row
                key = (strategy, float(sigma), int(trial))
                groups.setdefault(key, []).append((int(t), float(err)))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed row {row!r}") from exc
    out = []
    for (strategy, sigma, trial), pts in groups.items():
        pts.sort()
        out.append(TrialRecord(strategy, sigma, trial, tuple(p[0] for p in pts), tuple(p[1] for p in pts),
                               pts[-1][1]))
    return out


def _jsonable(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def write_json(path, cfg: ExperimentConfig | None, rows: list[AggregateRow], fits: list[ScalingFit],
               truth: Truth | None, extra: dict | None = None) -> None:
    doc = {
        "config": cfg.to_dict() if cfg is not None else None,
        "root_seed": cfg.root_seed if cfg is not None else None,
        "truth": asdict(truth) if truth is not None else None,
        "aggregates": [asdict(r) for r in rows],
        "fits": [asdict(f) for f in fits],
    }
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=False)
        fh.write("\n")


def emit(records, fits, fmt: str, path, cfg: ExperimentConfig | None = None, truth: Truth | None = None) -> None:
    """Write per-checkpoint CSV rows or a JSON summary (config, aggregates, fits)."""
    if fmt == "csv":
        write_csv(records, path)
    elif fmt == "json":
        if truth is None:
            ok = [r for r in records if r.ok]
            if ok:
                truth = Truth(ok[0].truth, ok[0].truth_err, "recorded")
        write_json(path, cfg, aggregate(records), list(fits), truth)
    else:
        raise ValueError(f"unknown format {fmt!r}")
