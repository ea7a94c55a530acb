"""Config-driven experiment runner.

A run builds a problem from a seed, steps one optimizer for ``steps``
iterations and records metrics every ``record_every`` steps. Randomness is
keyed by ``(seed, stream, step)`` so every output byte is a function of the
config alone.
"""
import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from mlorc.errors import ConfigError, DivergenceError, DomainError
from mlorc.linalg import frob_norm, l11_norm
from mlorc.metrics import measured_state_elements, topk_ratio
from mlorc.optimizers import KINDS, HyperParams, init_state, optimizer_step
from mlorc.problems import load_logistic_csv, make_logistic, make_quadratic
from mlorc.lowrank import RngStream

OUTPUT_ROOT_ENV = "MLORC_OUTPUT_ROOT"

CSV_COLUMNS = (
    "step", "loss", "grad_l11", "grad_frob", "topk_g", "topk_m", "topk_v",
    "comp_err_m", "zeta", "state_elements",
)

PROBLEM_KINDS = ("quadratic", "logistic")
SCHEDULES = ("constant", "linear")

# stream ids for RngStream keys
_STREAM_GRAD = 1
_STREAM_INIT = 2
_STREAM_OPT = 3


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    m: int
    n: Optional[int] = None
    planted_rank: Optional[int] = None
    noise_std: float = 0.0
    spread: float = 2.0
    target_noise: float = 0.0
    n_samples: int = 256
    l2_reg: float = 1e-3
    dataset_path: Optional[str] = None
    init_scale: float = 0.0


@dataclass(frozen=True)
class OptimizerSpec:
    kind: str
    hp: HyperParams
    schedule: str = "constant"
    warmup_ratio: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    problem: ProblemSpec
    optimizer: OptimizerSpec
    steps: int
    record_every: int = 1
    spectral_k: int = 8  # 0 disables the topk columns
    warm_start_lion_momentum: bool = False
    output_path: str = ""


@dataclass
class RunRecord:
    step: int
    loss: float
    grad_l11: float
    grad_frob: float
    topk_g: Optional[float] = None
    topk_m: Optional[float] = None
    topk_v: Optional[float] = None
    comp_err_m: Optional[float] = None
    zeta: Optional[float] = None
    state_elements: Optional[int] = None
    weights: Optional[np.ndarray] = field(default=None, repr=False, compare=False)


def default_hyperparams(kind):
    """Per-kind defaults; the compressed AdamW variant uses beta1 = 0.8."""
    if kind in ("lion", "mlorc-lion"):
        return {"alpha": 1e-4, "beta1": 0.9, "beta2": 0.99}
    if kind == "mlorc-adamw":
        return {"alpha": 1e-3, "beta1": 0.8, "beta2": 0.999}
    return {"alpha": 1e-3, "beta1": 0.9, "beta2": 0.999}


_HP_FIELDS = {f.name for f in dataclasses.fields(HyperParams)}
_OPT_EXTRA = {"kind", "schedule", "warmup_ratio"}
_PROBLEM_FIELDS = {f.name for f in dataclasses.fields(ProblemSpec)}
_TOP_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def _require(d, key, where):
    if key not in d:
        raise ConfigError("missing required field", f"{where}{key}")
    return d[key]


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError("must be an object", where.rstrip(".") or "config")
    for key in d:
        if key not in allowed:
            raise ConfigError("unknown field", f"{where}{key}")


def _int(value, name, low=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"must be an integer, got {value!r}", name)
    if low is not None and value < low:
        raise ConfigError(f"must be >= {low}, got {value}", name)
    return value


def _num(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"must be a number, got {value!r}", name)
    return float(value)


def config_from_dict(raw):
    _check_keys(raw, _TOP_FIELDS, "")

    praw = _require(raw, "problem", "")
    _check_keys(praw, _PROBLEM_FIELDS, "problem.")
    pkind = _require(praw, "kind", "problem.")
    if pkind not in PROBLEM_KINDS:
        raise ConfigError(f"must be one of {PROBLEM_KINDS}, got {pkind!r}", "problem.kind")
    m = _int(_require(praw, "m", "problem."), "problem.m", 1)
    if pkind == "quadratic" or praw.get("dataset_path") is None:
        n = _int(_require(praw, "n", "problem."), "problem.n", 1)
    else:
        n = praw.get("n")
    pkw = dict(praw, kind=pkind, m=m, n=n)
    for key in ("noise_std", "spread", "target_noise", "l2_reg", "init_scale"):
        if key in pkw:
            pkw[key] = _num(pkw[key], f"problem.{key}")
            if pkw[key] < 0:
                raise ConfigError(f"must be >= 0, got {pkw[key]}", f"problem.{key}")
    if pkw.get("planted_rank") is not None:
        pkw["planted_rank"] = _int(pkw["planted_rank"], "problem.planted_rank", 1)
        if n is not None and pkw["planted_rank"] > min(m, n):
            raise ConfigError(f"must be <= {min(m, n)}", "problem.planted_rank")
    if "n_samples" in pkw:
        pkw["n_samples"] = _int(pkw["n_samples"], "problem.n_samples", 1)
    problem = ProblemSpec(**pkw)

    oraw = _require(raw, "optimizer", "")
    _check_keys(oraw, _HP_FIELDS | _OPT_EXTRA, "optimizer.")
    okind = _require(oraw, "kind", "optimizer.")
    if okind not in KINDS:
        raise ConfigError(f"must be one of {KINDS}, got {okind!r}", "optimizer.kind")
    hp_kw = default_hyperparams(okind)
    hp_kw.update({k: v for k, v in oraw.items() if k in _HP_FIELDS})
    for key, value in hp_kw.items():
        if key in ("rank", "oversample", "batch_size", "galore_update_freq"):
            _int(value, f"optimizer.{key}")
        else:
            _num(value, f"optimizer.{key}")
    try:
        hp = HyperParams(**hp_kw)
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], f"optimizer.{exc.field}") from None
    if okind == "galore-adamw" and n is not None and hp.rank > min(m, n):
        raise ConfigError(f"must be <= min(m, n) = {min(m, n)} for galore-adamw", "optimizer.rank")
    schedule = oraw.get("schedule", "constant")
    if schedule not in SCHEDULES:
        raise ConfigError(f"must be one of {SCHEDULES}, got {schedule!r}", "optimizer.schedule")
    warmup = _num(oraw.get("warmup_ratio", 0.0), "optimizer.warmup_ratio")
    if not 0.0 <= warmup < 1.0:
        raise ConfigError(f"must be in [0, 1), got {warmup}", "optimizer.warmup_ratio")
    optimizer = OptimizerSpec(okind, hp, schedule, warmup)

    steps = _int(_require(raw, "steps", ""), "steps", 1)
    record_every = _int(raw.get("record_every", 1), "record_every", 1)
    if record_every > steps:
        raise ConfigError(f"must be <= steps ({steps}), got {record_every}", "record_every")
    seed = _int(raw.get("seed", 0), "seed")
    if not -(2 ** 63) <= seed < 2 ** 64:
        raise ConfigError("must fit in 64 bits", "seed")
    warm = raw.get("warm_start_lion_momentum", False)
    if not isinstance(warm, bool):
        raise ConfigError(f"must be a boolean, got {warm!r}", "warm_start_lion_momentum")
    output_path = raw.get("output_path", "")
    if not isinstance(output_path, str):
        raise ConfigError("must be a string", "output_path")
    return ExperimentConfig(
        seed=seed,
        problem=problem,
        optimizer=optimizer,
        steps=steps,
        record_every=record_every,
        spectral_k=_int(raw.get("spectral_k", 8), "spectral_k", 0),
        warm_start_lion_momentum=warm,
        output_path=output_path,
    )


def parse_config(text):
    """Parse and validate a JSON experiment config, filling defaults."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return config_from_dict(raw)


def config_to_dict(cfg):
    d = dataclasses.asdict(cfg)
    hp = d["optimizer"].pop("hp")
    d["optimizer"].update(hp)
    return d


def build_problem(spec, seed):
    if spec.kind == "quadratic":
        problem, _ = make_quadratic(
            spec.m, spec.n, spec.planted_rank, spec.noise_std, seed,
            spread=spec.spread, target_noise=spec.target_noise,
        )
        return problem
    if spec.dataset_path:
        return load_logistic_csv(spec.dataset_path, m=spec.m, l2_reg=spec.l2_reg)
    return make_logistic(spec.n_samples, spec.m, spec.n, seed=seed, l2_reg=spec.l2_reg)


def lr_factor(step, steps, schedule, warmup_ratio):
    """Multiplier on alpha at 1-based ``step``; stays strictly positive."""
    if schedule == "constant":
        return 1.0
    warm = int(math.ceil(warmup_ratio * steps))
    if warm and step <= warm:
        return step / warm
    return (steps - step + 1) / (steps - warm)


def _safe_topk(a, k):
    if a is None or k == 0:
        return None
    try:
        return topk_ratio(a, min(k, min(a.shape))).ratio
    except DomainError:
        return None


def resolve_output(path):
    root = os.environ.get(OUTPUT_ROOT_ENV)
    p = Path(path)
    if root and not p.is_absolute():
        p = Path(root) / p
    return p


def _execute(cfg, callback=None, on_record=None):
    problem = build_problem(cfg.problem, cfg.seed)
    shape = problem.shape
    kind = cfg.optimizer.kind
    hp = cfg.optimizer.hp
    if cfg.problem.init_scale > 0:
        w = cfg.problem.init_scale * RngStream(cfg.seed, _STREAM_INIT).normal(shape)
    else:
        w = np.zeros(shape)
    state = init_state(kind, shape, hp, warm_start=cfg.warm_start_lion_momentum)

    for t in range(1, cfg.steps + 1):
        loss = problem.loss(w)
        if not math.isfinite(loss):
            raise DivergenceError(t)
        sample = problem.stoch_grad(w, hp.batch_size, RngStream(cfg.seed, _STREAM_GRAD, t))
        factor = lr_factor(t, cfg.steps, cfg.optimizer.schedule, cfg.optimizer.warmup_ratio)
        step_hp = hp if factor == 1.0 else dataclasses.replace(hp, alpha=hp.alpha * factor)
        trace = {}
        w_prev = w
        w, state = optimizer_step(
            kind, w, sample.grad, state, step_hp,
            rng=RngStream(cfg.seed, _STREAM_OPT, 0, t), trace=trace,
        )
        if callback is not None:
            callback(t, w_prev, sample.grad, state, trace)
        if not np.all(np.isfinite(w)):
            raise DivergenceError(t, f"non-finite weights after step {t}")

        if t % cfg.record_every == 0 or t == cfg.steps:
            exact = problem.grad(w_prev)
            k = cfg.spectral_k
            m_cur = trace.get("m", getattr(state, "m", None))
            v_cur = trace.get("v", getattr(state, "v", None))
            rec = RunRecord(
                step=t,
                loss=loss,
                grad_l11=l11_norm(exact),
                grad_frob=frob_norm(exact),
                topk_g=_safe_topk(sample.grad, k),
                topk_m=_safe_topk(m_cur, k),
                topk_v=_safe_topk(v_cur, k),
                comp_err_m=trace.get("comp_err_m"),
                zeta=trace.get("zeta"),
                state_elements=measured_state_elements(state),
                weights=w_prev.copy(),
            )
            if on_record is not None:
                on_record(rec)
    return w


def run_experiment(cfg, callback=None, write=True):
    """Run ``cfg`` and return its records.

    ``callback(t, w, g, state, trace)`` is called after every step with the
    pre-update weights. When ``cfg.output_path`` is set (and ``write``), the
    directory receives ``records.csv``, ``weights.csv`` and ``manifest.json``;
    an aborted run leaves its partial CSV plus a manifest with status "error".
    """
    records = []
    out = resolve_output(cfg.output_path) if (write and cfg.output_path) else None
    try:
        w_final = _execute(cfg, callback, records.append)
    except DivergenceError as exc:
        if out is not None:
            _write_outputs(out, cfg, records, None, error=exc)
        raise
    if out is not None:
        _write_outputs(out, cfg, records, w_final)
    return records


def _write_outputs(out, cfg, records, w_final, error=None):
    out.mkdir(parents=True, exist_ok=True)
    emit_csv(records, out / "records.csv")
    manifest = {"config": config_to_dict(cfg), "records": len(records)}
    if error is None:
        write_matrix_csv(w_final, out / "weights.csv")
        manifest["status"] = "ok"
    else:
        manifest["status"] = "error"
        manifest["error"] = str(error)
        manifest["failed_step"] = getattr(error, "step", None)
    with open(out / "manifest.json", "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def emit_csv(records, path):
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for rec in records:
                writer.writerow([_fmt(getattr(rec, col)) for col in CSV_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_matrix_csv(a, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(a):
            writer.writerow([_fmt(x) for x in row])


def read_csv(path):
    """Load records written by :func:`emit_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        records = []
        for row in reader:
            vals = {}
            for col, cell in zip(CSV_COLUMNS, row):
                if cell == "":
                    vals[col] = None
                elif col in ("step", "state_elements"):
                    vals[col] = int(cell)
                else:
                    vals[col] = float(cell)
            records.append(RunRecord(**vals))
    return records


@dataclass
class DivergenceReport:
    steps: list
    per_step: dict
    max: dict
    mean: dict


def _rel(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def compare_runs(records_a, records_b):
    """Per-step relative deltas between two runs with identical step columns.

    Scalar columns use ``|a - b| / max(|a|, |b|)``. When both runs carry
    weight snapshots the ``weights`` entry is ``||Wa - Wb||_F / ||Wb||_F``.
    """
    if len(records_a) != len(records_b):
        raise ValueError(f"record count mismatch: {len(records_a)} vs {len(records_b)}")
    steps = [r.step for r in records_a]
    if steps != [r.step for r in records_b]:
        raise ValueError("step columns differ")

    per_step = {}
    for col in CSV_COLUMNS[1:]:
        pairs = [(getattr(a, col), getattr(b, col)) for a, b in zip(records_a, records_b)]
        if all(x is not None and y is not None for x, y in pairs):
            per_step[col] = [_rel(float(x), float(y)) for x, y in pairs]
    if all(r.weights is not None for r in list(records_a) + list(records_b)):
        deltas = []
        for a, b in zip(records_a, records_b):
            ref = np.linalg.norm(b.weights)
            diff = np.linalg.norm(a.weights - b.weights)
            deltas.append(0.0 if diff == 0 else diff / (ref if ref > 0 else 1.0))
        per_step["weights"] = deltas
    return DivergenceReport(
        steps=steps,
        per_step=per_step,
        max={k: (max(v) if v else 0.0) for k, v in per_step.items()},
        mean={k: (float(np.mean(v)) if v else 0.0) for k, v in per_step.items()},
    )
