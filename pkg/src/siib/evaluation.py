"""Correlating metric scores with listening-test intelligibility.

Scores ``d`` are linearized with ``g(d) = 100 (1 - exp(-a d))**b`` before
Pearson's correlation; Kendall's tau is computed on the raw scores.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .audio_io import AudioSignal, align_pair, load_audio, resample
from .core import SiibConfig, siib
from .errors import AudioIOError, ValidationError

MANIFEST_COLUMNS = ("condition_id", "clean_path", "degraded_path", "intelligibility_percent")

LOG_A_RANGE = (-4.0, 1.0)
LOG_B_RANGE = (-2.0, 2.0)
GRID_POINTS = 50


@dataclass
class Condition:
    id: str
    clean_paths: list
    degraded_paths: list
    intelligibility: float

    def __post_init__(self):
        if not 0 <= self.intelligibility <= 100:
            raise ValidationError(
                f"condition {self.id}: intelligibility {self.intelligibility} outside [0, 100]"
            )
        if not self.clean_paths or len(self.clean_paths) != len(self.degraded_paths):
            raise ValidationError(f"condition {self.id}: path lists empty or unequal")


@dataclass(frozen=True)
class MappingFit:
    a: float
    b: float
    rmse: float

    def __call__(self, d):
        return mapping(d, self.a, self.b)


@dataclass
class EvalReport:
    conditions: list = field(default_factory=list)  # dicts with id, d, w, g
    tau: float = float("nan")
    rho: float = float("nan")
    fit: MappingFit | None = None

    def to_dict(self):
        return {
            "conditions": self.conditions,
            "tau": self.tau,
            "rho": self.rho,
            "fit": {"a": self.fit.a, "b": self.fit.b, "rmse": self.fit.rmse},
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    def to_text(self):
        lines = [f"{'condition':<20} {'d [b/s]':>10} {'w [%]':>8} {'g(d) [%]':>9}"]
        for c in self.conditions:
            lines.append(f"{c['id']:<20} {c['d']:>10.2f} {c['w']:>8.2f} {c['g']:>9.2f}")
        lines.append(
            f"tau={self.tau:.4f} rho={self.rho:.4f} "
            f"a={self.fit.a:.6g} b={self.fit.b:.6g} rmse={self.fit.rmse:.4f}"
        )
        return "\n".join(lines)


def load_manifest(path, check_files=True):
    """Parse a condition manifest CSV.

    Rows sharing a ``condition_id`` are merged into one condition; they
    must agree on the intelligibility value. Relative audio paths are
    resolved against the manifest's directory.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = tuple(h.strip() for h in (reader.fieldnames or ()))
            missing = [c for c in MANIFEST_COLUMNS if c not in header]
            if missing:
                raise ValidationError(f"manifest missing columns: {', '.join(missing)}")
            rows = list(reader)
    except (OSError, UnicodeDecodeError) as exc:
        raise AudioIOError(f"cannot read manifest {path}: {exc}") from exc
    except csv.Error as exc:
        raise ValidationError(f"malformed manifest {path}: {exc}") from exc

    grouped = {}
    for lineno, raw in enumerate(rows, start=2):
        row = {k.strip(): (v or "").strip() for k, v in raw.items() if k is not None}
        cid = row["condition_id"]
        if not cid:
            raise ValidationError(f"line {lineno}: empty condition_id")
        try:
            w = float(row["intelligibility_percent"])
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: bad intelligibility value") from exc
        if not 0 <= w <= 100:
            raise ValidationError(f"line {lineno}: intelligibility {w} outside [0, 100]")
        pair = []
        for key in ("clean_path", "degraded_path"):
            p = Path(row[key])
            if not p.is_absolute():
                p = path.parent / p
            if check_files and not p.is_file():
                raise AudioIOError(f"line {lineno}: missing file {p}")
            pair.append(str(p))
        entry = grouped.setdefault(cid, {"w": w, "clean": [], "degraded": []})
        if entry["w"] != w:
            raise ValidationError(f"condition {cid}: conflicting intelligibility values")
        entry["clean"].append(pair[0])
        entry["degraded"].append(pair[1])
    if not grouped:
        raise ValidationError(f"manifest {path} has no rows")
    return [Condition(cid, e["clean"], e["degraded"], e["w"]) for cid, e in grouped.items()]


def mapping(d, a, b):
    """Monotone map from metric score to percent correct."""
    return 100.0 * (1.0 - np.exp(-a * np.asarray(d, dtype=np.float64))) ** b


# search bounds in log space; exp(MIN_LOG_A) is still a normal double
MIN_LOG_A = -700.0
MIN_LOG_B = math.log(1e-12)


def _log_mapping(d, log_a, b):
    # log(g / 100), stable for a * d far below 1 where a itself may underflow
    with np.errstate(divide="ignore"):
        z = log_a + np.log(d)
    inner = np.where(z < -30.0, z, np.log(-np.expm1(-np.exp(np.minimum(z, 700.0)))))
    return b * inner


def _clamp(p):
    return max(p[0], MIN_LOG_A), max(p[1], MIN_LOG_B)


def _sse(d, w, log_a, log_b):
    log_a, log_b = _clamp((log_a, log_b))
    return float(np.sum((w - 100.0 * np.exp(_log_mapping(d, log_a, math.exp(log_b)))) ** 2))


def fit_mapping(d, w):
    """Least-squares fit of ``a, b > 0`` in the score-to-intelligibility map.

    A 50 x 50 log-spaced grid picks one start point for a Nelder-Mead
    polish in log-parameter space, which keeps both parameters positive. A
    second start near the flat limit (b -> 0) lets the fit do at least as
    well as a constant predictor.
    """
    d = np.asarray(d, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if d.shape != w.shape or d.size < 3:
        raise ValidationError(f"need at least 3 conditions to fit, got {d.size}")
    if np.any(d < 0):
        raise ValidationError("scores must be non-negative")
    if np.all(d == d[0]):
        raise ValidationError("degenerate data: all scores identical")

    log_as = np.linspace(*LOG_A_RANGE, GRID_POINTS) * np.log(10.0)
    log_bs = np.linspace(*LOG_B_RANGE, GRID_POINTS) * np.log(10.0)
    A, B = np.meshgrid(np.exp(log_as), np.exp(log_bs), indexing="ij")
    pred = 100.0 * (1.0 - np.exp(-A[..., None] * d)) ** B[..., None]
    sse = np.sum((w - pred) ** 2, axis=-1)
    i, j = np.unravel_index(np.argmin(sse), sse.shape)
    starts = [np.array([log_as[i], log_bs[j]])]
    # near-constant limit: b -> 0 with a**b held at mean(w) / 100, placing
    # log a just above its bound so the start is as flat as representable
    positive = d > 0
    level = float(np.mean(w)) / 100.0
    if 0 < level < 1 and positive.any():
        mean_log_d = float(np.mean(np.log(d[positive])))
        b0 = min(0.1, math.log(level) / (0.9 * MIN_LOG_A + mean_log_d))
        starts.append(np.array([math.log(level) / b0 - mean_log_d, math.log(b0)]))

    def objective(p):
        return _sse(d, w, p[0], p[1])

    best, best_sse = None, math.inf
    for start in starts:
        x = start
        for _ in range(4):
            # relative tolerance: an absolute one stalls at rounding noise
            fatol = max(1e-13 * objective(x), 1e-24)
            res = minimize(
                objective, x, method="Nelder-Mead",
                options={"xatol": 1e-10, "fatol": fatol, "maxiter": 10000, "maxfev": 20000},
            )
            moved = np.max(np.abs(np.expm1(res.x - x)))
            x = res.x
            if moved < 1e-8:
                break
        if objective(x) < best_sse:
            best, best_sse = x, objective(x)
    best = np.array(_clamp(best))
    a, b = float(np.exp(best[0])), float(np.exp(best[1]))
    rmse = math.sqrt(objective(best) / d.size)
    return MappingFit(a, b, rmse)


def _merge_count_inversions(values):
    # Sort ``values`` in place with merge sort; return the number of swaps.
    n = len(values)
    if n < 2:
        return 0
    mid = n // 2
    left, right = values[:mid], values[mid:]
    swaps = _merge_count_inversions(left) + _merge_count_inversions(right)
    i = j = k = 0
    while i < len(left) and j < len(right):
        if right[j] < left[i]:
            values[k] = right[j]
            j += 1
            swaps += len(left) - i
        else:
            values[k] = left[i]
            i += 1
        k += 1
    values[k:] = left[i:] + right[j:]
    return swaps


def _tied_pairs(sorted_values):
    total = 0
    run = 1
    for prev, cur in zip(sorted_values, sorted_values[1:]):
        if cur == prev:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    return total + run * (run - 1) // 2


def kendall_tau(x, y):
    """Kendall's tau-b via merge-sort inversion counting, O(n log n)."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    n = len(x)
    if n != len(y) or n < 2:
        raise ValidationError("kendall_tau needs two sequences of equal length >= 2")
    pairs = sorted(zip(x, y))
    n0 = n * (n - 1) // 2
    n1 = _tied_pairs([p[0] for p in pairs])
    n3 = _tied_pairs(pairs)
    ys = [p[1] for p in pairs]
    swaps = _merge_count_inversions(ys)
    n2 = _tied_pairs(ys)
    if n1 == n0 or n2 == n0:
        raise ValidationError("kendall_tau undefined: all values tied in one sequence")
    numerator = n0 - n1 - n2 + n3 - 2 * swaps
    return numerator / math.sqrt((n0 - n1) * (n0 - n2))


def pearson_rho(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise ValidationError("pearson_rho needs two sequences of equal length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = np.dot(dx, dx), np.dot(dy, dy)
    if sxx == 0 or syy == 0:
        raise ValidationError("pearson_rho undefined: zero variance")
    return float(np.clip(np.dot(dx, dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def _score_pair(args):
    clean_path, degraded_path, config = args
    return siib(load_audio(clean_path), load_audio(degraded_path), config).bits_per_second


def _score_concat(args):
    clean_paths, degraded_paths, config = args
    pairs = [
        align_pair(resample(load_audio(c), config.sample_rate),
                   resample(load_audio(g), config.sample_rate))
        for c, g in zip(clean_paths, degraded_paths)
    ]
    clean = AudioSignal(np.concatenate([p[0].samples for p in pairs]), config.sample_rate)
    degraded = AudioSignal(np.concatenate([p[1].samples for p in pairs]), config.sample_rate)
    return siib(clean, degraded, config).bits_per_second


def _run(fn, tasks, jobs):
    if jobs and jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def score_pairs(pairs, config=None, jobs=1):
    """SIIB for each ``(clean_path, degraded_path)``, in input order."""
    config = config or SiibConfig()
    return _run(_score_pair, [(c, g, config) for c, g in pairs], jobs)


def score_conditions(conditions, config=None, jobs=1, aggregate="mean"):
    """Per-condition score: mean over pairs, or one score of the concatenation."""
    config = config or SiibConfig()
    if aggregate == "concat":
        tasks = [(c.clean_paths, c.degraded_paths, config) for c in conditions]
        return _run(_score_concat, tasks, jobs)
    if aggregate != "mean":
        raise ValidationError(f"unknown aggregate mode {aggregate!r}")
    pairs = [p for c in conditions for p in zip(c.clean_paths, c.degraded_paths)]
    flat = score_pairs(pairs, config, jobs)
    scores, pos = [], 0
    for c in conditions:
        n = len(c.clean_paths)
        scores.append(float(np.mean(flat[pos:pos + n])))
        pos += n
    return scores


def evaluate(conditions, config=None, jobs=1, aggregate="mean"):
    """Score every condition, fit the mapping, and correlate with intelligibility.

    Conditions are processed in ``id`` order, so the report does not depend
    on manifest row order.
    """
    conditions = sorted(conditions, key=lambda c: c.id)
    if len(conditions) < 3:
        raise ValidationError(f"need at least 3 conditions, got {len(conditions)}")
    d = score_conditions(conditions, config, jobs, aggregate)
    return report_from_scores([c.id for c in conditions], d,
                              [c.intelligibility for c in conditions])


def report_from_scores(ids, d, w):
    d = np.asarray(d, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    fit = fit_mapping(d, w)
    g = fit(d)
    rows = [{"id": i, "d": float(a), "w": float(b), "g": float(c)}
            for i, a, b, c in zip(ids, d, w, g)]
    return EvalReport(rows, kendall_tau(d, w), pearson_rho(g, w), fit)
