"""Closed-form branching analytics and the Dekking-Meester stage classifier."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .model import RetentionSpec, homogeneous
from .rng import trial_seeds
from .tree import level_counts, percolation_crossing, sample_many

STAGES = ("I", "II", "III", "IV-or-higher")


def mean_offspring(spec: RetentionSpec) -> float:
    return float(math.fsum(spec.p))


def is_singleton(spec: RetentionSpec) -> bool:
    """Exactly one symbol retained surely and all others never."""
    p = spec.probs
    return int(np.sum(p == 1.0)) == 1 and int(np.sum(p == 0.0)) == len(p) - 1


def offspring_pgf(spec: RetentionSpec, s):
    """Generating function ``prod_i (1 - p_i + p_i s)`` of the offspring count."""
    s = np.asarray(s, dtype=float)
    out = np.ones_like(s)
    for pi in spec.p:
        out = out * (1.0 - pi + pi * s)
    return out


@dataclass(frozen=True)
class Extinction:
    q: float
    singleton: bool = False


def extinction_probability(spec: RetentionSpec, tol: float = 1e-12) -> Extinction:
    """Smallest fixed point of the offspring generating function in [0, 1].

    Found by bisection on ``g(s) - s``, which is convex, nonnegative at 0 and
    vanishes at 1.
    """
    if is_singleton(spec):
        return Extinction(0.0, singleton=True)
    m = mean_offspring(spec)
    if m <= 1.0:
        return Extinction(1.0)

    def h(s):
        return float(offspring_pgf(spec, s)) - s

    if h(0.0) <= 0.0:
        return Extinction(0.0)
    # h < 0 just below 1 because h'(1) = m - 1 > 0
    hi = 0.5
    k = 1
    while h(hi) >= 0.0:
        k += 1
        hi = 1.0 - 2.0 ** -k
        if k > 60:
            return Extinction(1.0)
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return Extinction(0.5 * (lo + hi))


@dataclass(frozen=True)
class Dimension:
    value: float
    extinct: bool


def dimension_formula(spec: RetentionSpec) -> Dimension:
    """Almost-sure Hausdorff (= box) dimension ``log(sum p) / log M`` on survival."""
    m = mean_offspring(spec)
    if m <= 1.0:
        return Dimension(0.0, extinct=not is_singleton(spec))
    return Dimension(math.log(m) / math.log(spec.M), extinct=False)


def column_sums(spec: RetentionSpec) -> np.ndarray:
    """Expected number of retained squares in each column (x-offset)."""
    if spec.d != 2:
        raise ValueError("column sums need a planar spec")
    offs = spec.offsets()
    return np.bincount(offs[:, 0], weights=spec.probs, minlength=spec.M)


def _xlogx(m: np.ndarray) -> np.ndarray:
    out = np.zeros_like(m)
    pos = m > 0
    out[pos] = m[pos] * np.log(m[pos])
    return out


@dataclass
class StageReport:
    stage: str
    interval_flag: bool
    singleton: bool
    sum_p: float
    sum_m_log_m: float
    sum_log_m: float
    min_m: float
    column_sums: tuple[float, ...]
    crossing_depth: int | None = None
    crossing_trials: int | None = None
    crossing_frequency: float | None = None
    crossing_ci: tuple[float, float] | None = None
    pc_bracket: tuple[float, float] | None = None
    notes: list[str] = field(default_factory=list)

    def as_record(self) -> dict[str, str]:
        rec = {
            "stage": self.stage,
            "interval_flag": str(self.interval_flag).lower(),
            "singleton": str(self.singleton).lower(),
            "sum_p": f"{self.sum_p:.12g}",
            "sum_m_log_m": f"{self.sum_m_log_m:.12g}",
            "sum_log_m": f"{self.sum_log_m:.12g}",
            "min_m": f"{self.min_m:.12g}",
            "column_sums": ",".join(f"{m:.12g}" for m in self.column_sums),
        }
        if self.crossing_frequency is not None:
            rec["crossing_depth"] = str(self.crossing_depth)
            rec["crossing_trials"] = str(self.crossing_trials)
            rec["crossing_frequency"] = f"{self.crossing_frequency:.6g}"
            rec["crossing_ci"] = "{:.6g},{:.6g}".format(*self.crossing_ci)
        if self.pc_bracket is not None:
            rec["pc_bracket"] = "{:.6g},{:.6g}".format(*self.pc_bracket)
        for i, note in enumerate(self.notes):
            rec[f"note_{i}"] = note
        return rec


def crossing_frequency(spec: RetentionSpec, depth: int, trials: int, seed: int = 0):
    """Fraction of realizations whose level-``depth`` squares cross left to right,
    with a 95% Clopper-Pearson interval."""
    trees = sample_many(spec, depth, trial_seeds(seed, trials))
    hits = sum(percolation_crossing(t, depth) for t in trees)
    ci = binomtest(hits, trials).proportion_ci(0.95)
    return hits / trials, (float(ci.low), float(ci.high))


def bracket_critical_probability(M: int, depth: int, trials: int, grid, seed: int = 0,
                                 level: float = 0.5) -> tuple[float, float]:
    """Bracket the homogeneous crossing threshold at a finite depth.

    Returns the largest grid value whose crossing frequency is below ``level``
    and the smallest one at or above it.  This is a finite-depth proxy only.
    """
    grid = sorted(grid)
    lo, hi = grid[0], grid[-1]
    for p in grid:
        f, _ = crossing_frequency(homogeneous(2, M, p), depth, trials, seed)
        if f < level:
            lo = p
        else:
            hi = p
            break
    return lo, hi


def classify_dm_stage(spec: RetentionSpec, crossing_depth: int | None = None,
                      crossing_trials: int = 0, seed: int = 0) -> StageReport:
    """Stage I/II/III or IV-or-higher from the column-sum criteria.

    Boundary cases follow the non-strict inequalities: stage II needs
    ``sum m_r log m_r <= 0`` and stage III ``sum log m_r <= 0``.  With a
    Monte Carlo budget the crossing frequency at ``crossing_depth`` is added
    to help separate stages V and VI, which the criteria cannot.
    """
    m = column_sums(spec)
    sum_p = mean_offspring(spec)
    s_mlogm = float(np.sum(_xlogx(m)))
    with np.errstate(divide="ignore"):
        s_logm = float(np.sum(np.log(m)))
    singleton = is_singleton(spec)
    if singleton:
        stage = "singleton"
    elif sum_p <= 1.0:
        stage = "I"
    elif s_mlogm <= 0.0:
        stage = "II"
    elif s_logm <= 0.0:
        stage = "III"
    else:
        stage = "IV-or-higher"
    report = StageReport(stage, bool(m.min() > 1.0), singleton, sum_p, s_mlogm, s_logm,
                         float(m.min()), tuple(float(x) for x in m))
    if singleton:
        report.notes.append("limit set is a single point; outside stages I-VI")
    if crossing_depth is not None and crossing_trials > 0:
        f, ci = crossing_frequency(spec, crossing_depth, crossing_trials, seed)
        report.crossing_depth = crossing_depth
        report.crossing_trials = crossing_trials
        report.crossing_frequency = f
        report.crossing_ci = ci
    return report


def extinction_frequency(spec: RetentionSpec, depth: int, trials: int, seed: int = 0,
                         chunk: int = 1000) -> float:
    """Fraction of trials with no retained cell at ``depth``."""
    seeds = trial_seeds(seed, trials)
    dead = 0
    for i in range(0, trials, chunk):
        counts = level_counts(spec, depth, seeds[i:i + chunk])
        dead += int(np.sum(counts[:, -1] == 0))
    return dead / trials
