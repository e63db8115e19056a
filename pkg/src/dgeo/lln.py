"""Law-of-large-numbers experiments for dependent identically distributed
sequences drawn from the joint q-Gaussian laws.

One simulated path of length k_max is a single draw of the k_max-fold
joint; because the joints are marginal-consistent, every prefix of that
draw has exactly the law of the shorter joint, so running averages along
the path probe the dependent law of large numbers directly.  The module
also evaluates the fourth-moment and second-moment Chebyshev-type tail
bounds, compares them against empirical exceedance frequencies with
Wilson confidence intervals, and demonstrates summability of the bound
series (the Borel-Cantelli step behind almost-sure convergence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError
from . import qgauss as qg

__all__ = [
    "SimConfig",
    "SimReport",
    "BoundValues",
    "BoundRow",
    "BoundTable",
    "SummabilityTable",
    "run_lln",
    "chebyshev_bounds",
    "verify_bounds",
    "borel_cantelli_summability",
    "wilson_interval",
]

_Z99 = 2.5758293035489004  # two-sided 99% normal quantile


@dataclass(frozen=True)
class SimConfig:
    """Configuration of one simulation campaign (fully determines output)."""

    q: float
    d: int
    v: tuple
    variant: str = "identity"  # identity | trace_d
    k_max: int = 10_000
    reps: int = 100
    seed: int = 0
    eps_grid: tuple = (0.25, 0.5, 1.0)
    S: Optional[tuple] = None  # row tuples; defaults to the identity

    def __post_init__(self):
        if self.d * (self.q - 1.0) >= 2.0 or self.q < 1.0:
            raise DomainError("need q >= 1 and d(q-1) < 2")
        if self.k_max < 1 or self.reps < 1:
            raise DomainError("k_max and reps must be positive")
        if self.variant not in ("identity", "trace_d"):
            raise DomainError(f"unknown variant {self.variant!r}")
        object.__setattr__(self, "v", tuple(float(x) for x in np.asarray(self.v).reshape(-1)))
        if len(self.v) != self.d:
            raise DomainError(f"v must have length {self.d}")
        object.__setattr__(self, "eps_grid", tuple(float(e) for e in self.eps_grid))
        if self.S is not None:
            S = np.asarray(self.S, dtype=float)
            object.__setattr__(self, "S", tuple(tuple(row) for row in S))

    def params(self) -> qg.QGaussianParams:
        S = np.eye(self.d) if self.S is None else np.asarray(self.S, dtype=float)
        variant = "identity" if self.variant == "identity" else "trace_d"
        return qg.QGaussianParams(self.q, self.d, np.asarray(self.v), S, variant)

    def k_schedule(self) -> list[int]:
        ks = []
        k = 10
        while k < self.k_max:
            ks.append(k)
            k *= 10
        ks.append(self.k_max)
        return sorted(set(ks))

    def stat_labels(self) -> list[str]:
        labels = [f"F{i + 1}" for i in range(self.d)]
        if self.variant == "trace_d":
            labels += [f"F{i + 1}{j + 1}" for i in range(self.d) for j in range(i, self.d)]
        return labels

    def to_json(self) -> dict:
        return {
            "q": self.q, "d": self.d, "v": list(self.v), "variant": self.variant,
            "k_max": self.k_max, "reps": self.reps, "seed": self.seed,
            "eps_grid": list(self.eps_grid),
            "S": None if self.S is None else [list(r) for r in self.S],
        }


def _fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass(frozen=True)
class SimReport:
    """Running averages and deviations per (checkpoint, rep, statistic)."""

    config: SimConfig
    k_schedule: list
    stat_labels: list
    targets: np.ndarray          # (n_stats,)
    averages: np.ndarray         # (reps, n_checkpoints, n_stats)
    deviations: np.ndarray       # same shape, |avg - target|
    seed_convention: str = "SeedSequence(seed).spawn(reps)[rep]"

    def exceedance(self, eps: float, stat: int = 0) -> np.ndarray:
        """Fraction of reps with |avg_k - target| > eps, per checkpoint."""
        return (self.deviations[:, :, stat] > eps).mean(axis=0)

    def median_deviation(self, stat: int = 0) -> np.ndarray:
        return np.median(self.deviations[:, :, stat], axis=0)

    def averages_csv(self) -> str:
        lines = ["k,rep,stat,average,deviation"]
        for r in range(self.averages.shape[0]):
            for ci, k in enumerate(self.k_schedule):
                for si, lab in enumerate(self.stat_labels):
                    lines.append(f"{k},{r},{lab},{_fmt(self.averages[r, ci, si])},"
                                 f"{_fmt(self.deviations[r, ci, si])}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "k_schedule": list(self.k_schedule),
            "stat_labels": list(self.stat_labels),
            "targets": [float(t) for t in self.targets],
            "median_deviation": {lab: [float(x) for x in self.median_deviation(si)]
                                 for si, lab in enumerate(self.stat_labels)},
            "seed_convention": self.seed_convention,
        }


def _stat_values(path: np.ndarray, cfg: SimConfig) -> np.ndarray:
    """Per-step statistic values along a path, shape (k, n_stats)."""
    cols = [path[:, i] for i in range(cfg.d)]
    if cfg.variant == "trace_d":
        cols += [path[:, i] * path[:, j]
                 for i in range(cfg.d) for j in range(i, cfg.d)]
    return np.column_stack(cols)


def _targets(cfg: SimConfig) -> np.ndarray:
    law1 = qg.repetition(cfg.params(), 1)
    vals = [float(cfg.v[i]) for i in range(cfg.d)]
    if cfg.variant == "trace_d":
        for i in range(cfg.d):
            for j in range(i, cfg.d):
                vals.append(cfg.v[i] * cfg.v[j] + qg.central_second(law1, i, j))
    return np.asarray(vals)


def _run_reps(cfg: SimConfig, lo: int, hi: int) -> np.ndarray:
    """Averages for reps lo..hi-1; rep r always uses child stream r."""
    law = qg.repetition(cfg.params(), cfg.k_max)
    boundaries = np.asarray(cfg.k_schedule())
    labels = cfg.stat_labels()
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.reps)
    out = np.empty((hi - lo, boundaries.size, len(labels)))
    for r in range(lo, hi):
        rng = np.random.default_rng(children[r])
        path = qg.sample_joint(law, 1, rng)[0]  # (k_max, d)
        stats = _stat_values(path, cfg)
        # pairwise segment sums, then prefix sums at the checkpoints
        seg = np.add.reduceat(stats, np.concatenate([[0], boundaries[:-1]]), axis=0)
        out[r - lo] = np.cumsum(seg, axis=0) / boundaries[:, None]
    return out


def run_lln(cfg: SimConfig, workers: int = 1) -> SimReport:
    """Simulate dependent paths and collect running averages.

    Each rep draws one length-k_max path from the joint law (prefixes
    then carry the exact shorter joints); averages are recorded on the
    log-spaced checkpoint schedule.  Rep r always uses the r-th child
    stream spawned from the root seed, so results are bit-identical for
    any worker count.
    """
    ks = cfg.k_schedule()
    labels = cfg.stat_labels()
    targets = _targets(cfg)
    if workers <= 1 or cfg.reps < 2 * workers:
        averages = _run_reps(cfg, 0, cfg.reps)
    else:
        from concurrent.futures import ProcessPoolExecutor

        edges = np.linspace(0, cfg.reps, workers + 1, dtype=int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_reps, [cfg] * workers, edges[:-1], edges[1:]))
        averages = np.concatenate(parts, axis=0)
    deviations = np.abs(averages - targets[None, None, :])
    return SimReport(cfg, ks, labels, targets, averages, deviations)


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundValues:
    bound_F: float
    bound_FF: float


def chebyshev_bounds(cfg: SimConfig, k: int, eps: float,
                     i: int = 0, j: int = 0) -> BoundValues:
    """Tail bounds for the averaged statistics at sample length k.

    bound_F uses the fourth-moment inequality
        E(Y1^4)/(k^3 eps^4) + 3(k-1) E(Y1^2 Y2^2)/(k^3 eps^4)
    and bound_FF the second-moment inequality
        E(Z1^2)/(k eps^2) + (k-1) E(Z1 Z2)/(k eps^2),
    with the moments taken from the one- and two-fold joint laws.
    """
    if k < 1 or eps <= 0:
        raise DomainError("need k >= 1 and eps > 0")
    law2 = qg.repetition(cfg.params(), 2)
    ey4, ey22 = qg.fi_pair_moments(law2, i)
    ez2, ez12 = qg.fij_pair_moments(law2, i, j)
    bound_f = ey4 / (k ** 3 * eps ** 4) + 3.0 * (k - 1) * ey22 / (k ** 3 * eps ** 4)
    bound_ff = ez2 / (k * eps ** 2) + (k - 1) * ez12 / (k * eps ** 2)
    return BoundValues(bound_F=float(bound_f), bound_FF=float(bound_ff))


def wilson_interval(successes: int, n: int, z: float = _Z99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise DomainError("n must be positive")
    phat = successes / n
    denom = 1.0 + z * z / n
    center = phat + z * z / (2 * n)
    rad = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n))
    return (center - rad) / denom, (center + rad) / denom


@dataclass(frozen=True)
class BoundRow:
    k: int
    eps: float
    stat: str
    exceedance: float
    wilson_lo: float
    wilson_hi: float
    bound: float
    passed: bool
    note: str = ""


@dataclass(frozen=True)
class BoundTable:
    rows: list

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_csv(self) -> str:
        lines = ["k,eps,stat,exceedance,wilson_lo,wilson_hi,bound,passed,note"]
        for r in self.rows:
            lines.append(f"{r.k},{_fmt(r.eps)},{r.stat},{_fmt(r.exceedance)},"
                         f"{_fmt(r.wilson_lo)},{_fmt(r.wilson_hi)},{_fmt(r.bound)},"
                         f"{int(r.passed)},{r.note}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> list:
        return [r.__dict__ for r in self.rows]


def verify_bounds(cfg: SimConfig, report: Optional[SimReport] = None) -> BoundTable:
    """Empirical exceedance frequencies against the theoretical bounds.

    A cell passes when the Wilson 99% lower confidence bound of the
    exceedance frequency does not exceed the bound value.  Averages of
    products F_ij (trace_d variant) are bounded too, but carry a note
    that no almost-sure convergence claim backs them.
    """
    if cfg.reps < 100:
        raise DomainError("need reps >= 100 for a meaningful binomial interval")
    if report is None:
        report = run_lln(cfg)
    rows = []
    for si, lab in enumerate(report.stat_labels):
        is_mean_stat = si < cfg.d
        if is_mean_stat:
            i = si
            note = ""
        else:
            flat = si - cfg.d
            pairs = [(a, b) for a in range(cfg.d) for b in range(a, cfg.d)]
            i, jj = pairs[flat]
            note = "no almost-sure guarantee on the trace slice"
        for ci, k in enumerate(report.k_schedule):
            for eps in cfg.eps_grid:
                exceed = int(np.sum(report.deviations[:, ci, si] > eps))
                freq = exceed / cfg.reps
                lo, hi = wilson_interval(exceed, cfg.reps)
                b = chebyshev_bounds(cfg, k, eps, i=i,
                                     j=0 if is_mean_stat else jj)
                bound = b.bound_F if is_mean_stat else b.bound_FF
                rows.append(BoundRow(k, eps, lab, freq, lo, hi, min(bound, 1.0),
                                     lo <= min(bound, 1.0) + 1e-12, note))
    return BoundTable(rows)


@dataclass(frozen=True)
class SummabilityTable:
    eps: float
    checkpoints: np.ndarray
    partial_sums: np.ndarray
    terms_times_k2: np.ndarray
    final_relative_change: float

    def to_json(self) -> dict:
        return {
            "eps": self.eps,
            "checkpoints": [int(k) for k in self.checkpoints],
            "partial_sums": [float(s) for s in self.partial_sums],
            "terms_times_k2": [float(t) for t in self.terms_times_k2],
            "final_relative_change": self.final_relative_change,
        }


def borel_cantelli_summability(cfg: SimConfig, eps: float,
                               k_terms: int = 100_000) -> SummabilityTable:
    """Partial sums of the fourth-moment bound series.

    The terms behave like a constant times k^{-2}, so the series
    converges; summable tail probabilities are what upgrade convergence
    in probability to almost-sure convergence.
    """
    law2 = qg.repetition(cfg.params(), 2)
    ey4, ey22 = qg.fi_pair_moments(law2, 0)
    ks = np.arange(1, k_terms + 1, dtype=float)
    terms = ey4 / (ks ** 3 * eps ** 4) + 3.0 * (ks - 1) * ey22 / (ks ** 3 * eps ** 4)
    sums = np.cumsum(terms)
    checkpoints = []
    k = 10
    while k < k_terms:
        checkpoints.append(k)
        k *= 10
    checkpoints.append(k_terms)
    checkpoints = np.asarray(sorted(set(checkpoints)))
    partial = sums[checkpoints - 1]
    prev = sums[checkpoints // 10 - 1]
    rel_change = float((partial[-1] - prev[-1]) / partial[-1])
    return SummabilityTable(eps, checkpoints, partial,
                            terms[checkpoints - 1] * checkpoints ** 2, rel_change)
