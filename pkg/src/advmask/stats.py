"""Hypothesis-test battery for the pair-comparison study.

Participants judge image pairs as "identical" or "different" under three
conditions: (i) original vs itself, (ii) original vs a uniformly attacked
version, (iii) original vs an entropy-masked attacked version. Encoding
"identical" as 1, each participant contributes one mean per condition
(mu_none, mu_bim, mu_ebim), and the battery tests five directional
hypotheses about those means with both a one-tailed t-test and the
Wilcoxon signed-rank test.

All tests are implemented directly (t tail via the regularized incomplete
beta, exact Wilcoxon via the rank-sum distribution, Shapiro-Wilk per
Royston's published approximation, AS R94) so their behavior is pinned by
this module rather than by an external statistics package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, ndtr, ndtri

from .errors import DegenerateSampleError

__all__ = [
    "ParticipantSummary",
    "TestReport",
    "summarize",
    "paired_t_one_tailed",
    "one_sample_t_one_tailed",
    "wilcoxon_signed_rank",
    "shapiro_wilk",
    "cohens_d_paired",
    "t_power",
    "run_hypothesis_battery",
    "BatteryReport",
    "HYPOTHESES",
    "CONDITIONS",
]

GREATER = "greater"
LESS = "less"
CONDITIONS = ("i", "ii", "iii")  # none / bim / ebim

EXACT_WILCOXON_MAX_N = 20


@dataclass(frozen=True)
class ParticipantSummary:
    """Per-participant fraction of "identical" responses per condition."""

    participant: str
    mu_none: float | None
    mu_bim: float | None
    mu_ebim: float | None
    counts: dict

    @property
    def complete(self) -> bool:
        return None not in (self.mu_none, self.mu_bim, self.mu_ebim)


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # not a pytest class

    statistic: float
    p_value: float
    n: int
    method: str
    tail: str
    df: float | None = None
    zeros_dropped: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")
        if self.n < 1:
            raise ValueError("n must be >= 1")


def summarize(records) -> list[ParticipantSummary]:
    """Aggregate trial records into per-participant condition means.

    ``records`` is any iterable of objects with ``session_id``,
    ``trial_index``, ``condition`` and ``choice`` attributes. Duplicate
    (session, trial index) pairs are rejected; a participant missing a
    condition gets None for that mean (and is excluded from paired tests).
    """
    seen = set()
    per = {}
    for r in records:
        key = (r.session_id, r.trial_index)
        if key in seen:
            raise ValueError(f"duplicate record for session {r.session_id} "
                             f"trial {r.trial_index}")
        seen.add(key)
        if r.condition not in CONDITIONS:
            raise ValueError(f"unknown condition {r.condition!r}")
        if r.choice not in ("identical", "different"):
            raise ValueError(f"unknown choice {r.choice!r}")
        bucket = per.setdefault(r.session_id, {c: [] for c in CONDITIONS})
        bucket[r.condition].append(1.0 if r.choice == "identical" else 0.0)

    out = []
    for sid in sorted(per):
        bucket = per[sid]
        means = {
            c: (float(np.mean(v)) if v else None) for c, v in bucket.items()
        }
        out.append(ParticipantSummary(
            participant=sid,
            mu_none=means["i"],
            mu_bim=means["ii"],
            mu_ebim=means["iii"],
            counts={c: len(v) for c, v in bucket.items()},
        ))
    return out


# --------------------------------------------------------------------------
# t-tests
# --------------------------------------------------------------------------


def _t_sf(t: float, df: float) -> float:
    """P(T_df >= t) via the regularized incomplete beta function."""
    x = df / (df + t * t)
    tail = 0.5 * float(betainc(0.5 * df, 0.5, x))
    return tail if t >= 0 else 1.0 - tail


def _check_tail(direction):
    if direction not in (GREATER, LESS):
        raise ValueError(f"direction must be {GREATER!r} or {LESS!r}")


def _t_test(d: np.ndarray, direction: str, method: str) -> TestReport:
    n = d.size
    if n < 2:
        raise ValueError(f"need at least 2 observations, got {n}")
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        raise DegenerateSampleError("zero-variance differences")
    t = float(d.mean()) / (sd / math.sqrt(n))
    p = _t_sf(t, n - 1) if direction == GREATER else 1.0 - _t_sf(t, n - 1)
    return TestReport(statistic=t, p_value=p, n=n, method=method,
                      tail=direction, df=float(n - 1))


def paired_t_one_tailed(a, b, direction: str = GREATER) -> TestReport:
    """One-tailed paired t-test on d = a - b.

    ``direction`` is the alternative about mean(d): "greater" tests
    H1: mean(a - b) > 0, "less" tests H1: mean(a - b) < 0.
    """
    _check_tail(direction)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"paired samples differ in length: {a.shape} vs {b.shape}")
    return _t_test(a - b, direction, "paired-t")


def one_sample_t_one_tailed(a, mu0: float, direction: str = GREATER) -> TestReport:
    """One-tailed one-sample t-test of mean(a) against mu0."""
    _check_tail(direction)
    a = np.asarray(a, dtype=np.float64)
    return _t_test(a - mu0, direction, "one-sample-t")


# --------------------------------------------------------------------------
# Wilcoxon signed-rank
# --------------------------------------------------------------------------


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average of ranks i+1..j+1
        i = j + 1
    return ranks


def _exact_signed_rank_tail(ranks: np.ndarray, w_plus: float, direction: str) -> float:
    """Exact tail probability of W+ over all 2^n equally likely sign vectors.

    Counts subsets by doubled rank sums (midranks are multiples of 1/2),
    which is equivalent to full sign enumeration.
    """
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        counts[r:] = counts[r:] + counts[:-r]  # 0/1 counting: no aliasing
    w2 = 2.0 * w_plus
    sums = np.arange(total + 1, dtype=np.float64)
    if direction == GREATER:
        mass = counts[sums >= w2 - 1e-9].sum()
    else:
        mass = counts[sums <= w2 + 1e-9].sum()
    return float(mass / 2.0 ** len(ranks))


def wilcoxon_signed_rank(d, direction: str = GREATER) -> TestReport:
    """One-tailed Wilcoxon signed-rank test on a vector of differences.

    Zero differences are dropped (their count is reported). The statistic
    is W+, the rank sum of positive differences with midranks for ties.
    For n <= 20 the p-value is exact over all 2^n sign assignments;
    beyond that a normal approximation with tie correction and continuity
    correction is used.
    """
    _check_tail(direction)
    d = np.asarray(d, dtype=np.float64)
    nonzero = d[d != 0.0]
    zeros_dropped = d.size - nonzero.size
    n = nonzero.size
    if n == 0:
        raise DegenerateSampleError("all differences are zero")

    ranks = _midranks(np.abs(nonzero))
    w_plus = float(ranks[nonzero > 0].sum())

    if n <= EXACT_WILCOXON_MAX_N:
        p = _exact_signed_rank_tail(ranks, w_plus, direction)
    else:
        mean = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0
        _, tie_counts = np.unique(np.abs(nonzero), return_counts=True)
        var -= float(((tie_counts ** 3 - tie_counts) / 48.0).sum())
        sigma = math.sqrt(var)
        if direction == GREATER:
            z = (w_plus - 0.5 - mean) / sigma
            p = float(1.0 - ndtr(z))
        else:
            z = (w_plus + 0.5 - mean) / sigma
            p = float(ndtr(z))
    return TestReport(statistic=w_plus, p_value=min(max(p, 0.0), 1.0), n=n,
                      method="wilcoxon", tail=direction,
                      zeros_dropped=zeros_dropped)


# --------------------------------------------------------------------------
# Shapiro-Wilk (Royston's approximation, Algorithm AS R94)
# --------------------------------------------------------------------------

_SW_C1 = (-2.706056, 4.434685, -2.071190, -0.147981, 0.221157, 0.0)
_SW_C2 = (-3.582633, 5.682633, -1.752461, -0.293762, 0.042981, 0.0)
_SW_GAMMA = (0.459, -2.273)
_SW_MU_SMALL = (-0.0006714, 0.025054, -0.39978, 0.5440)
_SW_SIG_SMALL = (-0.0020322, 0.062767, -0.77857, 1.3822)
_SW_MU_LARGE = (0.0038915, -0.083751, -0.31082, -1.5861)
_SW_SIG_LARGE = (0.0030302, -0.082676, -0.4803)


def _sw_weights(n: int) -> np.ndarray:
    m = ndtri((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    ssm = float((m ** 2).sum())
    rsn = 1.0 / math.sqrt(n)
    a = np.empty(n, dtype=np.float64)
    if n == 3:
        a[0], a[1], a[2] = -math.sqrt(0.5), 0.0, math.sqrt(0.5)
        return a
    c = m / math.sqrt(ssm)
    a_n = float(np.polyval(_SW_C1, rsn)) + c[-1]
    if n > 5:
        a_n1 = float(np.polyval(_SW_C2, rsn)) + c[-2]
        phi = (ssm - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (
            1.0 - 2.0 * a_n ** 2 - 2.0 * a_n1 ** 2)
        a[2:n - 2] = m[2:n - 2] / math.sqrt(phi)
        a[-1], a[-2] = a_n, a_n1
        a[0], a[1] = -a_n, -a_n1
    else:
        phi = (ssm - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_n ** 2)
        a[1:n - 1] = m[1:n - 1] / math.sqrt(phi)
        a[-1] = a_n
        a[0] = -a_n
    return a


def shapiro_wilk(x) -> TestReport:
    """Shapiro-Wilk normality test (Royston 1995, Algorithm AS R94).

    Valid for 3 <= n <= 5000. Returns the W statistic in (0, 1] and the
    approximate p-value for H0: the sample is normal.
    """
    x = np.sort(np.asarray(x, dtype=np.float64))
    n = x.size
    if not 3 <= n <= 5000:
        raise ValueError(f"sample size {n} outside [3, 5000]")
    sse = float(((x - x.mean()) ** 2).sum())
    if sse == 0.0:
        raise DegenerateSampleError("zero-variance sample")

    a = _sw_weights(n)
    w = float((a @ x) ** 2) / sse
    w = min(w, 1.0)

    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        p = min(max(p, 0.0), 1.0)
    elif n <= 11:
        gamma = float(np.polyval(_SW_GAMMA, n))
        if gamma - math.log(1.0 - w) <= 0.0:
            p = 1e-99  # W at the upper attainable edge
        else:
            lw = -math.log(gamma - math.log(1.0 - w))
            mu = float(np.polyval(_SW_MU_SMALL, n))
            sigma = math.exp(float(np.polyval(_SW_SIG_SMALL, n)))
            p = float(1.0 - ndtr((lw - mu) / sigma))
    else:
        ln_n = math.log(n)
        lw = math.log(1.0 - w)
        mu = float(np.polyval(_SW_MU_LARGE, ln_n))
        sigma = math.exp(float(np.polyval(_SW_SIG_LARGE, ln_n)))
        p = float(1.0 - ndtr((lw - mu) / sigma))
    return TestReport(statistic=w, p_value=min(max(p, 0.0), 1.0), n=n,
                      method="shapiro-wilk", tail="two-sided")


# --------------------------------------------------------------------------
# effect size and power
# --------------------------------------------------------------------------


def cohens_d_paired(a, b) -> float:
    """Cohen's d for paired samples: mean(a-b) / sd(a-b), sample sd."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("paired samples must have equal length >= 2")
    d = a - b
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        raise DegenerateSampleError("zero-variance differences")
    return float(d.mean()) / sd


def t_power(d: float, n: int, alpha: float) -> float:
    """Approximate power of the one-tailed paired t-test.

    Normal approximation to the noncentral-t: Phi(d*sqrt(n) - z_{1-alpha}).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return float(ndtr(d * math.sqrt(n) - ndtri(1.0 - alpha)))


# --------------------------------------------------------------------------
# the five-hypothesis battery
# --------------------------------------------------------------------------

# (id, readable null hypothesis, kind, payload)
HYPOTHESES = (
    (1, "mu_bim >= mu_ebim", "paired", ("bim", "ebim", LESS)),
    (2, "mu_bim >= 0.5", "one-sample", ("bim", 0.5, LESS)),
    (3, "mu_ebim <= 0.5", "one-sample", ("ebim", 0.5, GREATER)),
    (4, "mu_bim >= mu_none", "paired", ("bim", "none", LESS)),
    (5, "mu_ebim >= mu_none", "paired", ("ebim", "none", LESS)),
)


@dataclass
class BatteryReport:
    """2 methods x 5 hypotheses grid of test results.

    ``cells[(hypothesis_id, method)]`` holds a TestReport, or an error
    string for degenerate samples (flagged, not fatal).
    """

    n_participants: int
    alpha: float
    cells: dict = field(default_factory=dict)

    def rejects(self, hypothesis_id: int, method: str):
        cell = self.cells.get((hypothesis_id, method))
        if not isinstance(cell, TestReport):
            return None
        return cell.p_value < self.alpha

    def to_rows(self) -> list[dict]:
        rows = []
        for hyp_id, null, _, _ in HYPOTHESES:
            for method in ("t-test", "wilcoxon"):
                cell = self.cells[(hyp_id, method)]
                row = {"hypothesis": hyp_id, "null": null, "method": method}
                if isinstance(cell, TestReport):
                    row.update(statistic=cell.statistic, p=cell.p_value, n=cell.n,
                               reject=bool(cell.p_value < self.alpha))
                else:
                    row.update(statistic=None, p=None, n=self.n_participants,
                               reject=None, degenerate=str(cell))
                rows.append(row)
        return rows

    def format_table(self) -> str:
        lines = [
            f"hypothesis battery (n={self.n_participants}, alpha={self.alpha})",
            f"{'hypothesis':<22} {'method':<10} {'statistic':>12} {'p':>12} reject",
        ]
        for row in self.to_rows():
            stat = "degenerate" if row["p"] is None else f"{row['statistic']:.4f}"
            p = "-" if row["p"] is None else f"{row['p']:.3e}"
            rej = "-" if row["reject"] is None else ("yes" if row["reject"] else "no")
            lines.append(
                f"H{row['hypothesis']}: {row['null']:<18} {row['method']:<10} "
                f"{stat:>12} {p:>12} {rej}"
            )
        return "\n".join(lines)


def run_hypothesis_battery(summaries, alpha: float = 0.05) -> BatteryReport:
    """Run the full 2x5 grid over complete participants.

    Hypotheses 1, 4 and 5 are paired (bim vs ebim, bim vs none, ebim vs
    none); 2 and 3 compare one sample against the 0.5 guessing level.
    Degenerate cells (zero variance) are flagged in place.
    """
    complete = [s for s in summaries if s.complete]
    if len(complete) < 2:
        raise ValueError(
            f"need at least 2 complete participants, got {len(complete)}"
        )
    series = {
        "none": np.array([s.mu_none for s in complete]),
        "bim": np.array([s.mu_bim for s in complete]),
        "ebim": np.array([s.mu_ebim for s in complete]),
    }

    report = BatteryReport(n_participants=len(complete), alpha=alpha)
    for hyp_id, _, kind, payload in HYPOTHESES:
        if kind == "paired":
            left, right, direction = payload
            runs = {
                "t-test": lambda: paired_t_one_tailed(
                    series[left], series[right], direction),
                "wilcoxon": lambda: wilcoxon_signed_rank(
                    series[left] - series[right], direction),
            }
        else:
            name, mu0, direction = payload
            runs = {
                "t-test": lambda: one_sample_t_one_tailed(
                    series[name], mu0, direction),
                "wilcoxon": lambda: wilcoxon_signed_rank(
                    series[name] - mu0, direction),
            }
        for method, run in runs.items():
            try:
                report.cells[(hyp_id, method)] = run()
            except DegenerateSampleError as exc:
                report.cells[(hyp_id, method)] = f"degenerate: {exc}"
    return report
