"""Tail counts, Wilson bands and the moderate-deviation estimator."""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from models.schemas import HittingSample


CURVE_HEADER = ("t", "upper_count", "lower_count", "upper_est", "lower_est", "band_lo", "band_hi", "rate")
DETAIL_HEADER = (
    "t", "upper_count", "lower_count", "two_sided_count",
    "upper_est", "upper_band_lo", "upper_band_hi",
    "lower_est", "lower_band_lo", "lower_band_hi",
    "two_sided_est", "rate",
)


def wilson_interval(count: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or not 0 <= count <= trials:
        raise ValueError(f"invalid binomial data: {count} of {trials}")
    z = float(norm.ppf(0.5 + 0.5 * confidence))
    p = count / trials
    denominator = 1.0 + z * z / trials
    center = (p + z * z / (2.0 * trials)) / denominator
    half = z / denominator * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials))
    lo = 0.0 if count == 0 else max(0.0, center - half)
    hi = 1.0 if count == trials else min(1.0, center + half)
    return lo, hi


def rate_transform(p, n: int, a_n: float):
    """p -> -(n / a_n^2) ln p, with +inf at p = 0."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        out = -(n / a_n ** 2) * np.log(p)
    out = np.where(p <= 0.0, math.inf, np.maximum(out, 0.0))
    return out if out.ndim else float(out)


def scaled_deviations(samples: Sequence[HittingSample], tau_r: float, n: int, a_n: float) -> np.ndarray:
    """(n / a_n)(tau - tau_r) per replica, +inf for censored ones."""
    taus = np.array([s.tau if s.hit else math.inf for s in samples])
    with np.errstate(invalid="ignore"):
        return np.where(np.isfinite(taus), (n / a_n) * (taus - tau_r), math.inf)


@dataclass(frozen=True, eq=False)
class TailCounts:
    """Per-t tail counts of a set of replicas; a commutative monoid under ``merge``."""

    t_grid: Tuple[float, ...]
    upper: np.ndarray
    lower: np.ndarray
    replicas: int = 0
    hits: int = 0
    extinct: int = 0
    horizon: int = 0

    @classmethod
    def empty(cls, t_grid: Sequence[float]) -> "TailCounts":
        size = len(t_grid)
        return cls(tuple(t_grid), np.zeros(size, dtype=np.int64), np.zeros(size, dtype=np.int64))

    @classmethod
    def from_samples(
        cls,
        samples: Sequence[HittingSample],
        t_grid: Sequence[float],
        tau_r: float,
        n: int,
        a_n: float,
    ) -> "TailCounts":
        """
        Upper tail counts d > t with censored replicas counted as never hit;
        lower tail counts d < -t among hits only.
        """
        deviations = scaled_deviations(samples, tau_r, n, a_n)
        times = np.asarray(t_grid, dtype=float)[:, None]
        hit = np.isfinite(deviations)[None, :]
        return cls(
            t_grid=tuple(float(t) for t in t_grid),
            upper=(deviations[None, :] > times).sum(axis=1).astype(np.int64),
            lower=(hit & (deviations[None, :] < -times)).sum(axis=1).astype(np.int64),
            replicas=len(samples),
            hits=sum(s.hit for s in samples),
            extinct=sum(s.censor_reason == "extinct" for s in samples),
            horizon=sum(s.censor_reason == "horizon" for s in samples),
        )

    def merge(self, other: "TailCounts") -> "TailCounts":
        if self.t_grid != other.t_grid:
            raise ValueError("cannot merge tail counts over different t grids")
        return TailCounts(
            t_grid=self.t_grid,
            upper=self.upper + other.upper,
            lower=self.lower + other.lower,
            replicas=self.replicas + other.replicas,
            hits=self.hits + other.hits,
            extinct=self.extinct + other.extinct,
            horizon=self.horizon + other.horizon,
        )

    __add__ = merge

    @property
    def two_sided(self) -> np.ndarray:
        return self.upper + self.lower

    @property
    def censored(self) -> int:
        return self.extinct + self.horizon

    @property
    def censored_fraction(self) -> float:
        return self.censored / self.replicas if self.replicas else 0.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, TailCounts):
            return NotImplemented
        return (
            self.t_grid == other.t_grid
            and np.array_equal(self.upper, other.upper)
            and np.array_equal(self.lower, other.lower)
            and (self.replicas, self.hits, self.extinct, self.horizon)
            == (other.replicas, other.hits, other.extinct, other.horizon)
        )


def _band(counts: np.ndarray, replicas: int, n: int, a_n: float, confidence: float) -> Tuple[np.ndarray, np.ndarray]:
    intervals = np.array([wilson_interval(int(c), replicas, confidence) for c in counts]).reshape(-1, 2)
    # the transform is decreasing: the upper proportion gives the lower edge
    return rate_transform(intervals[:, 1], n, a_n), rate_transform(intervals[:, 0], n, a_n)


@dataclass(frozen=True, eq=False)
class EmpiricalCurve:
    """Empirical rate -(n/a_n^2) ln P(+-deviation > t) per t with Wilson bands."""

    t_grid: np.ndarray
    upper_count: np.ndarray
    lower_count: np.ndarray
    upper_estimate: np.ndarray
    lower_estimate: np.ndarray
    band_lo: np.ndarray
    band_hi: np.ndarray
    lower_band_lo: np.ndarray
    lower_band_hi: np.ndarray
    two_sided_count: np.ndarray
    two_sided_estimate: np.ndarray
    rate: np.ndarray
    replicas: int
    censored_fraction: float
    engine: str = "ssa"
    tau_r: float = math.nan
    counts: Optional[TailCounts] = field(default=None, compare=False, repr=False)

    def rows(self) -> List[tuple]:
        """Rows matching ``CURVE_HEADER``."""
        return [
            (t, int(u), int(l), ue, le, lo, hi, rate)
            for t, u, l, ue, le, lo, hi, rate in zip(
                self.t_grid, self.upper_count, self.lower_count, self.upper_estimate,
                self.lower_estimate, self.band_lo, self.band_hi, self.rate,
            )
        ]

    def detail_rows(self) -> List[tuple]:
        """Rows matching ``DETAIL_HEADER``."""
        return [
            (self.t_grid[k], int(self.upper_count[k]), int(self.lower_count[k]), int(self.two_sided_count[k]),
             self.upper_estimate[k], self.band_lo[k], self.band_hi[k],
             self.lower_estimate[k], self.lower_band_lo[k], self.lower_band_hi[k],
             self.two_sided_estimate[k], self.rate[k])
            for k in range(self.t_grid.size)
        ]


def build_curve(
    counts: TailCounts,
    n: int,
    a_n: float,
    rate: Sequence[float],
    confidence: float = 0.95,
    engine: str = "ssa",
    tau_r: float = math.nan,
) -> EmpiricalCurve:
    """Turn merged tail counts into estimates and bands."""
    m = counts.replicas
    upper_lo, upper_hi = _band(counts.upper, m, n, a_n, confidence)
    lower_lo, lower_hi = _band(counts.lower, m, n, a_n, confidence)
    return EmpiricalCurve(
        t_grid=np.asarray(counts.t_grid, dtype=float),
        upper_count=counts.upper.copy(),
        lower_count=counts.lower.copy(),
        upper_estimate=np.atleast_1d(rate_transform(counts.upper / m, n, a_n)),
        lower_estimate=np.atleast_1d(rate_transform(counts.lower / m, n, a_n)),
        band_lo=upper_lo,
        band_hi=upper_hi,
        lower_band_lo=lower_lo,
        lower_band_hi=lower_hi,
        two_sided_count=counts.two_sided,
        two_sided_estimate=np.atleast_1d(rate_transform(counts.two_sided / m, n, a_n)),
        rate=np.asarray(rate, dtype=float),
        replicas=m,
        censored_fraction=counts.censored_fraction,
        engine=engine,
        tau_r=tau_r,
        counts=counts,
    )


@dataclass(frozen=True)
class BandCheck:
    """Per-t containment of the theoretical rate; None below the count floor."""

    t: float
    upper_count: int
    lower_count: int
    upper_contains: Optional[bool]
    lower_contains: Optional[bool]


def band_report(curve: EmpiricalCurve, min_count: int = 30) -> List[BandCheck]:
    """Whether the rate lies in each tail's Wilson band, where the count allows a verdict."""
    report = []
    for k, t in enumerate(curve.t_grid):
        rate = curve.rate[k]
        upper = None
        lower = None
        if curve.upper_count[k] >= min_count:
            upper = bool(curve.band_lo[k] <= rate <= curve.band_hi[k])
        if curve.lower_count[k] >= min_count:
            lower = bool(curve.lower_band_lo[k] <= rate <= curve.lower_band_hi[k])
        report.append(BandCheck(float(t), int(curve.upper_count[k]), int(curve.lower_count[k]), upper, lower))
    return report


def report_passes(report: Sequence[BandCheck]) -> bool:
    """True when no verdict in the report is a failure."""
    return all(check is not False for row in report for check in (row.upper_contains, row.lower_contains))
