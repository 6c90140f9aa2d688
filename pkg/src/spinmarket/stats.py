"""Time-series analytics shared by microscopic and macroscopic runs.

Pure functions of their inputs: log-binned return densities, power-law tail
fits, autocorrelations, and return-to-zero (bull/bear duration) statistics
with a cutoff estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import io


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

@dataclass
class DensityEstimate:
    """Normalized histogram on log-spaced bins over positive values."""

    edges: np.ndarray      # n_bins + 1 ascending bin edges
    density: np.ndarray    # per-bin probability density (integrates to 1)
    counts: np.ndarray
    n_samples: int         # positive samples binned
    zero_fraction: float   # share of exact zeros in the input, excluded here

    @property
    def centers(self) -> np.ndarray:
        return np.sqrt(self.edges[1:] * self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def to_csv(self, path) -> None:
        io.write_table(path, {
            "bin_lo": self.edges[:-1],
            "bin_hi": self.edges[1:],
            "density": self.density,
            "count": self.counts.astype(np.int64),
        })


def log_bins(lo: float, hi: float, n_bins: int) -> np.ndarray:
    if not (0 < lo < hi):
        raise ValueError("need 0 < lo < hi for log bins")
    return np.geomspace(lo, hi, n_bins + 1)


def density(series: np.ndarray, bins=40) -> DensityEstimate:
    """Estimate the density of absolute returns on log-spaced bins.

    ``series`` holds |dm| values; exact zeros are excluded from the estimate
    (they carry no tail information) and reported as ``zero_fraction``.
    ``bins`` is either a bin count for auto-ranged log bins or explicit edges.
    """
    x = np.abs(np.asarray(series, dtype=np.float64))
    if x.size == 0:
        raise ValueError("empty series")
    pos = x[x > 0]
    if pos.size == 0:
        raise ValueError("all returns are zero; no density to estimate")
    zero_fraction = 1.0 - pos.size / x.size
    if np.isscalar(bins):
        edges = log_bins(pos.min() * 0.999, pos.max() * 1.001, int(bins))
    else:
        edges = np.asarray(bins, dtype=np.float64)
    counts, _ = np.histogram(pos, edges)
    inside = int(counts.sum())
    dens = counts / (inside * np.diff(edges)) if inside else counts.astype(float)
    return DensityEstimate(edges=edges, density=dens, counts=counts,
                           n_samples=pos.size, zero_fraction=zero_fraction)


@dataclass
class PowerlawFit:
    exponent: float        # slope of log density vs log x (negative for decay)
    stderr: float          # bootstrap error over bins
    residual_rms: float    # rms of log10 residuals around the fit line
    n_bins: int
    fit_range: tuple
    poor: bool             # residuals too large for a power law

    def as_dict(self) -> dict:
        return {"exponent": self.exponent, "stderr": self.stderr,
                "residual_rms": self.residual_rms, "n_bins": self.n_bins,
                "fit_range": list(self.fit_range), "poor": self.poor}


def powerlaw_fit(estimate: DensityEstimate, fit_range: tuple,
                 n_boot: int = 200, seed: int = 0,
                 poor_threshold: float = 0.15) -> PowerlawFit:
    """Least-squares slope of the binned density on log-log axes.

    Bins with zero counts inside ``fit_range`` are skipped; at least five
    populated bins are required.  The error is a bin-resampling bootstrap,
    and fits whose log10 residual rms exceeds ``poor_threshold`` are flagged
    as poor (the data is then not well described by a power law).
    """
    lo, hi = fit_range
    centers = estimate.centers
    sel = (centers >= lo) & (centers <= hi) & (estimate.counts > 0)
    if sel.sum() < 5:
        raise ValueError(f"need >= 5 populated bins in {fit_range}, have {int(sel.sum())}")
    lx = np.log10(centers[sel])
    ly = np.log10(estimate.density[sel])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    rms = float(np.sqrt(np.mean(resid ** 2)))

    rng = np.random.default_rng(seed)
    boot = np.empty(n_boot)
    idx = np.arange(lx.size)
    for b in range(n_boot):
        take = rng.choice(idx, size=idx.size, replace=True)
        if np.unique(lx[take]).size < 2:
            boot[b] = slope
            continue
        boot[b] = np.polyfit(lx[take], ly[take], 1)[0]
    return PowerlawFit(exponent=float(slope), stderr=float(boot.std()),
                       residual_rms=rms, n_bins=int(sel.sum()),
                       fit_range=(float(lo), float(hi)),
                       poor=rms > poor_threshold)


# ---------------------------------------------------------------------------
# correlations
# ---------------------------------------------------------------------------

def autocorrelation(series: np.ndarray, max_lag: int) -> np.ndarray:
    """Normalized autocorrelation r[0..max_lag] (r[0] = 1).

    Uses the standard biased estimator c_k / c_0 with the global mean.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.size <= 10 * max_lag:
        raise ValueError(f"series length {x.size} too short for max_lag {max_lag}")
    d = x - x.mean()
    c0 = float(np.dot(d, d))
    if c0 == 0:
        raise ValueError("constant series has no autocorrelation")
    r = np.empty(max_lag + 1)
    r[0] = 1.0
    for k in range(1, max_lag + 1):
        r[k] = float(np.dot(d[:-k], d[k:])) / c0
    return r


# ---------------------------------------------------------------------------
# return-to-zero durations
# ---------------------------------------------------------------------------

@dataclass
class ZeroCrossingStats:
    """Durations between zero crossings of m(t) and their distribution.

    Conventions: m = 0 exactly counts as a crossing; a sign change between
    consecutive steps counts as a crossing at the later step.  The duration
    density of an uncorrelated walk decays with exponent ~3/2 (survival
    ~1/2); on log-binned counts-per-bin axes the same law reads ~1/2.
    """

    durations: np.ndarray          # sorted, positive integers
    edges: np.ndarray              # log-ish histogram edges (half-integer aligned)
    hist_density: np.ndarray       # per-unit-duration density
    hist_counts: np.ndarray
    density_exponent: float        # decay of the duration density (positive number)
    density_exponent_err: float
    survival_exponent: float       # decay of P(T > t) (positive number)
    survival_exponent_err: float
    t_cutoff: float                # departure point from the power law
    cutoff_reliable: bool
    meta: dict = field(default_factory=dict)

    def hist_to_csv(self, path) -> None:
        io.write_table(path, {
            "bin_lo": self.edges[:-1],
            "bin_hi": self.edges[1:],
            "density": self.hist_density,
            "count": self.hist_counts.astype(np.int64),
        })

    def as_dict(self) -> dict:
        return {
            "n_durations": int(self.durations.size),
            "density_exponent": self.density_exponent,
            "density_exponent_err": self.density_exponent_err,
            "survival_exponent": self.survival_exponent,
            "survival_exponent_err": self.survival_exponent_err,
            "t_cutoff": self.t_cutoff,
            "cutoff_reliable": self.cutoff_reliable,
            **self.meta,
        }


def zero_crossings(m: np.ndarray) -> np.ndarray:
    """Indices of zero crossings of m(t) under the stated convention."""
    m = np.asarray(m, dtype=np.float64)
    hit = m == 0.0
    flip = np.zeros_like(hit)
    flip[1:] = m[1:] * m[:-1] < 0
    return np.flatnonzero(hit | flip)


def _duration_bins(max_dur: int, per_decade: int = 8) -> np.ndarray:
    """Log-spaced edges snapped to half-integers so bins hold whole integers."""
    raw = np.geomspace(1.0, max_dur, max(2, int(np.log10(max_dur) * per_decade) + 1))
    edges = np.unique(np.floor(raw) + 0.5)
    return np.concatenate([[0.5], edges])


def _fit_loglog(x: np.ndarray, y: np.ndarray):
    lx, ly = np.log10(x), np.log10(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    n = lx.size
    if n > 2:
        se = np.sqrt(np.sum(resid ** 2) / (n - 2) / np.sum((lx - lx.mean()) ** 2))
    else:
        se = np.nan
    return float(slope), float(se), float(intercept)


def return_to_zero(m_series: np.ndarray, cutoff_mass_fraction: float = 0.85,
                   per_decade: int = 8) -> ZeroCrossingStats:
    """Return-to-zero durations of m(t) with exponent and cutoff estimates.

    T_cutoff is the duration below which ``cutoff_mass_fraction`` of the
    total time (sum of all durations) is spent.  Because the duration
    density is a decaying power law truncated at the cutoff, the mass
    integral is dominated by the truncation scale, so this quantile tracks
    the knee of the distribution and is robust to the sparse tail counts
    there.  With fewer than 30 durations the estimate is flagged unreliable.
    """
    times = zero_crossings(m_series)
    if times.size < 2:
        raise ValueError("need at least 2 zero crossings")
    durations = np.sort(np.diff(times)).astype(np.int64)
    max_dur = int(durations[-1])

    edges = _duration_bins(max_dur, per_decade)
    counts, _ = np.histogram(durations, edges)
    dens = counts / (durations.size * np.diff(edges))
    centers = np.sqrt(edges[1:] * edges[:-1])

    # density exponent: fit the early power-law region, safely below the cutoff
    fit_hi = max(10.0, np.sqrt(max_dur))
    sel = (centers <= fit_hi) & (counts > 0)
    if sel.sum() < 3:
        sel = counts > 0
    d_slope, d_err, _ = _fit_loglog(centers[sel], dens[sel])

    # survival exponent: P(T > t) on log-spaced t, keeping >= 10 survivors
    n_d = durations.size
    surv_t = []
    surv_p = []
    for t in np.unique(np.geomspace(1, max_dur, 60).astype(np.int64)):
        p = np.count_nonzero(durations > t) / n_d
        if p * n_d < 10:
            break
        surv_t.append(t)
        surv_p.append(p)
    if len(surv_t) >= 3:
        s_slope, s_err, _ = _fit_loglog(np.asarray(surv_t, float), np.asarray(surv_p))
    else:
        s_slope, s_err = np.nan, np.nan

    mass = np.cumsum(durations.astype(np.float64))
    t_cutoff = float(durations[np.searchsorted(mass, cutoff_mass_fraction * mass[-1])])
    reliable = durations.size >= 30

    return ZeroCrossingStats(
        durations=durations, edges=edges, hist_density=dens, hist_counts=counts,
        density_exponent=float(-d_slope), density_exponent_err=d_err,
        survival_exponent=float(-s_slope) if np.isfinite(s_slope) else np.nan,
        survival_exponent_err=s_err,
        t_cutoff=t_cutoff, cutoff_reliable=reliable,
        meta={"n_crossings": int(times.size),
              "cutoff_mass_fraction": cutoff_mass_fraction,
              "convention": "m==0 counts; sign change crossing at later step"},
    )


# ---------------------------------------------------------------------------
# cutoff scaling
# ---------------------------------------------------------------------------

@dataclass
class ScalingCheck:
    slope: float
    stderr: float
    intercept: float
    residual_rms: float
    ok: bool
    points: list

    def as_dict(self) -> dict:
        return {"slope": self.slope, "stderr": self.stderr,
                "intercept": self.intercept, "residual_rms": self.residual_rms,
                "ok": self.ok, "points": self.points}


def cutoff_scaling_check(entries: Sequence[tuple], tolerance: float = 0.15) -> ScalingCheck:
    """Regress log T_cutoff on log(L^3 / alpha^2) over (L, alpha, T_cutoff) entries.

    The diffusive timescale argument predicts slope 1; |slope - 1| beyond
    ``tolerance`` is flagged as a scaling violation.
    """
    if len(entries) < 3:
        raise ValueError("need at least 3 (L, alpha, T_cutoff) entries")
    xs = np.array([L ** 3 / a ** 2 for L, a, _ in entries], dtype=np.float64)
    ys = np.array([t for _, _, t in entries], dtype=np.float64)
    if np.any(ys <= 0):
        raise ValueError("T_cutoff values must be positive")
    slope, se, intercept = _fit_loglog(xs, ys)
    resid = np.log10(ys) - (slope * np.log10(xs) + intercept)
    return ScalingCheck(
        slope=slope, stderr=se, intercept=intercept,
        residual_rms=float(np.sqrt(np.mean(resid ** 2))),
        ok=abs(slope - 1.0) <= tolerance,
        points=[{"L": int(L), "alpha": float(a), "t_cutoff": float(t),
                 "x": float(L ** 3 / a ** 2)} for L, a, t in entries],
    )
