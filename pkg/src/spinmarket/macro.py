"""Macroscopic price model built on the frozen-field volatility surface.

The magnetization random walk dm(t) = sigma(L, h_bar(t)) * xi_t with the
smoothed field h_bar = alpha * m_bar turns the microscopic model into a
one-variable Langevin equation with regime-switching volatility.  The
surface sigma(L, h) is fitted from sweep data; below the transition it
rescales between system sizes with exponent 3/2, above with exponent 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .frozen import SweepResult, locate_transition
from .rng import derive_seed
from .series import SeriesRecord

ORDERED_EXPONENT = 1.5
DISORDERED_EXPONENT = 1.0
SMOOTH_WINDOW = 30  # trailing steps for m_bar and rolling volatility


def _pava_nondecreasing(y: np.ndarray) -> np.ndarray:
    """Least-squares isotonic (non-decreasing) fit, pool-adjacent-violators."""
    vals = list(map(float, y))
    weights = [1.0] * len(vals)
    out_v: list = []
    out_w: list = []
    for v, w in zip(vals, weights):
        out_v.append(v)
        out_w.append(w)
        while len(out_v) > 1 and out_v[-2] > out_v[-1]:
            v2, w2 = out_v.pop(), out_w.pop()
            v1, w1 = out_v.pop(), out_w.pop()
            out_v.append((v1 * w1 + v2 * w2) / (w1 + w2))
            out_w.append(w1 + w2)
    res = np.empty(len(vals))
    i = 0
    for v, w in zip(out_v, out_w):
        res[i:i + int(w)] = v
        i += int(w)
    return res


class VolatilitySurface:
    """sigma(L, h) from tabulated per-L curves.

    Tabulated curves are monotonized in log sigma (the ordered branch rises
    into the jump; residual violations are measurement noise) and
    interpolated with a monotone cubic, so the surface is positive
    everywhere and non-decreasing in h.  Queries use |h|; values outside the
    fitted h range clamp to the range endpoint (check ``in_range`` to flag).
    For system sizes that were never tabulated, the nearest tabulated curve
    is rescaled with exponent 3/2 below its transition and 1 above.
    """

    def __init__(self, tables: dict, h_crit: dict):
        if not tables:
            raise ValueError("empty surface")
        self.tables = {}
        self._interp = {}
        self.h_crit = {int(L): float(v) for L, v in h_crit.items()}
        for L, (h, sigma) in tables.items():
            L = int(L)
            h = np.asarray(h, dtype=np.float64)
            sigma = np.asarray(sigma, dtype=np.float64)
            order = np.argsort(h)
            h, sigma = h[order], sigma[order]
            if np.any(sigma <= 0):
                raise ValueError(f"nonpositive sigma in surface table L={L}")
            if len(h) < 2:
                raise ValueError(f"surface table L={L} needs >= 2 points")
            log_sigma = _pava_nondecreasing(np.log(sigma))
            self.tables[L] = (h, np.exp(log_sigma))
            self._interp[L] = PchipInterpolator(h, log_sigma, extrapolate=False)

    @property
    def L_values(self) -> list:
        return sorted(self.tables)

    def h_range(self, L: int) -> tuple:
        h, _ = self.tables[self._source_L(L)]
        return float(h[0]), float(h[-1])

    def _source_L(self, L: int) -> int:
        if L in self.tables:
            return L
        Ls = np.array(self.L_values)
        return int(Ls[np.argmin(np.abs(np.log(Ls / L)))])

    def transition_field(self, L: int) -> float:
        src = self._source_L(L)
        if src in self.h_crit:
            return self.h_crit[src]
        # fall back to the nearest curve that localized the jump
        if not self.h_crit:
            raise ValueError("surface has no transition estimate")
        Ls = np.array(sorted(self.h_crit))
        return self.h_crit[int(Ls[np.argmin(np.abs(np.log(Ls / L)))])]

    def sigma(self, L: int, h) -> np.ndarray | float:
        """Volatility at |h|, clamped to the fitted range; scalar in, scalar out."""
        src = self._source_L(L)
        habs = np.abs(np.asarray(h, dtype=np.float64))
        lo, hi = self.h_range(src)
        clamped = np.clip(habs, lo, hi)
        val = np.exp(self._interp[src](clamped))
        if src != L:
            scale = np.where(habs < self.transition_field(src),
                             (src / L) ** ORDERED_EXPONENT,
                             (src / L) ** DISORDERED_EXPONENT)
            val = val * scale
        return float(val) if np.isscalar(h) else val

    def in_range(self, L: int, h) -> np.ndarray | bool:
        lo, hi = self.h_range(L)
        habs = np.abs(np.asarray(h, dtype=np.float64))
        ok = (habs >= lo) & (habs <= hi)
        return bool(ok) if np.isscalar(h) else ok

    # -- persistence --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "L_values": self.L_values,
            "tables": {str(L): {"h": list(map(float, h)),
                                "sigma": list(map(float, s))}
                       for L, (h, s) in self.tables.items()},
            "h_crit": {str(L): v for L, v in self.h_crit.items()},
            "exponents": {"ordered": ORDERED_EXPONENT,
                          "disordered": DISORDERED_EXPONENT},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VolatilitySurface":
        tables = {int(L): (t["h"], t["sigma"]) for L, t in d["tables"].items()}
        return cls(tables, {int(L): v for L, v in d.get("h_crit", {}).items()})


def fit_surface(sweep: SweepResult) -> VolatilitySurface:
    """Build the volatility surface from sweep data.

    Requires the sweep to straddle the transition for at least one L (so the
    jump position is known); raises naming the missing phase otherwise.
    Phase membership of a cell is judged by the border length: ordered cells
    have mean_lb of order L, disordered cells of order L^2.
    """
    Ls = sweep.L_values()
    if not Ls:
        raise ValueError("sweep has no completed cells")
    tables = {}
    h_crit = {}
    for L in Ls:
        h, sigma = sweep.curve(L)
        if np.any(sigma <= 0):
            raise ValueError(f"nonpositive sigma at L={L}; cannot fit surface")
        tables[L] = (h, sigma)
        if len(h) >= 3:
            est = locate_transition(sweep, L=L)
            if est.found:
                h_crit[L] = est.h_crit
    if not h_crit:
        ordered = [c for c in sweep.cells if c.mean_lb <= 8.0 * c.L]
        disordered = [c for c in sweep.cells if c.mean_lb >= 0.2 * c.L ** 2]
        if not disordered:
            raise ValueError("sweep covers only the ordered phase "
                             "(no disordered cells); extend the h grid upward")
        if not ordered:
            raise ValueError("sweep covers only the disordered phase "
                             "(no ordered cells); extend the h grid downward")
        raise ValueError("no volatility jump inside the h grid; "
                         "cannot place the transition")
    return VolatilitySurface(tables, h_crit)


# ---------------------------------------------------------------------------
# Langevin stepping
# ---------------------------------------------------------------------------

@dataclass
class MacroState:
    """State of the macroscopic walk: m plus its trailing-window history."""

    m: float = 0.0
    t: int = 0
    window: int = SMOOTH_WINDOW
    history: list = field(default_factory=list)

    def __post_init__(self):
        if not self.history:
            self.history = [self.m]

    @property
    def m_bar(self) -> float:
        return float(np.mean(self.history[-self.window:]))


def _reflect_unit(m: float) -> float:
    # reflective clamp at |m| = 1
    while abs(m) > 1.0:
        m = np.sign(m) * 2.0 - m
    return float(m)


def langevin_step(state: MacroState, surface: VolatilitySurface, alpha: float,
                  L: int, rng: np.random.Generator) -> MacroState:
    """One step m <- m + sigma(L, alpha * |m_bar|) * xi, reflected at |m| = 1."""
    s = surface.sigma(L, alpha * abs(state.m_bar))
    m = _reflect_unit(state.m + s * rng.standard_normal())
    history = state.history + [m]
    if len(history) > state.window:
        history = history[-state.window:]
    return MacroState(m=m, t=state.t + 1, window=state.window, history=history)


def run_self_driven(surface: VolatilitySurface, L: int, alpha: float,
                    steps: int, seed: int = 0, m0: float = 0.0,
                    window: int = SMOOTH_WINDOW) -> SeriesRecord:
    """Self-contained macroscopic run: the walk drives its own field.

    Emits the same record schema as microscopic runs (lb = 0).
    """
    rng = np.random.default_rng(derive_seed(seed, 3))
    # dense lookup of log sigma for fast scalar queries in the loop
    src = surface._source_L(L)
    lo, hi = surface.h_range(src)
    h_dense = np.linspace(lo, hi, 4096)
    s_dense = np.asarray(surface.sigma(L, h_dense), dtype=np.float64)
    hc = surface.transition_field(src)

    xi = rng.standard_normal(steps)
    m = np.empty(steps)
    h_bar = np.empty(steps)
    cur = float(m0)
    hist = [cur]
    clamped = 0
    for t in range(steps):
        mb = float(np.mean(hist[-window:]))
        hq = alpha * abs(mb)
        if hq < lo or hq > hi:
            clamped += 1
        s = float(np.interp(hq, h_dense, s_dense))
        cur = _reflect_unit(cur + s * xi[t])
        m[t] = cur
        h_bar[t] = hq
        hist.append(cur)
        if len(hist) > window:
            hist = hist[-window:]
    dm = np.empty(steps)
    dm[0] = m[0] - m0
    dm[1:] = np.diff(m)
    return SeriesRecord(
        t=np.arange(steps, dtype=np.int64), m=m, dm=dm,
        lb=np.zeros(steps, dtype=np.int64), h_smoothed=h_bar,
        meta={"L": L, "alpha": alpha, "seed": seed, "mode": "self_driven",
              "window": window, "clamped_queries": clamped,
              "m_crit": hc / alpha if alpha else np.inf})


def run_driven(h_series: np.ndarray, surface: VolatilitySurface, L: int,
               seed: int = 0) -> np.ndarray:
    """dm(t) = sigma(L, |h_bar(t)|) * xi_t for an externally supplied field.

    No feedback from the macroscopic walk to the field; an empty series
    yields an empty output.
    """
    h = np.asarray(h_series, dtype=np.float64)
    if h.size == 0:
        return np.empty(0)
    rng = np.random.default_rng(derive_seed(seed, 4))
    sig = np.asarray(surface.sigma(L, np.abs(h)), dtype=np.float64)
    return sig * rng.standard_normal(h.size)


# ---------------------------------------------------------------------------
# micro/macro comparison
# ---------------------------------------------------------------------------

@dataclass
class ComparisonReport:
    t: np.ndarray
    sigma_micro: np.ndarray      # trailing-window std of micro dm
    sigma_pred: np.ndarray       # surface value at the recorded |h_bar|
    log_ratio: np.ndarray        # log(sigma_micro / sigma_pred)
    excluded: np.ndarray         # disordered excursions |h_bar| > h_crit
    median_abs_log_ratio: float
    mean_log_ratio: float
    correlation: float
    n_excluded: int
    window: int
    h_crit: float

    def stats_dict(self) -> dict:
        return {"median_abs_log_ratio": self.median_abs_log_ratio,
                "mean_log_ratio": self.mean_log_ratio,
                "correlation": self.correlation,
                "n_excluded": self.n_excluded,
                "n_compared": int(len(self.t) - self.n_excluded),
                "window": self.window, "h_crit": self.h_crit}


def _trailing_std(x: np.ndarray, window: int) -> np.ndarray:
    """Population std over the trailing window (shorter at the start)."""
    c1 = np.concatenate([[0.0], np.cumsum(x)])
    c2 = np.concatenate([[0.0], np.cumsum(x * x)])
    n = len(x)
    out = np.empty(n)
    for i in range(n):
        hi = i + 1
        lo = max(0, hi - window)
        k = hi - lo
        mean = (c1[hi] - c1[lo]) / k
        var = (c2[hi] - c2[lo]) / k - mean * mean
        out[i] = np.sqrt(max(var, 0.0))
    return out


def compare_micro_macro(series: SeriesRecord, surface: VolatilitySurface,
                        L: Optional[int] = None,
                        window: int = SMOOTH_WINDOW) -> ComparisonReport:
    """Compare rolling micro volatility to the surface prediction.

    sigma_micro(t) is the trailing-``window`` std of dm; the prediction is
    sigma(L, |h_bar(t)|) with h_bar from the recorded series.  Time steps
    with |h_bar| beyond the transition field (disordered excursions, where
    the random-walk equation does not apply) are excluded from the scores.
    """
    if len(series) < window:
        raise ValueError(f"series of length {len(series)} shorter than window {window}")
    if L is None:
        L = int(series.meta.get("L", 0))
        if not L:
            raise ValueError("system size L not in series metadata; pass explicitly")
    sigma_micro = _trailing_std(series.dm, window)
    sigma_pred = np.asarray(surface.sigma(L, np.abs(series.h_smoothed)))
    h_crit = surface.transition_field(L)
    excluded = np.abs(series.h_smoothed) > h_crit

    valid = np.arange(len(series)) >= window - 1
    ok = valid & ~excluded & (sigma_micro > 0) & (sigma_pred > 0)
    if not ok.any():
        raise ValueError("no comparable steps (all excluded or degenerate)")
    log_ratio = np.full(len(series), np.nan)
    log_ratio[ok] = np.log(sigma_micro[ok] / sigma_pred[ok])
    corr = float(np.corrcoef(sigma_micro[ok], sigma_pred[ok])[0, 1]) \
        if ok.sum() > 2 else np.nan
    return ComparisonReport(
        t=series.t, sigma_micro=sigma_micro, sigma_pred=sigma_pred,
        log_ratio=log_ratio, excluded=excluded,
        median_abs_log_ratio=float(np.median(np.abs(log_ratio[ok]))),
        mean_log_ratio=float(np.mean(log_ratio[ok])),
        correlation=corr,
        n_excluded=int((valid & excluded).sum()),
        window=window, h_crit=h_crit)


# ---------------------------------------------------------------------------
# return density as a Gaussian mixture over the field history
# ---------------------------------------------------------------------------

def return_density(surface: VolatilitySurface, h_series: np.ndarray, L: int,
                   grid: np.ndarray) -> np.ndarray:
    """Density of |dm| implied by the field history: an equal-weight mixture
    of half-normals with scales sigma(L, |h_bar(t)|).

    rho(x) = (1/T) * sum_t sqrt(2/pi) / sigma_t * exp(-x^2 / (2 sigma_t^2)),
    which integrates to 1 over x in [0, inf).
    """
    h = np.asarray(h_series, dtype=np.float64)
    if h.size == 0:
        raise ValueError("empty field series")
    sig = np.asarray(surface.sigma(L, np.abs(h)), dtype=np.float64)
    if np.any(sig <= 0):
        raise ValueError("surface returned nonpositive sigma")
    grid = np.asarray(grid, dtype=np.float64)
    out = np.empty(grid.size)
    pref = np.sqrt(2.0 / np.pi) / sig
    inv2s2 = 0.5 / (sig * sig)
    for i, x in enumerate(grid):
        out[i] = float(np.mean(pref * np.exp(-x * x * inv2s2)))
    return out


def mixture_density_function(surface: VolatilitySurface, h_series: np.ndarray,
                             L: int):
    """Callable rho(x) for quadrature checks."""
    def rho(x):
        return return_density(surface, h_series, L, np.atleast_1d(x))[0]
    return rho
