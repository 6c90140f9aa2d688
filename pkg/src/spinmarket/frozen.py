"""Frozen-field experiments: volatility estimation, (L, h) sweeps, scaling
collapses, and transition location.

Holding the global field at a constant h0 removes the feedback loop and
exposes the equilibrium volatility sigma(L, h) = std(dm).  Sweeping h across
the jump maps the phase diagram; below the transition sigma collapses under
L^{3/2} rescaling, above it under L^1.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats as sps

from . import io
from .lattice import InitState, ModelParams, run_series
from .rng import derive_seed
from .series import SeriesRecord
from .stats import autocorrelation

SATURATION_WINDOW = 100  # consecutive steps at |m| = 1 that flag saturation


@dataclass
class FrozenRunConfig:
    """Protocol for one constant-field run."""

    params: ModelParams
    equilibration_steps: int = 1000
    measurement_steps: int = 10000
    init: InitState = InitState.STRIPES

    def __post_init__(self):
        if self.params.field_mode != "frozen":
            raise ValueError("FrozenRunConfig requires frozen field_mode")
        if self.params.h0 < 0:
            raise ValueError("frozen field h0 must be >= 0")
        if self.measurement_steps < 100:
            raise ValueError("measurement_steps must be >= 100")


def frozen_config(L: int, h0: float, seed: int = 0, pin_columns: bool = True,
                  updater: str = "active", equilibration_steps: int = 1000,
                  measurement_steps: int = 10000,
                  temp_fraction: float = 0.2, beta: Optional[float] = None,
                  init: InitState = InitState.STRIPES) -> FrozenRunConfig:
    """Convenience constructor with this module's defaults (pinning ON)."""
    params = ModelParams(L=L, alpha=0.0, temp_fraction=temp_fraction, beta=beta,
                         field_mode="frozen", h0=h0, updater=updater,
                         seed=seed, pin_columns=pin_columns)
    return FrozenRunConfig(params=params, equilibration_steps=equilibration_steps,
                           measurement_steps=measurement_steps, init=init)


@dataclass
class FrozenSummary:
    L: int
    h0: float
    sigma: float
    sigma_stderr: float
    mean_lb: float
    kurtosis: float       # plain (Pearson) kurtosis; 3 for a Gaussian
    ac1: float            # lag-1 autocorrelation of dm
    seed: int
    steps: int
    saturated: bool = False

    def as_dict(self) -> dict:
        return {"L": self.L, "h": self.h0, "sigma": self.sigma,
                "sigma_stderr": self.sigma_stderr, "mean_lb": self.mean_lb,
                "kurtosis": self.kurtosis, "ac1": self.ac1,
                "seed": self.seed, "steps": self.steps,
                "saturated": self.saturated}


def _longest_saturated_run(m: np.ndarray) -> int:
    sat = np.abs(m) >= 1.0
    if not sat.any():
        return 0
    best = cur = 0
    for v in sat:
        cur = cur + 1 if v else 0
        best = max(best, cur)
    return best


def run_frozen(config: FrozenRunConfig) -> tuple[SeriesRecord, FrozenSummary]:
    """Equilibrate, then measure sigma, kurtosis and lag-1 autocorrelation of dm.

    Saturation (|m| pinned at 1 for a full window, possible only without
    pinned columns) is flagged in the summary, not fatal.
    """
    rec = run_series(config.params, steps=config.measurement_steps,
                     equil=config.equilibration_steps, init=config.init)
    dm = rec.dm
    sigma = float(dm.std())
    summary = FrozenSummary(
        L=config.params.L,
        h0=config.params.h0,
        sigma=sigma,
        sigma_stderr=sigma / np.sqrt(2.0 * max(len(dm) - 1, 1)),
        mean_lb=float(rec.lb.mean()),
        kurtosis=float(sps.kurtosis(dm, fisher=False)) if sigma > 0 else np.nan,
        ac1=float(autocorrelation(dm, 1)[1]) if sigma > 0 else np.nan,
        seed=config.params.seed,
        steps=config.measurement_steps,
        saturated=_longest_saturated_run(rec.m) >= SATURATION_WINDOW,
    )
    return rec, summary


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    """Grid of frozen-run summaries plus per-cell failures and metadata."""

    cells: list            # FrozenSummary, completed cells only
    errors: list           # dicts {L, h, seed, error}
    metadata: dict = field(default_factory=dict)

    def L_values(self) -> list:
        return sorted({c.L for c in self.cells})

    def curve(self, L: int) -> tuple[np.ndarray, np.ndarray]:
        """(h, sigma) arrays for one L, ascending in h."""
        pts = sorted((c.h0, c.sigma) for c in self.cells if c.L == L)
        if not pts:
            raise ValueError(f"no completed cells at L={L}")
        h, s = zip(*pts)
        return np.asarray(h), np.asarray(s)

    def cell(self, L: int, h: float) -> FrozenSummary:
        for c in self.cells:
            if c.L == L and np.isclose(c.h0, h):
                return c
        raise KeyError(f"no cell (L={L}, h={h})")

    def to_csv(self, path) -> None:
        cells = sorted(self.cells, key=lambda c: (c.L, c.h0))
        io.write_table(path, {
            "L": np.array([c.L for c in cells], dtype=np.int64),
            "h": np.array([c.h0 for c in cells]),
            "sigma": np.array([c.sigma for c in cells]),
            "sigma_stderr": np.array([c.sigma_stderr for c in cells]),
            "mean_lb": np.array([c.mean_lb for c in cells]),
            "kurtosis": np.array([c.kurtosis for c in cells]),
            "ac1": np.array([c.ac1 for c in cells]),
            "seed": np.array([c.seed for c in cells], dtype=np.int64),
            "steps": np.array([c.steps for c in cells], dtype=np.int64),
        })

    @classmethod
    def from_csv(cls, path) -> "SweepResult":
        cols = io.read_table(path)
        cells = [FrozenSummary(
            L=int(cols["L"][i]), h0=float(cols["h"][i]),
            sigma=float(cols["sigma"][i]), sigma_stderr=float(cols["sigma_stderr"][i]),
            mean_lb=float(cols["mean_lb"][i]), kurtosis=float(cols["kurtosis"][i]),
            ac1=float(cols["ac1"][i]), seed=int(cols["seed"][i]),
            steps=int(cols["steps"][i])) for i in range(len(cols["L"]))]
        return cls(cells=cells, errors=[], metadata={"source": str(path)})

    def summary_dict(self) -> dict:
        return {
            "L_values": self.L_values(),
            "n_cells": len(self.cells),
            "n_errors": len(self.errors),
            "errors": self.errors,
            **self.metadata,
        }


def cell_seed(base_seed: int, L: int, h: float) -> int:
    """Deterministic per-cell stream seed (stable under grid reordering)."""
    return derive_seed(base_seed, L, round(h * 1_000_000))


def sweep(L_list: Sequence[int], h_list: Sequence[float],
          template: FrozenRunConfig, base_seed: int = 0,
          threads: int = 1,
          skip: Optional[set] = None) -> SweepResult:
    """One frozen run per (L, h) cell with independent derived seeds.

    Cells are independent; with ``threads`` > 1 they run concurrently (the
    kernels release the GIL).  Per-cell failures are recorded and the sweep
    continues.  ``skip`` holds (L, h_microunits) pairs already done (resume).
    """
    if not L_list or not len(h_list):
        raise ValueError("L_list and h_list must be nonempty")
    jobs = []
    for L in L_list:
        for h in h_list:
            if skip and (int(L), round(float(h) * 1_000_000)) in skip:
                continue
            jobs.append((int(L), float(h)))

    def one(job):
        L, h = job
        seed = cell_seed(base_seed, L, h)
        cfg = replace(template,
                      params=replace(template.params, L=L, h0=h, seed=seed,
                                     pin_columns=template.params.pin_columns))
        try:
            _, summary = run_frozen(cfg)
            return summary, None
        except Exception as exc:  # noqa: BLE001 - cell failures must not kill the sweep
            return None, {"L": L, "h": h, "seed": seed, "error": str(exc)}

    results = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]

    cells = [s for s, e in results if s is not None]
    errors = [e for s, e in results if e is not None]
    return SweepResult(cells=cells, errors=errors, metadata={
        "base_seed": base_seed,
        "equilibration_steps": template.equilibration_steps,
        "measurement_steps": template.measurement_steps,
        "init": str(template.init.value),
        "pin_columns": template.params.pin_columns,
        "updater": template.params.updater,
        "beta": template.params.beta,
    })


# ---------------------------------------------------------------------------
# collapse and transition
# ---------------------------------------------------------------------------

@dataclass
class CollapseReport:
    exponent: float
    L_ref: int
    tolerance: float
    spreads: dict          # h -> relative spread of rescaled sigma across L
    holds: dict            # h -> bool
    max_spread: float
    holds_all: bool

    def as_dict(self) -> dict:
        return {"exponent": self.exponent, "L_ref": self.L_ref,
                "tolerance": self.tolerance,
                "spreads": {f"{h:g}": v for h, v in self.spreads.items()},
                "holds": {f"{h:g}": v for h, v in self.holds.items()},
                "max_spread": self.max_spread, "holds_all": self.holds_all}


def scaling_collapse(result: SweepResult, exponent: float, L_ref: int = 128,
                     tolerance: float = 0.15,
                     h_window: Optional[tuple] = None) -> CollapseReport:
    """Rescale sigma by (L / L_ref)^exponent and measure the spread across L.

    For every h present at >= 2 system sizes the relative spread
    (max - min) / mean of the rescaled sigma is reported; the collapse holds
    where the spread stays below ``tolerance``.
    """
    Ls = result.L_values()
    if len(Ls) < 2:
        raise ValueError("collapse needs >= 2 distinct L")
    by_h: dict = {}
    for c in result.cells:
        if h_window and not (h_window[0] <= c.h0 <= h_window[1]):
            continue
        by_h.setdefault(round(c.h0, 9), []).append(c)
    spreads, holds = {}, {}
    for h, cells in sorted(by_h.items()):
        if len({c.L for c in cells}) < 2:
            continue
        rescaled = [c.sigma * (c.L / L_ref) ** exponent for c in cells]
        spread = (max(rescaled) - min(rescaled)) / np.mean(rescaled)
        spreads[h] = float(spread)
        holds[h] = bool(spread < tolerance)
    if not spreads:
        raise ValueError("no h values shared by >= 2 system sizes")
    return CollapseReport(exponent=exponent, L_ref=L_ref, tolerance=tolerance,
                          spreads=spreads, holds=holds,
                          max_spread=max(spreads.values()),
                          holds_all=all(holds.values()))


@dataclass
class TransitionEstimate:
    found: bool
    h_crit: Optional[float]
    uncertainty: Optional[float]   # grid spacing at the jump
    jump_size: float               # max one-interval rise of log sigma
    L: int

    def as_dict(self) -> dict:
        return {"found": self.found, "h_crit": self.h_crit,
                "uncertainty": self.uncertainty, "jump_size": self.jump_size,
                "L": self.L}


def locate_transition(result: SweepResult, L: Optional[int] = None,
                      min_slope: float = 3.0) -> TransitionEstimate:
    """Locate the volatility jump as the steepest rise of log sigma(h).

    Returns the midpoint of the grid interval with the largest discrete
    logarithmic derivative d(log sigma)/dh, with the grid spacing as the
    uncertainty.  If the largest derivative stays below ``min_slope`` (the
    ordered branch climbs at ~1-2 per unit h, the jump at >5) the result is
    "no transition in range" (found=False).
    """
    if L is None:
        L = result.L_values()[-1]
    h, s = result.curve(L)
    if len(h) < 3:
        raise ValueError("need >= 3 grid points to locate a transition")
    if np.any(s <= 0):
        raise ValueError("nonpositive sigma in sweep")
    dlog = np.diff(np.log(s)) / np.diff(h)
    i = int(np.argmax(dlog))
    slope = float(dlog[i])
    if slope < min_slope:
        return TransitionEstimate(found=False, h_crit=None, uncertainty=None,
                                  jump_size=slope, L=L)
    return TransitionEstimate(found=True,
                              h_crit=float(0.5 * (h[i] + h[i + 1])),
                              uncertainty=float(h[i + 1] - h[i]),
                              jump_size=slope, L=L)
