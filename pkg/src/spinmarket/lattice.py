"""Microscopic spin market model on a periodic square lattice.

N = L^2 agents hold states S_i = +/-1.  A randomly chosen agent feels the
local field

    h_i = sum_over_neighbours(S_j) - |h| * S_i

where h couples the agent to the global state: in dynamic mode h = alpha * m
with m the instantaneous magnetization, in frozen mode h is a constant h0.
The minority term uses |h|, unlike a conventional external-field coupling, so
it always penalizes agreement with the majority.  Heat-bath updates draw the
new state S_i = +1 with probability 1 / (1 + exp(-2 beta h_i)) regardless of
the old state.  One time step is a sweep of N attempts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from . import kernels
from .rng import Xoshiro256, derive_seed
from .series import SeriesRecord

# Exact critical temperature of the square-lattice Ising model at J = 1.
T_CRITICAL = 2.0 / math.log(1.0 + math.sqrt(2.0))

# Stream-split tags (see rng.derive_seed): one substream for the random
# initial state, one for the update dynamics.
_STREAM_INIT = 1
_STREAM_DYNAMICS = 2


class InitState(str, Enum):
    """Initial lattice configurations."""

    STRIPES = "stripes"        # +1 for x < L/2, -1 otherwise: two straight walls
    UNIFORM_UP = "up"
    UNIFORM_DOWN = "down"
    RANDOM = "random"          # fair coin per site


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set of a simulation run.

    beta defaults to 1 / (temp_fraction * T_CRITICAL); passing beta directly
    overrides the temperature fraction.
    """

    L: int
    alpha: float
    temp_fraction: float = 0.2
    beta: Optional[float] = None
    field_mode: str = "dynamic"   # "dynamic" (h = alpha * m) or "frozen" (h = h0)
    h0: float = 0.0
    updater: str = "naive"        # "naive" or "active"
    seed: int = 0
    pin_columns: bool = False

    def __post_init__(self):
        if self.L < 2:
            raise ValueError(f"L must be >= 2, got {self.L}")
        if self.beta is None:
            if not self.temp_fraction > 0:
                raise ValueError("temp_fraction must be positive")
            object.__setattr__(self, "beta", 1.0 / (self.temp_fraction * T_CRITICAL))
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.field_mode not in ("dynamic", "frozen"):
            raise ValueError(f"unknown field_mode {self.field_mode!r}")
        if self.field_mode == "frozen" and not math.isfinite(self.h0):
            raise ValueError("frozen-mode field h0 must be finite")
        if self.updater not in ("naive", "active"):
            raise ValueError(f"unknown updater {self.updater!r}")
        if self.pin_columns and self.L % 4 != 0:
            raise ValueError("pin_columns requires L divisible by 4")

    @property
    def n_sites(self) -> int:
        return self.L * self.L

    @property
    def dynamic(self) -> bool:
        return self.field_mode == "dynamic"


class StepObservables(NamedTuple):
    m: float
    dm: float
    lb: int


def _neighbour_table(L: int) -> np.ndarray:
    idx = np.arange(L * L, dtype=np.int32)
    row, col = idx // L, idx % L
    return np.stack([
        ((row - 1) % L) * L + col,   # up
        ((row + 1) % L) * L + col,   # down
        row * L + (col - 1) % L,     # left
        row * L + (col + 1) % L,     # right
    ], axis=1).astype(np.int32)


class SpinLattice:
    """L x L spin grid with periodic boundaries and incrementally cached
    spin sum and border length.

    The caches are maintained by the update kernels; ``recompute_*`` rebuild
    them from scratch for coherence checks.
    """

    def __init__(self, L: int, spins: np.ndarray, pinned: Optional[np.ndarray] = None):
        if L < 2:
            raise ValueError("L must be >= 2")
        spins = np.asarray(spins, dtype=np.int8).reshape(L * L)
        if not np.all(np.abs(spins) == 1):
            raise ValueError("spins must be +1 or -1")
        self.L = L
        self.n = L * L
        self.spins = spins
        self.pinned = (np.zeros(self.n, dtype=np.bool_) if pinned is None
                       else np.asarray(pinned, dtype=np.bool_).reshape(self.n))
        self.nbrs = _neighbour_table(L)
        self.spin_sum = int(spins.sum(dtype=np.int64))
        self.border = self.recompute_border()

    # -- construction ------------------------------------------------------

    @classmethod
    def from_init(cls, L: int, init: InitState = InitState.STRIPES,
                  pin_columns: bool = False, rng: Optional[Xoshiro256] = None) -> "SpinLattice":
        init = InitState(init)
        col = np.arange(L * L, dtype=np.int64) % L
        if init is InitState.STRIPES:
            spins = np.where(col < L // 2, 1, -1)
        elif init is InitState.UNIFORM_UP:
            spins = np.ones(L * L, dtype=np.int64)
        elif init is InitState.UNIFORM_DOWN:
            spins = -np.ones(L * L, dtype=np.int64)
        else:
            if rng is None:
                raise ValueError("random init requires an rng")
            spins = np.array([1 if rng.uniform() < 0.5 else -1 for _ in range(L * L)],
                             dtype=np.int64)
        pinned = None
        if pin_columns:
            if L % 4 != 0:
                raise ValueError("pin_columns requires L divisible by 4")
            pinned = (col == L // 4) | (col == 3 * L // 4)
            spins = spins.copy()
            spins[col == L // 4] = 1
            spins[col == 3 * L // 4] = -1
        return cls(L, spins, pinned)

    def copy(self) -> "SpinLattice":
        return SpinLattice(self.L, self.spins.copy(), self.pinned.copy())

    # -- observables -------------------------------------------------------

    def magnetization(self) -> float:
        """Mean spin m = spin_sum / N, in [-1, 1]."""
        return self.spin_sum / self.n

    def border_length(self) -> int:
        """Number of nearest-neighbour bonds joining opposite spins (cached)."""
        return self.border

    def local_field(self, site: int, h: float) -> float:
        """Local field at ``site`` for global field value ``h`` (uses |h|)."""
        if not 0 <= site < self.n:
            raise IndexError(f"site {site} outside lattice of {self.n} sites")
        if not math.isfinite(h):
            raise ValueError("h must be finite")
        nb = int(self.spins[self.nbrs[site]].sum(dtype=np.int64))
        return nb - abs(h) * int(self.spins[site])

    def recompute_spin_sum(self) -> int:
        return int(self.spins.sum(dtype=np.int64))

    def recompute_border(self) -> int:
        """Border length from scratch: right and down bonds cover all 2N bonds."""
        grid = self.spins.reshape(self.L, self.L)
        horiz = grid != np.roll(grid, -1, axis=1)
        vert = grid != np.roll(grid, -1, axis=0)
        return int(horiz.sum()) + int(vert.sum())

    @property
    def grid(self) -> np.ndarray:
        return self.spins.reshape(self.L, self.L)

    # -- active-set bookkeeping -------------------------------------------

    def active_mask(self) -> np.ndarray:
        """Free sites with at least one disagreeing neighbour."""
        disagree = (self.spins[self.nbrs] != self.spins[:, None]).any(axis=1)
        return disagree & ~self.pinned

    def build_active_set(self):
        active_list = np.full(self.n, -1, dtype=np.int64)
        active_pos = np.full(self.n, -1, dtype=np.int64)
        idx = np.flatnonzero(self.active_mask())
        active_list[: idx.size] = idx
        active_pos[idx] = np.arange(idx.size)
        return active_list, active_pos, int(idx.size)

    def pinned_count(self) -> int:
        return int(self.pinned.sum())


def flip_up_probability(h_i: float, beta: float) -> float:
    """Heat-bath probability of drawing S_i = +1: 1 / (1 + exp(-2 beta h_i)).

    Overflow safe; the down probability is the complement and is never stored.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    x = 2.0 * beta * h_i
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def step(lattice: SpinLattice, params: ModelParams, rng: Xoshiro256) -> StepObservables:
    """Advance one time step (N attempts) and return its observables.

    Uses the updater selected in params.  For repeated stepping prefer
    :func:`run_series`, which keeps the active set alive between steps.
    """
    prev_m = lattice.magnetization()
    out_sum = np.empty(1, dtype=np.int64)
    out_border = np.empty(1, dtype=np.int64)
    if params.updater == "active":
        active_list, active_pos, n_active = lattice.build_active_set()
        s, b, _ = kernels.run_active(
            lattice.spins, lattice.nbrs, lattice.pinned,
            params.alpha, params.beta, params.h0, params.dynamic,
            lattice.spin_sum, lattice.border, 1, rng.state,
            active_list, active_pos, n_active, lattice.pinned_count(),
            out_sum, out_border)
    else:
        s, b = kernels.run_naive(
            lattice.spins, lattice.nbrs, lattice.pinned,
            params.alpha, params.beta, params.h0, params.dynamic,
            lattice.spin_sum, lattice.border, 1, rng.state,
            out_sum, out_border)
    lattice.spin_sum, lattice.border = int(s), int(b)
    m = lattice.magnetization()
    return StepObservables(m=m, dm=m - prev_m, lb=lattice.border)


def _trailing_mean(values: np.ndarray, warm: np.ndarray, window: int) -> np.ndarray:
    """Trailing-window mean of ``values``, warm-started with ``warm`` history."""
    ext = np.concatenate([warm, values])
    c = np.concatenate([[0.0], np.cumsum(ext)])
    out = np.empty(len(values))
    k = len(warm)
    for i in range(len(values)):
        hi = k + i + 1
        lo = max(0, hi - window)
        out[i] = (c[hi] - c[lo]) / (hi - lo)
    return out


def run_series(params: ModelParams, steps: int, equil: int = 0,
               init: InitState = InitState.STRIPES,
               lattice: Optional[SpinLattice] = None,
               smooth_window: int = 30) -> SeriesRecord:
    """Run ``equil`` discarded steps then ``steps`` recorded steps.

    Returns the per-step record (t, m, dm, lb, h_smoothed).  In dynamic mode
    h_smoothed = alpha * trailing-mean(m); in frozen mode it is h0.  When a
    lattice is passed in it is evolved in place and ``init`` is ignored.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if lattice is None:
        init_rng = Xoshiro256(derive_seed(params.seed, _STREAM_INIT))
        lattice = SpinLattice.from_init(params.L, init, params.pin_columns, rng=init_rng)
    rng = Xoshiro256(derive_seed(params.seed, _STREAM_DYNAMICS))

    n = lattice.n
    use_active = params.updater == "active"
    n_active = 0
    if use_active:
        active_list, active_pos, n_active = lattice.build_active_set()
        n_pinned = lattice.pinned_count()

    def _run(n_steps, out_sum, out_border):
        nonlocal n_active
        if use_active:
            s, b, n_active = kernels.run_active(
                lattice.spins, lattice.nbrs, lattice.pinned,
                params.alpha, params.beta, params.h0, params.dynamic,
                lattice.spin_sum, lattice.border, n_steps, rng.state,
                active_list, active_pos, n_active, n_pinned,
                out_sum, out_border)
        else:
            s, b = kernels.run_naive(
                lattice.spins, lattice.nbrs, lattice.pinned,
                params.alpha, params.beta, params.h0, params.dynamic,
                lattice.spin_sum, lattice.border, n_steps, rng.state,
                out_sum, out_border)
        lattice.spin_sum, lattice.border = int(s), int(b)

    warm = np.empty(0)
    m_prev = lattice.magnetization()
    if equil > 0:
        eq_sum = np.empty(equil, dtype=np.int64)
        eq_border = np.empty(equil, dtype=np.int64)
        _run(equil, eq_sum, eq_border)
        eq_m = eq_sum / n
        warm = eq_m[-(smooth_window - 1):]
        m_prev = eq_m[-1]

    out_sum = np.empty(steps, dtype=np.int64)
    out_border = np.empty(steps, dtype=np.int64)
    _run(steps, out_sum, out_border)

    m = out_sum / n
    dm = np.empty(steps)
    dm[0] = m[0] - m_prev
    dm[1:] = np.diff(m)
    if params.dynamic:
        h_smoothed = params.alpha * _trailing_mean(m, warm, smooth_window)
    else:
        h_smoothed = np.full(steps, params.h0)
    return SeriesRecord(
        t=np.arange(steps, dtype=np.int64),
        m=m, dm=dm, lb=out_border, h_smoothed=h_smoothed,
        meta={
            "L": params.L, "alpha": params.alpha, "beta": params.beta,
            "field_mode": params.field_mode, "h0": params.h0,
            "updater": params.updater, "seed": params.seed,
            "pin_columns": params.pin_columns, "init": str(getattr(init, "value", init)),
            "equil": equil, "steps": steps, "smooth_window": smooth_window,
        })
