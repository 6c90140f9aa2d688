"""Jitted update kernels for the spin lattice.

Two updaters produce statistically equivalent dynamics:

* ``run_naive``: one time step = N = L^2 single-site heat-bath attempts on
  uniformly drawn sites.  This is the reference dynamics; runs are bit
  reproducible for a given seed.
* ``run_active``: draws attempts only from the set of active sites (sites
  with at least one disagreeing neighbour), one attempt per active site per
  step on average, and handles the flip-suppressed bulk with an aggregate
  binomial draw per step.  Cost per step is proportional to the border
  length instead of N in the ordered phase.

The RNG is xoshiro256++ (see :mod:`spinmarket.rng` for the matching Python
implementation and the stream-splitting rule).  Each attempt consumes one
draw for the site choice and, unless the site is pinned, one for the
heat-bath decision.

In frozen-field mode the local field takes ten distinct values, so the flip
probabilities are precomputed into a (neighbour-sum, own-spin) table; in
dynamic mode the field moves with every flip and the logistic is evaluated
per attempt.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_U11 = np.uint64(11)
_U17 = np.uint64(17)
_U23 = np.uint64(23)
_U41 = np.uint64(41)
_U45 = np.uint64(45)
_U19 = np.uint64(19)
_INV53 = 1.0 / 9007199254740992.0  # 2^-53


@njit(inline="always", cache=True)
def _next_u64(s):
    x = s[0] + s[3]
    result = ((x << _U23) | (x >> _U41)) + s[0]
    t = s[1] << _U17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = (s[3] << _U45) | (s[3] >> _U19)
    return result


@njit(inline="always", cache=True)
def _uniform(s):
    return np.float64(_next_u64(s) >> _U11) * _INV53


@njit(inline="always", cache=True)
def _below(s, n):
    # modulo bias is O(n / 2^64), irrelevant at lattice scales
    return np.int64(_next_u64(s) % np.uint64(n))


@njit(inline="always", cache=True)
def _p_up(x):
    # logistic(x) for x = 2*beta*h_i, overflow safe on both sides
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def _flip_table(beta, h):
    """p_up for every (neighbour sum, own spin) pair at a fixed field h."""
    tab = np.empty((5, 2), dtype=np.float64)
    for k in range(5):
        nb = 2.0 * k - 4.0
        for j in range(2):
            s = 2.0 * j - 1.0
            tab[k, j] = _p_up(2.0 * beta * (nb - abs(h) * s))
    return tab


@njit(cache=True, nogil=True)
def _binomial(state, n, p):
    """Binomial draw; exact CDF inversion for small means, normal tail fallback."""
    if n <= 0 or p <= 0.0:
        return np.int64(0)
    if p >= 1.0:
        return np.int64(n)
    mean = n * p
    if mean > 50.0:
        # far outside the rare-flip regime the active updater is built for
        u1 = 1.0 - _uniform(state)
        u2 = _uniform(state)
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(6.283185307179586 * u2)
        k = np.int64(round(mean + z * np.sqrt(mean * (1.0 - p))))
        if k < 0:
            k = 0
        if k > n:
            k = n
        return k
    q = 1.0 - p
    pk = np.exp(n * np.log1p(-p))
    u = _uniform(state)
    k = np.int64(0)
    cdf = pk
    while u > cdf and k < n:
        pk = pk * (n - k) / (k + 1.0) * (p / q)
        k += 1
        cdf += pk
        if pk == 0.0:
            break
    return k


@njit(cache=True, nogil=True)
def run_naive(spins, nbrs, pinned, alpha, beta, h0, dynamic,
              spin_sum, border, n_steps, state, out_sum, out_border):
    """Run ``n_steps`` sweeps of N random single-site heat-bath attempts.

    Mutates ``spins`` and ``state`` in place, records the cached spin sum and
    border length after each sweep, and returns the final caches.
    """
    n = spins.shape[0]
    ptab = _flip_table(beta, h0)
    for t in range(n_steps):
        for _ in range(n):
            site = _below(state, n)
            if pinned[site]:
                continue  # pinned sites consume the site draw only
            s_old = np.int64(spins[site])
            nb = (np.int64(spins[nbrs[site, 0]]) + np.int64(spins[nbrs[site, 1]])
                  + np.int64(spins[nbrs[site, 2]]) + np.int64(spins[nbrs[site, 3]]))
            if dynamic:
                h = alpha * spin_sum / n
                p = _p_up(2.0 * beta * (nb - abs(h) * s_old))
            else:
                p = ptab[(nb + 4) >> 1, (s_old + 1) >> 1]
            u = _uniform(state)
            s_new = np.int64(1) if u < p else np.int64(-1)
            if s_new != s_old:
                spin_sum += 2 * s_new
                border += s_old * nb
                spins[site] = np.int8(s_new)
        out_sum[t] = spin_sum
        out_border[t] = border
    return spin_sum, border


@njit(inline="always", cache=True)
def _refresh_active(i, spins, nbrs, pinned, active_list, active_pos, n_active):
    """Re-evaluate the activity predicate of site i and fix the set."""
    active = False
    if not pinned[i]:
        si = spins[i]
        if (spins[nbrs[i, 0]] != si or spins[nbrs[i, 1]] != si
                or spins[nbrs[i, 2]] != si or spins[nbrs[i, 3]] != si):
            active = True
    pos = active_pos[i]
    if active and pos < 0:
        active_list[n_active] = i
        active_pos[i] = n_active
        n_active += 1
    elif not active and pos >= 0:
        last = active_list[n_active - 1]
        active_list[pos] = last
        active_pos[last] = pos
        active_pos[i] = -1
        n_active -= 1
    return n_active


@njit(inline="always", cache=True)
def _apply_flip(site, s_new, spins, nbrs, pinned, active_list, active_pos,
                n_active, spin_sum, border):
    """Set ``site`` to ``s_new`` and repair caches and the active set."""
    s_old = np.int64(spins[site])
    nb = (np.int64(spins[nbrs[site, 0]]) + np.int64(spins[nbrs[site, 1]])
          + np.int64(spins[nbrs[site, 2]]) + np.int64(spins[nbrs[site, 3]]))
    spin_sum += 2 * s_new
    border += s_old * nb
    spins[site] = np.int8(s_new)
    n_active = _refresh_active(site, spins, nbrs, pinned,
                               active_list, active_pos, n_active)
    for j in range(4):
        n_active = _refresh_active(nbrs[site, j], spins, nbrs, pinned,
                                   active_list, active_pos, n_active)
    return n_active, spin_sum, border


@njit(cache=True, nogil=True)
def run_active(spins, nbrs, pinned, alpha, beta, h0, dynamic,
               spin_sum, border, n_steps, state,
               active_list, active_pos, n_active, n_pinned,
               out_sum, out_border):
    """Active-set counterpart of :func:`run_naive`.

    Per step: draws ``|A|`` heat-bath attempts from the live active set (|A|
    taken at the step start, so each active site sees one attempt per step on
    average, as under the naive updater), then applies the aggregate bulk
    flips.  Returns the final caches and active-set size.
    """
    n = spins.shape[0]
    ptab = _flip_table(beta, h0)
    for t in range(n_steps):
        if 4 * n_active > n:
            # Dense set (disordered phase): per-flip set maintenance costs
            # more than a plain sweep, so run the exact naive step and
            # rebuild the set afterwards.
            for _ in range(n):
                site = _below(state, n)
                if pinned[site]:
                    continue
                s_old = np.int64(spins[site])
                nb = (np.int64(spins[nbrs[site, 0]]) + np.int64(spins[nbrs[site, 1]])
                      + np.int64(spins[nbrs[site, 2]]) + np.int64(spins[nbrs[site, 3]]))
                if dynamic:
                    h = alpha * spin_sum / n
                    p = _p_up(2.0 * beta * (nb - abs(h) * s_old))
                else:
                    p = ptab[(nb + 4) >> 1, (s_old + 1) >> 1]
                u = _uniform(state)
                s_new = np.int64(1) if u < p else np.int64(-1)
                if s_new != s_old:
                    spin_sum += 2 * s_new
                    border += s_old * nb
                    spins[site] = np.int8(s_new)
            n_active = 0
            for i in range(n):
                active_pos[i] = -1
            for i in range(n):
                if not pinned[i]:
                    si = spins[i]
                    if (spins[nbrs[i, 0]] != si or spins[nbrs[i, 1]] != si
                            or spins[nbrs[i, 2]] != si or spins[nbrs[i, 3]] != si):
                        active_list[n_active] = i
                        active_pos[i] = n_active
                        n_active += 1
            out_sum[t] = spin_sum
            out_border[t] = border
            continue

        n_att = n_active
        for _ in range(n_att):
            if n_active == 0:
                break
            site = active_list[_below(state, n_active)]
            s_old = np.int64(spins[site])
            nb = (np.int64(spins[nbrs[site, 0]]) + np.int64(spins[nbrs[site, 1]])
                  + np.int64(spins[nbrs[site, 2]]) + np.int64(spins[nbrs[site, 3]]))
            if dynamic:
                h = alpha * spin_sum / n
                p = _p_up(2.0 * beta * (nb - abs(h) * s_old))
            else:
                p = ptab[(nb + 4) >> 1, (s_old + 1) >> 1]
            u = _uniform(state)
            s_new = np.int64(1) if u < p else np.int64(-1)
            if s_new != s_old:
                n_active, spin_sum, border = _apply_flip(
                    site, s_new, spins, nbrs, pinned, active_list, active_pos,
                    n_active, spin_sum, border)

        # Aggregate bulk process: every free inactive site has all four
        # neighbours agreeing, so the up and down classes share one flip
        # probability and the combined count can be drawn in one binomial,
        # preserving the exact per-site flip marginal.
        n_bulk = n - n_pinned - n_active
        if dynamic:
            h = alpha * spin_sum / n
        else:
            h = h0
        p_bulk = _p_up(-2.0 * beta * (4.0 - abs(h)))
        k_bulk = _binomial(state, n_bulk, p_bulk)
        for _ in range(k_bulk):
            if n - n_pinned - n_active <= 0:
                break
            # rejection-sample a live bulk site; falls back to a scan when
            # the bulk has become a tiny fraction of the lattice
            site = np.int64(-1)
            for _try in range(64 + 16 * (n // max(n - n_pinned - n_active, 1))):
                cand = _below(state, n)
                if active_pos[cand] < 0 and not pinned[cand]:
                    site = cand
                    break
            if site < 0:
                cnt = np.int64(0)
                for i in range(n):  # reservoir-sample uniformly over the bulk
                    if active_pos[i] < 0 and not pinned[i]:
                        cnt += 1
                        if _below(state, cnt) == 0:
                            site = i
            if site < 0:
                break
            n_active, spin_sum, border = _apply_flip(
                site, -np.int64(spins[site]), spins, nbrs, pinned,
                active_list, active_pos, n_active, spin_sum, border)
        out_sum[t] = spin_sum
        out_border[t] = border
    return spin_sum, border, n_active
