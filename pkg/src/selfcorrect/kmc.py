"""Sparse Ising lattice and rejection-free (BKL) kinetic Monte Carlo.

The sparse lattice is a torus of degree-4 junctions spaced ``s`` sites apart,
joined by chains of ``s - 1`` degree-2 sites. Spins evolve under single-spin
Metropolis dynamics, simulated with the Bortz-Kalos-Lebowitz n-fold way: sites
are bucketed by the energy change a flip would cause, a bucket is chosen with
probability proportional to ``population * rate`` and one member is flipped.

Time is measured in sweeps (one attempted flip per site per unit time).
"""

from __future__ import annotations

import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

CLOCK_MEAN = 0
CLOCK_EXPONENTIAL = 1
_CLOCKS = {"mean": CLOCK_MEAN, "exponential": CLOCK_EXPONENTIAL}

DEFAULT_MAX_STEPS = 2_000_000_000


@dataclass(frozen=True)
class SparseLattice:
    """Ising graph with CSR adjacency.

    ``coords`` holds integer positions on the underlying ``L x L`` grid and
    ``degree`` the vertex degrees (4 for junctions, 2 for chain sites on the
    periodic sparse lattice).
    """

    L: int
    s: int
    periodic: bool
    coords: np.ndarray
    edges: np.ndarray
    degree: np.ndarray
    nbr_ptr: np.ndarray
    nbr_idx: np.ndarray

    @property
    def n_vertices(self) -> int:
        return int(self.degree.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def n_junctions(self) -> int:
        return int(np.count_nonzero(self.degree == 4))

    @property
    def max_degree(self) -> int:
        return int(self.degree.max()) if self.degree.size else 0

    def neighbors(self, i: int) -> np.ndarray:
        return self.nbr_idx[self.nbr_ptr[i] : self.nbr_ptr[i + 1]]


def graph_from_edges(n_vertices: int, edges, coords=None, L: int = 0, s: int = 0,
                     periodic: bool = True) -> SparseLattice:
    """Build a lattice object from an explicit edge list.

    Self-loops are rejected and duplicate edges collapsed.
    """
    uniq = set()
    for a, b in edges:
        a, b = int(a), int(b)
        if a == b:
            raise ValueError(f"self-loop at vertex {a}")
        if not (0 <= a < n_vertices and 0 <= b < n_vertices):
            raise ValueError(f"edge ({a}, {b}) out of range")
        uniq.add((min(a, b), max(a, b)))
    edge_arr = np.array(sorted(uniq), dtype=np.int64).reshape(-1, 2)
    degree = np.zeros(n_vertices, dtype=np.int64)
    np.add.at(degree, edge_arr[:, 0], 1)
    np.add.at(degree, edge_arr[:, 1], 1)
    nbr_ptr = np.zeros(n_vertices + 1, dtype=np.int64)
    nbr_ptr[1:] = np.cumsum(degree)
    nbr_idx = np.empty(nbr_ptr[-1], dtype=np.int64)
    fill = nbr_ptr[:-1].copy()
    for a, b in edge_arr:
        nbr_idx[fill[a]] = b
        fill[a] += 1
        nbr_idx[fill[b]] = a
        fill[b] += 1
    if coords is None:
        coords = np.zeros((n_vertices, 2), dtype=np.int64)
    return SparseLattice(
        L=L, s=s, periodic=periodic,
        coords=np.asarray(coords, dtype=np.int64),
        edges=edge_arr, degree=degree, nbr_ptr=nbr_ptr, nbr_idx=nbr_idx,
    )


def junction_spacing(L: int, alpha: float = 0.5) -> int:
    """Return the integer junction spacing ``L**(1 - alpha)``.

    Raises ValueError unless the spacing is an integer dividing ``L``
    (for ``alpha = 1/2`` this means ``L`` must be a perfect square).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    raw = L ** (1.0 - alpha)
    s = int(round(raw))
    if s < 1 or abs(raw - s) > 1e-9 or L % s:
        raise ValueError(f"L={L} gives non-integer junction spacing {raw:.4f} at alpha={alpha}")
    return s


def build_sparse_lattice(L: int, alpha: float = 0.5, periodic: bool = True,
                         s: int | None = None) -> SparseLattice:
    """Construct the sparse Ising lattice of linear size ``L``.

    Each junction at ``(a*s, b*s)`` owns a rightward and an upward chain of
    ``s - 1`` sites. With ``periodic=False`` chains are only laid between
    junctions inside the ``[0, L] x [0, L]`` square.
    """
    if L < 1:
        raise ValueError(f"L must be positive, got {L}")
    if s is None:
        if L < 4:
            raise ValueError(f"L must be >= 4, got {L}")
        s = junction_spacing(L, alpha)
    if s < 1 or L % s:
        raise ValueError(f"spacing s={s} must divide L={L}")
    nj = L // s if periodic else L // s + 1
    index: dict[tuple[int, int], int] = {}
    coords: list[tuple[int, int]] = []

    def vid(x: int, y: int) -> int:
        if periodic:
            x, y = x % L, y % L
        key = (x, y)
        if key not in index:
            index[key] = len(coords)
            coords.append(key)
        return index[key]

    for b in range(nj):
        for a in range(nj):
            vid(a * s, b * s)
    edges = []
    for b in range(nj):
        for a in range(nj):
            x0, y0 = a * s, b * s
            if periodic or a + 1 < nj:
                prev = vid(x0, y0)
                for u in range(1, s + 1):
                    cur = vid(x0 + u, y0)
                    edges.append((prev, cur))
                    prev = cur
            if periodic or b + 1 < nj:
                prev = vid(x0, y0)
                for u in range(1, s + 1):
                    cur = vid(x0, y0 + u)
                    edges.append((prev, cur))
                    prev = cur
    return graph_from_edges(len(coords), edges, coords=coords, L=L, s=s, periodic=periodic)


def metropolis_rate(delta_e: float, beta: float) -> float:
    """Metropolis acceptance ``min(1, exp(-beta * delta_e))``."""
    if delta_e <= 0:
        return 1.0
    return math.exp(-beta * delta_e)


# --------------------------------------------------------------------------
# numba kernels

@njit(cache=True)
def _splitmix64(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = x
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True)
def _next_double(st):
    # xoshiro256**
    result = _rotl(st[1] * np.uint64(5), 7) * np.uint64(9)
    t = st[1] << np.uint64(17)
    st[2] ^= st[0]
    st[3] ^= st[1]
    st[1] ^= st[2]
    st[0] ^= st[3]
    st[2] ^= t
    st[3] = _rotl(st[3], 45)
    return (result >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _move(i, newc, cls, members, count, pos):
    oldc = cls[i]
    if oldc == newc:
        return
    p = pos[i]
    last = members[oldc, count[oldc] - 1]
    members[oldc, p] = last
    pos[last] = p
    count[oldc] -= 1
    members[newc, count[newc]] = i
    pos[i] = count[newc]
    count[newc] += 1
    cls[i] = newc


@njit(cache=True)
def _flip(i, spins, field, cls, members, count, pos, nbr_ptr, nbr_idx, offset):
    """Flip spin ``i`` and rebucket it and its neighbours; return dE in units of J."""
    de = 2 * spins[i] * field[i]
    s_new = -spins[i]
    spins[i] = s_new
    _move(i, s_new * field[i] + offset, cls, members, count, pos)
    for k in range(nbr_ptr[i], nbr_ptr[i + 1]):
        j = nbr_idx[k]
        field[j] += 2 * s_new
        _move(j, spins[j] * field[j] + offset, cls, members, count, pos)
    return de


@njit(cache=True)
def _select(count, rates, u_class, u_member):
    total = 0.0
    for c in range(count.shape[0]):
        total += count[c] * rates[c]
    target = u_class * total
    acc = 0.0
    chosen = -1
    for c in range(count.shape[0]):
        w = count[c] * rates[c]
        if w > 0.0:
            chosen = c
            acc += w
            if target < acc:
                break
    m = int(u_member * count[chosen])
    if m >= count[chosen]:
        m = count[chosen] - 1
    return chosen, m, total


@njit(cache=True, nogil=True)
def _run(spins, field, cls, members, count, pos, nbr_ptr, nbr_idx, rates, offset,
         rng, max_steps, clock, stop_mag):
    """Run BKL until magnetization <= stop_mag or ``max_steps`` flips.

    Returns (elapsed time, steps, magnetization, energy change, hit flag).
    """
    mag = 0
    for i in range(spins.shape[0]):
        mag += spins[i]
    t = 0.0
    de_total = 0
    steps = 0
    if mag <= stop_mag:
        return t, steps, mag, de_total, True
    while steps < max_steps:
        u1 = _next_double(rng)
        u2 = _next_double(rng)
        c, m, total = _select(count, rates, u1, u2)
        if clock == 1:
            u3 = _next_double(rng)
            t += -math.log(1.0 - u3) / total
        else:
            t += 1.0 / total
        i = members[c, m]
        mag -= 2 * spins[i]
        de_total += _flip(i, spins, field, cls, members, count, pos, nbr_ptr, nbr_idx, offset)
        steps += 1
        if mag <= stop_mag:
            return t, steps, mag, de_total, True
    return t, steps, mag, de_total, False


# --------------------------------------------------------------------------
# state

@dataclass
class KmcState:
    """Spin configuration plus the BKL bucket tables.

    Buckets are indexed by ``spin * local_field + max_degree``; the energy
    change of flipping a site in bucket ``c`` is ``2 J (c - max_degree)``.
    ``energy`` is tracked incrementally in units of J.
    """

    spins: np.ndarray
    field: np.ndarray
    cls: np.ndarray
    members: np.ndarray
    count: np.ndarray
    pos: np.ndarray
    offset: int
    time: float = 0.0
    energy: int = 0
    steps: int = 0

    @property
    def class_populations(self) -> np.ndarray:
        return self.count.copy()

    @property
    def magnetization(self) -> int:
        return int(self.spins.sum())

    def delta_e_of_class(self, c: int) -> int:
        """Energy change (units of J) of flipping a member of bucket ``c``."""
        return 2 * (c - self.offset)


def ising_energy(lattice: SparseLattice, spins: np.ndarray) -> int:
    """Full recomputation of ``-sum_<ij> s_i s_j`` (units of J)."""
    e = lattice.edges
    return -int(np.sum(spins[e[:, 0]] * spins[e[:, 1]]))


def init_state(lattice: SparseLattice, spins=None) -> KmcState:
    """Bucket every site; default start is all spins up."""
    n = lattice.n_vertices
    if n == 0:
        raise ValueError("empty lattice")
    if spins is None:
        spins = np.ones(n, dtype=np.int64)
    spins = np.asarray(spins, dtype=np.int64).copy()
    field = np.zeros(n, dtype=np.int64)
    for i in range(n):
        field[i] = spins[lattice.neighbors(i)].sum()
    offset = lattice.max_degree
    ncls = 2 * offset + 1
    members = np.zeros((ncls, n), dtype=np.int64)
    count = np.zeros(ncls, dtype=np.int64)
    pos = np.zeros(n, dtype=np.int64)
    cls = spins * field + offset
    for i in range(n):
        c = cls[i]
        members[c, count[c]] = i
        pos[i] = count[c]
        count[c] += 1
    return KmcState(spins=spins, field=field, cls=cls, members=members, count=count,
                    pos=pos, offset=offset, energy=ising_energy(lattice, spins))


def class_rates(offset: int, beta: float, J: float = 1.0) -> np.ndarray:
    """Metropolis rate of each bucket, computed once per (lattice, beta)."""
    return np.array([metropolis_rate(2.0 * J * (c - offset), beta)
                     for c in range(2 * offset + 1)], dtype=np.float64)


def bkl_step(state: KmcState, lattice: SparseLattice, beta: float,
             rng: np.random.Generator, J: float = 1.0, clock: str = "mean"):
    """Perform one rejection-free flip in place; return ``(state, dt)``."""
    if state.spins.size == 0:
        raise ValueError("empty system")
    rates = class_rates(state.offset, beta, J)
    u1, u2, u3 = rng.random(3)
    c, m, total = _select(state.count, rates, u1, u2)
    if total <= 0.0:
        raise ValueError("no site can flip (total rate is zero)")
    dt = 1.0 / total if _CLOCKS[clock] == CLOCK_MEAN else -math.log(1.0 - u3) / total
    i = state.members[c, m]
    state.energy += int(_flip(i, state.spins, state.field, state.cls, state.members,
                              state.count, state.pos, lattice.nbr_ptr, lattice.nbr_idx,
                              state.offset))
    state.time += dt
    state.steps += 1
    return state, dt


# --------------------------------------------------------------------------
# trials and sweeps

def trial_seed(master_seed: int, L: int, beta: float, trial: int) -> np.ndarray:
    """Deterministic xoshiro256 state for one (L, beta, trial) cell."""
    bits = struct.unpack("<Q", struct.pack("<d", float(beta)))[0]
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(L),
                                 bits & 0xFFFFFFFF, bits >> 32, int(trial)])
    st = ss.generate_state(4, dtype=np.uint64)
    if not st.any():
        st[0] = 1
    return st


@dataclass(frozen=True)
class TrialResult:
    tau: float
    steps: int
    timed_out: bool


def memory_time_trial(lattice: SparseLattice, beta: float, seed, J: float = 1.0,
                      clock: str = "mean", max_steps: int = DEFAULT_MAX_STEPS) -> TrialResult:
    """Time for the all-up state to first reach magnetization <= 0.

    ``seed`` is either an int or a 4-word xoshiro state from ``trial_seed``.
    Runs that exhaust ``max_steps`` are returned with ``timed_out=True``.
    """
    if np.isscalar(seed):
        rng = np.random.SeedSequence(int(seed)).generate_state(4, dtype=np.uint64)
    else:
        rng = np.array(seed, dtype=np.uint64).copy()
    state = init_state(lattice)
    rates = class_rates(state.offset, beta, J)
    t, steps, _, _, hit = _run(state.spins, state.field, state.cls, state.members,
                               state.count, state.pos, lattice.nbr_ptr, lattice.nbr_idx,
                               rates, state.offset, rng, max_steps, _CLOCKS[clock], 0)
    return TrialResult(tau=float(t), steps=int(steps), timed_out=not hit)


@dataclass(frozen=True)
class SweepRow:
    L: int
    beta: float
    trial: int
    tau: float
    steps: int
    timed_out: bool


@dataclass
class MemorySweepResult:
    rows: list[SweepRow]
    summary: dict[tuple[int, float], tuple[float, float]] = field(default_factory=dict)
    peaks: dict[float, tuple[int, float]] = field(default_factory=dict)
    fit: dict | None = None

    def series(self, beta: float) -> list[tuple[int, float, float]]:
        """(L, mean tau, stderr) for one temperature, sorted by L."""
        return sorted((L, m, se) for (L, b), (m, se) in self.summary.items() if b == beta)


def default_threads() -> int:
    env = os.environ.get("SELFCORRECT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def fit_double_exponential(betas, tau_max) -> dict:
    """OLS of ``ln ln tau`` against beta: ``tau = exp(kappa' exp(kappa beta))``."""
    betas = np.asarray(betas, dtype=float)
    tau_max = np.asarray(tau_max, dtype=float)
    if betas.size < 3:
        raise ValueError("need at least 3 beta points to fit")
    if np.any(tau_max <= 1.0):
        raise ValueError("ln ln tau undefined for tau <= 1")
    y = np.log(np.log(tau_max))
    slope, intercept = np.polyfit(betas, y, 1)
    resid = y - (slope * betas + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return {
        "kappa": float(slope),
        "kappa_prime": float(math.exp(intercept)),
        "intercept": float(intercept),
        "r2": r2,
        "points": [[float(b), float(t)] for b, t in zip(betas, tau_max)],
    }


def sweep_and_fit(L_list, beta_list, trials: int, master_seed: int, J: float = 1.0,
                  alpha: float = 0.5, clock: str = "mean",
                  max_steps: int = DEFAULT_MAX_STEPS, threads: int | None = None,
                  fit: bool = True) -> MemorySweepResult:
    """Full factorial memory-time sweep with per-beta peak and double-exponential fit.

    The peak at each beta is the largest mean tau over the L grid. Every trial
    is seeded from (master_seed, L, beta, trial) so results do not depend on
    scheduling.
    """
    lattices = {L: build_sparse_lattice(L, alpha=alpha) for L in L_list}
    jobs = [(L, b, t) for L in L_list for b in beta_list for t in range(trials)]

    def work(job):
        L, b, t = job
        r = memory_time_trial(lattices[L], b, trial_seed(master_seed, L, b, t), J=J,
                              clock=clock, max_steps=max_steps)
        return SweepRow(L, float(b), t, r.tau, r.steps, r.timed_out)

    nthreads = threads if threads is not None else default_threads()
    if nthreads > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            rows = list(ex.map(work, jobs))
    else:
        rows = [work(j) for j in jobs]

    result = MemorySweepResult(rows=rows)
    cells: dict[tuple[int, float], list[float]] = {}
    for r in rows:
        cells.setdefault((r.L, r.beta), []).append(r.tau)
    for key, taus in cells.items():
        a = np.asarray(taus)
        se = float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else 0.0
        result.summary[key] = (float(a.mean()), se)
    for b in sorted({float(b) for b in beta_list}):
        best = max(((L, m) for (L, bb), (m, _) in result.summary.items() if bb == b),
                   key=lambda x: x[1])
        result.peaks[b] = best
    if fit:
        bs = sorted(result.peaks)
        if len(bs) < 3:
            raise ValueError("need at least 3 beta points to fit")
        result.fit = fit_double_exponential(bs, [result.peaks[b][1] for b in bs])
    return result
