"""Imperfect Hamiltonians: random term removal, sinks, removers, span growth.

Generator indices follow :meth:`CssCode.generators`: X-type first, then Z-type.
Every stochastic routine derives one independent stream per trial from
``(seed, trial)`` so results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import f2algebra as f2
from .csscode import CssCode, PauliOperator, symplectic_commute
from .f2algebra import F2Poly3


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial),)))


# --------------------------------------------------------------------------
# removal

def removal_probability(beta: float, d: int = 2) -> float:
    """``d / (e^beta - 1 + d)``; for qubits (d=2) this is ``2 / (e^beta + 1)``."""
    if beta < 0 or math.isnan(beta):
        raise ValueError(f"beta must be >= 0, got {beta}")
    if d < 2:
        raise ValueError("local dimension d must be >= 2")
    if beta > 700:
        return d * math.exp(-beta)
    return d / (math.expm1(beta) + d)


@dataclass(frozen=True, eq=False)
class ImperfectMask:
    kept: np.ndarray
    p: float
    beta: float | None = None
    seed: int | None = None

    @property
    def n_kept(self) -> int:
        return int(self.kept.sum())

    @classmethod
    def full(cls, code: CssCode) -> "ImperfectMask":
        return cls(np.ones(code.n_x + code.n_z, np.uint8), p=0.0)

    @classmethod
    def removing(cls, code: CssCode, x_removed=(), z_removed=()) -> "ImperfectMask":
        kept = np.ones(code.n_x + code.n_z, np.uint8)
        kept[list(x_removed)] = 0
        kept[[code.n_x + j for j in z_removed]] = 0
        return cls(kept, p=float("nan"))

    def x_kept(self, code: CssCode) -> np.ndarray:
        return self.kept[: code.n_x]

    def z_kept(self, code: CssCode) -> np.ndarray:
        return self.kept[code.n_x:]


def sample_imperfect(code: CssCode, beta: float, seed: int) -> ImperfectMask:
    """Keep each generator independently with probability ``1 - p(beta)``."""
    p = removal_probability(beta) if math.isfinite(beta) else 0.0
    rng = np.random.default_rng(seed)
    kept = (rng.random(code.n_x + code.n_z) >= p).astype(np.uint8)
    return ImperfectMask(kept, p=p, beta=beta, seed=seed)


# --------------------------------------------------------------------------
# sink percolation on the toric code

@dataclass(frozen=True, eq=False)
class GridPartition:
    """Cells of ``L x L`` vertices; ``labels[v]`` is the cell of vertex ``v = x + L*y``."""

    L: int
    side: float
    labels: np.ndarray
    n_cells: int

    def cells(self) -> list[np.ndarray]:
        order = np.argsort(self.labels, kind="stable")
        bounds = np.searchsorted(self.labels[order], np.arange(self.n_cells + 1))
        return [order[bounds[i]:bounds[i + 1]] for i in range(self.n_cells)]


def grid_partition(L: int, n_cells: int, side: float) -> GridPartition:
    """Split the ``L x L`` torus into ``n_cells`` compact cells of near-equal size.

    Vertices are walked strip by strip (strips of height ``round(side)``),
    column by column inside a strip, and cut into consecutive runs whose sizes
    differ by at most one. Each run is a near-square block of about
    ``side x side`` vertices.
    """
    n = L * L
    if not 1 <= n_cells <= n:
        raise ValueError(f"need 1 <= n_cells <= {n}")
    h = max(1, min(L, int(round(side))))
    xs, ys = np.meshgrid(np.arange(L), np.arange(L), indexing="xy")
    xs, ys = xs.ravel(), ys.ravel()
    strip = ys // h
    walk = np.lexsort((ys, xs, strip))
    base, extra = divmod(n, n_cells)
    sizes = np.full(n_cells, base)
    sizes[:extra] += 1
    labels = np.empty(n, np.int64)
    labels[walk] = np.repeat(np.arange(n_cells), sizes)
    return GridPartition(L=L, side=side, labels=labels, n_cells=n_cells)


def sink_formula(L: int, p: float, c: float) -> float:
    """``(1 - L^{c ln(1-p)})^{L^2 / (c ln L)}`` with natural logs."""
    if p >= 1:
        return 1.0
    if p <= 0:
        return 0.0
    q = math.exp(c * math.log(1 - p) * math.log(L))
    return math.exp(L * L / (c * math.log(L)) * math.log1p(-q))


@dataclass(frozen=True)
class SinkResult:
    L: int
    p: float
    c: float
    trials: int
    empirical: float
    formula: float
    stderr: float

    @property
    def z_score(self) -> float:
        if self.stderr == 0:
            return 0.0 if self.empirical == self.formula else math.inf
        return (self.empirical - self.formula) / self.stderr


def grid_sink_probability(L: int, p: float, c: float, trials: int, seed: int) -> SinkResult:
    """Fraction of trials in which every grid cell holds a removed vertex term.

    Cells have average area ``c ln L``. Because that area is rarely an integer
    number of vertices and ``L^2`` is rarely a multiple of it, each trial draws
    the cell count by stochastic rounding of ``L^2 / (c ln L)`` and uses the
    matching near-equal partition.
    """
    if L < 2:
        raise ValueError("L must be >= 2")
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if c <= 0:
        raise ValueError("c must be positive")
    area = c * math.log(L)
    side = math.sqrt(area)
    if side < 1:
        raise ValueError(f"grid side sqrt(c ln L) = {side:.3f} < 1")
    n = L * L
    target = n / area
    lo = max(1, int(math.floor(target)))
    frac = target - math.floor(target) if target >= 1 else 0.0
    parts = {k: grid_partition(L, k, side) for k in {lo, min(n, lo + 1)}}
    hits = 0
    for t in range(trials):
        rng = trial_rng(seed, t)
        k = lo + int(rng.random() < frac) if lo < n else lo
        removed = rng.random(n) < p
        part = parts[k]
        covered = np.bincount(part.labels[removed], minlength=part.n_cells)
        hits += int(np.all(covered > 0))
    formula = sink_formula(L, p, c)
    return SinkResult(L=L, p=p, c=c, trials=trials, empirical=hits / trials, formula=formula,
                      stderr=math.sqrt(formula * (1 - formula) / trials))


# --------------------------------------------------------------------------
# removers

def _box_qubits(code: CssCode, j: int, r_box: float) -> np.ndarray:
    g = code.geometry
    if g is None or g.x_anchor is None:
        raise ValueError("code has no geometry with X-generator anchors")
    d = g.distance(g.coords, g.x_anchor[j])
    return np.flatnonzero(d < r_box)


def find_remover(code: CssCode, mask: ImperfectMask, j: int, r_box: float) -> PauliOperator | None:
    """Z-type operator inside the box around X-generator ``j`` that flips only ``j``.

    The box holds the qubits whose distance to the generator anchor is
    strictly below ``r_box``.
    """
    if not 0 <= j < code.n_x:
        raise ValueError(f"X-generator index {j} out of range")
    xk = mask.x_kept(code)
    if not xk[j]:
        raise ValueError(f"X-generator {j} is not present in the mask")
    box = _box_qubits(code, j, r_box)
    if box.size == 0:
        return None
    present = np.flatnonzero(xk)
    sub = code.hx[np.ix_(present, box)]
    touching = sub.any(axis=1)
    rows = sub[touching]
    target = (present[touching] == j).astype(np.uint8)
    sol = f2.solve_linear(rows, target)
    if sol is None:
        return None
    z = np.zeros(code.n, np.uint8)
    z[box] = sol
    return PauliOperator.z_type(z)


def check_remover(code: CssCode, mask: ImperfectMask, j: int, v: PauliOperator) -> bool:
    """Exhaustive contract check against every present X-generator."""
    for i in np.flatnonzero(mask.x_kept(code)):
        anti = not symplectic_commute(code.x_generator(int(i)), v)
        if anti != (int(i) == j):
            return False
    return True


@dataclass(frozen=True)
class ClassicalizeResult:
    removers: list[tuple[int, PauliOperator]] | None
    failed_index: int | None = None

    @property
    def ok(self) -> bool:
        return self.removers is not None


def classicalize(code: CssCode, mask: ImperfectMask, r_box: float) -> ClassicalizeResult:
    """Removers for every present X-generator, or the first index without one."""
    out: list[tuple[int, PauliOperator]] = []
    for j in np.flatnonzero(mask.x_kept(code)):
        v = find_remover(code, mask, int(j), r_box)
        if v is None:
            return ClassicalizeResult(None, int(j))
        out.append((int(j), v))
    return ClassicalizeResult(out)


# --------------------------------------------------------------------------
# span growth in the staircase region

def poly_to_int(poly: F2Poly3) -> int:
    """Bitmask of a polynomial in ``x`` alone (bit i <-> x^i)."""
    if any(b or c for _, b, c in poly.terms):
        raise ValueError("polynomial must involve x only")
    return sum(1 << a for a, _, _ in poly.terms)


def clmul(a: int, b: int) -> int:
    """Carry-less product of bitmask polynomials."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def staircase_polynomials(f: F2Poly3, r: int) -> list[list[int]]:
    """``layers[t-1]`` lists the bitmasks ``x^i f^e`` of layer ``t`` (t = 1..r).

    Layer ``t`` covers columns ``i = m(r-t) + c`` (``c < m``) with ``e < t``,
    so every polynomial has degree below ``m r``. Powers are taken with
    :func:`f2algebra.poly_pow` in a ring whose period exceeds that degree,
    and the absence of wraparound is checked.
    """
    m = f.degree(0)
    if m < 1 or (0, 0, 0) not in f.terms:
        raise ValueError("f needs a nonzero constant term and degree >= 1")
    period = m * r + 1
    fl = F2Poly3.from_terms(f.terms, period)
    powers = []
    for e in range(r):
        pe = f2.poly_pow(fl, e)
        if pe.degree(0) != m * e:
            raise ArithmeticError("exponent wrapped around the period")
        powers.append(poly_to_int(pe))
    layers = []
    for t in range(1, r + 1):
        row = []
        for c in range(m):
            i = m * (r - t) + c
            row.extend(powers[e] << i for e in range(t))
        layers.append(row)
    return layers


@dataclass(eq=False)
class SpanStats:
    """Trajectories of ``d_t`` (column ``t`` is after ``t`` layers)."""

    m: int
    p: float
    r: int
    trials: int
    seed: int
    d: np.ndarray = field(repr=False)

    def prob_maximal(self, t: int | None = None) -> tuple[float, float]:
        t = self.r if t is None else t
        hit = self.d[:, t] == self.m * t
        est = float(hit.mean())
        return est, math.sqrt(max(est * (1 - est), 0.0) / self.trials)

    def prob_maximal_curve(self) -> np.ndarray:
        t = np.arange(self.r + 1)
        return (self.d == self.m * t).mean(axis=0)

    def histogram(self, t: int) -> np.ndarray:
        return np.bincount(self.d[:, t], minlength=self.m * t + 1)

    def transitions(self, t: int) -> np.ndarray:
        """``counts[a, b]`` = number of trials with ``d_t = a`` and ``d_{t+1} = b``."""
        size = self.m * (t + 1) + 1
        counts = np.zeros((size, size), np.int64)
        np.add.at(counts, (self.d[:, t], self.d[:, t + 1]), 1)
        return counts

    def stay_given_maximal(self, t: int) -> tuple[float, int]:
        """Estimate of ``P[d_{t+1} = d_t | d_t maximal]`` and the conditioned sample size."""
        sel = self.d[:, t] == self.m * t
        n = int(sel.sum())
        if n == 0:
            return float("nan"), 0
        return float((self.d[sel, t + 1] == self.d[sel, t]).mean()), n

    def jump_given_submaximal(self, t: int | None = None, threshold: int | None = None) -> tuple[float, int]:
        """``P[d_{t+1} - d_t >= threshold | d_t < m t]``; ``threshold`` defaults to ``m + 1``.

        With ``t=None`` all layers ``1..r-1`` are pooled.
        """
        thr = self.m + 1 if threshold is None else threshold
        ts = range(1, self.r) if t is None else [t]
        num = den = 0
        for s in ts:
            sel = self.d[:, s] < self.m * s
            den += int(sel.sum())
            num += int(((self.d[sel, s + 1] - self.d[sel, s]) >= thr).sum())
        return (num / den if den else float("nan")), den


def _insert(basis: dict[int, int], v: int) -> bool:
    while v:
        top = v.bit_length() - 1
        b = basis.get(top)
        if b is None:
            basis[top] = v
            return True
        v ^= b
    return False


def lemma3_simulate(f: F2Poly3, p: float, r: int, trials: int, seed: int) -> SpanStats:
    """Grow ``F_t`` layer by layer, selecting each new site with probability ``p``."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    layers = staircase_polynomials(f, r)
    m = f.degree(0)
    d = np.zeros((trials, r + 1), np.int16)
    for k in range(trials):
        rng = trial_rng(seed, k)
        basis: dict[int, int] = {}
        full = True  # while maximal, F_t is every x^i with m(r-t) <= i < m r
        dt = 0
        for t in range(1, r + 1):
            polys = layers[t - 1]
            sel = np.flatnonzero(rng.random(len(polys)) < p)
            lo = m * (r - t)
            if full:
                # reduce modulo the full block: only the m new low bits matter
                low = (1 << (lo + m)) - 1
                win: dict[int, int] = {}
                gained = sum(_insert(win, polys[s] & low) for s in sel)
                dt += gained
                if gained < m:
                    full = False
                    basis = {b: 1 << b for b in range(lo + m, m * r)}
                    basis.update(win)
            else:
                for s in sel:
                    dt += _insert(basis, polys[s])
                full = dt == m * t
            d[k, t] = dt
    return SpanStats(m=m, p=p, r=r, trials=trials, seed=seed, d=d)


@dataclass(frozen=True)
class BoxScalingRow:
    p: float
    r_star: int | None
    prob: float
    trials: int


@dataclass(frozen=True)
class BoxScaling:
    rows: list[BoxScalingRow]
    m: int
    eps: float
    fit_exponent: float | None   # r* ~ A * (1/p)^gamma, least squares in log-log
    fit_prefactor: float | None


def min_box_scaling(f: F2Poly3, p_list, eps: float = 0.01, r_max: int = 200,
                    trials: int = 2000, seed: int = 0) -> BoxScaling:
    """Smallest staircase size ``r`` with empirical ``P[d_r maximal] >= 1 - eps``.

    The first ``t`` layers of a size-``r_max`` region are a size-``t`` region
    up to translation, so one run per ``p`` covers every ``r <= r_max``.
    ``r*`` is made monotone by taking the first ``r`` after which the curve
    stays above the threshold.
    """
    rows = []
    m = f.degree(0)
    for idx, p in enumerate(p_list):
        st = lemma3_simulate(f, p, r_max, trials, seed + idx)
        curve = st.prob_maximal_curve()[1:]
        ok = curve >= 1 - eps
        bad = np.flatnonzero(~ok)
        r_star = None
        if ok[-1]:
            r_star = int(bad[-1] + 2) if bad.size else 1
        prob = float(curve[r_star - 1]) if r_star else float(curve[-1])
        rows.append(BoxScalingRow(p=float(p), r_star=r_star, prob=prob, trials=trials))
    good = [(r.p, r.r_star) for r in rows if r.r_star and r.p < 1]
    gamma = pref = None
    if len(good) >= 2:
        x = np.log([1 / p for p, _ in good])
        y = np.log([r for _, r in good])
        if np.ptp(x) > 0:
            gamma, c0 = np.polyfit(x, y, 1)
            gamma, pref = float(gamma), float(math.exp(c0))
    return BoxScaling(rows=rows, m=m, eps=eps, fit_exponent=gamma, fit_prefactor=pref)


# --------------------------------------------------------------------------
# Gibbs state versus free ensemble

@dataclass(frozen=True)
class GibbsFreeResult:
    distance: float
    stderr: float
    exact: bool
    n_sectors: int


def _sector_signs(code: CssCode) -> tuple[np.ndarray, int]:
    """``bits[j, s]``: 1 if generator ``j`` has eigenvalue -1 in syndrome sector ``s``.

    Sectors are labelled by the eigenvalues of a maximal independent subset of
    the generators (X-type first, as everywhere else).
    """
    sym = code.stabilizer_matrix()
    basis_rows: list[int] = []
    r = 0
    for i in range(sym.shape[0]):
        nr = f2.rank(sym[basis_rows + [i]])
        if nr > r:
            basis_rows.append(i)
            r = nr
    # coefficients expressing each generator in terms of the basis generators
    b = sym[basis_rows]
    coeff = np.zeros((sym.shape[0], r), np.uint8)
    for j in range(sym.shape[0]):
        sol = f2.solve_linear(b.T, sym[j])
        coeff[j] = sol
    sectors = ((np.arange(1 << r)[None, :] >> np.arange(r)[:, None]) & 1).astype(np.int64)
    bits = (coeff.astype(np.int64) @ sectors) & 1
    return bits.astype(np.uint8), r


def gibbs_free_distance(code: CssCode, beta: float, mc_threshold: int = 20,
                        samples: int = 20000, seed: int = 0) -> GibbsFreeResult:
    """Trace distance between ``exp(-beta H)/Z`` and the free ensemble.

    ``H = -sum_j (1 + S_j)/2`` over all listed generators, the projector form
    for which ``p = 2/(e^beta + 1)`` makes the product identity exact. Both states are diagonal in
    the joint stabilizer eigenbasis with weights that depend only on the
    syndrome sector, so the trace distance reduces to a total-variation
    distance between two distributions over sectors. Masks are summed exactly
    while the generator count is at most ``mc_threshold``; above that they
    are sampled and a batch standard error is reported.
    """
    if code.n > 12:
        raise ValueError(f"n = {code.n} exceeds the dense limit of 12 qubits")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    bits, r = _sector_signs(code)
    N = bits.shape[0]
    ns = 1 << r
    logw = beta * (N - bits.sum(axis=0, dtype=np.float64))     # satisfied terms per sector
    gibbs = np.exp(logw - logw.max())
    gibbs /= gibbs.sum()
    p = removal_probability(beta) if math.isfinite(beta) else 0.0
    # satisfied[j] as a Python int bitset over sectors
    sat = [int("".join("1" if b == 0 else "0" for b in row[::-1]), 2) if ns else 0 for row in bits]
    all_sectors = (1 << ns) - 1

    def accumulate(weights: dict[int, float]) -> np.ndarray:
        out = np.zeros(ns)
        for pattern, w in weights.items():
            idx = np.array([i for i in range(ns) if pattern >> i & 1])
            out[idx] += w / idx.size
        return out

    if N <= mc_threshold:
        states: dict[int, float] = {all_sectors: 1.0}
        for j in range(N):
            nxt: dict[int, float] = {}
            for pattern, w in states.items():
                nxt[pattern] = nxt.get(pattern, 0.0) + w * p
                kept = pattern & sat[j]
                nxt[kept] = nxt.get(kept, 0.0) + w * (1 - p)
            states = nxt
        free = accumulate(states)
        return GibbsFreeResult(float(0.5 * np.abs(gibbs - free).sum()), 0.0, True, ns)

    rng = np.random.default_rng(seed)
    batches = 10
    per = max(1, samples // batches)
    totals = np.zeros(ns)
    dists = []
    for _ in range(batches):
        counts: dict[int, float] = {}
        keep = rng.random((per, N)) >= p
        for row in keep:
            pattern = all_sectors
            for j in np.flatnonzero(row):
                pattern &= sat[j]
            counts[pattern] = counts.get(pattern, 0.0) + 1.0 / per
        est = accumulate(counts)
        totals += est / batches
        dists.append(0.5 * np.abs(gibbs - est).sum())
    dist = float(0.5 * np.abs(gibbs - totals).sum())
    return GibbsFreeResult(dist, float(np.std(dists, ddof=1) / math.sqrt(batches)), False, ns)
