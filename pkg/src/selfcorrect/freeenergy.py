"""Peierls and Arrhenius estimates for droplet free energies and memory times.

Natural logarithms throughout. Times are carried as ``ln tau`` so that very
large memory times never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import lambertw


def droplet_free_energy(E: float, T: float, b: float) -> float:
    """``E - T * E * ln(b)``: energy minus temperature times branching entropy."""
    if E < 0 or T < 0:
        raise ValueError("E and T must be non-negative")
    if b <= 1:
        raise ValueError("branching factor must exceed 1")
    return E - T * E * math.log(b)


def ising2d_tc_lower_bound() -> float:
    """``1 / ln 3``, where the three-way branching entropy cancels the energy."""
    return 1.0 / math.log(3.0)


@dataclass(frozen=True)
class WeldedBoundParams:
    beta: float
    J: float = 1.0
    alpha: float = 0.5

    def __post_init__(self):
        if self.J <= 0:
            raise ValueError("J must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.beta <= 0:
            raise ValueError("beta must be positive")


def welded_fb_bound(params: WeldedBoundParams, L):
    """``2 J L^a - (L^a / beta) ((1-a) ln L + ln 2)``; accepts scalars or arrays."""
    L = np.asarray(L, dtype=np.float64)
    if np.any(L < 2):
        raise ValueError("L must be >= 2")
    u = L ** params.alpha
    out = 2 * params.J * u - (u / params.beta) * ((1 - params.alpha) * np.log(L) + math.log(2))
    return float(out) if out.ndim == 0 else out


def welded_stationary_point(params: WeldedBoundParams) -> tuple[float, float]:
    """Closed-form maximiser ``(L*, F*)`` of :func:`welded_fb_bound`.

    With ``u = L^a`` the bound is concave in ``u`` and stationary at
    ``ln u* = a/(1-a) (2 J beta - ln 2) - 1``, where ``F* = u* (1-a) / (a beta)``.
    """
    a, J, b = params.alpha, params.J, params.beta
    ln_u = a / (1 - a) * (2 * J * b - math.log(2)) - 1
    u = math.exp(ln_u)
    return math.exp(ln_u / a), u * (1 - a) / (a * b)


@dataclass(frozen=True)
class LMaxResult:
    L_star: float
    F_star: float
    index: int
    on_boundary: bool
    positive: bool

    @property
    def flagged(self) -> bool:
        return self.on_boundary or not self.positive


def l_max(params: WeldedBoundParams, L_grid) -> LMaxResult:
    """Grid argmax of the welded barrier; flagged when on the grid edge or not positive."""
    grid = np.asarray(L_grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 3:
        raise ValueError("L grid needs at least three points")
    F = welded_fb_bound(params, grid)
    i = int(np.argmax(F))
    return LMaxResult(L_star=float(grid[i]), F_star=float(F[i]), index=i,
                      on_boundary=i in (0, grid.size - 1), positive=bool(F[i] > 0))


@dataclass(frozen=True)
class TauResult:
    ln_tau: float
    overflow: bool

    @property
    def tau(self) -> float:
        return math.inf if self.overflow else math.exp(self.ln_tau)


def arrhenius_tau(beta: float, f_b: float) -> TauResult:
    """``tau = exp(beta f_b)`` kept in log form; ``overflow`` marks values beyond float range."""
    ln_tau = beta * f_b
    return TauResult(ln_tau=ln_tau, overflow=ln_tau > math.log(np.finfo(float).max))


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    r2: float
    n: int

    def to_json(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2, "n": self.n}


def fit_line(x, y) -> LineFit:
    """Ordinary least squares with the coefficient of determination."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 2:
        raise ValueError("need at least two points")
    res = stats.linregress(x, y)
    return LineFit(float(res.slope), float(res.intercept), float(res.rvalue ** 2), int(x.size))


def tau_max_curve(betas, J: float = 1.0, alpha: float = 0.5) -> list[tuple[float, float, float]]:
    """``(beta, L*, ln tau_max)`` using the closed-form optimum at each beta."""
    out = []
    for b in betas:
        Ls, Fs = welded_stationary_point(WeldedBoundParams(beta=float(b), J=J, alpha=alpha))
        out.append((float(b), Ls, arrhenius_tau(float(b), Fs).ln_tau))
    return out


def fit_double_exponential_curve(betas, ln_tau) -> LineFit:
    """Fit ``ln ln tau = kappa beta + ln kappa'``; requires every ``ln tau > 0``."""
    ln_tau = np.asarray(ln_tau, dtype=np.float64)
    if np.any(ln_tau <= 0):
        raise ValueError("ln tau must be positive to take a second logarithm")
    return fit_line(betas, np.log(ln_tau))


# --------------------------------------------------------------------------
# cubic-code complexity sketch

@dataclass(frozen=True)
class CubicProfile:
    beta: float
    L: np.ndarray
    R: np.ndarray
    barrier: np.ndarray
    L0: float               # crossover used for the barrier, e^{c'' beta}
    L_cross: float | None   # exact largest root of e^{c' beta} ln L = L (None if no root)
    peak_L: float
    peak_barrier: float

    @property
    def ln_tau_peak(self) -> float:
        return self.beta * self.peak_barrier


def cubic_complexity_profile(beta: float, L_grid, c_prime: float,
                             c_double_prime: float | None = None) -> CubicProfile:
    """Circuit range ``R = min(L, e^{c' beta} ln L)`` and a barrier sketch.

    The barrier grows as ``ln L`` up to ``L0 = e^{c'' beta}`` and decays as
    ``ln L * L0 / L`` beyond it, so its peak is ``c'' beta`` at ``L0``.
    ``c''`` defaults to ``c'``, the leading-order location of ``R = L``; the
    exact crossing (which carries an extra ``ln ln L`` shift) is also reported.
    """
    if c_prime <= 0:
        raise ValueError("c_prime must be positive")
    cpp = c_prime if c_double_prime is None else c_double_prime
    L = np.asarray(L_grid, dtype=np.float64)
    if np.any(L <= 1):
        raise ValueError("L must exceed 1")
    a = math.exp(c_prime * beta)
    R = np.minimum(L, a * np.log(L))
    L0 = math.exp(cpp * beta)
    barrier = np.log(L) * np.minimum(1.0, L0 / L)
    cross = None
    if c_prime * beta >= 1:
        w = lambertw(-1.0 / a, k=-1)
        cross = float(math.exp(-w.real)) if np.isfinite(w) else math.e
    i = int(np.argmax(barrier))
    return CubicProfile(beta=beta, L=L, R=R, barrier=barrier, L0=L0, L_cross=cross,
                        peak_L=float(L[i]), peak_barrier=float(barrier[i]))
