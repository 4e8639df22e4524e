"""GF(2) linear algebra and periodic trivariate polynomials over GF(2).

Matrices and vectors are plain ``numpy`` arrays of dtype ``uint8`` holding 0/1.
Polynomials in ``x, y, z`` with ``x^L = y^L = z^L = 1`` are stored as sparse
sets of exponent triples.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

F2Vector = np.ndarray
F2Matrix = np.ndarray


def as_f2(a, ndim: int | None = None) -> np.ndarray:
    """Coerce to a uint8 0/1 array (entries reduced mod 2)."""
    arr = np.asarray(a)
    if arr.dtype == np.bool_:
        arr = arr.astype(np.uint8)
    else:
        arr = (arr.astype(np.int64) & 1).astype(np.uint8)
    if ndim == 2 and arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 0)
    return arr


def zeros(rows: int, cols: int) -> F2Matrix:
    return np.zeros((rows, cols), dtype=np.uint8)


def identity(n: int) -> F2Matrix:
    return np.eye(n, dtype=np.uint8)


def matmul(a, b) -> np.ndarray:
    """Matrix (or matrix-vector) product over GF(2)."""
    return (as_f2(a).astype(np.int64) @ as_f2(b).astype(np.int64) & 1).astype(np.uint8)


def row_reduce(m, ncols: int | None = None) -> tuple[F2Matrix, list[int]]:
    """Reduced row echelon form by Gauss-Jordan elimination.

    Only the first ``ncols`` columns are used for pivoting (default: all),
    which lets callers reduce augmented systems. Returns ``(rref, pivots)``
    where the first ``len(pivots)`` rows of ``rref`` are the nonzero rows.
    """
    work = as_f2(m, ndim=2).copy()
    rows, cols = work.shape
    if ncols is None:
        ncols = cols
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == rows:
            break
        nz = np.flatnonzero(work[r:, c])
        if nz.size == 0:
            continue
        p = r + nz[0]
        if p != r:
            work[[r, p]] = work[[p, r]]
        hits = np.flatnonzero(work[:, c])
        hits = hits[hits != r]
        if hits.size:
            work[hits] ^= work[r]
        pivots.append(c)
        r += 1
    return work, pivots


def rank(m) -> int:
    """Row rank over GF(2)."""
    arr = as_f2(m, ndim=2)
    if arr.size == 0:
        return 0
    return len(row_reduce(arr)[1])


def kernel_basis(m) -> F2Matrix:
    """Rows form a basis of ``{x : m x = 0}``; there are ``cols - rank`` of them."""
    arr = as_f2(m, ndim=2)
    cols = arr.shape[1]
    if arr.shape[0] == 0:
        return identity(cols)
    rref, pivots = row_reduce(arr)
    pset = set(pivots)
    free = [c for c in range(cols) if c not in pset]
    basis = zeros(len(free), cols)
    for k, f in enumerate(free):
        basis[k, f] = 1
        for r, p in enumerate(pivots):
            if rref[r, f]:
                basis[k, p] = 1
    return basis


def solve_linear(m, b) -> F2Vector | None:
    """Return some ``x`` with ``m x = b`` over GF(2), or None if inconsistent."""
    arr = as_f2(m, ndim=2)
    vec = as_f2(b).reshape(-1)
    rows, cols = arr.shape
    if vec.shape[0] != rows:
        raise ValueError(f"dimension mismatch: matrix has {rows} rows, b has {vec.shape[0]}")
    aug = np.concatenate([arr, vec.reshape(-1, 1)], axis=1)
    rref, pivots = row_reduce(aug, ncols=cols)
    if rref[len(pivots):, cols].any():
        return None
    x = np.zeros(cols, dtype=np.uint8)
    for r, p in enumerate(pivots):
        x[p] = rref[r, cols]
    return x


def row_basis(m) -> F2Matrix:
    """Independent rows spanning the row space of ``m`` (in RREF)."""
    arr = as_f2(m, ndim=2)
    if arr.shape[0] == 0:
        return arr
    rref, pivots = row_reduce(arr)
    return rref[: len(pivots)].copy()


def in_row_space(v, m) -> bool:
    arr = as_f2(m, ndim=2)
    if arr.shape[0] == 0:
        return not as_f2(v).any()
    return solve_linear(arr.T, v) is not None


def inverse(m) -> F2Matrix:
    """Inverse of a square invertible matrix; raises ValueError if singular."""
    arr = as_f2(m, ndim=2)
    n = arr.shape[0]
    if arr.shape != (n, n):
        raise ValueError("inverse of non-square matrix")
    rref, pivots = row_reduce(np.concatenate([arr, identity(n)], axis=1), ncols=n)
    if len(pivots) != n:
        raise ValueError("matrix is singular over GF(2)")
    return rref[:, n:].copy()


# --------------------------------------------------------------------------
# polynomials

Exponent = tuple[int, int, int]


@dataclass(frozen=True)
class F2Poly3:
    """Polynomial in ``x, y, z`` over GF(2) with period ``L`` on every axis."""

    L: int
    terms: frozenset[Exponent]

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"period must be positive, got {self.L}")

    @classmethod
    def from_terms(cls, terms: Iterable[Iterable[int]], L: int) -> "F2Poly3":
        """Build from exponent triples; repeated terms cancel in pairs."""
        acc: set[Exponent] = set()
        for t in terms:
            t = tuple(int(e) for e in t)
            t = t + (0,) * (3 - len(t))
            key = (t[0] % L, t[1] % L, t[2] % L)
            acc ^= {key}
        return cls(L, frozenset(acc))

    @classmethod
    def one(cls, L: int) -> "F2Poly3":
        return cls(L, frozenset({(0, 0, 0)}))

    @classmethod
    def zero(cls, L: int) -> "F2Poly3":
        return cls(L, frozenset())

    @classmethod
    def monomial(cls, i: int = 0, j: int = 0, k: int = 0, *, L: int) -> "F2Poly3":
        return cls(L, frozenset({(i % L, j % L, k % L)}))

    @classmethod
    def from_univariate(cls, coeffs: Iterable[int], L: int, var: int = 0) -> "F2Poly3":
        """``coeffs[d]`` is the coefficient of ``x^d`` (or ``y^d``/``z^d`` for var=1/2)."""
        terms = []
        for d, c in enumerate(coeffs):
            if c & 1:
                e = [0, 0, 0]
                e[var] = d
                terms.append(e)
        return cls.from_terms(terms, L)

    def _check(self, other: "F2Poly3") -> None:
        if not isinstance(other, F2Poly3):
            raise TypeError(f"expected F2Poly3, got {type(other).__name__}")
        if other.L != self.L:
            raise ValueError(f"period mismatch: {self.L} vs {other.L}")

    def __add__(self, other: "F2Poly3") -> "F2Poly3":
        self._check(other)
        return F2Poly3(self.L, self.terms ^ other.terms)

    __sub__ = __add__

    def __mul__(self, other: "F2Poly3") -> "F2Poly3":
        return poly_mul(self, other)

    def __pow__(self, e: int) -> "F2Poly3":
        return poly_pow(self, e)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def dual(self) -> "F2Poly3":
        return poly_dual(self)

    def shift(self, i: int = 0, j: int = 0, k: int = 0) -> "F2Poly3":
        """Multiply by the monomial ``x^i y^j z^k`` (a lattice translation)."""
        L = self.L
        return F2Poly3(L, frozenset(((a + i) % L, (b + j) % L, (c + k) % L)
                                    for a, b, c in self.terms))

    def scale_exponents(self, factor: int) -> "F2Poly3":
        """Substitute ``x -> x^factor`` etc.; the XOR fold handles collisions."""
        return F2Poly3.from_terms(((a * factor, b * factor, c * factor)
                                   for a, b, c in self.terms), self.L)

    def degree(self, var: int = 0) -> int:
        """Largest reduced exponent of one variable (-1 for the zero polynomial)."""
        return max((t[var] for t in self.terms), default=-1)

    def to_json(self) -> dict:
        return {"L": self.L, "terms": [list(t) for t in sorted(self.terms)]}

    @classmethod
    def from_json(cls, data: dict) -> "F2Poly3":
        return cls.from_terms(data["terms"], int(data["L"]))

    def __repr__(self) -> str:
        if not self.terms:
            return f"F2Poly3(0, L={self.L})"
        parts = []
        for a, b, c in sorted(self.terms):
            mono = "".join(f"{v}^{e}" if e > 1 else v
                           for v, e in (("x", a), ("y", b), ("z", c)) if e)
            parts.append(mono or "1")
        return f"F2Poly3({' + '.join(parts)}, L={self.L})"


def poly_mul(a: F2Poly3, b: F2Poly3) -> F2Poly3:
    """Product in ``GF(2)[x,y,z] / (x^L - 1, y^L - 1, z^L - 1)``."""
    a._check(b)
    L = a.L
    acc: set[Exponent] = set()
    for i1, j1, k1 in a.terms:
        for i2, j2, k2 in b.terms:
            acc ^= {((i1 + i2) % L, (j1 + j2) % L, (k1 + k2) % L)}
    return F2Poly3(L, frozenset(acc))


def poly_dual(a: F2Poly3) -> F2Poly3:
    """Map ``x -> x^-1, y -> y^-1, z -> z^-1``."""
    L = a.L
    return F2Poly3(L, frozenset(((-i) % L, (-j) % L, (-k) % L) for i, j, k in a.terms))


def poly_pow(a: F2Poly3, e: int) -> F2Poly3:
    """``a**e`` by repeated squaring; ``a**0 == 1``."""
    if e < 0:
        raise ValueError("negative exponent")
    result = F2Poly3.one(a.L)
    base = a
    while e:
        if e & 1:
            result = poly_mul(result, base)
        e >>= 1
        if e:
            base = poly_mul(base, base)
    return result
