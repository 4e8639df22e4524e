"""CSS stabilizer codes: construction, catalog, logical operators, welding.

Qubits of two-per-site polynomial codes are indexed site-major with the
sublattice index last: ``q = 2 * site + sub`` where
``site = i + L*j + L*L*k``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import f2algebra as f2
from .f2algebra import F2Poly3


class InvalidCodeError(ValueError):
    """Raised when a pair of generators anticommutes or shapes disagree."""


# --------------------------------------------------------------------------
# Pauli operators

@dataclass(frozen=True, eq=False)
class PauliOperator:
    """Phase-free Pauli operator given by its X and Z bit vectors."""

    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", f2.as_f2(self.x).reshape(-1))
        object.__setattr__(self, "z", f2.as_f2(self.z).reshape(-1))
        if self.x.shape != self.z.shape:
            raise ValueError("x and z parts must have equal length")

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @classmethod
    def identity(cls, n: int) -> "PauliOperator":
        return cls(np.zeros(n, np.uint8), np.zeros(n, np.uint8))

    @classmethod
    def from_support(cls, n: int, xs: Iterable[int] = (), zs: Iterable[int] = ()) -> "PauliOperator":
        x = np.zeros(n, np.uint8)
        z = np.zeros(n, np.uint8)
        for q in xs:
            x[q] ^= 1
        for q in zs:
            z[q] ^= 1
        return cls(x, z)

    @classmethod
    def x_type(cls, bits) -> "PauliOperator":
        bits = f2.as_f2(bits).reshape(-1)
        return cls(bits, np.zeros_like(bits))

    @classmethod
    def z_type(cls, bits) -> "PauliOperator":
        bits = f2.as_f2(bits).reshape(-1)
        return cls(np.zeros_like(bits), bits)

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        return PauliOperator(self.x ^ other.x, self.z ^ other.z)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliOperator):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z)

    def __hash__(self) -> int:
        return hash((self.x.tobytes(), self.z.tobytes()))

    @property
    def weight(self) -> int:
        return int(np.count_nonzero(self.x | self.z))

    def support(self) -> list[int]:
        return np.flatnonzero(self.x | self.z).tolist()

    def symplectic(self) -> np.ndarray:
        return np.concatenate([self.x, self.z])

    def commutes(self, other: "PauliOperator") -> bool:
        return symplectic_commute(self, other)

    def label(self) -> str:
        return "".join("IXZY"[int(a) + 2 * int(b)] for a, b in zip(self.x, self.z))

    def __repr__(self) -> str:
        return f"PauliOperator({self.label()})"


def symplectic_commute(p: PauliOperator, q: PauliOperator) -> bool:
    """True iff ``<p.x, q.z> + <p.z, q.x> = 0 (mod 2)``."""
    if p.n != q.n:
        raise ValueError(f"length mismatch: {p.n} vs {q.n}")
    s = int(np.dot(p.x.astype(np.int64), q.z)) + int(np.dot(p.z.astype(np.int64), q.x))
    return s % 2 == 0


# --------------------------------------------------------------------------
# codes

@dataclass(frozen=True, eq=False)
class Geometry:
    """Integer qubit coordinates plus generator anchors.

    Distances are Chebyshev distances divided by ``scale`` (coordinate units
    per lattice spacing), wrapped with ``period`` on each axis when given.
    """

    coords: np.ndarray
    scale: int = 1
    period: tuple[int, ...] | None = None
    x_anchor: np.ndarray | None = None
    z_anchor: np.ndarray | None = None

    def distance(self, points: np.ndarray, center: np.ndarray) -> np.ndarray:
        d = np.abs(np.asarray(points, dtype=np.int64) - np.asarray(center, dtype=np.int64))
        if self.period is not None:
            per = np.asarray(self.period, dtype=np.int64)
            d = np.minimum(d, per - d)
        return d.max(axis=-1) / self.scale

    def to_json(self) -> dict:
        out: dict = {"coords": self.coords.tolist(), "scale": self.scale,
                     "period": list(self.period) if self.period is not None else None}
        if self.x_anchor is not None:
            out["x_anchor"] = self.x_anchor.tolist()
        if self.z_anchor is not None:
            out["z_anchor"] = self.z_anchor.tolist()
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Geometry":
        def arr(key):
            v = data.get(key)
            return None if v is None else np.asarray(v, dtype=np.int64)

        period = data.get("period")
        return cls(coords=np.asarray(data["coords"], dtype=np.int64),
                   scale=int(data.get("scale", 1)),
                   period=tuple(period) if period is not None else None,
                   x_anchor=arr("x_anchor"), z_anchor=arr("z_anchor"))


@dataclass(frozen=True, eq=False)
class CssCode:
    """CSS code on ``n`` qubits with X-type checks ``hx`` and Z-type checks ``hz``."""

    n: int
    hx: np.ndarray
    hz: np.ndarray
    geometry: Geometry | None = None
    name: str = ""
    k: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "k", self.n - f2.rank(self.hx) - f2.rank(self.hz))

    @property
    def n_x(self) -> int:
        return int(self.hx.shape[0])

    @property
    def n_z(self) -> int:
        return int(self.hz.shape[0])

    def x_generator(self, i: int) -> PauliOperator:
        return PauliOperator.x_type(self.hx[i])

    def z_generator(self, i: int) -> PauliOperator:
        return PauliOperator.z_type(self.hz[i])

    def generators(self) -> list[PauliOperator]:
        """All generators, X-type first (this order indexes imperfect masks)."""
        return ([self.x_generator(i) for i in range(self.n_x)]
                + [self.z_generator(i) for i in range(self.n_z)])

    def stabilizer_matrix(self) -> np.ndarray:
        """Symplectic rows ``[x | z]`` of all generators, X-type first."""
        top = np.concatenate([self.hx, np.zeros_like(self.hx)], axis=1)
        bot = np.concatenate([np.zeros_like(self.hz), self.hz], axis=1)
        return np.concatenate([top, bot], axis=0).astype(np.uint8)


def _as_matrix(h, n: int | None) -> np.ndarray:
    arr = f2.as_f2(h)
    if arr.ndim == 1 and arr.size == 0:
        return np.zeros((0, n or 0), np.uint8)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.shape[0] == 0 and n is not None:
        return np.zeros((0, n), np.uint8)
    return arr


def make_css(hx, hz, geometry: Geometry | None = None, n: int | None = None,
             name: str = "") -> CssCode:
    """Validate ``hx hz^T = 0`` and build a code.

    ``n`` only matters when both matrices are empty.
    """
    hx = _as_matrix(hx, n)
    hz = _as_matrix(hz, n)
    if n is None:
        n = hx.shape[1] if hx.shape[0] else hz.shape[1]
    if hx.shape[0] == 0:
        hx = np.zeros((0, n), np.uint8)
    if hz.shape[0] == 0:
        hz = np.zeros((0, n), np.uint8)
    if hx.shape[1] != n or hz.shape[1] != n:
        raise InvalidCodeError(f"column mismatch: hx has {hx.shape[1]}, hz has {hz.shape[1]}, n={n}")
    overlap = f2.matmul(hx, hz.T)
    bad = np.argwhere(overlap)
    if bad.size:
        i, j = bad[0]
        raise InvalidCodeError(f"X-generator {i} anticommutes with Z-generator {j}")
    if geometry is not None and geometry.coords.shape[0] != n:
        raise InvalidCodeError("geometry does not cover every qubit")
    return CssCode(n=n, hx=hx, hz=hz, geometry=geometry, name=name)


# --------------------------------------------------------------------------
# catalog

@dataclass(frozen=True)
class CodeSpec:
    """Catalog request. ``variant`` is toric2d, toric3d, fractal or explicit."""

    variant: str
    L: int = 0
    alpha: F2Poly3 | None = None
    beta: F2Poly3 | None = None
    dims: int = 3
    hx: tuple | None = None
    hz: tuple | None = None

    def __post_init__(self):
        if self.variant == "fractal":
            if self.alpha is None or self.beta is None:
                raise ValueError("fractal variant needs alpha and beta")
            if self.alpha.L != self.L or self.beta.L != self.L:
                raise ValueError("alpha/beta period must equal L")

    def to_json(self) -> dict:
        out: dict = {"variant": self.variant, "L": self.L}
        if self.alpha is not None:
            out["alpha"] = self.alpha.to_json()
            out["beta"] = self.beta.to_json()
            out["dims"] = self.dims
        if self.hx is not None:
            out["hx"] = ["".join(map(str, r)) for r in self.hx]
            out["hz"] = ["".join(map(str, r)) for r in self.hz]
        return out

    @classmethod
    def from_json(cls, data: dict) -> "CodeSpec":
        alpha = F2Poly3.from_json(data["alpha"]) if data.get("alpha") else None
        beta = F2Poly3.from_json(data["beta"]) if data.get("beta") else None
        hx = tuple(tuple(int(c) for c in r) for r in data["hx"]) if "hx" in data else None
        hz = tuple(tuple(int(c) for c in r) for r in data["hz"]) if "hz" in data else None
        return cls(variant=data["variant"], L=int(data.get("L", 0)), alpha=alpha, beta=beta,
                   dims=int(data.get("dims", 3)), hx=hx, hz=hz)


def cubic_code_polynomials(L: int) -> tuple[F2Poly3, F2Poly3]:
    """``alpha = 1 + (1+x+x^2) y``, ``beta = 1 + (1+x) z + (1+x+x^2) z^2``."""
    alpha = F2Poly3.from_terms([(0, 0, 0), (0, 1, 0), (1, 1, 0), (2, 1, 0)], L)
    beta = F2Poly3.from_terms([(0, 0, 0), (0, 0, 1), (1, 0, 1),
                               (0, 0, 2), (1, 0, 2), (2, 0, 2)], L)
    return alpha, beta


def fractal_polynomials(f: F2Poly3, g: F2Poly3) -> tuple[F2Poly3, F2Poly3]:
    """``alpha = 1 + f(x) y``, ``beta = 1 + g(x) z``."""
    L = f.L
    return (F2Poly3.one(L) + f.shift(0, 1, 0), F2Poly3.one(L) + g.shift(0, 0, 1))


def _site_index(i: int, j: int, k: int, L: int) -> int:
    return i + L * (j + L * k)


def polynomial_code(alpha: F2Poly3, beta: F2Poly3, dims: int = 3, name: str = "") -> CssCode:
    """Translation-invariant code with generators ``Z(alpha, beta)`` and ``X(~beta, ~alpha)``.

    ``dims=2`` uses an ``L x L`` lattice and ignores z exponents (they must be 0).
    """
    if alpha.L != beta.L:
        raise ValueError("alpha and beta must share L")
    L = alpha.L
    if dims not in (2, 3):
        raise ValueError("dims must be 2 or 3")
    if dims == 2 and any(t[2] for t in alpha.terms | beta.terms):
        raise ValueError("2D polynomial code cannot use z")
    sites = list(itertools.product(range(L), repeat=dims))
    nsites = len(sites)
    n = 2 * nsites
    hz = np.zeros((nsites, n), np.uint8)
    hx = np.zeros((nsites, n), np.uint8)
    zpat = ((alpha, 0), (beta, 1))
    xpat = ((beta.dual(), 0), (alpha.dual(), 1))

    def put(row, poly, sub, shift):
        for a, b, c in poly.terms:
            ii, jj, kk = (a + shift[0]) % L, (b + shift[1]) % L, (c + shift[2]) % L
            row[2 * _site_index(ii, jj, kk, L) + sub] ^= 1

    # sites enumerated with x fastest so row index == site index
    for s_idx in range(nsites):
        i = s_idx % L
        j = (s_idx // L) % L
        k = s_idx // (L * L) if dims == 3 else 0
        for poly, sub in zpat:
            put(hz[s_idx], poly, sub, (i, j, k))
        for poly, sub in xpat:
            put(hx[s_idx], poly, sub, (i, j, k))
    site_coords = np.array([[s % L, (s // L) % L, s // (L * L)][:dims] for s in range(nsites)],
                           dtype=np.int64)
    coords = np.repeat(site_coords, 2, axis=0)
    geom = Geometry(coords=coords, scale=1, period=(L,) * dims,
                    x_anchor=site_coords.copy(), z_anchor=site_coords.copy())
    return make_css(hx, hz, geometry=geom, name=name)


def toric2d(L: int) -> CssCode:
    """2D toric code from ``alpha = 1+x``, ``beta = 1+y``.

    Geometry uses doubled coordinates: X-generators (vertices) sit at
    ``(2i, 2j)``, sublattice-0 qubits at ``(2i, 2j+1)``, sublattice-1 qubits at
    ``(2i+1, 2j)`` and Z-generators (plaquettes) at ``(2i+1, 2j+1)``.
    """
    if L < 2:
        raise ValueError("L must be >= 2")
    alpha = F2Poly3.from_terms([(0, 0, 0), (1, 0, 0)], L)
    beta = F2Poly3.from_terms([(0, 0, 0), (0, 1, 0)], L)
    code = polynomial_code(alpha, beta, dims=2, name=f"toric2d(L={L})")
    site = np.array([[s % L, s // L] for s in range(L * L)], dtype=np.int64)
    coords = np.empty((2 * L * L, 2), dtype=np.int64)
    coords[0::2] = 2 * site + [0, 1]
    coords[1::2] = 2 * site + [1, 0]
    geom = Geometry(coords=coords, scale=2, period=(2 * L, 2 * L),
                    x_anchor=2 * site, z_anchor=2 * site + 1)
    return CssCode(n=code.n, hx=code.hx, hz=code.hz, geometry=geom, name=code.name)


def toric3d(L: int) -> CssCode:
    """3D toric code: qubits on edges, X vertex terms, Z plaquette terms."""
    if L < 2:
        raise ValueError("L must be >= 2")
    nv = L**3

    def v(x, y, z):
        return (x % L) + L * ((y % L) + L * (z % L))

    def e(x, y, z, d):
        return 3 * v(x, y, z) + d

    unit = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
    n = 3 * nv
    hx = np.zeros((nv, n), np.uint8)
    hz = np.zeros((3 * nv, n), np.uint8)
    coords = np.zeros((n, 3), np.int64)
    vcoords = np.zeros((nv, 3), np.int64)
    pcoords = np.zeros((3 * nv, 3), np.int64)
    for z in range(L):
        for y in range(L):
            for x in range(L):
                vi = v(x, y, z)
                vcoords[vi] = (2 * x, 2 * y, 2 * z)
                for d in range(3):
                    coords[e(x, y, z, d)] = np.array((2 * x, 2 * y, 2 * z)) + unit[d]
                    hx[vi, e(x, y, z, d)] = 1
                    dx, dy, dz = unit[d]
                    hx[vi, e(x - dx, y - dy, z - dz, d)] = 1
                for p, (d1, d2) in enumerate(((0, 1), (1, 2), (0, 2))):
                    row = hz[3 * vi + p]
                    a1, a2 = unit[d1], unit[d2]
                    row[e(x, y, z, d1)] ^= 1
                    row[e(x, y, z, d2)] ^= 1
                    row[e(x + a2[0], y + a2[1], z + a2[2], d1)] ^= 1
                    row[e(x + a1[0], y + a1[1], z + a1[2], d2)] ^= 1
                    pcoords[3 * vi + p] = np.array((2 * x, 2 * y, 2 * z)) + a1 + a2
    geom = Geometry(coords=coords, scale=2, period=(2 * L,) * 3, x_anchor=vcoords, z_anchor=pcoords)
    return make_css(hx, hz, geometry=geom, name=f"toric3d(L={L})")


def repetition_code(n: int, periodic: bool = False) -> CssCode:
    """Classical repetition code as Z-type checks ``Z_i Z_{i+1}``."""
    pairs = [(i, i + 1) for i in range(n - 1)] + ([(n - 1, 0)] if periodic and n > 2 else [])
    hz = np.zeros((len(pairs), n), np.uint8)
    for r, (a, b) in enumerate(pairs):
        hz[r, a] = hz[r, b] = 1
    coords = np.arange(n, dtype=np.int64).reshape(-1, 1)
    geom = Geometry(coords=coords, scale=1, period=(n,) if periodic else None,
                    x_anchor=np.zeros((0, 1), np.int64),
                    z_anchor=np.array([[a] for a, _ in pairs], dtype=np.int64).reshape(-1, 1))
    return make_css(np.zeros((0, n), np.uint8), hz, geometry=geom, n=n,
                    name=f"repetition(n={n}{', periodic' if periodic else ''})")


def steane_code() -> CssCode:
    """[[7,1,3]] code from the Hamming(7,4) parity checks."""
    h = np.array([[0, 0, 0, 1, 1, 1, 1],
                  [0, 1, 1, 0, 0, 1, 1],
                  [1, 0, 1, 0, 1, 0, 1]], dtype=np.uint8)
    return make_css(h, h, name="steane")


def planar_code(width: int, height: int, rough_top: bool = True,
                rough_bottom: bool = True) -> CssCode:
    """Surface-code patch with X vertex terms and Z plaquette terms.

    Vertices form a ``width x height`` grid; left/right boundaries are smooth.
    A rough boundary adds one dangling edge per boundary vertex and closes the
    faces between neighbouring dangling edges with weight-3 plaquettes.
    Dangling top edges come last in the qubit order, which makes them easy to
    pair when welding.
    """
    edges: list[tuple] = []
    coords: list[tuple[int, int]] = []

    def add(key, xy):
        edges.append(key)
        coords.append(xy)
        return len(edges) - 1

    idx: dict = {}
    for y in range(height):
        for x in range(width - 1):
            idx[("h", x, y)] = add(("h", x, y), (2 * x + 1, 2 * y))
    for y in range(height - 1):
        for x in range(width):
            idx[("v", x, y)] = add(("v", x, y), (2 * x, 2 * y + 1))
    if rough_bottom:
        for x in range(width):
            idx[("v", x, -1)] = add(("v", x, -1), (2 * x, -1))
    if rough_top:
        for x in range(width):
            idx[("v", x, height - 1)] = add(("v", x, height - 1), (2 * x, 2 * height - 1))
    n = len(edges)
    hx_rows, hz_rows, xa, za = [], [], [], []
    for y in range(height):
        for x in range(width):
            sup = [idx.get(k) for k in (("h", x, y), ("h", x - 1, y), ("v", x, y), ("v", x, y - 1))]
            row = np.zeros(n, np.uint8)
            for q in sup:
                if q is not None:
                    row[q] = 1
            hx_rows.append(row)
            xa.append((2 * x, 2 * y))
    ylo = -1 if rough_bottom else 0
    yhi = height if rough_top else height - 1
    for y in range(ylo, yhi):
        for x in range(width - 1):
            sup = [idx.get(k) for k in (("h", x, y), ("h", x, y + 1), ("v", x, y), ("v", x + 1, y))]
            row = np.zeros(n, np.uint8)
            for q in sup:
                if q is not None:
                    row[q] = 1
            hz_rows.append(row)
            za.append((2 * x + 1, 2 * y + 1))
    geom = Geometry(coords=np.array(coords, dtype=np.int64), scale=2,
                    x_anchor=np.array(xa, dtype=np.int64), z_anchor=np.array(za, dtype=np.int64))
    return make_css(np.array(hx_rows), np.array(hz_rows), geometry=geom,
                    name=f"planar({width}x{height})")


def catalog_build(spec: CodeSpec) -> CssCode:
    """Construct the code named by ``spec``."""
    if spec.variant == "toric2d":
        return toric2d(spec.L)
    if spec.variant == "toric3d":
        return toric3d(spec.L)
    if spec.variant == "fractal":
        L = spec.L
        if L < 2 or L & (L - 1):
            raise ValueError(f"fractal codes need L a power of 2 (got {L})")
        return polynomial_code(spec.alpha, spec.beta, dims=spec.dims, name=f"fractal(L={L})")
    if spec.variant == "explicit":
        if spec.hx is None or spec.hz is None:
            raise ValueError("explicit variant needs hx and hz")
        return make_css(np.array(spec.hx, dtype=np.uint8), np.array(spec.hz, dtype=np.uint8))
    raise ValueError(f"unsupported code variant {spec.variant!r}")


# --------------------------------------------------------------------------
# logical operators and redundancy

def _complement_basis(space: np.ndarray, sub: np.ndarray) -> np.ndarray:
    """Rows of ``space`` extending a basis of ``sub`` to a basis of ``space``."""
    picked: list[np.ndarray] = []
    current = f2.row_basis(sub) if sub.shape[0] else np.zeros((0, space.shape[1]), np.uint8)
    r = current.shape[0]
    for row in space:
        trial = np.vstack([current, row[None, :]]) if current.shape[0] else row[None, :]
        nr = f2.rank(trial)
        if nr > r:
            current, r = trial, nr
            picked.append(row)
    if not picked:
        return np.zeros((0, space.shape[1]), np.uint8)
    return np.array(picked, dtype=np.uint8)


def logical_basis(code: CssCode) -> tuple[list[PauliOperator], list[PauliOperator]]:
    """Return ``k`` Z-type and ``k`` X-type logical representatives.

    X representatives are recombined so the pairing matrix is the identity.
    """
    if code.k == 0:
        return [], []
    zreps = _complement_basis(f2.kernel_basis(code.hx), code.hz)
    xreps = _complement_basis(f2.kernel_basis(code.hz), code.hx)
    pairing = f2.matmul(zreps, xreps.T)
    xreps = f2.matmul(f2.inverse(pairing).T, xreps)
    return ([PauliOperator.z_type(r) for r in zreps], [PauliOperator.x_type(r) for r in xreps])


@dataclass(frozen=True)
class RedundancyReport:
    m_x: int
    m_z: int
    min_weight_x: int | None
    min_weight_z: int | None
    approximate_x: bool = False
    approximate_z: bool = False


def _min_weight(basis: np.ndarray, limit: int, rng: np.random.Generator,
                samples: int = 4096) -> tuple[int | None, bool]:
    dim = basis.shape[0]
    if dim == 0:
        return None, False
    if dim <= limit:
        best = None
        # Gray-code walk over all nonzero combinations
        vec = np.zeros(basis.shape[1], np.uint8)
        for i in range(1, 1 << dim):
            flip = (i & -i).bit_length() - 1
            vec ^= basis[flip]
            w = int(vec.sum())
            if best is None or w < best:
                best = w
        return best, False
    best = int(basis.sum(axis=1).min())
    for _ in range(samples):
        coeff = rng.integers(0, 2, dim, dtype=np.uint8)
        if coeff.any():
            best = min(best, int(f2.matmul(coeff, basis).sum()))
    return best, True


def redundancy_analysis(code: CssCode, weight_search_limit: int = 20,
                        seed: int = 0) -> RedundancyReport:
    """Count generator dependencies and their minimum weight.

    With more than ``weight_search_limit`` dependencies the minimum is the
    best weight found by sampling (an upper bound) and flagged approximate.
    """
    rng = np.random.default_rng(seed)
    dep_x = f2.kernel_basis(code.hx.T) if code.n_x else np.zeros((0, 0), np.uint8)
    dep_z = f2.kernel_basis(code.hz.T) if code.n_z else np.zeros((0, 0), np.uint8)
    wx, ax = _min_weight(dep_x, weight_search_limit, rng)
    wz, az = _min_weight(dep_z, weight_search_limit, rng)
    return RedundancyReport(m_x=int(dep_x.shape[0]), m_z=int(dep_z.shape[0]),
                            min_weight_x=wx, min_weight_z=wz,
                            approximate_x=ax, approximate_z=az)


# --------------------------------------------------------------------------
# welding

def direct_sum(*codes: CssCode) -> CssCode:
    """Disjoint union of codes (qubits concatenated in order)."""
    return weld_many(list(codes), [])


def weld_many(codes: Sequence[CssCode], groups: Sequence[Sequence[tuple[int, int]]],
              protected: Sequence[PauliOperator] | None = None,
              literal: bool = False) -> CssCode:
    """X-type weld of several codes.

    Each group lists ``(code_index, qubit)`` pairs that are contracted to a
    single qubit. The welded Z-checks are all input Z-checks rewritten on the
    contracted qubits. The welded X-checks span every X operator that commutes
    with all of them, drawn from the group generated by the rewritten input
    X-checks (``literal=False``) or from all X operators (``literal=True``).
    ``protected`` Z operators (on the welded qubits) further restrict the
    X-checks to those commuting with each of them.
    """
    offsets = np.cumsum([0] + [c.n for c in codes])
    total = int(offsets[-1])
    # union-find over global qubit labels
    parent = list(range(total))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for group in groups:
        seen_codes: set[int] = set()
        glob = []
        for ci, q in group:
            if not 0 <= ci < len(codes):
                raise ValueError(f"code index {ci} out of range")
            if not 0 <= q < codes[ci].n:
                raise ValueError(f"qubit {q} out of range for code {ci} (n={codes[ci].n})")
            if ci in seen_codes:
                raise ValueError(f"group identifies two qubits of code {ci}")
            seen_codes.add(ci)
            glob.append(int(offsets[ci]) + q)
        for g in glob[1:]:
            ra, rb = find(glob[0]), find(g)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = sorted({find(a) for a in range(total)})
    new_index = {r: i for i, r in enumerate(roots)}
    mapping = np.array([new_index[find(a)] for a in range(total)], dtype=np.int64)
    n = len(roots)
    used = set()
    for group in groups:
        for ci, q in group:
            g = int(offsets[ci]) + q
            if g in used:
                raise ValueError(f"qubit {q} of code {ci} appears in two groups")
            used.add(g)

    def rewrite(h: np.ndarray, off: int) -> np.ndarray:
        out = np.zeros((h.shape[0], n), np.uint8)
        for r in range(h.shape[0]):
            for q in np.flatnonzero(h[r]):
                out[r, mapping[off + q]] ^= 1
        return out

    hz = np.vstack([rewrite(c.hz, int(o)) for c, o in zip(codes, offsets)]) if codes else np.zeros((0, 0))
    hz = hz.astype(np.uint8)
    constraints = hz
    if protected:
        constraints = np.vstack([hz] + [p.z[None, :] for p in protected])
    if literal:
        hx = f2.kernel_basis(constraints) if constraints.shape[0] else np.eye(n, dtype=np.uint8)
    else:
        gx = np.vstack([rewrite(c.hx, int(o)) for c, o in zip(codes, offsets)]).astype(np.uint8)
        gbasis = f2.row_basis(gx) if gx.shape[0] else gx
        if gbasis.shape[0] == 0:
            hx = np.zeros((0, n), np.uint8)
        elif constraints.shape[0] == 0:
            hx = gbasis
        else:
            coeff = f2.kernel_basis(f2.matmul(constraints, gbasis.T))
            hx = f2.matmul(coeff, gbasis) if coeff.shape[0] else np.zeros((0, n), np.uint8)
    coords = None
    if all(c.geometry is not None for c in codes) and codes:
        dim = max(c.geometry.coords.shape[1] for c in codes)
        cs = np.zeros((n, dim), np.int64)
        for c, o in zip(codes, offsets):
            g = c.geometry.coords
            cs[mapping[int(o):int(o) + c.n], : g.shape[1]] = g
        coords = Geometry(coords=cs, scale=codes[0].geometry.scale)
    return make_css(hx, hz, geometry=coords, n=n, name="weld")


def weld_x(a: CssCode, b: CssCode, pairing: Sequence[tuple[int, int]],
           protected: Sequence[PauliOperator] | None = None, literal: bool = False) -> CssCode:
    """X-type weld of two codes, identifying qubit ``pa`` of ``a`` with ``pb`` of ``b``.

    Qubits of ``a`` keep their indices; unpaired qubits of ``b`` follow.
    """
    pa = [p for p, _ in pairing]
    pb = [q for _, q in pairing]
    if len(set(pa)) != len(pa) or len(set(pb)) != len(pb):
        raise ValueError("pairing must be injective on both sides")
    return weld_many([a, b], [[(0, p), (1, q)] for p, q in pairing],
                     protected=protected, literal=literal)


def welded_qubit_map(codes: Sequence[CssCode], groups) -> np.ndarray:
    """Global-to-welded qubit index map used by :func:`weld_many` (for tests and tooling)."""
    offsets = np.cumsum([0] + [c.n for c in codes])
    total = int(offsets[-1])
    parent = list(range(total))

    def find(a):
        while parent[a] != a:
            a = parent[a]
        return a

    for group in groups:
        glob = [int(offsets[ci]) + q for ci, q in group]
        for g in glob[1:]:
            ra, rb = find(glob[0]), find(g)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = sorted({find(a) for a in range(total)})
    idx = {r: i for i, r in enumerate(roots)}
    return np.array([idx[find(a)] for a in range(total)], dtype=np.int64)


# --------------------------------------------------------------------------
# serialization

def _bits(rows: np.ndarray) -> list[str]:
    return ["".join("1" if b else "0" for b in r) for r in rows]


def code_to_json(code: CssCode) -> dict:
    out = {"n": code.n, "k": code.k, "hx": _bits(code.hx), "hz": _bits(code.hz)}
    if code.name:
        out["name"] = code.name
    if code.geometry is not None:
        out["geometry"] = code.geometry.to_json()
    return out


def code_from_json(data: dict) -> CssCode:
    n = int(data["n"])

    def parse(rows):
        if not rows:
            return np.zeros((0, n), np.uint8)
        arr = np.array([[c == "1" for c in r] for r in rows], dtype=np.uint8)
        if arr.shape[1] != n:
            raise ValueError(f"row length {arr.shape[1]} does not match n={n}")
        return arr

    geom = Geometry.from_json(data["geometry"]) if data.get("geometry") else None
    return make_css(parse(data["hx"]), parse(data["hz"]), geometry=geom, n=n,
                    name=data.get("name", ""))
