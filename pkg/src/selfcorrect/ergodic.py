"""Ergodic decomposition of CSS codes into qubit sets ``L``, ``R_X``, ``R_Z``.

Single-qubit X couplings on ``R_X | L`` together with single-qubit Z couplings
on ``R_Z | L`` already generate the whole Pauli algebra with the stabilizers,
which is what makes the corresponding thermal dynamics ergodic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import f2algebra as f2
from .csscode import CssCode, PauliOperator, logical_basis


@dataclass(frozen=True, eq=False)
class ErgodicDecomposition:
    set_l: tuple[int, ...]
    set_rx: tuple[int, ...]
    set_rz: tuple[int, ...]
    ax_ops: list[PauliOperator]          # X-type, ax_ops[j] conjugate to transformed_hz[j]
    az_ops: list[PauliOperator]          # Z-type, az_ops[j] conjugate to transformed_hx[j]
    transformed_hz: np.ndarray
    transformed_hx: np.ndarray
    logical_z: np.ndarray                # updated Z-logicals, pivots on set_l
    logical_ax_ops: list[PauliOperator]  # X-type conjugates of logical_z

    def coupling_operators(self, n: int) -> list[PauliOperator]:
        """Single-qubit X on ``R_X | L`` followed by single-qubit Z on ``R_Z | L``."""
        xs = [PauliOperator.from_support(n, xs=[q]) for q in sorted(self.set_rx + self.set_l)]
        zs = [PauliOperator.from_support(n, zs=[q]) for q in sorted(self.set_rz + self.set_l)]
        return xs + zs

    def to_json(self) -> dict:
        def bits(rows):
            return ["".join("1" if b else "0" for b in r) for r in rows]

        return {
            "L": list(self.set_l), "R_X": list(self.set_rx), "R_Z": list(self.set_rz),
            "ax_ops": bits([p.x for p in self.ax_ops]),
            "az_ops": bits([p.z for p in self.az_ops]),
            "transformed_hz": bits(self.transformed_hz),
            "transformed_hx": bits(self.transformed_hx),
            "logical_z": bits(self.logical_z),
            "logical_ax_ops": bits([p.x for p in self.logical_ax_ops]),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ErgodicDecomposition":
        def mat(rows, width):
            if not rows:
                return np.zeros((0, width), np.uint8)
            return np.array([[c == "1" for c in r] for r in rows], dtype=np.uint8)

        n = len(data["L"]) + len(data["R_X"]) + len(data["R_Z"])
        return cls(
            set_l=tuple(data["L"]), set_rx=tuple(data["R_X"]), set_rz=tuple(data["R_Z"]),
            ax_ops=[PauliOperator.x_type(r) for r in mat(data["ax_ops"], n)],
            az_ops=[PauliOperator.z_type(r) for r in mat(data["az_ops"], n)],
            transformed_hz=mat(data["transformed_hz"], n),
            transformed_hx=mat(data["transformed_hx"], n),
            logical_z=mat(data["logical_z"], n),
            logical_ax_ops=[PauliOperator.x_type(r) for r in mat(data["logical_ax_ops"], n)],
        )


def _independent_rows(h: np.ndarray) -> np.ndarray:
    """Greedy in-order selection of linearly independent rows."""
    keep: list[int] = []
    r = 0
    for i in range(h.shape[0]):
        nr = f2.rank(h[keep + [i]])
        if nr > r:
            keep.append(i)
            r = nr
    return h[keep].copy()


def _pivot_sweep(gens: np.ndarray, allowed: np.ndarray) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """Inductive pivot construction on one sector.

    ``gens`` are independent rows (supports of one Pauli type). For each row in
    turn pick the lowest allowed qubit of its current support as pivot, build
    the conjugate ``A = X_pivot * prod(A_j : S_j contains pivot)`` and multiply
    the row into every later row that anticommutes with ``A``.
    Returns (updated rows, conjugate supports, pivots).
    """
    s = gens.copy()
    m, n = s.shape
    a = np.zeros((m, n), np.uint8)
    pivots: list[int] = []
    for i in range(m):
        cand = np.flatnonzero(s[i] & allowed)
        if cand.size == 0:
            raise ArithmeticError("generator has no admissible pivot; rows are dependent")
        p = int(cand[0])
        a[i, p] = 1
        for j in range(i):
            if s[j, p]:
                a[i] ^= a[j]
        later = i + 1 + np.flatnonzero(f2.matmul(s[i + 1:], a[i]))
        if later.size:
            s[later] ^= s[i]
        pivots.append(p)
    return s, a, pivots


def decompose(code: CssCode) -> ErgodicDecomposition:
    """Construct the tripartition and conjugate operators.

    Pivots are always the lowest admissible qubit index.
    """
    n = code.n
    zgens = _independent_rows(code.hz) if code.n_z else np.zeros((0, n), np.uint8)
    zlog, _ = logical_basis(code)
    zlog_rows = np.array([p.z for p in zlog], dtype=np.uint8).reshape(-1, n)
    nz = zgens.shape[0]
    stacked = np.vstack([zgens, zlog_rows])
    s, a, piv = _pivot_sweep(stacked, np.ones(n, np.uint8))
    rx, lset = piv[:nz], piv[nz:]
    taken = np.zeros(n, np.uint8)
    taken[piv] = 1
    allowed = 1 - taken
    rz = [int(q) for q in np.flatnonzero(allowed)]

    xgens = _independent_rows(code.hx) if code.n_x else np.zeros((0, n), np.uint8)
    sx, b, _ = _pivot_sweep(xgens, allowed.astype(np.uint8))

    return ErgodicDecomposition(
        set_l=tuple(int(q) for q in lset), set_rx=tuple(int(q) for q in rx), set_rz=tuple(rz),
        ax_ops=[PauliOperator.x_type(r) for r in a[:nz]],
        az_ops=[PauliOperator.z_type(r) for r in b],
        transformed_hz=s[:nz], transformed_hx=sx,
        logical_z=s[nz:], logical_ax_ops=[PauliOperator.x_type(r) for r in a[nz:]],
    )


def verify_ergodicity(code: CssCode, s_alpha: list[PauliOperator]) -> bool:
    """True iff the couplings plus stabilizers have symplectic rank ``2n``."""
    n = code.n
    rows = [code.stabilizer_matrix()]
    for op in s_alpha:
        if op.n != n:
            raise ValueError(f"operator acts on {op.n} qubits, code has {n}")
        rows.append(op.symplectic()[None, :])
    return f2.rank(np.vstack(rows)) == 2 * n


@dataclass(frozen=True, eq=False)
class ReducedClassicalModel:
    sector: str
    qubits: tuple[int, ...]
    pivots: tuple[int, ...]
    terms: list[PauliOperator]
    couplings: dict[int, tuple[int, ...]]     # model qubit -> terms touching it
    edges: tuple[tuple[int, int], ...]         # term pairs sharing a model qubit

    @property
    def n_terms(self) -> int:
        return len(self.terms)


def reduced_classical_model(code: CssCode, d: ErgodicDecomposition, sector: str) -> ReducedClassicalModel:
    """Canonical ``S_j = P_j U_j`` form of one sector.

    Generators are recombined so that on the pivot set (``R_X`` for sector Z,
    ``R_Z`` for sector X) term ``j`` touches only its own pivot.
    """
    sector = sector.upper()
    if sector == "Z":
        rows, pivots, extra, part = d.transformed_hz, list(d.set_rx), d.set_l, "z"
    elif sector == "X":
        rows, pivots, extra, part = d.transformed_hx, list(d.set_rz), d.set_l, "x"
    else:
        raise ValueError(f"sector must be 'X' or 'Z', got {sector!r}")
    if rows.shape[1] != code.n:
        raise ValueError("decomposition does not belong to this code")
    n = code.n
    if rows.shape[0]:
        canon = f2.matmul(f2.inverse(rows[:, pivots]), rows)
    else:
        canon = rows
    model_qubits = tuple(sorted(pivots + list(extra)))
    mset = np.zeros(n, bool)
    mset[list(model_qubits)] = True
    couplings: dict[int, tuple[int, ...]] = {}
    for q in model_qubits:
        couplings[q] = tuple(int(t) for t in np.flatnonzero(canon[:, q])) if canon.shape[0] else ()
    edge_set: set[tuple[int, int]] = set()
    for ts in couplings.values():
        for i in range(len(ts)):
            for j in range(i + 1, len(ts)):
                edge_set.add((ts[i], ts[j]))
    make = PauliOperator.z_type if part == "z" else PauliOperator.x_type
    return ReducedClassicalModel(sector=sector, qubits=model_qubits, pivots=tuple(pivots),
                                 terms=[make(r) for r in canon], couplings=couplings,
                                 edges=tuple(sorted(edge_set)))
