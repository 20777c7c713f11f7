"""Dense complex matrix kernel with quantum-specific checks.

Matrices are plain ``numpy.ndarray`` values of dtype complex128, dense and
row-major.  Everything a quantum state, gate, predicate or channel needs
lives here: Kronecker products, conjugate transpose, Hermitian eigensolves,
positive-semidefinite and Loewner-order checks, operator embedding into a
multi-variable tensor space, Kraus-map application, and seeded random
generators used as test oracles.  The wrapper types ``DensityMatrix``,
``QuantumPredicate`` and ``KrausMap`` validate their defining inequalities
at construction and are immutable afterwards.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_TOL = 1e-9

CMatrix = np.ndarray  # 2-D complex128 array, finite entries


def as_cmatrix(data) -> CMatrix:
    """Coerce to an immutable 2-D complex128 array, rejecting NaN/Inf."""
    m = np.array(data, dtype=np.complex128, order="C")
    if m.ndim == 1:
        m = m.reshape(-1, 1)  # column vector convention for kets
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if m.size == 0:
        raise ValueError("empty matrix")
    if not np.all(np.isfinite(m.view(np.float64))):
        raise ValueError("matrix entries must be finite (no NaN/Inf)")
    m.flags.writeable = False
    return m


def _max_abs(m: CMatrix) -> float:
    return float(np.max(np.abs(m))) if m.size else 0.0


# ---------------------------------------------------------------------------
# Elementary constructions


def identity(dim: int) -> CMatrix:
    return as_cmatrix(np.eye(dim))


def zeros(rows: int, cols: int) -> CMatrix:
    return as_cmatrix(np.zeros((rows, cols)))


def ket(value: int, dim: int = 2) -> CMatrix:
    """Basis column vector |value> in a dim-dimensional space."""
    if not 0 <= value < dim:
        raise ValueError(f"basis index {value} out of range for dimension {dim}")
    v = np.zeros((dim, 1))
    v[value, 0] = 1.0
    return as_cmatrix(v)


def basis_op(i: int, j: int, dim: int = 2) -> CMatrix:
    """The matrix unit |i><j| in a dim-dimensional space."""
    m = np.zeros((dim, dim))
    m[i, j] = 1.0
    return as_cmatrix(m)


def projector(value: int, dim: int = 2) -> CMatrix:
    return basis_op(value, value, dim)


def hadamard() -> CMatrix:
    return as_cmatrix(np.array([[1, 1], [1, -1]]) / math.sqrt(2))


def phase_gate() -> CMatrix:
    return as_cmatrix(np.diag([1, 1j]))


def pauli_x() -> CMatrix:
    return as_cmatrix([[0, 1], [1, 0]])


def pauli_y() -> CMatrix:
    return as_cmatrix([[0, -1j], [1j, 0]])


def pauli_z() -> CMatrix:
    return as_cmatrix(np.diag([1, -1]))


def cnot() -> CMatrix:
    m = np.eye(4)
    m[[2, 3]] = m[[3, 2]]
    return as_cmatrix(m)


# ---------------------------------------------------------------------------
# Core operations


def kron(a: CMatrix, b: CMatrix) -> CMatrix:
    """Kronecker (tensor) product of two matrices."""
    return as_cmatrix(np.kron(np.asarray(a), np.asarray(b)))


def kron_all(mats: Sequence[CMatrix]) -> CMatrix:
    out = as_cmatrix(mats[0])
    for m in mats[1:]:
        out = kron(out, m)
    return out


def dagger(a: CMatrix) -> CMatrix:
    """Conjugate transpose."""
    return as_cmatrix(np.asarray(a).conj().T)


def is_hermitian(a: CMatrix, tol: float = DEFAULT_TOL) -> bool:
    a = np.asarray(a)
    if a.shape[0] != a.shape[1]:
        return False
    return _max_abs(a - a.conj().T) <= tol * max(1.0, _max_abs(a))


def eig_hermitian(a: CMatrix, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix, ascending.

    Raises ValueError when the input is not Hermitian within tol; callers
    that need eigenvalues of an almost-Hermitian intermediate should
    symmetrize first.
    """
    a = np.asarray(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"eig_hermitian needs a square matrix, got {a.shape}")
    if not is_hermitian(a, tol):
        raise ValueError("eig_hermitian: input is not Hermitian within tolerance")
    return np.linalg.eigvalsh(a)


def is_psd(a: CMatrix, tol: float = DEFAULT_TOL) -> bool:
    """Positive semidefinite within a scale-aware tolerance."""
    evals = eig_hermitian(a, tol)
    return bool(evals[0] >= -tol * max(1.0, _max_abs(a)))


def loewner_leq(p: CMatrix, q: CMatrix, tol: float = DEFAULT_TOL) -> bool:
    """Loewner order: p <= q iff q - p is positive semidefinite within tol."""
    p = np.asarray(p)
    q = np.asarray(q)
    if p.shape != q.shape or p.shape[0] != p.shape[1]:
        raise ValueError(f"loewner_leq: shape mismatch {p.shape} vs {q.shape}")
    for name, m in (("left", p), ("right", q)):
        if not is_hermitian(m, tol):
            raise ValueError(f"loewner_leq: {name} operand is not Hermitian")
    return is_psd(q - p, tol)


def is_unitary(u: CMatrix, tol: float = DEFAULT_TOL) -> bool:
    u = np.asarray(u)
    if u.shape[0] != u.shape[1]:
        raise ValueError(f"is_unitary needs a square matrix, got {u.shape}")
    return _max_abs(u.conj().T @ u - np.eye(u.shape[0])) <= tol


def trace(a: CMatrix) -> float:
    """Real part of the trace (states and predicates have real traces)."""
    return float(np.trace(np.asarray(a)).real)


# ---------------------------------------------------------------------------
# Embedding an operator on selected variables into a full tensor space


def _mixed_radix_perm(positions: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Index permutation sending the standard variable order to
    selected-variables-first order.  perm[j] is the index of basis state j
    once the selected variables are moved to the leading tensor factors.
    """
    k = len(dims)
    positions = list(positions)
    if len(set(positions)) != len(positions):
        raise ValueError(f"duplicate positions {positions}")
    for p in positions:
        if not 0 <= p < k:
            raise ValueError(f"position {p} out of range for {k} variables")
    order = positions + [i for i in range(k) if i not in positions]
    total = int(np.prod(dims))
    perm = np.empty(total, dtype=np.intp)
    for j in range(total):
        digits = []
        rem = j
        for d in reversed(dims):
            digits.append(rem % d)
            rem //= d
        digits.reverse()  # digits[i] = value of variable i, leftmost most significant
        jp = 0
        for i in order:
            jp = jp * dims[i] + digits[i]
        perm[j] = jp
    return perm


def embed_at(op: CMatrix, positions: Sequence[int], dims: Sequence[int]) -> CMatrix:
    """Embed an operator acting on the selected variables (in the given
    order) into the full space of all variables.

    ``dims`` lists every variable's dimension, first variable = leftmost
    (most significant) tensor factor.  The result is the permutation
    conjugation of ``op (x) I`` aligning the selected variables to the
    leading factors.
    """
    op = np.asarray(op)
    positions = list(positions)
    if len(set(positions)) != len(positions):
        raise ValueError(f"duplicate positions {positions}")
    for p in positions:
        if not 0 <= p < len(dims):
            raise ValueError(f"position {p} out of range for {len(dims)} variables")
    sel_dim = int(np.prod([dims[p] for p in positions])) if positions else 1
    if op.shape[0] != op.shape[1]:
        raise ValueError(f"embed_at needs a square operator, got {op.shape}")
    if op.shape[0] != sel_dim:
        raise ValueError(
            f"operator dimension {op.shape[0]} does not match selected "
            f"variables (product {sel_dim})"
        )
    total = int(np.prod(dims))
    rest = total // sel_dim
    full = np.kron(op, np.eye(rest))
    perm = _mixed_radix_perm(positions, dims)
    out = full[np.ix_(perm, perm)]
    return as_cmatrix(out)


# ---------------------------------------------------------------------------
# Wrapper types


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian PSD matrix with 0 <= trace <= 1 (trace < 1 is a
    subdistribution)."""

    mat: CMatrix
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        m = as_cmatrix(self.mat)
        object.__setattr__(self, "mat", m)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got {m.shape}")
        if _max_abs(m - m.conj().T) > self.tol:
            raise ValueError("density matrix is not Hermitian within tol")
        sym = (m + m.conj().T) / 2
        evals = np.linalg.eigvalsh(sym)
        if evals[0] < -self.tol * max(1.0, _max_abs(m)):
            raise ValueError(f"density matrix is not PSD (min eig {evals[0]:.3e})")
        tr = trace(m)
        if not -self.tol <= tr <= 1 + self.tol:
            raise ValueError(f"density matrix trace {tr} outside [0, 1]")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def trace(self) -> float:
        return trace(self.mat)


@dataclass(frozen=True)
class QuantumPredicate:
    """Hermitian operator P with 0 <= P <= I in the Loewner order."""

    mat: CMatrix
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        m = as_cmatrix(self.mat)
        object.__setattr__(self, "mat", m)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"predicate must be square, got {m.shape}")
        if _max_abs(m - m.conj().T) > self.tol * max(1.0, _max_abs(m)):
            raise ValueError("predicate is not Hermitian within tol")
        sym = (m + m.conj().T) / 2
        evals = np.linalg.eigvalsh(sym)
        scale = max(1.0, _max_abs(m))
        if evals[0] < -self.tol * scale:
            raise ValueError(f"predicate has negative eigenvalue {evals[0]:.3e}")
        if evals[-1] > 1 + self.tol * scale:
            raise ValueError(f"predicate exceeds identity (max eig {evals[-1]:.6e})")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


@dataclass(frozen=True)
class KrausMap:
    """A completely positive map given by operators E_i with
    sum E_i^dag E_i <= I.  Operators may be non-square (allocation and
    discard change the space dimension).

    ``truncation_error`` carries the reported residual mass bound when the
    map came from a truncated loop denotation; it does not affect equality.
    """

    ops: tuple
    tol: float = DEFAULT_TOL
    truncation_error: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not self.ops:
            raise ValueError("KrausMap needs at least one operator")
        mats = tuple(as_cmatrix(e) for e in self.ops)
        shape = mats[0].shape
        for e in mats:
            if e.shape != shape:
                raise ValueError(f"Kraus operators differ in shape: {e.shape} vs {shape}")
        object.__setattr__(self, "ops", mats)
        gram = self.completeness()
        evals = np.linalg.eigvalsh((gram + gram.conj().T) / 2)
        if evals[-1] > 1 + self.tol * max(1.0, float(evals[-1])):
            raise ValueError(
                f"Kraus map is not trace-nonincreasing (max eig of sum E^dag E = {evals[-1]:.6e})"
            )

    def completeness(self) -> CMatrix:
        """The operator sum E_i^dag E_i (equals I for admissible maps)."""
        c = sum(np.asarray(e).conj().T @ np.asarray(e) for e in self.ops)
        return as_cmatrix(c)

    @property
    def dim_out(self) -> int:
        return self.ops[0].shape[0]

    @property
    def dim_in(self) -> int:
        return self.ops[0].shape[1]

    def is_admissible(self, tol: float | None = None) -> bool:
        t = self.tol if tol is None else tol
        return _max_abs(self.completeness() - np.eye(self.dim_in)) <= t


def apply_kraus(k: KrausMap, rho: DensityMatrix) -> DensityMatrix:
    """Apply sum_i E_i rho E_i^dag.  Trace never increases; PSD preserved."""
    if k.dim_in != rho.dim:
        raise ValueError(f"Kraus input dimension {k.dim_in} != state dimension {rho.dim}")
    r = np.asarray(rho.mat)
    out = np.zeros((k.dim_out, k.dim_out), dtype=np.complex128)
    for e in k.ops:
        e = np.asarray(e)
        out += e @ r @ e.conj().T
    return DensityMatrix(as_cmatrix(out), tol=max(rho.tol, k.tol))


def apply_kraus_raw(ops: Sequence[CMatrix], mat: CMatrix) -> CMatrix:
    """Operator-sum application without density-matrix validation."""
    mat = np.asarray(mat)
    first = np.asarray(ops[0])
    out = np.zeros((first.shape[0], first.shape[0]), dtype=np.complex128)
    for e in ops:
        e = np.asarray(e)
        out += e @ mat @ e.conj().T
    return as_cmatrix(out)


def dual_apply_raw(ops: Sequence[CMatrix], mat: CMatrix) -> CMatrix:
    """The dual (Heisenberg-picture) map sum_i E_i^dag mat E_i."""
    mat = np.asarray(mat)
    first = np.asarray(ops[0])
    out = np.zeros((first.shape[1], first.shape[1]), dtype=np.complex128)
    for e in ops:
        e = np.asarray(e)
        out += e.conj().T @ mat @ e
    return as_cmatrix(out)


# ---------------------------------------------------------------------------
# Seeded random oracles


def random_density(dim: int, seed: int) -> DensityMatrix:
    """G G^dag / tr(G G^dag) for G with iid standard complex normal entries."""
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    g = _complex_normal(dim, dim, seed)
    m = g @ g.conj().T
    m /= np.trace(m).real
    return DensityMatrix(as_cmatrix(m))


def random_unitary(dim: int, seed: int) -> CMatrix:
    """Orthonormalization (QR) of an iid complex normal matrix."""
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    g = _complex_normal(dim, dim, seed)
    q, r = np.linalg.qr(g)
    # Fix the phase ambiguity so the result is deterministic per seed.
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return as_cmatrix(q)


def _complex_normal(rows: int, cols: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


# ---------------------------------------------------------------------------
# Matrix exchange format
#
# A matrix document is JSON with fields
#   dim: [rows, cols]
#   re:  row-major array of arrays
#   im:  same shape (optional; missing means all-zero imaginary part)


def matrix_to_doc(m: CMatrix) -> dict:
    m = np.asarray(m)
    doc = {"dim": [int(m.shape[0]), int(m.shape[1])], "re": m.real.tolist()}
    if np.any(m.imag != 0):
        doc["im"] = m.imag.tolist()
    return doc


def matrix_from_doc(doc: dict) -> CMatrix:
    if not isinstance(doc, dict) or "dim" not in doc or "re" not in doc:
        raise ValueError("matrix document needs 'dim' and 're' fields")
    rows, cols = (int(x) for x in doc["dim"])
    re = np.array(doc["re"], dtype=np.float64)
    if re.shape != (rows, cols):
        raise ValueError(f"'re' shape {re.shape} does not match dim {(rows, cols)}")
    if "im" in doc and doc["im"] is not None:
        im = np.array(doc["im"], dtype=np.float64)
        if im.shape != (rows, cols):
            raise ValueError(f"'im' shape {im.shape} does not match dim {(rows, cols)}")
    else:
        im = np.zeros((rows, cols))
    return as_cmatrix(re + 1j * im)


def _reject_constant(name: str):
    raise ValueError(f"matrix document contains non-finite value {name}")


def loads_matrix(text: str) -> CMatrix:
    return matrix_from_doc(json.loads(text, parse_constant=_reject_constant))


def dumps_matrix(m: CMatrix) -> str:
    return json.dumps(matrix_to_doc(m), sort_keys=True)


def load_matrix(path) -> CMatrix:
    with open(path) as f:
        return loads_matrix(f.read())


def save_matrix(path, m: CMatrix) -> None:
    with open(path, "w") as f:
        f.write(dumps_matrix(m))
        f.write("\n")
