"""Dense statevector engine: Pauli algebra, gate application, expectation values.

Conventions used throughout the package:

* Qubit 0 is the least-significant bit of the computational-basis index, so a
  basis state with index ``b`` assigns bit ``(b >> q) & 1`` to qubit ``q``.
* Gate application mutates the :class:`StateVector` buffer (the amplitude
  array is replaced); callers that need the old state take an explicit copy.
* All arithmetic is complex128.  Tolerances in the test suite assume
  machine-level (~1e-12) noise only.
* Thread safety: Pauli strings/sums and dense operators are immutable after
  construction and safe to share read-only; a StateVector must never be
  mutated by two concurrent operations (the action caches are append-only
  dicts keyed by value).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DENSE_CAP = 12

_PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class CapExceededError(ValueError):
    """Raised when a dense-matrix construction exceeds the qubit cap."""


def dense_cap() -> int:
    """Dense-oracle qubit cap (default 12, overridable via LSVQC_DENSE_CAP)."""
    return int(os.environ.get("LSVQC_DENSE_CAP", DEFAULT_DENSE_CAP))


def _check_cap(n: int, cap: int | None) -> None:
    limit = dense_cap() if cap is None else cap
    if n > limit:
        raise CapExceededError(f"dense construction on {n} qubits exceeds cap {limit}")


# ---------------------------------------------------------------------------
# Pauli strings and sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PauliString:
    """A weighted Pauli string.  ``axes[q]`` is the action on qubit q."""

    axes: str
    coefficient: complex = 1.0

    def __post_init__(self):
        if set(self.axes) - set("IXYZ"):
            raise ValueError(f"invalid Pauli axes {self.axes!r}")

    @staticmethod
    def from_ops(n_qubits: int, ops: dict[int, str], coefficient: complex = 1.0) -> "PauliString":
        axes = ["I"] * n_qubits
        for q, ax in ops.items():
            if not 0 <= q < n_qubits:
                raise ValueError(f"qubit {q} out of range for {n_qubits}-qubit string")
            axes[q] = ax
        return PauliString("".join(axes), coefficient)

    @property
    def n_qubits(self) -> int:
        return len(self.axes)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, ax in enumerate(self.axes) if ax != "I")

    def with_coefficient(self, c: complex) -> "PauliString":
        return PauliString(self.axes, c)

    def commutes_with(self, other: "PauliString") -> bool:
        """Symbolic commutation: strings commute iff they anticommute on an
        even number of qubits."""
        if len(self.axes) != len(other.axes):
            raise ValueError("register size mismatch")
        clashes = sum(
            1
            for a, b in zip(self.axes, other.axes)
            if a != "I" and b != "I" and a != b
        )
        return clashes % 2 == 0

    def map_qubits(self, mapping: dict[int, int], n_new: int) -> "PauliString":
        axes = ["I"] * n_new
        for q, ax in enumerate(self.axes):
            if ax == "I":
                continue
            axes[mapping[q]] = ax
        return PauliString("".join(axes), self.coefficient)

    def dense(self, cap: int | None = None) -> np.ndarray:
        n = self.n_qubits
        _check_cap(n, cap)
        dim = 1 << n
        perm, phase = _pauli_action(n, self.axes)
        mat = np.zeros((dim, dim), dtype=complex)
        mat[np.arange(dim), perm] = phase
        return self.coefficient * mat


@dataclass
class PauliSum:
    """Weighted sum of Pauli strings on a common register."""

    n_qubits: int
    terms: list[PauliString] = field(default_factory=list)

    def __post_init__(self):
        for t in self.terms:
            if t.n_qubits != self.n_qubits:
                raise ValueError("term register size mismatch")

    def __iter__(self):
        return iter(self.terms)

    def __len__(self):
        return len(self.terms)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.n_qubits != self.n_qubits:
            raise ValueError("register size mismatch")
        return PauliSum(self.n_qubits, self.terms + other.terms)

    def __rmul__(self, c: complex) -> "PauliSum":
        return PauliSum(self.n_qubits, [t.with_coefficient(c * t.coefficient) for t in self.terms])

    def collect(self, tol: float = 0.0) -> "PauliSum":
        """Merge like terms; drop terms with |coefficient| <= tol."""
        acc: dict[str, complex] = {}
        order: list[str] = []
        for t in self.terms:
            if t.axes not in acc:
                acc[t.axes] = 0.0
                order.append(t.axes)
            acc[t.axes] += t.coefficient
        kept = [PauliString(ax, acc[ax]) for ax in order if abs(acc[ax]) > tol]
        return PauliSum(self.n_qubits, kept)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return all(abs(t.coefficient.imag) <= tol for t in self.collect().terms)

    def map_qubits(self, mapping: dict[int, int], n_new: int) -> "PauliSum":
        return PauliSum(n_new, [t.map_qubits(mapping, n_new) for t in self.terms])

    def dense(self, cap: int | None = None) -> np.ndarray:
        _check_cap(self.n_qubits, cap)
        dim = 1 << self.n_qubits
        mat = np.zeros((dim, dim), dtype=complex)
        for t in self.terms:
            perm, phase = _pauli_action(self.n_qubits, t.axes)
            mat[np.arange(dim), perm] += t.coefficient * phase
        return mat


# ---------------------------------------------------------------------------
# Cached Pauli action: (P psi)[y] = phase[y] * psi[perm[y]]
# ---------------------------------------------------------------------------

_ACTION_CACHE: dict[tuple[int, str], tuple[np.ndarray, np.ndarray]] = {}


def _bit_parity(v: np.ndarray) -> np.ndarray:
    v = v ^ (v >> 32)
    v = v ^ (v >> 16)
    v = v ^ (v >> 8)
    v = v ^ (v >> 4)
    v = v ^ (v >> 2)
    v = v ^ (v >> 1)
    return v & 1


def _pauli_action(n: int, axes: str) -> tuple[np.ndarray, np.ndarray]:
    """Permutation/phase pair realizing a unit-coefficient Pauli string."""
    key = (n, axes)
    hit = _ACTION_CACHE.get(key)
    if hit is not None:
        return hit
    flip = 0
    zy = 0
    n_y = 0
    for q, ax in enumerate(axes):
        bit = 1 << q
        if ax == "X":
            flip |= bit
        elif ax == "Y":
            flip |= bit
            zy |= bit
            n_y += 1
        elif ax == "Z":
            zy |= bit
    idx = np.arange(1 << n, dtype=np.int64)
    perm = idx ^ flip
    phase = (1j ** (n_y % 4)) * (1.0 - 2.0 * _bit_parity(perm & zy)).astype(complex)
    _ACTION_CACHE[key] = (perm, phase)
    return perm, phase


def clear_action_cache() -> None:
    _ACTION_CACHE.clear()


# ---------------------------------------------------------------------------
# State vectors
# ---------------------------------------------------------------------------


@dataclass
class StateVector:
    """Pure state of ``n_qubits`` qubits as a dense complex amplitude array."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError("amplitude length must be 2**n_qubits")
        if self.amplitudes.dtype != np.complex128:
            self.amplitudes = self.amplitudes.astype(np.complex128)

    @staticmethod
    def zero(n_qubits: int) -> "StateVector":
        return StateVector.basis(n_qubits, 0)

    @staticmethod
    def basis(n_qubits: int, index: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return StateVector(n_qubits, amps)

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _broadcast_phase(phase: np.ndarray, amps: np.ndarray) -> np.ndarray:
    if amps.ndim == 1:
        return phase
    return phase.reshape(phase.shape[0], *([1] * (amps.ndim - 1)))


def pauli_apply_array(amps: np.ndarray, n: int, p: PauliString) -> np.ndarray:
    """Return P @ amps for a flat (dim,) or batched (dim, b) array."""
    perm, phase = _pauli_action(n, p.axes)
    out = amps[perm] * _broadcast_phase(phase, amps)
    if p.coefficient != 1.0:
        out *= p.coefficient
    return out


def rotation_apply_array(amps: np.ndarray, n: int, axes: str, angle: float) -> np.ndarray:
    """Return exp(i*angle*P) @ amps with P the unit-coefficient string ``axes``."""
    perm, phase = _pauli_action(n, axes)
    return np.cos(angle) * amps + (1j * np.sin(angle)) * (
        amps[perm] * _broadcast_phase(phase, amps)
    )


def dense_apply_array(amps: np.ndarray, n: int, mat: np.ndarray, supports: tuple[int, ...]) -> np.ndarray:
    """Apply a small dense gate on ``supports`` (first support = most
    significant bit of the gate basis index)."""
    k = len(supports)
    tensor = amps.reshape((2,) * n + amps.shape[1:])
    axes = [n - 1 - q for q in supports]
    moved = np.moveaxis(tensor, axes, range(k))
    shape = moved.shape
    out = (mat @ moved.reshape(1 << k, -1)).reshape(shape)
    return np.moveaxis(out, range(k), axes).reshape(amps.shape)


def apply_pauli_rotation(state: StateVector, p: PauliString, angle: float) -> StateVector:
    """Apply exp(i*angle*P) to ``state`` in place; P must have unit coefficient."""
    if p.n_qubits != state.n_qubits:
        raise ValueError("register size mismatch")
    if abs(p.coefficient - 1.0) > 1e-12:
        raise ValueError("rotation generator must have unit coefficient")
    state.amplitudes = rotation_apply_array(state.amplitudes, state.n_qubits, p.axes, angle)
    return state


def apply_two_qubit_gate(state: StateVector, u: "DenseOperator", targets: tuple[int, int]) -> StateVector:
    """Apply a 4x4 unitary on the ordered qubit pair ``targets``."""
    qa, qb = targets
    if qa == qb:
        raise ValueError("target qubits must differ")
    for q in targets:
        if not 0 <= q < state.n_qubits:
            raise ValueError(f"target qubit {q} out of range")
    mat = u.matrix if isinstance(u, DenseOperator) else np.asarray(u, dtype=complex)
    if mat.shape != (4, 4):
        raise ValueError("expected a 4x4 operator")
    if not np.allclose(mat.conj().T @ mat, np.eye(4), atol=1e-10):
        raise ValueError("operator is not unitary within 1e-10")
    state.amplitudes = dense_apply_array(state.amplitudes, state.n_qubits, mat, targets)
    return state


def expectation(state: StateVector, obs: PauliSum) -> float:
    """<state|obs|state> for Hermitian obs (imaginary part below 1e-10 is discarded)."""
    if obs.n_qubits != state.n_qubits:
        raise ValueError("register size mismatch")
    if not obs.is_hermitian():
        raise ValueError("observable is not Hermitian")
    amps = state.amplitudes
    val = 0.0 + 0.0j
    for t in obs.terms:
        val += t.coefficient * np.vdot(amps, pauli_apply_array(amps, state.n_qubits, t.with_coefficient(1.0)))
    if abs(val.imag) > 1e-10:
        raise ValueError(f"expectation has non-negligible imaginary part {val.imag}")
    return float(val.real)


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b> (conjugate-linear in the first argument)."""
    if a.n_qubits != b.n_qubits:
        raise ValueError("register size mismatch")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def projector_zero_expectation(state: StateVector, qubit: int) -> float:
    """Probability of finding ``qubit`` in |0>."""
    n = state.n_qubits
    if not 0 <= qubit < n:
        raise ValueError(f"qubit {qubit} out of range")
    t = state.amplitudes.reshape(1 << (n - 1 - qubit), 2, 1 << qubit)
    return float(np.sum(np.abs(t[:, 0, :]) ** 2))


def projector_zero_all(state: StateVector) -> np.ndarray:
    """Per-qubit |0> probabilities, one pass per qubit."""
    return np.array([projector_zero_expectation(state, j) for j in range(state.n_qubits)])


# ---------------------------------------------------------------------------
# Dense operators (oracle representation)
# ---------------------------------------------------------------------------


@dataclass
class DenseOperator:
    """Exact matrix representation for small registers."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.shape != (self.dim, self.dim):
            raise ValueError("matrix shape mismatch")

    @staticmethod
    def identity(dim: int) -> "DenseOperator":
        return DenseOperator(dim, np.eye(dim, dtype=complex))

    def is_unitary(self, tol: float = 1e-10) -> bool:
        return bool(np.allclose(self.matrix.conj().T @ self.matrix, np.eye(self.dim), atol=tol))


def dense_matrix(obj, n_qubits: int | None = None, cap: int | None = None) -> DenseOperator:
    """Exact 2^n x 2^n matrix of a circuit or Pauli sum (n at most the dense cap)."""
    if isinstance(obj, PauliSum):
        n = obj.n_qubits
        _check_cap(n, cap)
        return DenseOperator(1 << n, obj.dense(cap=cap))
    if hasattr(obj, "apply_to_array") and hasattr(obj, "n_qubits"):
        n = obj.n_qubits
        _check_cap(n, cap)
        dim = 1 << n
        mat = obj.apply_to_array(np.eye(dim, dtype=complex))
        return DenseOperator(dim, mat)
    raise TypeError(f"cannot build a dense matrix from {type(obj).__name__}")
