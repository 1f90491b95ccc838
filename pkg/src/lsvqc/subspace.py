"""Compilation subspaces: real-time Krylov bases for a fixed input state and
the local-rotation variant used for Green's-function work, plus Gramian
diagnostics.

The propagator inside every basis is a single first-order step regardless of
the time argument; the induced product-formula leakage at large step times is
part of the method's accuracy/independence tradeoff and is surfaced through
the Gramian report rather than hidden.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import ParamCircuit, concat, pauli_rotation_prep, trotter_step
from .model import GroupedHamiltonian
from .qsim import StateVector


@dataclass
class SubspaceSpec:
    kind: str  # "krylov" | "gf_krylov"
    n_t: int
    dt: float
    phi: float | None = None
    base_prep: ParamCircuit | None = None

    def __post_init__(self):
        if self.kind not in ("krylov", "gf_krylov"):
            raise ValueError(f"unknown subspace kind {self.kind!r}")
        if self.n_t < 0:
            raise ValueError("n_t must be non-negative")
        if self.n_t >= 1 and not self.dt > 0:
            raise ValueError("dt must be positive when n_t >= 1")


@dataclass
class SubspaceBasis:
    preps: list[ParamCircuit]
    n_qubits: int
    _states: list[np.ndarray] | None = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return len(self.preps)

    def states(self) -> list[np.ndarray]:
        """Amplitude arrays of every prep applied to |0...0> (cached)."""
        if self._states is None:
            self._states = [p.state().amplitudes for p in self.preps]
        return self._states

    @property
    def max_depth(self) -> int:
        return max(p.depth for p in self.preps)


def krylov_basis(spec: SubspaceSpec, grouped: GroupedHamiltonian) -> SubspaceBasis:
    """Single-step-propagated copies of the base state at times k*dt,
    k = 0..n_t (the bare preparation at k = 0)."""
    if spec.kind != "krylov":
        raise ValueError("spec kind must be 'krylov'")
    w0 = spec.base_prep
    preps = [w0]
    for k in range(1, spec.n_t + 1):
        preps.append(concat(w0, trotter_step(grouped, k * spec.dt)))
    return SubspaceBasis(preps, grouped.n_qubits)


def gf_basis(spec: SubspaceSpec, grouped: GroupedHamiltonian) -> SubspaceBasis:
    """Ground-state Krylov basis augmented, per time step, with one
    single-qubit X and one Y rotation by phi on every qubit before the
    propagator.  Ordering per step is (bare, X_0..X_{n-1}, Y_0..Y_{n-1})."""
    if spec.kind != "gf_krylov":
        raise ValueError("spec kind must be 'gf_krylov'")
    if spec.phi is None:
        raise ValueError("gf_krylov needs the rotation angle phi")
    w0 = spec.base_prep
    n = grouped.n_qubits
    preps: list[ParamCircuit] = []
    for k in range(spec.n_t + 1):
        seeds = [w0]
        for axis in "XY":
            for q in range(n):
                seeds.append(concat(w0, pauli_rotation_prep(n, q, axis, spec.phi)))
        if k == 0:
            preps.extend(seeds)
        else:
            step = trotter_step(grouped, k * spec.dt)
            preps.extend(concat(s, step) for s in seeds)
    return SubspaceBasis(preps, n)


def build_basis(spec: SubspaceSpec, grouped: GroupedHamiltonian) -> SubspaceBasis:
    if spec.kind == "krylov":
        return krylov_basis(spec, grouped)
    return gf_basis(spec, grouped)


@dataclass
class GramianReport:
    matrix: np.ndarray
    det_modulus: float
    rank: int
    min_eigenvalue: float
    tolerance: float

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def gramian(basis: SubspaceBasis, tolerance: float = 1e-8) -> GramianReport:
    """Exact overlap matrix of the basis states with determinant modulus and
    numerical rank (singular values above ``tolerance``).  The report is
    diagnostic only; rank-deficient bases are never pruned automatically
    because the cost normalization uses the declared dimension."""
    states = basis.states()
    n = len(states)
    g = np.empty((n, n), dtype=complex)
    for i in range(n):
        g[i, i] = np.vdot(states[i], states[i])
        for j in range(i + 1, n):
            val = np.vdot(states[i], states[j])
            g[i, j] = val
            g[j, i] = np.conj(val)
    svals = np.linalg.svd(g, compute_uv=False)
    sign, logdet = np.linalg.slogdet(g)
    det_mod = float(np.exp(logdet)) if np.isfinite(logdet) else 0.0
    eigs = np.linalg.eigvalsh(g)
    return GramianReport(
        matrix=g,
        det_modulus=det_mod,
        rank=int(np.sum(svals > tolerance)),
        min_eigenvalue=float(eigs[0]),
        tolerance=tolerance,
    )
