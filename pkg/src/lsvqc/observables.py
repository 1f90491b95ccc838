"""Dynamics and spectroscopy on top of the compiled circuits: exact
sector-space evolution, repeated circuit application, state infidelity,
double occupation, retarded Green's functions, spectral functions, density
of states, error metrics, depth-compression bookkeeping, and a small
variational eigensolver for ground-state preparation.

Times are in hbar = 1 units of the Hamiltonian's energy scale; for eV
Hamiltonians one time unit is EV_TIME_FS femtoseconds.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .circuit import CompiledCircuit, ParamCircuit
from .model import GroupedHamiltonian, SymmetrySector, sector_dense_hamiltonian
from .qsim import PauliString, PauliSum, StateVector, expectation, pauli_apply_array

EV_TIME_FS = 0.658  # femtoseconds per (hbar/eV) time unit


def times_to_fs(times: np.ndarray) -> np.ndarray:
    return np.asarray(times) * EV_TIME_FS


def times_from_fs(times_fs: np.ndarray) -> np.ndarray:
    return np.asarray(times_fs) / EV_TIME_FS


@dataclass
class TimeSeries:
    times: np.ndarray  # hbar = 1 units, uniform strictly-increasing grid
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values)
        if len(self.times) != len(self.values):
            raise ValueError("times/values length mismatch")
        if len(self.times) > 1:
            steps = np.diff(self.times)
            if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
                raise ValueError("times must be a uniform increasing grid")

    @property
    def times_fs(self) -> np.ndarray:
        return times_to_fs(self.times)


@dataclass
class SpectralGrid:
    omega0: float
    n_omega: int
    eta: float

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("broadening must be positive")

    @property
    def omegas(self) -> np.ndarray:
        j = np.arange(-self.n_omega, self.n_omega + 1)
        return j * self.omega0 / self.n_omega

    @property
    def spacing(self) -> float:
        return self.omega0 / self.n_omega


# ---------------------------------------------------------------------------
# Exact (sector-diagonalized) evolution
# ---------------------------------------------------------------------------


class SectorEvolver:
    """exp(-i t H) restricted to a union of symmetry sectors, via one dense
    eigendecomposition per sector block."""

    def __init__(self, hamiltonian: PauliSum, sectors: list[SymmetrySector], leak_tol: float = 1e-9):
        self.n_qubits = hamiltonian.n_qubits
        self.leak_tol = leak_tol
        self._blocks = []
        for sec in sectors:
            h = sector_dense_hamiltonian(hamiltonian, sec)
            evals, evecs = np.linalg.eigh(h)
            self._blocks.append((sec.indices, evals, evecs))

    def decompose(self, amps: np.ndarray) -> list[np.ndarray]:
        """Eigenbasis coefficients per sector; errors if weight outside the
        declared sectors exceeds the leak tolerance."""
        parts = []
        captured = 0.0
        for indices, _, evecs in self._blocks:
            coeffs = evecs.conj().T @ amps[indices]
            parts.append(coeffs)
            captured += float(np.sum(np.abs(coeffs) ** 2))
        total = float(np.sum(np.abs(amps) ** 2))
        if abs(total - captured) > self.leak_tol:
            raise ValueError(f"state leaks {total - captured:.2e} outside the declared sectors")
        return parts

    def reconstruct(self, parts: list[np.ndarray], t: float) -> np.ndarray:
        amps = np.zeros(1 << self.n_qubits, dtype=complex)
        for (indices, evals, evecs), coeffs in zip(self._blocks, parts):
            amps[indices] = evecs @ (np.exp(-1j * t * evals) * coeffs)
        return amps

    def evolve(self, amps: np.ndarray, t: float) -> np.ndarray:
        return self.reconstruct(self.decompose(amps), t)

    def ground_state(self) -> tuple[np.ndarray, float]:
        """Lowest eigenpair over the declared sectors as a full register state."""
        best = None
        for indices, evals, evecs in self._blocks:
            if best is None or evals[0] < best[0]:
                best = (evals[0], indices, evecs[:, 0])
        amps = np.zeros(1 << self.n_qubits, dtype=complex)
        amps[best[1]] = best[2]
        return amps, float(best[0])


def exact_evolve(
    grouped: GroupedHamiltonian, sectors: list[SymmetrySector], psi: StateVector, t: float
) -> StateVector:
    """One-shot exact evolution of a sector-supported state."""
    ev = SectorEvolver(grouped.total, sectors)
    return StateVector(psi.n_qubits, ev.evolve(psi.amplitudes, t))


# ---------------------------------------------------------------------------
# Circuit dynamics
# ---------------------------------------------------------------------------


def repeated_dynamics(
    circuit: ParamCircuit, binding: dict | None, psi0: StateVector, n_steps: int
) -> list[StateVector]:
    """States V^n |psi0> for n = 1..n_steps (compiled once)."""
    compiled = CompiledCircuit(circuit, binding)
    out = []
    amps = psi0.amplitudes.copy()
    for _ in range(n_steps):
        amps = compiled.apply_array(amps)
        out.append(StateVector(psi0.n_qubits, amps.copy()))
    return out


def state_infidelity_series(
    v: ParamCircuit,
    u_ref: ParamCircuit,
    psi0: StateVector,
    n_steps: int,
    binding: dict | None = None,
) -> np.ndarray:
    """1 - |<psi0|(V^dag)^n U^n|psi0>| for n = 1..n_steps (single modulus,
    not squared)."""
    vc = CompiledCircuit(v, binding)
    uc = CompiledCircuit(u_ref)
    sv = psi0.amplitudes.copy()
    su = psi0.amplitudes.copy()
    out = np.empty(n_steps)
    for n in range(n_steps):
        sv = vc.apply_array(sv)
        su = uc.apply_array(su)
        out[n] = 1.0 - abs(np.vdot(sv, su))
    return out


def state_infidelity(v, u_ref, psi0, n, binding=None) -> float:
    if n == 0:
        return 0.0
    return float(state_infidelity_series(v, u_ref, psi0, n, binding)[-1])


def infidelity_curves(
    u_ref: ParamCircuit,
    circuits: dict[str, tuple[ParamCircuit, dict | None]],
    psi0: StateVector,
    n_steps: int,
) -> dict[str, np.ndarray]:
    """Infidelity series for several circuits against one shared reference
    path (the reference states are propagated once)."""
    uc = CompiledCircuit(u_ref)
    u_states = []
    su = psi0.amplitudes.copy()
    for _ in range(n_steps):
        su = uc.apply_array(su)
        u_states.append(su.copy())
    out = {}
    for label, (circ, binding) in circuits.items():
        vc = CompiledCircuit(circ, binding)
        sv = psi0.amplitudes.copy()
        series = np.empty(n_steps)
        for n in range(n_steps):
            sv = vc.apply_array(sv)
            series[n] = 1.0 - abs(np.vdot(sv, u_states[n]))
        out[label] = series
    return out


# ---------------------------------------------------------------------------
# Observables on the chain register
# ---------------------------------------------------------------------------


def doublon_operator(L: int) -> PauliSum:
    """Site-averaged double occupation (1/L) sum_i n_up n_dn as a Pauli sum
    on the doubled register."""
    n = 2 * L
    terms = []
    for i in range(L):
        qu, qd = i, 2 * L - 1 - i
        terms.append(PauliString.from_ops(n, {}, 0.25 / L))
        terms.append(PauliString.from_ops(n, {qu: "Z"}, -0.25 / L))
        terms.append(PauliString.from_ops(n, {qd: "Z"}, -0.25 / L))
        terms.append(PauliString.from_ops(n, {qu: "Z", qd: "Z"}, 0.25 / L))
    return PauliSum(n, terms)


def double_occupation(state: StateVector, L: int) -> float:
    return expectation(state, doublon_operator(L))


# ---------------------------------------------------------------------------
# Retarded Green's functions
# ---------------------------------------------------------------------------


def _jw_string(n: int, mode: int, axis: str) -> PauliString:
    ops = {k: "Z" for k in range(mode)}
    ops[mode] = axis
    return PauliString.from_ops(n, ops)


class ExactBranchEngine:
    """Closed-form branch evolution through a sector eigendecomposition; all
    branches are reconstructed per time step with one matrix product per
    sector block."""

    def __init__(self, evolver: SectorEvolver, e0: np.ndarray, modes: list[int]):
        self.n = evolver.n_qubits
        self.modes = modes
        self._ev = evolver
        self._keys = ["bare"] + [(axis, b) for b in modes for axis in "XY"]
        seeds = [e0]
        for key in self._keys[1:]:
            axis, b = key
            seeds.append(pauli_apply_array(e0, self.n, _jw_string(self.n, b, axis)))
        # per sector block: coefficient matrix with one column per branch
        self._coeffs = []
        for indices, evals, evecs in evolver._blocks:
            block = np.stack([evecs.conj().T @ s[indices] for s in seeds], axis=1)
            self._coeffs.append(block)
        captured = sum(float(np.sum(np.abs(c) ** 2)) for c in self._coeffs)
        total = sum(float(np.sum(np.abs(s) ** 2)) for s in seeds)
        if abs(total - captured) > evolver.leak_tol * len(seeds):
            raise ValueError("branch states leak outside the declared sectors")

    def states_at(self, t: float) -> dict:
        dim = 1 << self.n
        out = np.zeros((dim, len(self._keys)), dtype=complex)
        for (indices, evals, evecs), block in zip(self._ev._blocks, self._coeffs):
            out[indices] += evecs @ (np.exp(-1j * t * evals)[:, None] * block)
        return {key: out[:, i] for i, key in enumerate(self._keys)}


class CircuitBranchEngine:
    """Branch evolution by repeated application of a compiled step circuit;
    ``states_at`` must be called on the ascending grid n*tau."""

    def __init__(self, step: CompiledCircuit, e0: np.ndarray, modes: list[int], tau: float):
        self.n = step.n_qubits
        self.modes = modes
        self.tau = tau
        self._step = step
        self._keys = ["bare"] + [(axis, b) for b in modes for axis in "XY"]
        cols = [e0.copy()]
        for key in self._keys[1:]:
            axis, b = key
            cols.append(pauli_apply_array(e0, self.n, _jw_string(self.n, b, axis)))
        self._batch = np.stack(cols, axis=1)
        self._n_applied = 0

    def states_at(self, t: float) -> dict:
        n_target = int(round(t / self.tau))
        if abs(n_target * self.tau - t) > 1e-9:
            raise ValueError(f"time {t} is off the tau grid")
        if n_target < self._n_applied:
            raise ValueError("circuit engine must be driven forward in time")
        while self._n_applied < n_target:
            self._batch = self._step.apply_array(self._batch)
            self._n_applied += 1
        return {key: self._batch[:, i] for i, key in enumerate(self._keys)}


def retarded_gf(engine, times: np.ndarray, modes_a: list[int] | None = None) -> np.ndarray:
    """Site-space retarded propagator G[a, b, t] for the engine's mode list.

    Each entry is assembled from the four string-conjugated amplitudes
    Re<P_a(t) P_b> as
    -(i/2) [Re<XX> + Re<YY> - i Re<XY> + i Re<YX>], with Theta(0) = 1 so the
    equal-time value matches the anticommutator.
    """
    modes_b = engine.modes
    modes_a = modes_b if modes_a is None else modes_a
    n = engine.n
    strings = {(ax, a): _jw_string(n, a, ax) for a in modes_a for ax in "XY"}
    out = np.zeros((len(modes_a), len(modes_b), len(times)), dtype=complex)
    for it, t in enumerate(times):
        states = engine.states_at(t)
        bare = states["bare"]
        proj = {}
        for key, s in strings.items():
            proj[key] = pauli_apply_array(bare, n, s)
        for ib, b in enumerate(modes_b):
            sx = states[("X", b)]
            sy = states[("Y", b)]
            for ia, a in enumerate(modes_a):
                axx = np.vdot(proj[("X", a)], sx)
                ayy = np.vdot(proj[("Y", a)], sy)
                axy = np.vdot(proj[("X", a)], sy)
                ayx = np.vdot(proj[("Y", a)], sx)
                out[ia, ib, it] = -0.5j * (axx.real + ayy.real - 1j * axy.real + 1j * ayx.real)
    return out


def lehmann_gf(evolver: SectorEvolver, modes: list[int], times: np.ndarray) -> np.ndarray:
    """Independent spectral-sum evaluation of the retarded propagator for the
    evolver's exact ground state: matrix elements of the ladder operators
    between the ground state and the particle/hole sector eigenbases, summed
    with their transition phases.  Used as the oracle for the
    branch-statevector path."""
    from .model import jordan_wigner

    n = evolver.n_qubits
    e0, energy0 = evolver.ground_state()
    # locate the ground block and the particle/hole blocks by testing where
    # the ladder-mapped states live
    w_parts = []  # (evals, W) with W[mu, a] = <mu|c^dag_a|E0>
    h_parts = []  # (evals, H) with H[nu, a] = <nu|c_a|E0>
    for kind, parts in (("create", w_parts), ("annihilate", h_parts)):
        seeds = []
        for a in modes:
            op = jordan_wigner(a, n, kind)
            amps = np.zeros(1 << n, dtype=complex)
            for term in op.terms:
                amps += pauli_apply_array(e0, n, term)
            seeds.append(amps)
        for indices, evals, evecs in evolver._blocks:
            block = np.stack([evecs.conj().T @ s[indices] for s in seeds], axis=1)
            if np.max(np.abs(block)) > 1e-12:
                parts.append((evals, block))
    out = np.zeros((len(modes), len(modes), len(times)), dtype=complex)
    for it, t in enumerate(times):
        g = np.zeros((len(modes), len(modes)), dtype=complex)
        for evals, w in w_parts:
            ph = np.exp(-1j * (evals - energy0) * t)
            g += w.conj().T @ (ph[:, None] * w)
        for evals, h in h_parts:
            ph = np.exp(1j * (evals - energy0) * t)
            g += h.T @ (ph[:, None] * h.conj())
        out[:, :, it] = -1j * g
    return out


def gf_momentum(g_site: np.ndarray, k: float, L: int) -> np.ndarray:
    """(1/L) sum_ij e^{-ik(r_i - r_j)} G_ij(t) for k on the 2*pi*m/L grid.

    Accepts the full (L, L, T) matrix or a translation-invariant row of shape
    (L, T) interpreted as G_{d,0} for displacement d.
    """
    m = k * L / (2 * np.pi)
    if abs(m - round(m)) > 1e-9:
        raise ValueError(f"momentum {k} is off the 2*pi/L grid")
    if g_site.ndim == 3:
        ph = np.exp(-1j * k * np.arange(L))
        return np.einsum("i,ijt,j->t", ph, g_site, np.conj(ph)) / L
    if g_site.ndim == 2:
        return np.einsum("d,dt->t", np.exp(-1j * k * np.arange(L)), g_site)
    raise ValueError("expected (L, L, T) or (L, T) input")


def momentum_grid(L: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(L) / L


def spectral_function(gk: TimeSeries, grid: SpectralGrid) -> np.ndarray:
    """A(omega) = -(1/pi) Im integral_0^T dt e^{i(omega + i eta) t} G(t),
    trapezoidal rule on the retarded support."""
    t = gk.times
    if t[0] < -1e-12:
        raise ValueError("retarded transform expects t >= 0")
    w = np.full(len(t), t[1] - t[0]) if len(t) > 1 else np.array([0.0])
    if len(t) > 1:
        w[0] *= 0.5
        w[-1] *= 0.5
    phases = np.exp(1j * np.outer(grid.omegas, t) - grid.eta * t)
    integral = phases @ (w * gk.values)
    return -np.imag(integral) / np.pi


def dos(a_k: np.ndarray) -> np.ndarray:
    """Momentum-averaged spectral weight; expects one row per momentum point."""
    a_k = np.atleast_2d(a_k)
    return np.mean(a_k, axis=0)


def spectral_sum(a: np.ndarray, grid: SpectralGrid) -> float:
    return float(np.sum(a) * grid.spacing)


# ---------------------------------------------------------------------------
# Error metrics and depth compression
# ---------------------------------------------------------------------------


def mae_series(approx: np.ndarray, exact: np.ndarray) -> np.ndarray:
    """Running mean |approx - exact| over the first n samples, n = 1..len."""
    approx = np.asarray(approx)
    exact = np.asarray(exact)
    if approx.shape != exact.shape:
        raise ValueError("grid mismatch")
    err = np.abs(approx - exact)
    return np.cumsum(err) / np.arange(1, len(err) + 1)


def mae_scalar(approx: np.ndarray, exact: np.ndarray) -> float:
    approx = np.asarray(approx)
    exact = np.asarray(exact)
    if approx.shape != exact.shape:
        raise ValueError("grid mismatch")
    return float(np.mean(np.abs(approx - exact)))


@dataclass
class CompressionResult:
    ratio: float
    depth_equivalent: float
    flag: str = ""  # "", "lower_bound", "worse_than_table"


def depth_compression(table: list[tuple[int, float]], target_mae: float, depth: int) -> CompressionResult:
    """Equivalent product-formula depth at the compiled accuracy, divided by
    the compiled depth.  ``table`` maps step counts to their error metric;
    the smallest step count reaching ``target_mae`` is located with linear
    interpolation between the bracketing entries."""
    rows = sorted(table)
    maes = [m for _, m in rows]
    if any(maes[i + 1] > maes[i] for i in range(len(maes) - 1)):
        warnings.warn("error table is not monotone decreasing in depth", stacklevel=2)
    if target_mae >= maes[0]:
        r_eq = float(rows[0][0])
        return CompressionResult(r_eq / depth, r_eq, flag="worse_than_table" if target_mae > maes[0] else "")
    if target_mae < maes[-1]:
        r_eq = float(rows[-1][0])
        return CompressionResult(r_eq / depth, r_eq, flag="lower_bound")
    for i in range(1, len(rows)):
        if maes[i] <= target_mae:
            r0, m0 = rows[i - 1]
            r1, m1 = rows[i]
            frac = (m0 - target_mae) / (m0 - m1) if m0 > m1 else 1.0
            r_eq = r0 + frac * (r1 - r0)
            return CompressionResult(r_eq / depth, r_eq)
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# Variational ground-state preparation
# ---------------------------------------------------------------------------


@dataclass
class VqeResult:
    state: StateVector
    energy: float
    binding: dict
    trace: list[float] = field(default_factory=list)
    converged: bool = True


def vqe_ground_state(
    grouped: GroupedHamiltonian,
    ansatz: ParamCircuit,
    init_prep: ParamCircuit,
    init_binding: dict | None = None,
    fd_step: float = 1e-5,
    gtol: float = 1e-8,
    max_iter: int = 300,
    seed: int = 0,
    init_scale: float = 0.02,
) -> VqeResult:
    """Minimize <H> over the ansatz applied after ``init_prep``.

    The default start is a small seeded perturbation of the zero binding:
    the reference state is stationary for the Hamiltonian-structured ansatz
    at exactly zero angles, which would halt a quasi-Newton run immediately.
    """
    from .circuit import CompiledTemplate
    from .compilation import OptimizeConfig, minimize_cost

    h = grouped.total
    seed_state = init_prep.state().amplitudes
    template = CompiledTemplate(ansatz)
    n = grouped.n_qubits

    def energy(binding: dict) -> float:
        amps = template.apply_array(seed_state.copy(), binding)
        return expectation(StateVector(n, amps), h)

    slots = ansatz.slots()
    if init_binding is None:
        rng = np.random.default_rng(seed)
        init = {s: float(init_scale * rng.standard_normal()) for s in slots}
    else:
        init = dict(init_binding)
    cfg = OptimizeConfig(fd_step=fd_step, gtol=gtol, max_iter=max_iter)
    res = minimize_cost(energy, slots, init, cfg)
    amps = template.apply_array(seed_state.copy(), res.binding)
    return VqeResult(
        state=StateVector(grouped.n_qubits, amps),
        energy=res.final_cost,
        binding=res.binding,
        trace=res.trace,
        converged=res.converged,
    )
