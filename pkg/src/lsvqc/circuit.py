"""Parameterized circuits: brick-wall and Hamiltonian-ansatz builders,
product-formula circuits, state preparation, and causal-cone restriction.

Gate kinds
----------
* ``RotationGate`` — exp(i*angle*P) for a unit-coefficient Pauli string P; the
  angle is either fixed or read from a named parameter slot.
* ``DenseGate`` — fixed 1- or 2-qubit unitary.
* ``SymmetryGate`` — the five-angle number-conserving two-qubit gate used by
  the brick-wall ansatz; its angles may be slots or fixed values.

Circuits are immutable after construction; bindings are plain dicts mapping
slot names to radians.  Slot names are size-independent for the translational
builders, so parameters transfer between instances of different width.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares

from .model import GroupedHamiltonian, WindowMap, spin_chain_window
from .qsim import (
    PauliString,
    StateVector,
    dense_apply_array,
    rotation_apply_array,
)

ParamBinding = dict


class NonlocalGateError(ValueError):
    """Raised when restriction meets a gate outside the declared locality."""


@dataclass(frozen=True)
class RotationGate:
    axes: str  # full-register Pauli axes, unit coefficient implied
    slot: str | None = None
    angle: float | None = None

    @property
    def supports(self) -> tuple[int, ...]:
        return tuple(q for q, ax in enumerate(self.axes) if ax != "I")


@dataclass(frozen=True)
class DenseGate:
    matrix: np.ndarray
    supports: tuple[int, ...]  # first support = most significant gate bit


@dataclass(frozen=True)
class SymmetryGate:
    supports: tuple[int, int]
    slots: tuple[str, str, str, str, str] | None = None
    values: tuple[float, float, float, float, float] | None = None

    PARAMS = ("eta", "zeta", "chi", "gamma", "phi")


def symmetry_gate(eta: float, zeta: float, chi: float, gamma: float, phi: float) -> np.ndarray:
    """Two-qubit gate preserving total Z, in the basis {00, 01, 10, 11}."""
    c, s = np.cos(eta), np.sin(eta)
    return np.array(
        [
            [1, 0, 0, 0],
            [0, np.exp(-1j * (gamma + zeta)) * c, -1j * np.exp(-1j * (gamma - chi)) * s, 0],
            [0, -1j * np.exp(-1j * (gamma + chi)) * s, np.exp(-1j * (gamma - zeta)) * c, 0],
            [0, 0, 0, np.exp(-1j * (2 * gamma + phi))],
        ],
        dtype=complex,
    )


@dataclass
class ParamCircuit:
    """Ordered gate list with named parameter slots and layer bookkeeping."""

    n_qubits: int
    gates: list = field(default_factory=list)
    layers: list[tuple[int, int]] = field(default_factory=list)
    locality: int | None = None  # max site-span of any gate (chain metric)
    family: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for g in self.gates:
            for q in _gate_supports(g):
                if not 0 <= q < self.n_qubits:
                    raise ValueError(f"gate support {q} outside register")

    @property
    def depth(self) -> int:
        return len(self.layers)

    def slots(self) -> list[str]:
        seen: list[str] = []
        for g in self.gates:
            for s in _gate_slots(g):
                if s not in seen:
                    seen.append(s)
        return seen

    def bind(self, binding: ParamBinding | None) -> "ParamCircuit":
        """Freeze all open slots; result has no free parameters."""
        binding = binding or {}
        missing = [s for s in self.slots() if s not in binding]
        if missing:
            raise ValueError(f"binding misses slots {missing}")
        gates = []
        for g in self.gates:
            if isinstance(g, RotationGate) and g.slot is not None:
                gates.append(replace(g, slot=None, angle=float(binding[g.slot])))
            elif isinstance(g, SymmetryGate) and g.slots is not None:
                vals = tuple(float(binding[s]) for s in g.slots)
                gates.append(SymmetryGate(g.supports, None, vals))
            else:
                gates.append(g)
        return ParamCircuit(self.n_qubits, gates, list(self.layers), self.locality, self.family, dict(self.meta))

    # -- application -------------------------------------------------------

    def apply_to_array(self, amps: np.ndarray, binding: ParamBinding | None = None, dagger: bool = False) -> np.ndarray:
        ops = self.gates if not dagger else reversed(self.gates)
        for g in ops:
            amps = _apply_gate(amps, self.n_qubits, g, binding, dagger)
        return amps

    def apply(self, state: StateVector, binding: ParamBinding | None = None, dagger: bool = False) -> StateVector:
        if state.n_qubits != self.n_qubits:
            raise ValueError("register size mismatch")
        state.amplitudes = self.apply_to_array(state.amplitudes, binding, dagger)
        return state

    def state(self, binding: ParamBinding | None = None) -> StateVector:
        """Circuit applied to |0...0>."""
        return self.apply(StateVector.zero(self.n_qubits), binding)

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        gates = []
        for g in self.gates:
            if isinstance(g, RotationGate):
                supports = g.supports
                gates.append(
                    {
                        "kind": "rotation",
                        "qubits": list(supports),
                        "paulis": "".join(g.axes[q] for q in supports),
                        "slot": g.slot,
                        "angle": g.angle,
                    }
                )
            elif isinstance(g, DenseGate):
                gates.append(
                    {
                        "kind": "dense",
                        "qubits": list(g.supports),
                        "matrix_re": np.real(g.matrix).tolist(),
                        "matrix_im": np.imag(g.matrix).tolist(),
                    }
                )
            elif isinstance(g, SymmetryGate):
                gates.append(
                    {
                        "kind": "symmetry",
                        "qubits": list(g.supports),
                        "slots": list(g.slots) if g.slots else None,
                        "values": list(g.values) if g.values else None,
                    }
                )
            else:
                raise TypeError(f"unknown gate {type(g).__name__}")
        return {
            "n_qubits": self.n_qubits,
            "gates": gates,
            "layers": [list(l) for l in self.layers],
            "locality": self.locality,
            "family": self.family,
            "meta": self.meta,
        }

    @staticmethod
    def from_json(data: dict) -> "ParamCircuit":
        n = int(data["n_qubits"])
        gates = []
        for g in data["gates"]:
            kind = g["kind"]
            if kind == "rotation":
                ops = dict(zip(g["qubits"], g["paulis"]))
                axes = "".join(ops.get(q, "I") for q in range(n))
                gates.append(RotationGate(axes, g.get("slot"), g.get("angle")))
            elif kind == "dense":
                mat = np.array(g["matrix_re"]) + 1j * np.array(g["matrix_im"])
                gates.append(DenseGate(mat, tuple(g["qubits"])))
            elif kind == "symmetry":
                slots = tuple(g["slots"]) if g.get("slots") else None
                values = tuple(g["values"]) if g.get("values") else None
                gates.append(SymmetryGate(tuple(g["qubits"]), slots, values))
            else:
                raise ValueError(f"unknown gate kind {kind!r}")
        return ParamCircuit(
            n,
            gates,
            [tuple(l) for l in data.get("layers", [])],
            data.get("locality"),
            data.get("family"),
            data.get("meta", {}),
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=1, sort_keys=True)

    @staticmethod
    def load(path) -> "ParamCircuit":
        with open(path) as f:
            return ParamCircuit.from_json(json.load(f))


def _gate_supports(g) -> tuple[int, ...]:
    if isinstance(g, RotationGate):
        return g.supports
    return g.supports


def _gate_slots(g) -> tuple[str, ...]:
    if isinstance(g, RotationGate):
        return (g.slot,) if g.slot is not None else ()
    if isinstance(g, SymmetryGate):
        return g.slots if g.slots is not None else ()
    return ()


def _apply_gate(amps: np.ndarray, n: int, g, binding: ParamBinding | None, dagger: bool) -> np.ndarray:
    if isinstance(g, RotationGate):
        angle = g.angle if g.slot is None else float(binding[g.slot])
        if dagger:
            angle = -angle
        return rotation_apply_array(amps, n, g.axes, angle)
    if isinstance(g, DenseGate):
        mat = g.matrix.conj().T if dagger else g.matrix
        return dense_apply_array(amps, n, mat, g.supports)
    if isinstance(g, SymmetryGate):
        vals = g.values if g.slots is None else tuple(float(binding[s]) for s in g.slots)
        mat = symmetry_gate(*vals)
        if dagger:
            mat = mat.conj().T
        return dense_apply_array(amps, n, mat, g.supports)
    raise TypeError(f"unknown gate {type(g).__name__}")


def concat(*circuits: ParamCircuit) -> ParamCircuit:
    """Concatenate circuits (first applied first); layers accumulate."""
    n = circuits[0].n_qubits
    gates: list = []
    layers: list[tuple[int, int]] = []
    locality = 0
    for c in circuits:
        if c.n_qubits != n:
            raise ValueError("register size mismatch")
        off = len(gates)
        gates.extend(c.gates)
        layers.extend((a + off, b + off) for a, b in c.layers)
        if c.locality is None:
            locality = None
        elif locality is not None:
            locality = max(locality, c.locality)
    return ParamCircuit(n, gates, layers, locality)


# ---------------------------------------------------------------------------
# Fast repeated application
# ---------------------------------------------------------------------------


_DIAG_PATTERN_CACHE: dict[tuple, np.ndarray] = {}
_CLUSTER_EIG_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}
_FUSE_CLUSTER_MAX = 4


def _diagonal_pattern(n: int, axes_list: tuple[str, ...]) -> np.ndarray:
    """Summed +-1 eigenvalue patterns of a set of I/Z strings."""
    key = (n, axes_list)
    hit = _DIAG_PATTERN_CACHE.get(key)
    if hit is not None:
        return hit
    from .qsim import _bit_parity

    idx = np.arange(1 << n, dtype=np.int64)
    total = np.zeros(1 << n)
    for axes in axes_list:
        zmask = 0
        for q, ax in enumerate(axes):
            if ax == "Z":
                zmask |= 1 << q
        total += 1.0 - 2.0 * _bit_parity(idx & zmask)
    _DIAG_PATTERN_CACHE[key] = total
    return total


def _cluster_eig(local_axes: tuple[str, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a summed Pauli generator on a small cluster,
    keyed by the relative axes strings."""
    hit = _CLUSTER_EIG_CACHE.get(local_axes)
    if hit is not None:
        return hit
    from .qsim import PauliString as _PS

    k = len(local_axes[0])
    gen = np.zeros((1 << k, 1 << k), dtype=complex)
    for axes in local_axes:
        gen += _PS(axes).dense()
    evals, evecs = np.linalg.eigh(gen)
    _CLUSTER_EIG_CACHE[local_axes] = (evals, evecs)
    return evals, evecs


def _fuse_rotation_run(run: list, n: int) -> list:
    """Lower a run of same-angle rotations to diagonal phase ops plus dense
    cluster exponentials.  Gates are bucketed greedily: a bucket only absorbs
    gates commuting with everything already in it (equal angles can occur
    across non-commuting groups), so order is preserved exactly."""
    from .qsim import PauliString as _PS

    angle = run[0].angle
    ops: list = []
    bucket: list = []
    bucket_strings: list = []

    def flush():
        if bucket:
            ops.extend(_emit_bucket(bucket, angle, n))
            bucket.clear()
            bucket_strings.clear()

    for g in run:
        s = _PS(g.axes)
        if all(s.commutes_with(t) for t in bucket_strings):
            bucket.append(g)
            bucket_strings.append(s)
        else:
            flush()
            bucket.append(g)
            bucket_strings.append(s)
    flush()
    return ops


def _emit_bucket(bucket: list, angle: float, n: int) -> list:
    from .qsim import _pauli_action

    diag = [g for g in bucket if set(g.axes) <= {"I", "Z"}]
    other = [g for g in bucket if set(g.axes) - {"I", "Z"}]
    ops: list = []
    if diag:
        pattern = _diagonal_pattern(n, tuple(g.axes for g in diag))
        ops.append(("phase", np.exp(1j * angle * pattern)))
    # connected components of the remaining terms by support overlap
    remaining = list(other)
    while remaining:
        comp = [remaining.pop(0)]
        supp = set(comp[0].supports)
        grew = True
        while grew:
            grew = False
            for g in list(remaining):
                if supp & set(g.supports):
                    comp.append(g)
                    supp |= set(g.supports)
                    remaining.remove(g)
                    grew = True
        qubits = tuple(sorted(supp))
        if len(qubits) > _FUSE_CLUSTER_MAX:
            ops.extend(("rot", *(_pauli_action(n, g.axes)), float(g.angle)) for g in comp)
            continue
        local = tuple(sorted("".join(g.axes[q] for q in qubits) for g in comp))
        evals, evecs = _cluster_eig(local)
        mat = (evecs * np.exp(1j * angle * evals)) @ evecs.conj().T
        # dense_apply_array treats the first support as the most significant
        # gate bit; _cluster_eig builds the generator with local qubit 0 as
        # the least significant bit, so list supports high-to-low.
        ops.append(("dense", mat, tuple(reversed(qubits))))
    return ops


class CompiledCircuit:
    """A fully-bound circuit lowered to cached permutation/phase tables for
    repeated statevector application.

    Runs of consecutive equal-angle commuting rotations (the product-formula
    groups) are fused into one diagonal phase vector plus small dense cluster
    exponentials, which cuts the op count of Hamiltonian-structured layers by
    about 3x without changing the matrix."""

    def __init__(self, circuit: ParamCircuit, binding: ParamBinding | None = None):
        from .qsim import _pauli_action

        bound = circuit.bind(binding) if (binding or circuit.slots()) else circuit
        self.n_qubits = circuit.n_qubits
        self._ops = []
        gates = bound.gates
        i = 0
        while i < len(gates):
            g = gates[i]
            if isinstance(g, RotationGate):
                j = i
                run = []
                while (
                    j < len(gates)
                    and isinstance(gates[j], RotationGate)
                    and gates[j].angle == g.angle
                ):
                    run.append(gates[j])
                    j += 1
                if len(run) == 1:
                    self._ops.append(("rot", *(_pauli_action(self.n_qubits, g.axes)), float(g.angle)))
                else:
                    self._ops.extend(_fuse_rotation_run(run, self.n_qubits))
                i = j
            elif isinstance(g, DenseGate):
                self._ops.append(("dense", g.matrix, g.supports))
                i += 1
            elif isinstance(g, SymmetryGate):
                self._ops.append(("dense", symmetry_gate(*g.values), g.supports))
                i += 1
            else:
                raise TypeError(f"unknown gate {type(g).__name__}")

    def _run(self, amps: np.ndarray, dagger: bool) -> np.ndarray:
        return _run_ops(self._ops, amps, self.n_qubits, dagger)

    def apply_array(self, amps: np.ndarray, dagger: bool = False) -> np.ndarray:
        return self._run(amps, dagger)

    def apply(self, state: StateVector, dagger: bool = False) -> StateVector:
        state.amplitudes = self._run(state.amplitudes, dagger)
        return state


def _run_ops(ops: list, amps: np.ndarray, n: int, dagger: bool) -> np.ndarray:
    for op in reversed(ops) if dagger else ops:
        kind = op[0]
        if kind == "rot":
            _, perm, phase, angle = op
            if dagger:
                angle = -angle
            src = amps[perm]
            src *= phase if amps.ndim == 1 else phase[:, None]
            amps = np.cos(angle) * amps + (1j * np.sin(angle)) * src
        elif kind == "phase":
            vec = np.conj(op[1]) if dagger else op[1]
            amps = amps * (vec if amps.ndim == 1 else vec[:, None])
        else:
            _, mat, supports = op
            if dagger:
                mat = mat.conj().T
            amps = dense_apply_array(amps, n, mat, supports)
    return amps


class CompiledTemplate:
    """Structure-compiled circuit for repeated evaluation at many bindings:
    bucketing, cluster eigendecompositions, and permutation tables are built
    once; ``instantiate`` only exponentiates the per-slot angles."""

    def __init__(self, circuit: ParamCircuit):
        from .qsim import PauliString as _PS, _pauli_action

        self.n_qubits = circuit.n_qubits
        self._plan: list = []  # (kind, payload, angle_source); angle_source = ("slot", name) | ("fixed", value)
        gates = circuit.gates
        i = 0
        while i < len(gates):
            g = gates[i]
            if isinstance(g, DenseGate):
                self._plan.append(("dense_fixed", (g.matrix, g.supports), None))
                i += 1
                continue
            if isinstance(g, SymmetryGate):
                if g.slots is None:
                    self._plan.append(("dense_fixed", (symmetry_gate(*g.values), g.supports), None))
                else:
                    self._plan.append(("symmetry", g.supports, g.slots))
                i += 1
                continue
            # run of rotations sharing one angle source
            source = ("slot", g.slot) if g.slot is not None else ("fixed", g.angle)
            run = []
            j = i
            while j < len(gates) and isinstance(gates[j], RotationGate):
                gj = gates[j]
                src = ("slot", gj.slot) if gj.slot is not None else ("fixed", gj.angle)
                if src != source:
                    break
                run.append(gj)
                j += 1
            # bucket by commutation, then template each bucket
            bucket: list = []
            bucket_strings: list = []

            def flush():
                if not bucket:
                    return
                diag = [g2 for g2 in bucket if set(g2.axes) <= {"I", "Z"}]
                other = [g2 for g2 in bucket if set(g2.axes) - {"I", "Z"}]
                if diag:
                    pattern = _diagonal_pattern(self.n_qubits, tuple(g2.axes for g2 in diag))
                    self._plan.append(("phase_tpl", pattern, source))
                remaining = list(other)
                while remaining:
                    comp = [remaining.pop(0)]
                    supp = set(comp[0].supports)
                    grew = True
                    while grew:
                        grew = False
                        for g2 in list(remaining):
                            if supp & set(g2.supports):
                                comp.append(g2)
                                supp |= set(g2.supports)
                                remaining.remove(g2)
                                grew = True
                    qubits = tuple(sorted(supp))
                    if len(qubits) > _FUSE_CLUSTER_MAX:
                        for g2 in comp:
                            self._plan.append(("rot_tpl", _pauli_action(self.n_qubits, g2.axes), source))
                        continue
                    local = tuple(sorted("".join(g2.axes[q] for q in qubits) for g2 in comp))
                    evals, evecs = _cluster_eig(local)
                    self._plan.append(("cluster_tpl", (evals, evecs, tuple(reversed(qubits))), source))
                bucket.clear()
                bucket_strings.clear()

            for g2 in run:
                s = _PS(g2.axes)
                if not all(s.commutes_with(t) for t in bucket_strings):
                    flush()
                bucket.append(g2)
                bucket_strings.append(s)
            flush()
            i = j

    def instantiate(self, binding: dict | None) -> list:
        ops = []
        for kind, payload, source in self._plan:
            if kind == "dense_fixed":
                ops.append(("dense", payload[0], payload[1]))
                continue
            if kind == "symmetry":
                supports, slots = payload, source
                mat = symmetry_gate(*(float(binding[s]) for s in slots))
                ops.append(("dense", mat, supports))
                continue
            angle = float(binding[source[1]]) if source[0] == "slot" else float(source[1])
            if kind == "phase_tpl":
                ops.append(("phase", np.exp(1j * angle * payload)))
            elif kind == "rot_tpl":
                ops.append(("rot", payload[0], payload[1], angle))
            else:
                evals, evecs, supports = payload
                mat = (evecs * np.exp(1j * angle * evals)) @ evecs.conj().T
                ops.append(("dense", mat, supports))
        return ops

    def apply_array(self, amps: np.ndarray, binding: dict | None = None, dagger: bool = False) -> np.ndarray:
        return _run_ops(self.instantiate(binding), amps, self.n_qubits, dagger)


# ---------------------------------------------------------------------------
# Ansatz builders
# ---------------------------------------------------------------------------


def _brick_pairs(L: int, parity: str, boundary: str) -> list[tuple[int, int]]:
    # "odd" bonds start on even 0-based sites (bond 1,3,... in 1-based labels)
    if parity == "odd":
        return [(i, i + 1) for i in range(0, L - 1, 2)]
    pairs = [(i, i + 1) for i in range(1, L - 1, 2)]
    if boundary == "periodic" and L % 2 == 0 and L > 2:
        pairs.append((L - 1, 0))
    return pairs


def build_brickwall(L: int, d_v: int, translational: bool = True, boundary: str = "periodic") -> ParamCircuit:
    """Brick-wall ansatz of symmetry-preserving gates; each layer applies the
    odd-bond sublayer then the even-bond sublayer (matching the first-order
    step of the bond-parity split).  Translational sharing gives two slot sets
    (5 angles each) per layer."""
    if boundary == "periodic" and L % 2 != 0:
        raise ValueError("periodic pairing requires even L")
    gates: list = []
    layers: list[tuple[int, int]] = []
    for l in range(d_v):
        start = len(gates)
        for parity in ("odd", "even"):
            pairs = _brick_pairs(L, parity, boundary)
            for b, pair in enumerate(pairs):
                tag = f"v{l}{parity[0]}" if translational else f"v{l}{parity[0]}b{b}"
                slots = tuple(f"{tag}.{p}" for p in SymmetryGate.PARAMS)
                gates.append(SymmetryGate(pair, slots))
        layers.append((start, len(gates)))
    return ParamCircuit(
        L,
        gates,
        layers,
        locality=1,
        family="brickwall",
        meta={"d_v": d_v, "translational": translational, "boundary": boundary},
    )


def build_vha(grouped: GroupedHamiltonian, n_layers: int) -> ParamCircuit:
    """Hamiltonian-structured ansatz: per layer, one shared angle slot per
    commuting group, realized as a product of commuting Pauli rotations
    exp(i * theta_{l,m} * P)."""
    if n_layers < 1:
        raise ValueError("need at least one layer")
    gates: list = []
    layers: list[tuple[int, int]] = []
    for l in range(n_layers):
        start = len(gates)
        for g in grouped.groups:
            slot = f"t{l}.{g.name}"
            for term in g.terms:
                gates.append(RotationGate(term.axes, slot=slot))
        layers.append((start, len(gates)))
    locality = _hamiltonian_locality(grouped)
    return ParamCircuit(
        grouped.n_qubits,
        gates,
        layers,
        locality=locality,
        family="vha",
        meta={"n_layers": n_layers, "model": grouped.kind},
    )


def _hamiltonian_locality(grouped: GroupedHamiltonian) -> int:
    span = 0
    L = grouped.lattice.L
    for g in grouped.groups:
        for t in g.terms:
            sites = sorted({grouped.site_of_qubit(q) for q in t.support})
            if len(sites) > 1:
                gaps = [sites[k + 1] - sites[k] for k in range(len(sites) - 1)]
                gaps.append(sites[0] + L - sites[-1])
                span = max(span, L - max(gaps))
    return span


def build_trotter1(grouped: GroupedHamiltonian, t: float, r: int) -> ParamCircuit:
    """First-order product formula with r steps, converging to exp(-i*t*H):
    each step applies exp(-i*(t/r)*c_m*H_m) for the groups in listed order."""
    if r < 1:
        raise ValueError("need at least one step")
    gates: list = []
    layers: list[tuple[int, int]] = []
    for _ in range(r):
        start = len(gates)
        for g in grouped.groups:
            angle = -(t / r) * g.coefficient
            for term in g.terms:
                gates.append(RotationGate(term.axes, angle=angle))
        layers.append((start, len(gates)))
    return ParamCircuit(
        grouped.n_qubits,
        gates,
        layers,
        locality=_hamiltonian_locality(grouped),
        family="trotter1",
        meta={"t": t, "r": r, "model": grouped.kind},
    )


def trotter_step(grouped: GroupedHamiltonian, t: float) -> ParamCircuit:
    """Single first-order step at time t (the subspace-basis propagator)."""
    return build_trotter1(grouped, t, 1)


# -- Trotter-equivalent initialization ---------------------------------------


def _heisenberg_two_site_target(tau_step: float) -> np.ndarray:
    h2 = sum(np.kron(m, m) for m in (_PX, _PY, _PZ))
    evals, evecs = np.linalg.eigh(h2)
    return (evecs * np.exp(-1j * tau_step * evals)) @ evecs.conj().T


_PX = np.array([[0, 1], [1, 0]], dtype=complex)
_PY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_PZ = np.array([[1, 0], [0, -1]], dtype=complex)


def solve_heisenberg_brick(tau_step: float) -> tuple[float, float, float, float, float]:
    """Five symmetry-gate angles reproducing the two-site bond exponential
    exp(-i*tau*(XX+YY+ZZ)) up to the unavoidable e^{i*tau} phase (the gate's
    |00> entry is pinned to 1).  Solved numerically from an analytic seed."""
    target = _heisenberg_two_site_target(tau_step)
    aligned = target / target[0, 0]

    def residual(p):
        d = symmetry_gate(*p) - aligned
        return np.concatenate([d.real.ravel(), d.imag.ravel()])

    seed = np.array([2 * tau_step, 0.0, 0.0, -2 * tau_step, 4 * tau_step])
    sol = least_squares(residual, seed, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if np.max(np.abs(residual(sol.x))) > 1e-10:
        raise RuntimeError("brick-wall Trotter-equivalence solve did not converge")
    return tuple(float(v) for v in sol.x)


def trotter_equivalent_init(ansatz: ParamCircuit, grouped: GroupedHamiltonian, tau: float) -> ParamBinding:
    """Binding that makes the ansatz act like the depth-matched first-order
    circuit at time tau.

    For the Hamiltonian ansatz the match is exact as a matrix.  For the
    brick-wall family each gate carries a known global phase e^{i*tau/d_V}
    relative to its bond exponential, so the circuits agree up to a global
    phase (irrelevant to every cost in this package).
    """
    if ansatz.family == "vha":
        n_layers = ansatz.meta["n_layers"]
        binding = {}
        for l in range(n_layers):
            for g in grouped.groups:
                binding[f"t{l}.{g.name}"] = -(tau / n_layers) * g.coefficient
        return binding
    if ansatz.family == "brickwall":
        if grouped.kind != "heisenberg":
            raise ValueError("brick-wall equivalence is defined for the spin chain")
        d_v = ansatz.meta["d_v"]
        vals = solve_heisenberg_brick(tau / d_v)
        binding = {}
        for slot in ansatz.slots():
            tag, pname = slot.split(".")
            binding[slot] = vals[SymmetryGate.PARAMS.index(pname)]
        return binding
    raise ValueError(f"no Trotter embedding known for family {ansatz.family!r}")


# ---------------------------------------------------------------------------
# State preparation
# ---------------------------------------------------------------------------

_X_GATE = np.array([[0, 1], [1, 0]], dtype=complex)


def neel_prep(L: int) -> ParamCircuit:
    """Alternating product state |1010...10> (bit flips on odd 0-based sites)."""
    if L % 2 != 0:
        raise ValueError("alternating pattern requires even L")
    gates = [DenseGate(_X_GATE, (q,)) for q in range(1, L, 2)]
    return ParamCircuit(L, gates, [(0, len(gates))], locality=0, family="neel")


def pauli_rotation_prep(n: int, qubit: int, axis: str, angle: float) -> ParamCircuit:
    """Single fixed rotation exp(i*angle*P_qubit) as a circuit."""
    axes = "".join(axis if q == qubit else "I" for q in range(n))
    return ParamCircuit(n, [RotationGate(axes, angle=angle)], [(0, 1)], locality=0)


def _givens_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array(
        [[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1]],
        dtype=complex,
    )


def _givens_qr(q: np.ndarray) -> list[tuple[int, int, float]]:
    """Adjacent-row Givens reduction of an L x M orthonormal-column matrix to
    [[T],[0]] with T diagonal (+-1); returns the applied rotations in order."""
    q = q.copy()
    L, M = q.shape
    rots: list[tuple[int, int, float]] = []
    for c in range(M):
        for r in range(L - 1, c, -1):
            if abs(q[r, c]) < 1e-14:
                continue
            theta = float(np.arctan2(q[r, c], q[r - 1, c]))
            ct, st = np.cos(theta), np.sin(theta)
            upper = ct * q[r - 1] + st * q[r]
            lower = -st * q[r - 1] + ct * q[r]
            q[r - 1], q[r] = upper, lower
            rots.append((r - 1, r, theta))
    if not np.allclose(np.abs(np.triu(q[:M]) - np.diag(np.diag(q[:M]))), 0.0, atol=1e-9):
        raise ValueError("one-body matrix reduction failed; check orthonormality")
    return rots


def _block_slater_gates(one_body: np.ndarray, n_occ: int, qubit_of_mode) -> list:
    """Gates preparing the lowest-n_occ Slater determinant of a real symmetric
    one-body matrix on one fermionic block (modes adjacent under the
    block-internal ordering)."""
    L = one_body.shape[0]
    if not np.allclose(one_body, one_body.T, atol=1e-10):
        raise ValueError("one-body matrix must be symmetric")
    gates: list = [DenseGate(_X_GATE, (qubit_of_mode(m),)) for m in range(n_occ)]
    if n_occ in (0, L):
        return gates
    evals, evecs = np.linalg.eigh(one_body)
    orbitals = evecs[:, np.argsort(evals)[:n_occ]]
    rots = _givens_qr(orbitals)
    # state(Q) = G_1^dag ... G_K^dag |1..10..0> for (G_K ... G_1) Q = [[D],[0]]
    for a, b, theta in reversed(rots):
        gates.append(DenseGate(_givens_matrix(theta).conj().T, (qubit_of_mode(a), qubit_of_mode(b))))
    return gates


def givens_ground_prep(one_body: np.ndarray, n_e: int, layout: str = "spinless") -> ParamCircuit:
    """Nearest-neighbor rotation network preparing the Slater determinant of
    the lowest one-body orbitals.

    layout "spinless": register of L qubits, n_e modes occupied.
    layout "hubbard":  doubled register, n_e/2 per spin block, the spin-down
    block traversed in its own descending-site order.
    """
    L = one_body.shape[0]
    if layout == "spinless":
        if not 0 <= n_e <= L:
            raise ValueError("occupation out of range")
        gates = _block_slater_gates(one_body, n_e, lambda m: m)
        n = L
    elif layout == "hubbard":
        if n_e % 2 != 0:
            raise ValueError("hubbard layout prepares equal spin populations")
        n_occ = n_e // 2
        if not 0 <= n_occ <= L:
            raise ValueError("occupation out of range")
        n = 2 * L
        gates = _block_slater_gates(one_body, n_occ, lambda m: m)
        # spin-down block: site i sits at qubit 2L-1-i, so block mode k (JW
        # order along qubits L..2L-1) is site L-1-k; permute the matrix.
        perm = np.arange(L)[::-1]
        h_dn = one_body[np.ix_(perm, perm)]
        gates += _block_slater_gates(h_dn, n_occ, lambda m: L + m)
    else:
        raise ValueError(f"unknown layout {layout!r}")
    layers = _greedy_layers(gates)
    return ParamCircuit(n, gates, layers, locality=1, family="givens")


def _greedy_layers(gates: list) -> list[tuple[int, int]]:
    """Layer boundaries from greedy packing of disjoint-support gates."""
    layers: list[tuple[int, int]] = []
    start = 0
    busy: set[int] = set()
    for i, g in enumerate(gates):
        s = set(_gate_supports(g))
        if busy & s:
            layers.append((start, i))
            start = i
            busy = set(s)
        else:
            busy |= s
    if start < len(gates):
        layers.append((start, len(gates)))
    return layers


def hubbard_u0_ground_prep(grouped: GroupedHamiltonian, n_e: int) -> ParamCircuit:
    """Rotation-network circuit for the U=0 ground state of the chain at the
    given (even) filling with S_z = 0, using the parity-twisted one-body
    matrix consistent with the qubit Hamiltonian."""
    from .model import effective_one_body

    if grouped.kind != "hubbard_chain":
        raise ValueError("free-fermion prep is defined for the hubbard chain")
    L = grouped.lattice.L
    h1 = effective_one_body(L, grouped.params, n_e // 2)
    return givens_ground_prep(h1, n_e, layout="hubbard")


# ---------------------------------------------------------------------------
# Causal-cone restriction
# ---------------------------------------------------------------------------


def _site_span(supports: tuple[int, ...], window: WindowMap) -> int:
    if window.kind == "hubbard_chain":
        L = window.L
        sites = sorted({q if q < L else 2 * L - 1 - q for q in supports})
    else:
        sites = sorted(set(supports))
    if len(sites) <= 1:
        return 0
    gaps = [sites[k + 1] - sites[k] for k in range(len(sites) - 1)]
    gaps.append(sites[0] + window.L - sites[-1])
    return window.L - max(gaps)


def restrict_circuit(circuit: ParamCircuit, window: WindowMap) -> ParamCircuit:
    """Keep exactly the gates whose support lies inside the window, relabeled
    onto the window register; slot names are preserved so bindings transfer
    between the full and restricted circuits."""
    if circuit.locality is None:
        raise NonlocalGateError("circuit has no declared locality")
    gates: list = []
    old_layers = circuit.layers or [(0, len(circuit.gates))]
    layers: list[tuple[int, int]] = []
    for a, b in old_layers:
        start = len(gates)
        for g in circuit.gates[a:b]:
            supports = _gate_supports(g)
            if _site_span(supports, window) > circuit.locality:
                raise NonlocalGateError(f"gate on {supports} exceeds locality {circuit.locality}")
            if not window.contains_qubits(supports):
                continue
            gates.append(_relabel_gate(g, window))
        layers.append((start, len(gates)))
    return ParamCircuit(
        window.n_qubits, gates, layers, circuit.locality, circuit.family, dict(circuit.meta)
    )


def _relabel_gate(g, window: WindowMap):
    m = window.qubit_map
    if isinstance(g, RotationGate):
        ps = PauliString(g.axes).map_qubits(m, window.n_qubits)
        return RotationGate(ps.axes, g.slot, g.angle)
    if isinstance(g, DenseGate):
        return DenseGate(g.matrix, tuple(m[q] for q in g.supports))
    if isinstance(g, SymmetryGate):
        return SymmetryGate(tuple(m[q] for q in g.supports), g.slots, g.values)
    raise TypeError(f"unknown gate {type(g).__name__}")


def restrict_spin_circuit(circuit: ParamCircuit, center: int, size: int) -> ParamCircuit:
    """Spin-chain convenience wrapper building the window from (center, size)."""
    window = spin_chain_window(circuit.n_qubits, center, size)
    return restrict_circuit(circuit, window)
