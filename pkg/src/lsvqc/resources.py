"""Closed-form gate-resource estimation: product-formula step counts under
worst/average error scalings, compiled-layer estimates, 2D-lattice and
material gate counts, and feasibility verdicts for near-term devices.

Two device models are covered: error-mitigated NISQ hardware, where the
two-qubit count must satisfy N_2q * p_2q <= B, and the partially
fault-tolerant analog-rotation architecture, where the rotation count must
satisfy N_RZ * (4 p_phys / 15) <= B.  The mitigation budget defaults to B=2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources as importlib_resources

DEFAULT_COMPRESSION = 10.0
DEFAULT_BUDGET = 2.0


@dataclass(frozen=True)
class ErrorScheme:
    kind: str  # "worst" | "average"
    prefactor: float = 1.0

    def __post_init__(self):
        if self.kind not in ("worst", "average"):
            raise ValueError(f"unknown scheme {self.kind!r}")
        if self.prefactor <= 0:
            raise ValueError("prefactor must be positive")


@dataclass(frozen=True)
class DeviceModel:
    kind: str  # "nisq" | "star"
    error_rate: float
    budget: float = DEFAULT_BUDGET

    def __post_init__(self):
        if self.kind not in ("nisq", "star"):
            raise ValueError(f"unknown device {self.kind!r}")
        if not 0 < self.error_rate < 1:
            raise ValueError("error rate must be in (0, 1)")


def trotter_steps(L: float, t: float, epsilon: float, scheme: ErrorScheme) -> int:
    """Step count prefactor * L^s * t^2 / epsilon with s=1 (worst) or
    s=1/2 (average), floored to an integer with a minimum of one step.

    Flooring rather than rounding up is what reproduces the published
    gate-count table from the per-step fixtures at two significant figures.
    """
    if t <= 0 or epsilon <= 0:
        raise ValueError("time and accuracy must be positive")
    s = 1.0 if scheme.kind == "worst" else 0.5
    value = scheme.prefactor * (L**s) * t * t / epsilon
    return max(1, int(math.floor(value + 1e-12)))


def lsvqc_layers(r: int, compression: float = DEFAULT_COMPRESSION) -> int:
    """Compiled layer count floor(r / R), floored at one layer."""
    if r < 1:
        raise ValueError("need at least one reference step")
    ratio = r / compression
    return max(1, int(math.floor(ratio + 1e-12)))


# ---------------------------------------------------------------------------
# 2D Fermi-Hubbard square lattice (open boundary, swap-network layout)
# ---------------------------------------------------------------------------


def _check_square(L: int) -> int:
    side = math.isqrt(L)
    if side * side != L:
        raise ValueError(f"L={L} is not a perfect square")
    return side


def hubbard2d_gate_counts(L: int, depth: int) -> tuple[int, int]:
    """(N_1q, N_2q) for ``depth`` product-formula steps (or compiled layers):
    N_1q = 3 L d, N_2q = (4 L^{3/2} + 2 L - 2 sqrt(L)) d."""
    side = _check_square(L)
    n1 = 3 * L * depth
    n2 = (4 * L * side + 2 * L - 2 * side) * depth
    return n1, n2


def hubbard2d_rz_count(L: int, depth: int) -> int:
    """Analog-rotation count (9 L - 8 sqrt(L)) d (one rotation per term)."""
    side = _check_square(L)
    return (9 * L - 8 * side) * depth


# ---------------------------------------------------------------------------
# Material gate specifications
# ---------------------------------------------------------------------------


@dataclass
class InteractionRow:
    label: str
    terms_per_cell: int
    cnot_per_term: int
    rz_per_term: int = 1

    def __post_init__(self):
        if min(self.terms_per_cell, self.cnot_per_term, self.rz_per_term) < 0:
            raise ValueError("counts must be non-negative")


@dataclass
class MaterialGateSpec:
    """Per-cell interaction/gate table plus the swap-network overhead.

    Shipped specs are calibration fixtures: the rows are reverse-fitted so
    that the per-step totals reproduce published estimates, not derived
    first-principles counts.
    """

    name: str
    n_qubits_per_cell: int
    interactions: list[InteractionRow]
    fswap_cnot: int = 3
    calibrated: bool = True
    meta: dict = field(default_factory=dict)

    def n_qubits(self, n_cells: int) -> int:
        return self.n_qubits_per_cell * n_cells

    def n_orbitals(self, n_cells: int) -> int:
        return self.n_qubits(n_cells) // 2

    @staticmethod
    def from_json(data: dict) -> "MaterialGateSpec":
        rows = [
            InteractionRow(r["label"], int(r["terms_per_cell"]), int(r["cnot_per_term"]), int(r.get("rz_per_term", 1)))
            for r in data["interactions"]
        ]
        return MaterialGateSpec(
            name=data["name"],
            n_qubits_per_cell=int(data["n_qubits_per_cell"]),
            interactions=rows,
            fswap_cnot=int(data.get("fswap_cnot", 3)),
            calibrated=bool(data.get("calibrated", True)),
            meta=data.get("meta", {}),
        )


def downfolded_gate_count(spec: MaterialGateSpec, n_cells: int, depth: int) -> tuple[int, int]:
    """(N_CNOT, N_RZ) for ``depth`` steps: interaction gates scale with the
    cell count, the swap network with the squared register size:
    per step, sum_i terms_i * cnot_i * N_cells
    + ((N_q/cell * N_cells)^2 - 2 N_q/cell * N_cells)/2 * fswap_cnot."""
    nq = spec.n_qubits_per_cell * n_cells
    fswap_pairs = (nq * nq - 2 * nq) // 2
    cnot_step = sum(r.terms_per_cell * r.cnot_per_term for r in spec.interactions) * n_cells
    cnot_step += fswap_pairs * spec.fswap_cnot
    rz_step = sum(r.terms_per_cell * r.rz_per_term for r in spec.interactions) * n_cells
    return cnot_step * depth, rz_step * depth


# ---------------------------------------------------------------------------
# Feasibility
# ---------------------------------------------------------------------------


@dataclass
class Feasibility:
    feasible: bool
    max_tolerable_rate: float
    effective_error: float


def feasibility(count: int, device: DeviceModel) -> Feasibility:
    """Mitigation-budget verdict for a gate count on the given device:
    NISQ uses the two-qubit count directly; the analog-rotation architecture
    weights rotations by the logical rate 4 p / 15."""
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return Feasibility(True, math.inf, 0.0)
    if device.kind == "nisq":
        eff = count * device.error_rate
        tol = device.budget / count
    else:
        eff = count * (4.0 * device.error_rate / 15.0)
        tol = device.budget * 15.0 / (4.0 * count)
    return Feasibility(eff <= device.budget, tol, eff)


def max_tolerable_rate(count: int, kind: str, budget: float = DEFAULT_BUDGET) -> float:
    if count == 0:
        return math.inf
    if kind == "nisq":
        return budget / count
    if kind == "star":
        return budget * 15.0 / (4.0 * count)
    raise ValueError(f"unknown device kind {kind!r}")


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------


@dataclass
class ResourceReport:
    label: str
    method: str  # "trotter" | "lsvqc"
    scheme: str  # "average" | "worst"
    depth: int
    n_1q: int | None
    n_2q: int
    n_rz: int
    p2q_max: float
    pphys_max: float

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "method": self.method,
            "scheme": self.scheme,
            "depth": self.depth,
            "n_1q": self.n_1q,
            "n_2q": self.n_2q,
            "n_rz": self.n_rz,
            "p2q_max": self.p2q_max,
            "pphys_max": self.pphys_max,
        }


def material_report(
    spec: MaterialGateSpec,
    n_cells: int,
    t: float,
    epsilon: float,
    compression: float = DEFAULT_COMPRESSION,
    budget: float = DEFAULT_BUDGET,
) -> list[ResourceReport]:
    """Four rows per material: {trotter, lsvqc} x {average, worst}, with
    tolerable error rates from the budget identities."""
    out = []
    L_orb = spec.n_orbitals(n_cells)
    for scheme_kind in ("average", "worst"):
        r = trotter_steps(L_orb, t, epsilon, ErrorScheme(scheme_kind))
        for method, depth in (("trotter", r), ("lsvqc", lsvqc_layers(r, compression))):
            cnot, rz = downfolded_gate_count(spec, n_cells, depth)
            out.append(
                ResourceReport(
                    label=spec.name,
                    method=method,
                    scheme=scheme_kind,
                    depth=depth,
                    n_1q=None,
                    n_2q=cnot,
                    n_rz=rz,
                    p2q_max=max_tolerable_rate(cnot, "nisq", budget),
                    pphys_max=max_tolerable_rate(rz, "star", budget),
                )
            )
    return out


def hubbard2d_report(
    L: int,
    t: float,
    epsilon: float,
    compression: float = DEFAULT_COMPRESSION,
    budget: float = DEFAULT_BUDGET,
) -> list[ResourceReport]:
    out = []
    for scheme_kind in ("average", "worst"):
        r = trotter_steps(L, t, epsilon, ErrorScheme(scheme_kind))
        for method, depth in (("trotter", r), ("lsvqc", lsvqc_layers(r, compression))):
            n1, n2 = hubbard2d_gate_counts(L, depth)
            rz = hubbard2d_rz_count(L, depth)
            out.append(
                ResourceReport(
                    label=f"hubbard2d L={L}",
                    method=method,
                    scheme=scheme_kind,
                    depth=depth,
                    n_1q=n1,
                    n_2q=n2,
                    n_rz=rz,
                    p2q_max=max_tolerable_rate(n2, "nisq", budget),
                    pphys_max=max_tolerable_rate(rz, "star", budget),
                )
            )
    return out


# ---------------------------------------------------------------------------
# Shipped material fixtures
# ---------------------------------------------------------------------------

MATERIAL_NAMES = ("tmtsf2pf6", "k3c60", "lafeaso", "nio", "srvo3")


def load_material(name: str) -> MaterialGateSpec:
    ref = importlib_resources.files("lsvqc.data.materials").joinpath(f"{name}.json")
    with ref.open() as f:
        return MaterialGateSpec.from_json(json.load(f))


def load_all_materials() -> list[MaterialGateSpec]:
    return [load_material(name) for name in MATERIAL_NAMES]


def round_sig(x: float, sig: int = 2) -> float:
    """Round to ``sig`` significant figures (used to compare against published
    two-significant-figure estimates)."""
    if x == 0 or not math.isfinite(x):
        return x
    return float(f"{x:.{sig - 1}e}")
