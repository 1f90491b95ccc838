"""Spin and fermionic lattice Hamiltonians, Jordan-Wigner mapping, symmetry
sectors, and local (window) restriction.

The extended Hubbard chain uses the qubit layout ``i_up = i`` and
``i_down = 2L-1-i`` for site ``i`` on an ``L``-site ring, so the spin-up block
occupies qubits 0..L-1 ascending and the spin-down block 2L-1..L descending.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qsim import PauliString, PauliSum


@dataclass(frozen=True)
class LatticeSpec:
    L: int
    boundary: str = "periodic"
    dim: int = 1

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("lattice needs at least 2 sites")
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"unknown boundary {self.boundary!r}")


@dataclass(frozen=True)
class HubbardParams:
    """Chain parameters in eV: nearest/next-nearest hopping, on-site repulsion,
    chemical potential."""

    t1: float
    t2: float
    u: float
    mu: float


PRESETS = {
    # Downfolded single-band chain parameters for a quasi-1D cuprate.
    "sr2cuo3": HubbardParams(t1=0.532, t2=0.0403, u=1.054, mu=0.159),
}


@dataclass
class Group:
    """One commuting group: unit-coefficient terms scaled by a common coefficient."""

    name: str
    terms: PauliSum
    coefficient: float

    def check_commuting(self) -> bool:
        ts = self.terms.terms
        for i in range(len(ts)):
            for j in range(i + 1, len(ts)):
                if not ts[i].commutes_with(ts[j]):
                    return False
        return True


@dataclass
class GroupedHamiltonian:
    n_qubits: int
    groups: list[Group]
    lattice: LatticeSpec
    kind: str  # "heisenberg" | "hubbard_chain"
    params: HubbardParams | None = None

    @property
    def n_sites(self) -> int:
        return self.lattice.L

    @property
    def total(self) -> PauliSum:
        out = PauliSum(self.n_qubits, [])
        for g in self.groups:
            out = out + (g.coefficient * g.terms)
        return out.collect()

    def qubits_of_site(self, site: int) -> tuple[int, ...]:
        site %= self.lattice.L
        if self.kind == "hubbard_chain":
            return (site, 2 * self.lattice.L - 1 - site)
        return (site,)

    def site_of_qubit(self, qubit: int) -> int:
        if self.kind == "hubbard_chain":
            L = self.lattice.L
            return qubit if qubit < L else 2 * L - 1 - qubit
        return qubit


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_heisenberg(L: int, boundary: str = "periodic") -> GroupedHamiltonian:
    """Isotropic spin-1/2 chain with unit couplings, split into the two
    bond-parity groups used by the first-order product formula.

    The sum runs over every bond (j, j+1) for j = 1..L (1-based) with periodic
    wrap, which for L=2 emits the single bond twice (doubled coupling); this
    degenerate case is kept as-is.
    """
    lattice = LatticeSpec(L, boundary)
    odd_terms: list[PauliString] = []
    even_terms: list[PauliString] = []
    last = L if boundary == "periodic" else L - 1
    for j1 in range(1, last + 1):  # 1-based bond label
        a = j1 - 1
        b = j1 % L
        bucket = odd_terms if j1 % 2 == 1 else even_terms
        for ax in "XYZ":
            bucket.append(PauliString.from_ops(L, {a: ax, b: ax}))
    groups = [
        Group("odd", PauliSum(L, odd_terms), 1.0),
        Group("even", PauliSum(L, even_terms), 1.0),
    ]
    return GroupedHamiltonian(L, groups, lattice, "heisenberg")


def build_hubbard_chain(L: int, params: HubbardParams) -> GroupedHamiltonian:
    """Extended Fermi-Hubbard ring in the qubit representation, divided into
    six mutually-commuting groups (nearest hops split by bond parity,
    next-nearest hops split into two interleaved families, on-site ZZ, and
    one-body Z).  Group coefficients are
    (-t1/2, -t1/2, -t2/2, -t2/2, U/4, (mu-U/2)/2); the constant from the
    number-operator mapping is dropped as a global energy offset.
    """
    if L % 2 != 0 or L < 4:
        raise ValueError("hubbard chain requires even L >= 4")
    lattice = LatticeSpec(L, "periodic")
    n = 2 * L

    def q_up(i: int) -> int:
        return i % L

    def q_dn(i: int) -> int:
        return 2 * L - 1 - (i % L)

    def hop(bucket: list[PauliString], q: callable, a: int, b: int, string_site: int | None):
        ops_extra = {} if string_site is None else {q(string_site): "Z"}
        for ax in "XY":
            bucket.append(PauliString.from_ops(n, {q(a): ax, q(b): ax, **ops_extra}))

    lam_p = range(0, L, 2)  # even sites
    lam_pp = [i for i in range(L) if i % 4 in (0, 1)]

    h1: list[PauliString] = []
    h2: list[PauliString] = []
    h3: list[PauliString] = []
    h4: list[PauliString] = []
    for q in (q_up, q_dn):
        for i in lam_p:
            hop(h1, q, i + 1, i, None)
            hop(h2, q, i + 2, i + 1, None)
        if params.t2 != 0.0:
            for i in lam_pp:
                hop(h3, q, i + 2, i, i + 1)
                hop(h4, q, i + 4, i + 2, i + 3)
    h5 = [PauliString.from_ops(n, {q_up(i): "Z", q_dn(i): "Z"}) for i in range(L)]
    h6 = [PauliString.from_ops(n, {q(i): "Z"}) for q in (q_up, q_dn) for i in range(L)]

    groups = [
        Group("h1", PauliSum(n, h1), -params.t1 / 2),
        Group("h2", PauliSum(n, h2), -params.t1 / 2),
        Group("h3", PauliSum(n, h3), -params.t2 / 2),
        Group("h4", PauliSum(n, h4), -params.t2 / 2),
        Group("h5", PauliSum(n, h5), params.u / 4),
        Group("h6", PauliSum(n, h6), (params.mu - params.u / 2) / 2),
    ]
    return GroupedHamiltonian(n, groups, lattice, "hubbard_chain", params)


def jordan_wigner(mode: int, n_modes: int, kind: str) -> PauliSum:
    """Fermionic ladder operator for ``mode`` as a two-string Pauli sum:
    (X_a +/- i Y_a)/2 times the Z string on all modes below a
    (+ for annihilation, - for creation)."""
    if not 0 <= mode < n_modes:
        raise ValueError(f"mode {mode} out of range")
    if kind not in ("annihilate", "create"):
        raise ValueError(f"unknown kind {kind!r}")
    string = {k: "Z" for k in range(mode)}
    sign = 1.0 if kind == "annihilate" else -1.0
    return PauliSum(
        n_modes,
        [
            PauliString.from_ops(n_modes, {mode: "X", **string}, 0.5),
            PauliString.from_ops(n_modes, {mode: "Y", **string}, sign * 0.5j),
        ],
    )


# ---------------------------------------------------------------------------
# Symmetry sectors
# ---------------------------------------------------------------------------


@dataclass
class SymmetrySector:
    L: int  # sites
    n_e: int
    s_z: float
    indices: np.ndarray  # sorted computational-basis indices

    @property
    def dim(self) -> int:
        return len(self.indices)


def sector_indices(L: int, n_e: int, s_z: float) -> SymmetrySector:
    """Basis indices of the fixed particle-number / spin-z sector under the
    spin-block qubit layout.  An empty sector is allowed (flagged by dim==0)."""
    if not 0 <= n_e <= 2 * L:
        raise ValueError("particle number out of range")
    idx = np.arange(1 << (2 * L), dtype=np.int64)
    up = idx & ((1 << L) - 1)
    dn = idx >> L
    n_up = _popcount(up)
    n_dn = _popcount(dn)
    mask = (n_up + n_dn == n_e) & (n_up - n_dn == int(round(2 * s_z)))
    return SymmetrySector(L, n_e, s_z, idx[mask])


def _popcount(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    w = v.copy()
    while np.any(w):
        out += w & 1
        w >>= 1
    return out


def sector_dense_hamiltonian(h: PauliSum, sector: SymmetrySector, leak_tol: float = 1e-9) -> np.ndarray:
    """Project a symmetry-preserving Pauli sum onto the sector basis.

    Individual strings may connect the sector to its complement (e.g. the XX
    and YY halves of a hopping term); those contributions must cancel in the
    sum, which is verified against ``leak_tol``.
    """
    from .qsim import _pauli_action

    dim_full = 1 << h.n_qubits
    lookup = np.full(dim_full, -1, dtype=np.int64)
    lookup[sector.indices] = np.arange(sector.dim)
    mat = np.zeros((sector.dim, sector.dim), dtype=complex)
    src = sector.indices
    cols = np.arange(sector.dim)
    out_keys: list[np.ndarray] = []
    out_vals: list[np.ndarray] = []
    for t in h.terms:
        perm, phase = _pauli_action(h.n_qubits, t.axes)
        # P|x> = g(x)|x ^ flip> with g(x) = phase[x ^ flip] (perm is an involution)
        dst = perm[src]
        rows = lookup[dst]
        vals = t.coefficient * phase[dst]
        inside = rows >= 0
        np.add.at(mat, (rows[inside], cols[inside]), vals[inside])
        if np.any(~inside):
            out_keys.append(dst[~inside] * sector.dim + cols[~inside])
            out_vals.append(vals[~inside])
    if out_keys:
        keys = np.concatenate(out_keys)
        vals = np.concatenate(out_vals)
        uniq, inv = np.unique(keys, return_inverse=True)
        acc = np.zeros(len(uniq), dtype=complex)
        np.add.at(acc, inv, vals)
        worst = float(np.max(np.abs(acc))) if len(acc) else 0.0
        if worst > leak_tol:
            raise ValueError(f"hamiltonian couples the sector to its complement (weight {worst:.2e})")
    return mat


def sector_expectation(h: PauliSum, sector: SymmetrySector, coeffs: np.ndarray) -> float:
    m = sector_dense_hamiltonian(h, sector)
    val = np.vdot(coeffs, m @ coeffs)
    return float(val.real)


# ---------------------------------------------------------------------------
# Windows and restriction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WindowMap:
    """A contiguous site window with its qubit relabeling.

    ``sites`` is the ordered arc; ``qubit_map`` sends original qubits into the
    window register.  Whole-ring windows use the identity labeling.
    """

    sites: tuple[int, ...]
    qubit_map: dict[int, int]
    n_qubits: int
    kind: str
    L: int
    center: int

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    def contains_qubits(self, qubits: tuple[int, ...]) -> bool:
        return all(q in self.qubit_map for q in qubits)

    def site_index(self, site: int) -> int:
        return self.sites.index(site % self.L)


def window_sites(L: int, center: int, size: int, boundary: str = "periodic") -> tuple[int, ...]:
    """Sites within wrap distance floor(size/2) of the center; the whole ring
    when the radius covers it."""
    radius = size // 2
    if boundary == "periodic" and 2 * radius + 1 >= L:
        return tuple(range(L))
    if boundary == "periodic":
        return tuple((center - radius + k) % L for k in range(2 * radius + 1))
    lo = max(0, center - radius)
    hi = min(L - 1, center + radius)
    return tuple(range(lo, hi + 1))


def spin_chain_window(L: int, center: int, size: int, boundary: str = "periodic") -> WindowMap:
    sites = window_sites(L, center, size, boundary)
    if sites == tuple(range(L)):
        qmap = {q: q for q in range(L)}
    else:
        qmap = {s: k for k, s in enumerate(sites)}
    return WindowMap(sites, qmap, len(sites), "heisenberg", L, center % L)


def hubbard_window(L: int, center: int, size: int) -> WindowMap:
    """Window on the doubled register: the site arc mirrored into both spin
    blocks, relabeled to the same layout on 2w qubits."""
    sites = window_sites(L, center, size, "periodic")
    w = len(sites)
    if sites == tuple(range(L)):
        qmap = {q: q for q in range(2 * L)}
    else:
        qmap = {}
        for k, s in enumerate(sites):
            qmap[s] = k
            qmap[2 * L - 1 - s] = 2 * w - 1 - k
    return WindowMap(sites, qmap, 2 * w, "hubbard_chain", L, center % L)


def make_window(h: GroupedHamiltonian, center: int, size: int) -> WindowMap:
    if h.kind == "hubbard_chain":
        return hubbard_window(h.lattice.L, center, size)
    return spin_chain_window(h.lattice.L, center, size, h.lattice.boundary)


def restrict_hamiltonian(h: GroupedHamiltonian, center: int, size: int) -> GroupedHamiltonian:
    """Keep exactly the terms whose full support lies inside the window;
    same register, group structure and coefficients preserved."""
    if size >= h.lattice.L:
        raise ValueError("restriction size must be smaller than the lattice")
    window = make_window(h, center, size)
    groups = [
        Group(
            g.name,
            PauliSum(h.n_qubits, [t for t in g.terms if window.contains_qubits(t.support)]),
            g.coefficient,
        )
        for g in h.groups
    ]
    return GroupedHamiltonian(h.n_qubits, groups, h.lattice, h.kind, h.params)


def window_hamiltonian(h: GroupedHamiltonian, window: WindowMap, support_size: int | None = None) -> GroupedHamiltonian:
    """Relabel the window-supported part of ``h`` onto the window register.

    With ``support_size`` set, terms are first restricted to the (smaller)
    support window around the same center before relabeling.
    """
    keep = window
    if support_size is not None:
        keep = make_window(h, window.center, support_size)
    groups = []
    for g in h.groups:
        kept = [t for t in g.terms if keep.contains_qubits(t.support) and window.contains_qubits(t.support)]
        relabeled = [t.map_qubits(window.qubit_map, window.n_qubits) for t in kept]
        groups.append(Group(g.name, PauliSum(window.n_qubits, relabeled), g.coefficient))
    lattice = LatticeSpec(max(2, window.n_sites), "open")
    return GroupedHamiltonian(window.n_qubits, groups, lattice, h.kind, h.params)


# ---------------------------------------------------------------------------
# Free-fermion reference for the chain (state preparation and U=0 oracles)
# ---------------------------------------------------------------------------


def effective_one_body(L: int, params: HubbardParams, n_sigma: int) -> np.ndarray:
    """One-body matrix governing a single spin block of the qubit Hamiltonian
    in the fixed-number sector with ``n_sigma`` particles.

    Hopping terms whose ladder string crosses the 0/L-1 boundary act with an
    extra parity twist in the qubit representation: the boundary hops flip
    sign in even-number sectors.  The diagonal carries -(mu - U/2) from the
    one-body Z terms.
    """
    h = np.zeros((L, L))
    twist = 1.0 if n_sigma % 2 == 1 else -1.0
    for i in range(L):
        for d, t in ((1, params.t1), (2, params.t2)):
            a, b = i, (i + d) % L
            s = 1.0 if i + d < L else twist
            h[a, b] += -t * s
            h[b, a] += -t * s
    h += np.diag(np.full(L, -(params.mu - params.u / 2)))
    return h


def u0_sector_ground_energy(L: int, params: HubbardParams, n_up: int, n_dn: int) -> float:
    """Qubit-Hamiltonian ground energy of the U=0 chain in the given sector:
    filled one-body levels plus the constant left by dropping identities."""
    if params.u != 0.0:
        raise ValueError("free-fermion energy only valid at U=0")
    e = 0.0
    for n_sigma in (n_up, n_dn):
        evals = np.linalg.eigvalsh(effective_one_body(L, params, n_sigma))
        e += float(np.sum(np.sort(evals)[:n_sigma]))
    return e + L * (params.mu - params.u / 2)


# ---------------------------------------------------------------------------
# Config loading
# ---------------------------------------------------------------------------


def load_model_config(cfg: dict) -> GroupedHamiltonian:
    """Build a Hamiltonian from a parameter dict:
    {"model": "heisenberg"|"hubbard_chain", "L": int, "boundary": ...,
     "t1","t2","U","mu" or "preset": "sr2cuo3"}."""
    model = cfg["model"]
    L = int(cfg["L"])
    if model == "heisenberg":
        return build_heisenberg(L, cfg.get("boundary", "periodic"))
    if model == "hubbard_chain":
        if "preset" in cfg:
            params = PRESETS[cfg["preset"]]
        else:
            params = HubbardParams(float(cfg["t1"]), float(cfg["t2"]), float(cfg["U"]), float(cfg["mu"]))
        return build_hubbard_chain(L, params)
    raise ValueError(f"unknown model {model!r}")
