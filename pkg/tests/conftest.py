"""Shared fixtures.  The expensive pipeline pieces (compilations, sector
eigendecompositions, the 16-qubit eigensolver run) are session-scoped and
lazily built so the acceptance tests can share them."""

import numpy as np
import pytest

from lsvqc.circuit import build_brickwall, build_vha, hubbard_u0_ground_prep, neel_prep, trotter_equivalent_init
from lsvqc.compilation import CompilationProblem, OptimizeConfig, optimize
from lsvqc.model import PRESETS, build_heisenberg, build_hubbard_chain, sector_indices
from lsvqc.observables import SectorEvolver, vqe_ground_state
from lsvqc.subspace import SubspaceSpec, gf_basis, krylov_basis

TAU = 0.1


@pytest.fixture(scope="session")
def heisenberg_compile():
    """Spin-chain compile on the 8-site window: depth-2 brick-wall,
    single-step subspace (n_t, dt) = (1, 0.5), reference depth 100."""
    he8 = build_heisenberg(8)
    ansatz = build_brickwall(8, 2, translational=True)
    basis = krylov_basis(SubspaceSpec("krylov", 1, 0.5, base_prep=neel_prep(8)), he8)
    problem = CompilationProblem(he8, TAU, ansatz, basis, mode="translational", target_r=100)
    init = trotter_equivalent_init(ansatz, he8, TAU)
    result = optimize(problem, init, OptimizeConfig(max_iter=600))
    return problem, init, result


@pytest.fixture(scope="session")
def hubbard_compile():
    """Chain compile on the 4-site window: depth-5 Hamiltonian ansatz,
    (n_t, dt) = (2, 0.5) subspace over the half-filled free ground state."""
    hub4 = build_hubbard_chain(4, PRESETS["sr2cuo3"])
    ansatz = build_vha(hub4, 5)
    w0 = hubbard_u0_ground_prep(hub4, 4)
    basis = krylov_basis(SubspaceSpec("krylov", 2, 0.5, base_prep=w0), hub4)
    problem = CompilationProblem(hub4, TAU, ansatz, basis, mode="translational", target_r=100)
    init = trotter_equivalent_init(ansatz, hub4, TAU)
    result = optimize(problem, init, OptimizeConfig(max_iter=300))
    return problem, init, result


@pytest.fixture(scope="session")
def hubbard_lvqc_compile(hubbard_compile):
    """Entire-space baseline at the same size, depth, and start."""
    problem, init, _ = hubbard_compile
    baseline = CompilationProblem(
        problem.grouped, problem.tau, problem.ansatz, problem.basis, mode="full_space", target_r=100
    )
    result = optimize(baseline, init, OptimizeConfig(max_iter=60))
    return result


@pytest.fixture(scope="session")
def hubbard_gf_compile():
    """Chain compile against the rotation-augmented ground-state subspace:
    (n_t, dt) = (1, 0.5), phi = 0.4*pi, eigensolver-prepared base state."""
    import numpy as np

    from lsvqc.circuit import concat

    hub4 = build_hubbard_chain(4, PRESETS["sr2cuo3"])
    w0 = hubbard_u0_ground_prep(hub4, 4)
    vqe = vqe_ground_state(hub4, build_vha(hub4, 5), w0, max_iter=300)
    base = concat(w0, build_vha(hub4, 5).bind(vqe.binding))
    basis = gf_basis(SubspaceSpec("gf_krylov", 1, 0.5, phi=0.4 * np.pi, base_prep=base), hub4)
    ansatz = build_vha(hub4, 5)
    problem = CompilationProblem(hub4, TAU, ansatz, basis, mode="translational", target_r=100)
    init = trotter_equivalent_init(ansatz, hub4, TAU)
    result = optimize(problem, init, OptimizeConfig(max_iter=300))
    return problem, result, vqe


@pytest.fixture(scope="session")
def hub8():
    return build_hubbard_chain(8, PRESETS["sr2cuo3"])


@pytest.fixture(scope="session")
def hub8_gf_evolver(hub8):
    """Sector evolver over the half-filled sector and its single-particle
    neighbors; one eigendecomposition per block, shared across the suite."""
    sectors = [
        sector_indices(8, 8, 0.0),
        sector_indices(8, 7, -0.5),
        sector_indices(8, 9, 0.5),
    ]
    return SectorEvolver(hub8.total, sectors)


@pytest.fixture(scope="session")
def hub8_vqe_ground(hub8):
    """Budgeted 16-qubit eigensolver ground state shared by the spectroscopy
    tests; both simulation paths use the same state, so its residual error
    cancels in every comparison."""
    prep = hubbard_u0_ground_prep(hub8, 8)
    return vqe_ground_state(hub8, build_vha(hub8, 5), prep, max_iter=60)


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
