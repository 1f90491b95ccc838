import numpy as np
import pytest

from lsvqc.circuit import neel_prep, trotter_step
from lsvqc.model import PRESETS, build_heisenberg, build_hubbard_chain, sector_indices
from lsvqc.qsim import StateVector
from lsvqc.subspace import SubspaceBasis, SubspaceSpec, gf_basis, gramian, krylov_basis


class TestKrylovBasis:
    def test_zero_steps_is_base_only(self):
        he = build_heisenberg(4)
        basis = krylov_basis(SubspaceSpec("krylov", 0, 0.5, base_prep=neel_prep(4)), he)
        assert basis.dimension == 1

    def test_second_prep_is_one_step_after_base(self):
        he = build_heisenberg(8)
        basis = krylov_basis(SubspaceSpec("krylov", 1, 0.5, base_prep=neel_prep(8)), he)
        assert basis.dimension == 2
        manual = trotter_step(he, 0.5).apply(neel_prep(8).state())
        assert np.max(np.abs(basis.states()[1] - manual.amplitudes)) < 1e-12

    def test_small_dt_collapses_gramian(self):
        he = build_heisenberg(8)
        det = {}
        for dt in (1e-4, 0.5):
            basis = krylov_basis(SubspaceSpec("krylov", 1, dt, base_prep=neel_prep(8)), he)
            det[dt] = gramian(basis).det_modulus
        assert det[1e-4] < det[0.5]

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            SubspaceSpec("krylov", 1, 0.0)
        with pytest.raises(ValueError):
            SubspaceSpec("lanczos", 1, 0.5)


class TestGfBasis:
    def test_counting_small(self):
        he = build_heisenberg(2)
        spec = SubspaceSpec("gf_krylov", 0, 0.5, phi=0.3, base_prep=neel_prep(2))
        assert gf_basis(spec, he).dimension == 5  # 1 + 2 + 2

    def test_counting_hubbard(self):
        hub = build_hubbard_chain(8, PRESETS["sr2cuo3"])
        spec = SubspaceSpec("gf_krylov", 1, 0.5, phi=0.3, base_prep=neel_prep(16))
        assert gf_basis(spec, hub).dimension == 66  # (1+1)(2*16+1)

    def test_zero_phi_collapses_rank(self):
        he = build_heisenberg(4)
        spec = SubspaceSpec("gf_krylov", 0, 0.5, phi=0.0, base_prep=neel_prep(4))
        rep = gramian(gf_basis(spec, he))
        assert rep.rank == 1  # all rotated preps equal the bare prep

    def test_particle_sector_confinement(self, hubbard_gf_compile):
        problem, _, _ = hubbard_gf_compile
        basis = problem.basis
        L = problem.grouped.lattice.L
        allowed = np.concatenate(
            [sector_indices(L, n_e, sz).indices for n_e, sz in ((4, 0.0), (3, 0.5), (3, -0.5), (5, 0.5), (5, -0.5))]
        )
        mask = np.zeros(1 << problem.grouped.n_qubits, dtype=bool)
        mask[allowed] = True
        for psi in basis.states():
            outside = float(np.sum(np.abs(psi[~mask]) ** 2))
            assert outside < 1e-9

    def test_ordering_bare_then_x_then_y(self):
        he = build_heisenberg(2)
        spec = SubspaceSpec("gf_krylov", 0, 0.5, phi=0.4, base_prep=neel_prep(2))
        basis = gf_basis(spec, he)
        bare = basis.states()[0]
        # first rotated prep differs from bare on qubit 0 only (X rotation)
        assert np.max(np.abs(bare - neel_prep(2).state().amplitudes)) < 1e-12
        x0 = basis.states()[1]
        assert abs(np.vdot(bare, x0)) == pytest.approx(np.cos(0.4), abs=1e-12)


class TestGramian:
    def test_orthonormal_basis(self):
        preps = [neel_prep(2)]
        from lsvqc.circuit import DenseGate, ParamCircuit

        X = np.array([[0, 1], [1, 0]], dtype=complex)
        other = ParamCircuit(2, [DenseGate(X, (0,))], [(0, 1)], locality=0)
        rep = gramian(SubspaceBasis([preps[0], other], 2))
        assert np.allclose(rep.matrix, np.eye(2), atol=1e-12)
        assert rep.det_modulus == pytest.approx(1.0)
        assert rep.rank == 2

    def test_duplicate_prep_drops_rank(self):
        rep = gramian(SubspaceBasis([neel_prep(4), neel_prep(4)], 4))
        assert rep.det_modulus == pytest.approx(0.0, abs=1e-12)
        assert rep.rank == 1

    def test_positive_semidefinite(self):
        he = build_heisenberg(8)
        basis = krylov_basis(SubspaceSpec("krylov", 3, 0.5, base_prep=neel_prep(8)), he)
        rep = gramian(basis)
        assert rep.min_eigenvalue > -1e-10
        assert np.max(np.abs(rep.matrix - rep.matrix.conj().T)) < 1e-10

    def test_refinement_never_decreases_rank(self):
        he = build_heisenberg(8)
        prev = 0
        for n_t in range(4):
            basis = krylov_basis(SubspaceSpec("krylov", n_t, 0.5, base_prep=neel_prep(8)), he)
            rank = gramian(basis).rank
            assert rank >= prev
            prev = rank

    def test_neel_krylov_regression_value(self):
        # frozen from a direct statevector evaluation of this instance
        he = build_heisenberg(8)
        basis = krylov_basis(SubspaceSpec("krylov", 1, 0.5, base_prep=neel_prep(8)), he)
        rep = gramian(basis)
        assert 0.0 < rep.det_modulus < 1.0
        assert rep.det_modulus == pytest.approx(0.93310924, abs=1e-6)
