import numpy as np
import pytest
from scipy.linalg import expm

from lsvqc.circuit import (
    CompiledCircuit,
    ParamCircuit,
    build_trotter1,
    build_vha,
    hubbard_u0_ground_prep,
    neel_prep,
)
from lsvqc.model import (
    PRESETS,
    HubbardParams,
    SymmetrySector,
    build_heisenberg,
    build_hubbard_chain,
    jordan_wigner,
    sector_dense_hamiltonian,
    sector_indices,
    u0_sector_ground_energy,
)
from lsvqc.observables import (
    EV_TIME_FS,
    CircuitBranchEngine,
    CompressionResult,
    ExactBranchEngine,
    SectorEvolver,
    SpectralGrid,
    TimeSeries,
    depth_compression,
    dos,
    double_occupation,
    gf_momentum,
    infidelity_curves,
    lehmann_gf,
    mae_scalar,
    mae_series,
    momentum_grid,
    repeated_dynamics,
    retarded_gf,
    spectral_function,
    spectral_sum,
    state_infidelity,
    state_infidelity_series,
    times_from_fs,
    times_to_fs,
    vqe_ground_state,
)
from lsvqc.qsim import PauliString, PauliSum, StateVector, expectation, inner_product

U0 = HubbardParams(0.532, 0.0403, 0.0, 0.159)


def full_sector(n_qubits):
    return SymmetrySector(n_qubits, -1, 0.0, np.arange(1 << n_qubits))


class TestSectorEvolver:
    def test_zero_time_is_identity(self):
        he = build_heisenberg(4)
        ev = SectorEvolver(he.total, [full_sector(4)])
        psi = neel_prep(4).state().amplitudes
        assert np.max(np.abs(ev.evolve(psi, 0.0) - psi)) < 1e-12

    def test_eigenstate_gets_pure_phase(self):
        he = build_heisenberg(4)
        ev = SectorEvolver(he.total, [full_sector(4)])
        e0, energy = ev.ground_state()
        out = ev.evolve(e0, 0.7)
        assert abs(np.vdot(e0, out)) == pytest.approx(1.0, abs=1e-12)
        assert np.vdot(e0, out) == pytest.approx(np.exp(-1j * 0.7 * energy), abs=1e-12)

    def test_agrees_with_fine_trotter(self):
        # frozen from the convergence oracle: the r=1e4 first-order state
        # error at t=1 is 1.5e-4 here and halves when r doubles
        he = build_heisenberg(4)
        ev = SectorEvolver(he.total, [full_sector(4)])
        psi = neel_prep(4).state().amplitudes
        exact = ev.evolve(psi, 1.0)
        err = {}
        for r in (10_000, 20_000):
            trot = CompiledCircuit(build_trotter1(he, 1.0, r)).apply_array(psi.copy())
            err[r] = np.linalg.norm(exact - trot)
        assert err[10_000] < 5e-4
        assert 0.4 < err[20_000] / err[10_000] < 0.6

    def test_leak_detection(self):
        hub = build_hubbard_chain(4, PRESETS["sr2cuo3"])
        ev = SectorEvolver(hub.total, [sector_indices(4, 4, 0.0)])
        bad = np.zeros(256, dtype=complex)
        bad[0] = 1.0  # vacuum is outside the half-filled sector
        with pytest.raises(ValueError):
            ev.evolve(bad, 0.1)


class TestRepeatedDynamics:
    def test_zero_steps(self):
        psi0 = neel_prep(4).state()
        assert repeated_dynamics(ParamCircuit(4), None, psi0, 0) == []

    def test_identity_circuit_is_constant(self):
        psi0 = neel_prep(4).state()
        states = repeated_dynamics(ParamCircuit(4), None, psi0, 3)
        for s in states:
            assert np.max(np.abs(s.amplitudes - psi0.amplitudes)) < 1e-14

    def test_trotter_checkpoints_track_exact(self):
        he = build_heisenberg(4)
        ev = SectorEvolver(he.total, [full_sector(4)])
        psi0 = neel_prep(4).state()
        states = repeated_dynamics(build_trotter1(he, 0.1, 100), None, psi0.copy(), 10)
        for n, s in enumerate(states, start=1):
            exact = ev.evolve(psi0.amplitudes, n * 0.1)
            assert np.linalg.norm(s.amplitudes - exact) < 5e-3  # accumulated step error


class TestInfidelity:
    def test_equal_circuits(self):
        he = build_heisenberg(4)
        u = build_trotter1(he, 0.1, 7)
        psi0 = neel_prep(4).state()
        assert state_infidelity(u, u, psi0, 5) == pytest.approx(0.0, abs=1e-12)
        assert state_infidelity(u, u, psi0, 0) == 0.0

    def test_series_monotone_reference_quality(self):
        he = build_heisenberg(8)
        u = build_trotter1(he, 0.1, 100)
        psi0 = neel_prep(8).state()
        curves = infidelity_curves(
            u, {f"r{r}": (build_trotter1(he, 0.1, r), None) for r in (2, 5, 10, 20, 40)}, psi0, 5
        )
        finals = [curves[f"r{r}"][-1] for r in (2, 5, 10, 20, 40)]
        assert all(b < a for a, b in zip(finals, finals[1:]))

    def test_curves_match_series(self):
        he = build_heisenberg(4)
        u = build_trotter1(he, 0.1, 50)
        v = build_trotter1(he, 0.1, 3)
        psi0 = neel_prep(4).state()
        a = state_infidelity_series(v, u, psi0.copy(), 4)
        b = infidelity_curves(u, {"v": (v, None)}, psi0, 4)["v"]
        assert np.max(np.abs(a - b)) < 1e-14


class TestDoubleOccupation:
    def test_vacuum(self):
        assert double_occupation(StateVector.zero(8), 4) == pytest.approx(0.0)

    def test_fully_occupied(self):
        assert double_occupation(StateVector.basis(8, 255), 4) == pytest.approx(1.0)

    def test_free_half_filling_is_quarter(self):
        hub = build_hubbard_chain(8, U0)
        psi = hubbard_u0_ground_prep(hub, 8).state()
        assert double_occupation(psi, 8) == pytest.approx(0.25, abs=1e-9)


class TestGreensFunction:
    def test_equal_time_anticommutator(self):
        hub = build_hubbard_chain(4, PRESETS["sr2cuo3"])
        secs = [sector_indices(4, 4, 0.0), sector_indices(4, 3, -0.5), sector_indices(4, 5, 0.5)]
        ev = SectorEvolver(hub.total, secs)
        e0, _ = ev.ground_state()
        g = retarded_gf(ExactBranchEngine(ev, e0, [0, 1, 2, 3]), np.array([0.0]))
        for a in range(4):
            assert g[a, a, 0] == pytest.approx(-1j, abs=1e-10)
        for a in range(4):
            for b in range(4):
                if a != b:
                    assert abs(g[a, b, 0]) < 1e-10

    def test_free_chain_matches_analytic_phase(self):
        # two-site open chain: G(t) = -i [exp(-i t h1)]_ab exactly
        t_hop, mu = 0.7, 0.3
        h = PauliSum(
            2,
            [
                PauliString.from_ops(2, {0: "X", 1: "X"}, -t_hop / 2),
                PauliString.from_ops(2, {0: "Y", 1: "Y"}, -t_hop / 2),
                PauliString.from_ops(2, {0: "Z"}, mu / 2),
                PauliString.from_ops(2, {1: "Z"}, mu / 2),
            ],
        )
        h1 = np.array([[-mu, -t_hop], [-t_hop, -mu]])
        ev = SectorEvolver(h, [full_sector(2)])
        e0, _ = ev.ground_state()
        times = np.linspace(0, 3, 13)
        g = retarded_gf(ExactBranchEngine(ev, e0, [0, 1]), times)
        for it, t in enumerate(times):
            ref = -1j * expm(-1j * t * h1)
            assert np.max(np.abs(g[:, :, it] - ref)) < 1e-12

    def test_matches_direct_operator_definition(self):
        # dense Heisenberg-picture anticommutator on the same two-site chain
        t_hop = 0.9
        h = PauliSum(
            2,
            [
                PauliString.from_ops(2, {0: "X", 1: "X"}, -t_hop / 2),
                PauliString.from_ops(2, {0: "Y", 1: "Y"}, -t_hop / 2),
            ],
        )
        ev = SectorEvolver(h, [full_sector(2)])
        e0, _ = ev.ground_state()
        times = np.linspace(0, 2, 5)
        g = retarded_gf(ExactBranchEngine(ev, e0, [0, 1]), times)
        hd = h.dense()
        cs = [jordan_wigner(a, 2, "annihilate").dense() for a in range(2)]
        for it, t in enumerate(times):
            u = expm(-1j * t * hd)
            for a in range(2):
                for b in range(2):
                    ca_t = u.conj().T @ cs[a] @ u
                    cb_d = cs[b].conj().T
                    ref = -1j * (e0.conj() @ (ca_t @ cb_d + cb_d @ ca_t) @ e0)
                    assert abs(g[a, b, it] - ref) < 1e-10

    def test_dual_path_consistency(self):
        # branch-statevector amplitudes vs the spectral-sum oracle
        hub = build_hubbard_chain(4, PRESETS["sr2cuo3"])
        secs = [sector_indices(4, 4, 0.0), sector_indices(4, 3, -0.5), sector_indices(4, 5, 0.5)]
        ev = SectorEvolver(hub.total, secs)
        e0, _ = ev.ground_state()
        times = np.arange(0, 4.0 + 1e-9, 0.4)
        g1 = retarded_gf(ExactBranchEngine(ev, e0, list(range(4))), times)
        g2 = lehmann_gf(ev, list(range(4)), times)
        assert np.max(np.abs(g1 - g2)) < 1e-8

    def test_circuit_engine_matches_exact_for_fine_step(self):
        hub = build_hubbard_chain(4, PRESETS["sr2cuo3"])
        secs = [sector_indices(4, 4, 0.0), sector_indices(4, 3, -0.5), sector_indices(4, 5, 0.5)]
        ev = SectorEvolver(hub.total, secs)
        e0, _ = ev.ground_state()
        times = np.arange(0, 1.0 + 1e-9, 0.1)
        exact = retarded_gf(ExactBranchEngine(ev, e0.copy(), [0, 1]), times)
        step = CompiledCircuit(build_trotter1(hub, 0.1, 200))
        circ = retarded_gf(CircuitBranchEngine(step, e0.copy(), [0, 1], 0.1), times)
        assert np.max(np.abs(exact - circ)) < 1e-4

    def test_circuit_engine_rejects_off_grid(self):
        hub = build_hubbard_chain(4, PRESETS["sr2cuo3"])
        e0 = hubbard_u0_ground_prep(hub, 4).state().amplitudes
        eng = CircuitBranchEngine(CompiledCircuit(build_trotter1(hub, 0.1, 1)), e0, [0], 0.1)
        with pytest.raises(ValueError):
            eng.states_at(0.05)


class TestMomentumTransform:
    def test_diagonal_input_passthrough(self):
        L = 4
        g = np.zeros((L, L, 3), dtype=complex)
        diag = np.array([1.0, 0.5 - 0.5j, -0.25j])
        for i in range(L):
            g[i, i] = diag
        for k in momentum_grid(L):
            assert np.max(np.abs(gf_momentum(g, k, L) - diag)) < 1e-12

    def test_k_zero_is_plain_average(self):
        rng = np.random.default_rng(0)
        g = rng.normal(size=(4, 4, 2)) + 1j * rng.normal(size=(4, 4, 2))
        ref = np.mean(g, axis=(0, 1)) * 4 / 4
        assert np.max(np.abs(gf_momentum(g, 0.0, 4) - np.sum(g, axis=(0, 1)) / 4)) < 1e-12

    def test_matches_double_sum_oracle(self):
        rng = np.random.default_rng(1)
        L = 4
        g = rng.normal(size=(L, L, 3)) + 1j * rng.normal(size=(L, L, 3))
        k = 2 * np.pi * 3 / L
        ref = sum(np.exp(-1j * k * (i - j)) * g[i, j] for i in range(L) for j in range(L)) / L
        assert np.max(np.abs(gf_momentum(g, k, L) - ref)) < 1e-12

    def test_row_mode(self):
        L = 4
        rng = np.random.default_rng(2)
        row = rng.normal(size=(L, 3)) + 1j * rng.normal(size=(L, 3))
        k = np.pi / 2
        ref = sum(np.exp(-1j * k * d) * row[d] for d in range(L))
        assert np.max(np.abs(gf_momentum(row, k, L) - ref)) < 1e-12

    def test_off_grid_rejected(self):
        with pytest.raises(ValueError):
            gf_momentum(np.zeros((4, 4, 1), dtype=complex), 0.1, 4)


class TestSpectralFunction:
    def test_lorentzian_peak_and_width(self):
        grid = SpectralGrid(5.0, 250, 0.1)
        eps = 1.3
        times = np.arange(0, 30.0 + 1e-9, 0.1)
        a = spectral_function(TimeSeries(times, -1j * np.exp(-1j * eps * times)), grid)
        peak_idx = int(np.argmax(a))
        assert grid.omegas[peak_idx] == pytest.approx(eps, abs=grid.spacing)
        half = a[peak_idx] / 2
        above = grid.omegas[a >= half]
        assert (above[-1] - above[0]) == pytest.approx(2 * grid.eta, rel=0.3)
        assert spectral_sum(a, grid) == pytest.approx(1.0, abs=0.1)

    def test_zero_input_zero_output(self):
        grid = SpectralGrid(5.0, 100, 0.1)
        times = np.arange(0, 10.0 + 1e-9, 0.1)
        a = spectral_function(TimeSeries(times, np.zeros_like(times, dtype=complex)), grid)
        assert np.max(np.abs(a)) == 0.0

    def test_dos_passthrough_and_average(self):
        a = np.ones((1, 11))
        assert np.allclose(dos(a), 1.0)
        stack = np.stack([np.full(11, 2.0), np.zeros(11)])
        assert np.allclose(dos(stack), 1.0)

    def test_broadening_flattens_peaks(self):
        times = np.arange(0, 30.0 + 1e-9, 0.1)
        gk = TimeSeries(times, -1j * np.exp(-1j * 1.0 * times))
        peaks = []
        for eta in (0.05, 0.1, 0.3):
            a = spectral_function(gk, SpectralGrid(5.0, 250, eta))
            peaks.append(np.max(a))
        assert peaks[0] > peaks[1] > peaks[2]


class TestErrorMetrics:
    def test_exact_agreement_gives_zero(self):
        x = np.linspace(0, 1, 10)
        assert np.max(mae_series(x, x)) == 0.0
        assert mae_scalar(x, x) == 0.0

    def test_constant_offset(self):
        x = np.zeros(8)
        assert np.allclose(mae_series(x + 0.3, x), 0.3)
        assert mae_scalar(x + 0.3, x) == pytest.approx(0.3)

    def test_matches_direct_loop(self):
        rng = np.random.default_rng(3)
        a, e = rng.normal(size=12), rng.normal(size=12)
        got = mae_series(a, e)
        for n in range(1, 13):
            ref = np.mean(np.abs(a[:n] - e[:n]))
            assert got[n - 1] == pytest.approx(ref, abs=1e-14)

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            mae_series(np.zeros(3), np.zeros(4))


class TestDepthCompression:
    TABLE = [(1, 0.5), (5, 0.1), (10, 0.05), (40, 0.01), (80, 0.001)]

    def test_exact_table_entry(self):
        res = depth_compression(self.TABLE, 0.01, 2)
        assert res.depth_equivalent == pytest.approx(40.0)
        assert res.ratio == pytest.approx(20.0)
        assert res.flag == ""

    def test_interpolates_between_brackets(self):
        res = depth_compression(self.TABLE, 0.03, 2)
        assert 10 < res.depth_equivalent < 40

    def test_worse_than_table_flagged(self):
        res = depth_compression(self.TABLE, 0.9, 2)
        assert res.flag == "worse_than_table"
        assert res.ratio < 1

    def test_better_than_table_is_lower_bound(self):
        res = depth_compression(self.TABLE, 1e-5, 2)
        assert res.flag == "lower_bound"
        assert res.ratio == pytest.approx(40.0)

    def test_non_monotone_warns(self):
        with pytest.warns(UserWarning):
            depth_compression([(1, 0.1), (2, 0.2), (4, 0.01)], 0.05, 1)


class TestVqe:
    def test_free_case_cannot_improve(self):
        hub = build_hubbard_chain(4, U0)
        prep = hubbard_u0_ground_prep(hub, 4)
        e_free = u0_sector_ground_energy(4, U0, 2, 2)
        res = vqe_ground_state(hub, build_vha(hub, 2), prep, max_iter=100)
        assert res.energy <= e_free + 1e-8
        assert res.energy >= e_free - 1e-9

    def test_interacting_chain_reaches_sector_ground(self):
        hub = build_hubbard_chain(4, PRESETS["sr2cuo3"])
        prep = hubbard_u0_ground_prep(hub, 4)
        res = vqe_ground_state(hub, build_vha(hub, 5), prep, max_iter=300)
        exact = float(np.linalg.eigvalsh(sector_dense_hamiltonian(hub.total, sector_indices(4, 4, 0.0)))[0])
        assert res.energy - exact <= 1e-3 * 4
        assert res.energy >= exact - 1e-9


class TestUnits:
    def test_round_trip(self):
        t = np.linspace(0, 30, 7)
        assert np.allclose(times_from_fs(times_to_fs(t)), t, rtol=1e-15, atol=0)

    def test_stated_conversion(self):
        assert times_to_fs(np.array([1.0]))[0] == pytest.approx(EV_TIME_FS)

    def test_time_series_validation(self):
        with pytest.raises(ValueError):
            TimeSeries(np.array([0.0, 0.1, 0.15]), np.zeros(3))
        with pytest.raises(ValueError):
            TimeSeries(np.array([0.0, 0.1]), np.zeros(3))
