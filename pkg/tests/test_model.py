import numpy as np
import pytest

from lsvqc.model import (
    PRESETS,
    HubbardParams,
    build_heisenberg,
    build_hubbard_chain,
    effective_one_body,
    jordan_wigner,
    load_model_config,
    make_window,
    restrict_hamiltonian,
    sector_dense_hamiltonian,
    sector_indices,
    u0_sector_ground_energy,
    window_sites,
)
from lsvqc.qsim import PauliString, PauliSum

U0_PARAMS = HubbardParams(t1=0.532, t2=0.0403, u=0.0, mu=0.159)


class TestHeisenberg:
    def test_bond_and_term_counts(self):
        h = build_heisenberg(4)
        assert [len(g.terms) for g in h.groups] == [6, 6]  # 4 bonds x 3 axes
        bonds = {t.support for g in h.groups for t in g.terms}
        assert len(bonds) == 4

    def test_ground_energy(self):
        h = build_heisenberg(4).total
        assert np.linalg.eigvalsh(h.dense())[0] == pytest.approx(-8.0, abs=1e-9)

    def test_l2_periodic_double_counts_the_bond(self):
        h = build_heisenberg(2)
        # both bond labels j=1 and j=2 hit the same pair, one per group
        assert [len(g.terms) for g in h.groups] == [3, 3]
        collected = h.total
        assert all(t.coefficient == pytest.approx(2.0) for t in collected.terms)

    def test_open_boundary(self):
        h = build_heisenberg(4, "open")
        bonds = {t.support for g in h.groups for t in g.terms}
        assert (3, 0) not in bonds and (0, 3) not in bonds
        assert len(bonds) == 3

    def test_groups_commute_internally(self):
        h = build_heisenberg(8)
        assert all(g.check_commuting() for g in h.groups)


class TestHubbardChain:
    def test_preset_coefficients(self):
        h = build_hubbard_chain(8, PRESETS["sr2cuo3"])
        coeffs = [g.coefficient for g in h.groups]
        assert coeffs == pytest.approx([-0.266, -0.266, -0.02015, -0.02015, 0.2635, -0.184])

    def test_t2_zero_empties_next_nearest_groups(self):
        h = build_hubbard_chain(4, HubbardParams(1.0, 0.0, 2.0, 0.5))
        assert len(h.groups[2].terms) == 0 and len(h.groups[3].terms) == 0

    def test_rejects_odd_l(self):
        with pytest.raises(ValueError):
            build_hubbard_chain(5, PRESETS["sr2cuo3"])

    def test_groups_commute_internally(self):
        h = build_hubbard_chain(8, PRESETS["sr2cuo3"])
        assert all(g.check_commuting() for g in h.groups)

    def test_hermitian(self):
        h = build_hubbard_chain(4, PRESETS["sr2cuo3"]).total
        m = h.dense()
        assert np.max(np.abs(m - m.conj().T)) < 1e-12

    def test_conserves_number_and_spin(self):
        h = build_hubbard_chain(4, PRESETS["sr2cuo3"]).total.dense()
        n = 8
        num = np.zeros((1 << n, 1 << n))
        sz = np.zeros_like(num)
        for idx in range(1 << n):
            n_up = bin(idx & 0b1111).count("1")
            n_dn = bin(idx >> 4).count("1")
            num[idx, idx] = n_up + n_dn
            sz[idx, idx] = 0.5 * (n_up - n_dn)
        assert np.max(np.abs(h @ num - num @ h)) < 1e-12
        assert np.max(np.abs(h @ sz - sz @ h)) < 1e-12

    def test_u0_sector_ground_matches_one_body(self):
        hub = build_hubbard_chain(4, U0_PARAMS)
        sec = sector_indices(4, 4, 0.0)
        e_sector = float(np.linalg.eigvalsh(sector_dense_hamiltonian(hub.total, sec))[0])
        e_free = u0_sector_ground_energy(4, U0_PARAMS, 2, 2)
        assert e_sector == pytest.approx(e_free, abs=1e-10)

    def test_boundary_twist_matters_in_even_sectors(self):
        # the untwisted periodic one-body matrix gets the sector energy wrong
        naive = np.zeros((4, 4))
        for i in range(4):
            for d, t in ((1, U0_PARAMS.t1), (2, U0_PARAMS.t2)):
                a, b = i, (i + d) % 4
                naive[a, b] += -t
                naive[b, a] += -t
        naive += np.diag(np.full(4, -U0_PARAMS.mu))
        e_naive = 2 * np.sum(np.sort(np.linalg.eigvalsh(naive))[:2]) + 4 * U0_PARAMS.mu
        e_free = u0_sector_ground_energy(4, U0_PARAMS, 2, 2)
        assert abs(e_naive - e_free) > 1e-2

    def test_effective_one_body_parity(self):
        even = effective_one_body(6, U0_PARAMS, 2)
        odd = effective_one_body(6, U0_PARAMS, 3)
        assert even[0, 5] == pytest.approx(U0_PARAMS.t1)  # twisted wrap
        assert odd[0, 5] == pytest.approx(-U0_PARAMS.t1)  # plain wrap


class TestJordanWigner:
    def test_mode_zero_has_no_string(self):
        op = jordan_wigner(0, 4, "annihilate")
        assert {t.axes for t in op.terms} == {"XIII", "YIII"}
        coeffs = {t.axes: t.coefficient for t in op.terms}
        assert coeffs["XIII"] == pytest.approx(0.5)
        assert coeffs["YIII"] == pytest.approx(0.5j)

    def test_mode_two_string(self):
        op = jordan_wigner(2, 4, "annihilate")
        assert {t.axes for t in op.terms} == {"ZZXI", "ZZYI"}

    def test_anticommutators(self):
        n = 4
        eye = np.eye(1 << n)
        cs = [jordan_wigner(a, n, "annihilate").dense() for a in range(n)]
        cds = [jordan_wigner(a, n, "create").dense() for a in range(n)]
        for a in range(n):
            assert np.max(np.abs(cs[a] @ cds[a] + cds[a] @ cs[a] - eye)) < 1e-12
            for b in range(n):
                if a != b:
                    assert np.max(np.abs(cs[a] @ cds[b] + cds[b] @ cs[a])) < 1e-12
                assert np.max(np.abs(cs[a] @ cs[b] + cs[b] @ cs[a])) < 1e-12

    def test_create_is_dagger_of_annihilate(self):
        c = jordan_wigner(3, 5, "annihilate").dense()
        cd = jordan_wigner(3, 5, "create").dense()
        assert np.max(np.abs(c.conj().T - cd)) < 1e-14

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            jordan_wigner(4, 4, "annihilate")


class TestSectors:
    def test_single_state(self):
        sec = sector_indices(1, 1, 0.5)
        assert sec.dim == 1 and sec.indices[0] == 1

    def test_half_filled_count(self):
        assert sector_indices(4, 4, 0.0).dim == 36

    def test_partition(self):
        L = 3
        total = 0
        for n_e in range(2 * L + 1):
            for two_sz in range(-n_e, n_e + 1):
                if (n_e + two_sz) % 2 == 0:
                    total += sector_indices(L, n_e, two_sz / 2).dim
        assert total == 1 << (2 * L)

    def test_empty_sector_flagged(self):
        assert sector_indices(2, 1, 1.5).dim == 0

    def test_sector_hamiltonian_blocks(self):
        hub = build_hubbard_chain(4, PRESETS["sr2cuo3"])
        sec = sector_indices(4, 4, 0.0)
        m = sector_dense_hamiltonian(hub.total, sec)
        assert m.shape == (36, 36)
        assert np.max(np.abs(m - m.conj().T)) < 1e-12

    def test_sector_hamiltonian_rejects_coupling_out(self):
        bad = PauliSum(4, [PauliString.from_ops(4, {0: "X"})])
        sec = sector_indices(2, 2, 0.0)
        with pytest.raises(ValueError):
            sector_dense_hamiltonian(bad, sec)


class TestRestriction:
    def test_drop_only_excluded_site_on_open_chain(self):
        h = build_heisenberg(8, "open")
        r = restrict_hamiltonian(h, 4, 7)  # radius 3: sites 1..7, drops site 0
        dropped = {t.support for g in h.groups for t in g.terms} - {
            t.support for g in r.groups for t in g.terms
        }
        assert dropped == {(0, 1)}

    def test_window_enumeration_oracle(self):
        # independent enumeration of the distance rule on the 8-site ring
        h = build_heisenberg(8)
        r = restrict_hamiltonian(h, 0, 4)
        window = {s % 8 for s in range(-2, 3)}
        assert set(window_sites(8, 0, 4)) == window
        expected = set()
        for j in range(8):
            bond = {j, (j + 1) % 8}
            if bond <= window:
                expected.add(tuple(sorted(bond)))
        got = {tuple(sorted(t.support)) for g in r.groups for t in g.terms}
        assert got == expected
        assert len(expected) == 4

    def test_idempotent_under_shrinking_windows(self):
        h = build_heisenberg(10)
        once = restrict_hamiltonian(h, 3, 4)
        twice = restrict_hamiltonian(restrict_hamiltonian(h, 3, 6), 3, 4)
        a = sorted(t.axes for g in once.groups for t in g.terms)
        b = sorted(t.axes for g in twice.groups for t in g.terms)
        assert a == b

    def test_terms_are_subset_with_same_coefficients(self):
        h = build_hubbard_chain(8, PRESETS["sr2cuo3"])
        r = restrict_hamiltonian(h, 2, 3)
        for g_full, g_res in zip(h.groups, r.groups):
            assert g_res.coefficient == g_full.coefficient
            full_axes = {t.axes for t in g_full.terms}
            assert all(t.axes in full_axes for t in g_res.terms)

    def test_rejects_size_not_smaller(self):
        with pytest.raises(ValueError):
            restrict_hamiltonian(build_heisenberg(6), 0, 6)

    def test_hubbard_window_mirrors_spin_blocks(self):
        h = build_hubbard_chain(8, PRESETS["sr2cuo3"])
        w = make_window(h, 2, 3)
        assert set(w.sites) == {1, 2, 3}
        # up qubits 1,2,3 and down qubits 12,13,14 (2L-1-i)
        assert set(w.qubit_map) == {1, 2, 3, 12, 13, 14}
        assert w.qubit_map[2] == 1 and w.qubit_map[13] == 2 * 3 - 1 - 1


class TestConfig:
    def test_heisenberg_config(self):
        h = load_model_config({"model": "heisenberg", "L": 6, "boundary": "open"})
        assert h.kind == "heisenberg" and h.lattice.boundary == "open"

    def test_hubbard_preset(self):
        h = load_model_config({"model": "hubbard_chain", "L": 4, "preset": "sr2cuo3"})
        assert h.params == PRESETS["sr2cuo3"]

    def test_hubbard_explicit(self):
        h = load_model_config({"model": "hubbard_chain", "L": 4, "t1": 1.0, "t2": 0.0, "U": 4.0, "mu": 2.0})
        assert h.params.u == 4.0

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            load_model_config({"model": "kagome", "L": 4})
