import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsesound.sampling import (
    FrequencyGrid, custom_grid, gen_cfs, gen_cfs_auto, gen_nfs, gen_nfs_auto, gen_pfs, gen_ufs,
    load_scheme, local_step, local_steps, make_grid, predicted_udr, save_scheme, scheme_from_dict,
    scheme_to_dict)

from oracles import cfs_index_set, nfs_index_set


class TestUfs:
    def test_arithmetic_progression(self):
        g = gen_ufs(380e9, 10e9, 11)
        assert g.params["df"] == pytest.approx(1e9)
        np.testing.assert_allclose(g.frequencies, 380e9 + 1e9 * np.arange(11), rtol=0, atol=1e-3)

    def test_large_grid_udr(self):
        assert predicted_udr(gen_ufs(100e9, 60e9, 12001)) == pytest.approx(200e-9)

    def test_two_point(self):
        g = gen_ufs(0.0, 5e9, 2)
        assert list(g.frequencies) == [0.0, 5e9]
        assert g.params["df"] == 5e9

    @pytest.mark.parametrize("k,bw", [(1, 1e9), (0, 1e9), (5, 0.0), (5, -1e9)])
    def test_rejects(self, k, bw):
        with pytest.raises(ValueError):
            gen_ufs(1e9, bw, k)

    def test_udr_is_inverse_step(self):
        g = gen_ufs(300e9, 7e9, 29)
        assert predicted_udr(g) == 1.0 / g.params["df"]


class TestCfs:
    def test_hand_enumeration(self):
        B = 6e9
        g = gen_cfs(0.0, B, 2, 3)
        np.testing.assert_allclose(g.frequencies, [0, B / 3, B / 2, 2 * B / 3])
        assert g.params["unique_k"] == 4
        assert g.params["df_base"] == pytest.approx(B / 6)

    def test_equal_factors_rejected(self):
        with pytest.raises(ValueError):
            gen_cfs(0.0, 1e9, 4, 4)

    def test_non_coprime_rejected(self):
        with pytest.raises(ValueError, match="coprime"):
            gen_cfs(0.0, 1e9, 4, 6)

    def test_auto_k35(self):
        g = gen_cfs_auto(375e9, 10e9, 35)
        assert (g.params["m"], g.params["n"]) == (17, 18)
        assert predicted_udr(g) == pytest.approx((35 ** 2 - 1) / (4 * 10e9))
        assert predicted_udr(g) == pytest.approx(30.6e-9)
        # gain over UFS with the same budget is about K/4
        gain = predicted_udr(g) / predicted_udr(gen_ufs(375e9, 10e9, 35))
        assert gain == pytest.approx(35 / 4, rel=0.03)

    def test_auto_smallest(self):
        g = gen_cfs_auto(0.0, 1e9, 5)
        assert (g.params["m"], g.params["n"]) == (2, 3)

    def test_auto_small_rejected(self):
        with pytest.raises(ValueError):
            gen_cfs_auto(0.0, 1e9, 4)

    def test_auto_even_split_recorded(self):
        g = gen_cfs_auto(0.0, 1e9, 120)
        assert (g.params["m"], g.params["n"]) == (59, 61)
        assert g.params["split_rule"] == "even-spread"
        g = gen_cfs_auto(0.0, 1e9, 10)   # (4, 6) not coprime -> (5, 6)
        assert (g.params["m"], g.params["n"]) == (5, 6)
        assert g.params["split_rule"] == "even-consecutive"

    def test_budget_near_220_for_200ns(self):
        g = gen_cfs(0.0, 60e9, 109, 111)
        assert g.params["nominal_k"] == 220
        assert predicted_udr(g) == pytest.approx(109 * 111 / 60e9)
        assert predicted_udr(g) > 200e-9

    @given(st.integers(2, 40), st.integers(3, 41))
    @settings(max_examples=60, deadline=None)
    def test_matches_set_oracle(self, m, n):
        if not m < n or math.gcd(m, n) != 1:
            return
        B = 1e9
        g = gen_cfs(0.0, B, m, n)
        ref = [float(x) * B for x in cfs_index_set(m, n)]
        np.testing.assert_allclose(g.frequencies, ref, rtol=1e-12, atol=1e-3)
        assert g.k_count == m + n - 1 == g.params["unique_k"]


class TestNfs:
    def test_hand_enumeration(self):
        B = 4e9
        g = gen_nfs(0.0, B, 2, 2)
        np.testing.assert_allclose(g.frequencies, [B / 4, B / 2, B])

    def test_udr(self):
        assert predicted_udr(gen_nfs(0.0, 10e9, 10, 10)) == pytest.approx(10e-9)

    def test_auto_split(self):
        g = gen_nfs_auto(0.0, 10e9, 36)
        assert (g.params["n1"], g.params["n2"]) == (18, 18)
        assert predicted_udr(g) == pytest.approx(36 ** 2 / 4 / 10e9)

    @pytest.mark.parametrize("n1,n2", [(1, 5), (5, 1)])
    def test_rejects(self, n1, n2):
        with pytest.raises(ValueError):
            gen_nfs(0.0, 1e9, n1, n2)

    @given(st.integers(2, 40), st.integers(2, 40))
    @settings(max_examples=60, deadline=None)
    def test_matches_set_oracle(self, n1, n2):
        B = 1e9
        g = gen_nfs(5e9, B, n1, n2)
        ref = [5e9 + float(x) * B for x in nfs_index_set(n1, n2)]
        np.testing.assert_allclose(g.frequencies, ref, rtol=1e-13)
        assert g.k_count == n1 + n2 - 1


class TestPfs:
    def test_coefficients(self):
        g = gen_pfs(375e9, 10e9, 35)
        assert g.params["a"] == pytest.approx(3 * 10e9 / 34 ** 3)
        assert g.params["a"] == pytest.approx(7.6328e5, rel=1e-4)
        assert g.params["kappa"] == pytest.approx(2.20588e8, rel=1e-5)

    @given(st.floats(0, 1e12), st.floats(1e6, 1e11), st.integers(4, 2000))
    @settings(max_examples=80, deadline=None)
    def test_endpoints_exact(self, f0, B, k):
        g = gen_pfs(f0, B, k)
        assert g.frequencies[0] == f0
        assert g.frequencies[-1] == f0 + B
        assert np.all(np.diff(g.frequencies) > 0)

    def test_local_step_mid_and_edge(self):
        g = gen_pfs(375e9, 10e9, 35)
        kappa = g.params["kappa"]
        assert local_step(g, 18) == pytest.approx(kappa)
        assert local_step(g, 1) == pytest.approx(2 * kappa)
        assert local_step(g, 35) == pytest.approx(2 * kappa)

    @pytest.mark.parametrize("k", [20, 35, 50, 100, 251])
    def test_analytic_step_ratio_is_two(self, k):
        s = local_steps(gen_pfs(375e9, 10e9, k))
        # even K has no integer midpoint; the minimum sampled f' is kappa + a/4
        tol = 1e-12 if k % 2 else 1.01 / (k - 1) ** 2
        assert s.max() / s.min() == pytest.approx(2.0, rel=tol)

    @pytest.mark.parametrize("k", [10, 20, 35, 50, 100, 251])
    def test_discrete_step_ratio(self, k):
        # Consecutive differences average f' over one index, so the ratio
        # approaches 2 from below with an O(1/K) deficit.
        d = np.diff(gen_pfs(375e9, 10e9, k).frequencies)
        ratio = d.max() / d.min()
        assert 2.0 - 2.1 / (k - 1) <= ratio < 2.0
        if k >= 21:
            assert 1.9 <= ratio <= 2.1
        if k >= 51:
            assert d.min() / d.max() == pytest.approx(0.5, rel=0.02)

    @given(st.integers(4, 500))
    @settings(max_examples=50, deadline=None)
    def test_midpoint_symmetry(self, k):
        g = gen_pfs(370e9, 20e9, k)
        f = g.frequencies
        np.testing.assert_allclose(f + f[::-1], 2 * 370e9 + 20e9, rtol=1e-6)

    def test_rejects_small_k(self):
        with pytest.raises(ValueError):
            gen_pfs(0.0, 1e9, 3)

    def test_unbounded_udr(self):
        assert predicted_udr(gen_pfs(0.0, 1e9, 20)) == math.inf


class TestLocalStep:
    def test_ufs_constant(self):
        g = gen_ufs(1e9, 1e9, 11)
        np.testing.assert_allclose(local_steps(g), 1e8, rtol=1e-9)

    @pytest.mark.parametrize("idx", [0, 12])
    def test_out_of_range(self, idx):
        with pytest.raises(IndexError):
            local_step(gen_ufs(1e9, 1e9, 11), idx)

    def test_one_sided_at_ends(self):
        g = custom_grid([0.0, 1.0, 3.0, 7.0])
        np.testing.assert_allclose(local_steps(g), [1.0, 1.5, 3.0, 4.0])


class TestGridAndFiles:
    def test_custom_unknown_udr(self):
        assert predicted_udr(custom_grid([1.0, 2.0, 5.0])) is None

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            FrequencyGrid(np.array([1.0, 1.0, 2.0]), "custom", 1.0, 1.0)

    def test_rejects_unknown_scheme(self):
        with pytest.raises(ValueError):
            FrequencyGrid(np.array([1.0, 2.0]), "xyz", 1.0, 1.0)

    def test_frequencies_read_only(self):
        g = gen_ufs(0.0, 1.0, 3)
        with pytest.raises(ValueError):
            g.frequencies[0] = 5.0

    @pytest.mark.parametrize("scheme,k", [("ufs", 33), ("cfs", 35), ("nfs", 40), ("pfs", 101)])
    def test_round_trip_bit_identical(self, tmp_path, scheme, k):
        g = make_grid(scheme, 370.123e9, 19.7e9, k)
        path = save_scheme(g, tmp_path / "s.json")
        back = load_scheme(path)
        assert back.frequencies.tobytes() == g.frequencies.tobytes()
        assert back.scheme == scheme
        assert predicted_udr(back) == predicted_udr(g)

    def test_scheme_record_layout(self):
        d = scheme_to_dict(gen_pfs(1e9, 1e9, 5))
        assert set(d) == {"scheme", "f_start_hz", "bandwidth_hz", "k", "frequencies_hz", "params"}

    def test_k_mismatch_rejected(self):
        d = scheme_to_dict(gen_pfs(1e9, 1e9, 5))
        d["k"] = 6
        with pytest.raises(ValueError):
            scheme_from_dict(d)

    def test_endpoint_conventions(self):
        B = 10e9
        cfs = gen_cfs_auto(0.0, B, 35)
        assert cfs.frequencies[0] == 0.0
        # the coprime union ends m * df_base short of the band edge
        assert B - cfs.frequencies[-1] == pytest.approx(cfs.params["m"] * cfs.params["df_base"])
        nfs = gen_nfs_auto(0.0, B, 35)
        assert nfs.frequencies[0] == pytest.approx(nfs.params["df_base"])
        assert nfs.frequencies[-1] == B

    def test_make_grid_unknown(self):
        with pytest.raises(ValueError):
            make_grid("zzz", 0.0, 1.0, 5)

    def test_fraction_oracle_sanity(self):
        assert cfs_index_set(2, 3) == [Fraction(0), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3)]
