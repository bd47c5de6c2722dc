import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsesound.absorption import AbsorptionModel, default_synthetic_model
from sparsesound.channel import (
    AntennaPattern, MeasurementFormatError, MeasurementSet, PathParams, SoundingModel,
    angular_separation, antenna_gain, azimuth_ring, read_measurement, steering_vector,
    synthesize, table_one_paths, write_measurement)
from sparsesound.sampling import gen_pfs, gen_ufs, save_scheme

GRID = gen_pfs(370e9, 20e9, 40)


class TestAntenna:
    def test_isotropic(self):
        assert antenna_gain(AntennaPattern(), (1.0, 0.3), (4.0, 2.0)) == 1.0

    def test_boresight(self):
        p = AntennaPattern("gaussian_horn", math.radians(10), 3.0)
        assert antenna_gain(p, (0.5, 1.2), (0.5, 1.2)) == pytest.approx(3.0)

    def test_half_power_at_half_beamwidth(self):
        hpbw = math.radians(12)
        p = AntennaPattern("gaussian_horn", hpbw)
        g = antenna_gain(p, (hpbw / 2, math.pi / 2), (0.0, math.pi / 2))
        assert 20 * math.log10(g) == pytest.approx(-3.0103, abs=1e-3)

    @given(st.floats(0, 2 * math.pi), st.floats(0, math.pi), st.floats(0, 2 * math.pi),
           st.floats(0, math.pi))
    @settings(max_examples=100, deadline=None)
    def test_gain_bounded(self, a1, e1, a2, e2):
        p = AntennaPattern("gaussian_horn", 0.3, 2.0)
        assert 0.0 <= antenna_gain(p, (a1, e1), (a2, e2)) <= 2.0

    def test_great_circle(self):
        assert angular_separation((0.0, math.pi / 2), (math.pi / 2, math.pi / 2)) == pytest.approx(
            math.pi / 2)
        assert angular_separation((1.0, 0.0), (2.0, 0.0)) == pytest.approx(0.0, abs=1e-7)

    def test_validation(self):
        with pytest.raises(ValueError):
            AntennaPattern("gaussian_horn")
        with pytest.raises(ValueError):
            AntennaPattern("dipole")


class TestPathParams:
    def test_ranges(self):
        with pytest.raises(ValueError):
            PathParams(1.0, -1e-9)
        with pytest.raises(ValueError):
            PathParams(1.0, 1e-9, 0.0, 4.0)
        assert PathParams(1, 0, 7.0).azimuth == pytest.approx(7.0 - 2 * math.pi)

    def test_table_one(self):
        paths = table_one_paths()
        assert [p.delay for p in paths] == pytest.approx([5e-9, 50e-9, 100e-9, 150e-9, 200e-9])
        assert [abs(p.amplitude) for p in paths] == pytest.approx([1, 0.3, 0.1, 0.07, 0.03])
        assert np.angle(paths[1].amplitude) == pytest.approx(math.pi / 4)
        assert np.angle(paths[4].amplitude) == pytest.approx(-math.pi / 3)


class TestSteering:
    def test_zero_delay_all_ones(self):
        m = SoundingModel(GRID)
        np.testing.assert_array_equal(m.steering(0.0), np.ones(GRID.k_count))

    def test_unit_modulus_phase(self):
        m = SoundingModel(GRID)
        a = m.steering(37e-9)
        np.testing.assert_allclose(np.abs(a), 1.0, rtol=1e-15)
        np.testing.assert_allclose(a, np.exp(-2j * np.pi * GRID.frequencies * 37e-9), rtol=1e-15)

    def test_absorption_magnitude(self):
        ab = default_synthetic_model()
        m = SoundingModel(GRID, absorption=ab)
        a = m.steering(120e-9)
        np.testing.assert_allclose(np.abs(a), ab.gain(GRID.frequencies, 120e-9), rtol=1e-13)

    def test_ordering_pointing_major(self):
        pts = azimuth_ring(4)
        pat = AntennaPattern("gaussian_horn", math.radians(60))
        m = SoundingModel(GRID, pts, pat)
        a = m.steering(10e-9, 0.3, math.pi / 2)
        K = GRID.k_count
        for mi in range(4):
            g = antenna_gain(pat, (0.3, math.pi / 2), tuple(pts[mi]))
            for k in (0, 7, K - 1):
                expected = g * np.exp(-2j * np.pi * GRID.frequencies[k] * 10e-9)
                assert a[mi * K + k] == pytest.approx(expected, rel=1e-13)

    def test_functional_form(self):
        a = steering_vector(GRID, [[0, math.pi / 2]], AntennaPattern(), AbsorptionModel.none(),
                            5e-9, 0.0, math.pi / 2)
        assert a.shape == (GRID.k_count,)

    def test_negative_delay(self):
        with pytest.raises(ValueError):
            SoundingModel(GRID).steering(-1e-12)


class TestSynthesize:
    def test_single_noiseless(self):
        m = SoundingModel(GRID)
        alpha = 0.4 - 0.2j
        y = synthesize(m, [PathParams(alpha, 20e-9)], None).samples
        np.testing.assert_allclose(y, alpha * np.exp(-2j * np.pi * GRID.frequencies * 20e-9))

    def test_table_one_noise_variance(self):
        m = SoundingModel(gen_pfs(370e9, 20e9, 100))
        ms = synthesize(m, table_one_paths(), 50.0, seed=3)
        assert ms.noise_variance == pytest.approx(1e-5)

    def test_determinism(self):
        m = SoundingModel(GRID)
        a = synthesize(m, table_one_paths(), 20.0, seed=11).samples
        b = synthesize(m, table_one_paths(), 20.0, seed=11).samples
        assert a.tobytes() == b.tobytes()
        c = synthesize(m, table_one_paths(), 20.0, seed=12).samples
        assert not np.array_equal(a, c)

    def test_linearity(self):
        m = SoundingModel(GRID, azimuth_ring(3), AntennaPattern("gaussian_horn", 1.0),
                          default_synthetic_model())
        A = [PathParams(1.0, 10e-9, 0.2), PathParams(0.5j, 60e-9, 2.0)]
        Bp = [PathParams(-0.3, 140e-9, 4.0)]
        y_ab = synthesize(m, A + Bp, None).samples
        y_a = synthesize(m, A, None).samples
        y_b = synthesize(m, Bp, None).samples
        np.testing.assert_allclose(y_ab, y_a + y_b, rtol=0, atol=1e-12)

    def test_single_path_magnitude(self):
        ab = default_synthetic_model()
        pat = AntennaPattern("gaussian_horn", 0.5, 1.7)
        pts = azimuth_ring(2)
        m = SoundingModel(GRID, pts, pat, ab)
        p = PathParams(0.8, 90e-9, 0.4)
        y = synthesize(m, [p], None).as_matrix()
        for mi in range(2):
            g = antenna_gain(pat, (0.4, math.pi / 2), tuple(pts[mi]))
            np.testing.assert_allclose(np.abs(y[mi]), 0.8 * ab.gain(GRID.frequencies, 90e-9) * g,
                                       rtol=1e-12)

    def test_noise_power(self):
        m = SoundingModel(gen_ufs(370e9, 20e9, 1000))
        paths = [PathParams(0.0, 0.0), PathParams(2.0, 0.0), PathParams(-2.0, 0.0)]
        # the paths cancel, leaving noise only; sigma^2 = 4 / 10
        noise = np.concatenate([synthesize(m, paths, 10.0, seed=s).samples for s in range(120)])
        assert np.mean(np.abs(noise) ** 2) == pytest.approx(0.4, rel=0.02)
        assert abs(np.mean(noise.real * noise.imag)) < 0.01          # circular

    def test_relative_snr_needs_paths(self):
        with pytest.raises(ValueError):
            synthesize(SoundingModel(GRID), [], 30.0)


class TestMeasurementFile:
    def _ms(self):
        m = SoundingModel(GRID, azimuth_ring(3), AntennaPattern("gaussian_horn", 1.0))
        return synthesize(m, table_one_paths(), 30.0, seed=5)

    def test_round_trip(self, tmp_path):
        ms = self._ms()
        path = write_measurement(ms, tmp_path / "m.csv", truth=table_one_paths())
        back, truth = read_measurement(path)
        assert back.k == ms.k and back.m == 3
        np.testing.assert_allclose(back.samples, ms.samples, rtol=1e-11, atol=1e-12)
        np.testing.assert_allclose(back.pointings, ms.pointings, atol=1e-12)
        assert back.noise_variance == ms.noise_variance
        assert [p.delay for p in truth] == pytest.approx([p.delay for p in table_one_paths()])

    def test_header_and_row_count(self, tmp_path):
        path = write_measurement(self._ms(), tmp_path / "m.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "pointing_az_deg,pointing_el_deg,f_hz,re,im"
        assert len(lines) == 1 + 3 * GRID.k_count

    def test_scheme_validation(self, tmp_path):
        ms = self._ms()
        path = write_measurement(ms, tmp_path / "m.csv")
        good = save_scheme(GRID, tmp_path / "s.json")
        back, _ = read_measurement(path, good)
        assert back.grid.scheme == "pfs"
        assert back.grid.frequencies.tobytes() == GRID.frequencies.tobytes()
        bad = save_scheme(gen_pfs(370e9, 20e9, 41), tmp_path / "bad.json")
        with pytest.raises(MeasurementFormatError):
            read_measurement(path, bad)

    def test_corrupt_row_reports_line(self, tmp_path):
        path = write_measurement(self._ms(), tmp_path / "m.csv")
        lines = path.read_text().splitlines()
        lines[6] = "0,90,3.7e11,oops,1"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(MeasurementFormatError, match=r"m\.csv:7") as exc:
            read_measurement(path)
        assert exc.value.row == 7

    def test_wrong_field_count(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("pointing_az_deg,pointing_el_deg,f_hz,re,im\n0,90,1e9,1\n")
        with pytest.raises(MeasurementFormatError, match=":2"):
            read_measurement(p)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("a,b,c,d,e\n")
        with pytest.raises(MeasurementFormatError, match="header"):
            read_measurement(p)

    def test_length_contract(self):
        with pytest.raises(ValueError):
            MeasurementSet(GRID, [[0, 0]], np.zeros(GRID.k_count + 1))
