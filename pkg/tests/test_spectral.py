import numpy as np
import pytest

from microcav import constants, spectral, synth
from microcav.fitting import DegenerateFitWarning
from microcav.spectral import SpectrumTrace


class TestSpectrumTrace:
    def test_monotonic_axis_required(self):
        with pytest.raises(ValueError):
            SpectrumTrace(np.array([1.0, 3.0, 2.0]), np.zeros(3))

    def test_finite_counts_required(self):
        with pytest.raises(ValueError):
            SpectrumTrace(np.arange(3.0), np.array([1.0, np.nan, 2.0]))


class TestLorentzian:
    def test_noiseless_round_trip(self):
        x = np.linspace(720, 760, 300)
        y = spectral.lorentzian(x, 738.7, 5.0, 1000.0, 50.0)
        fit = spectral.fit_lorentzian(SpectrumTrace(x, y))
        assert fit["center"] == pytest.approx(738.7, abs=1e-6)
        assert fit["fwhm"] == pytest.approx(5.0, rel=1e-6)

    def test_room_temperature_peak_recovery(self, rng):
        tr = synth.synth_lorentzian_spectrum(seed=4)
        fit = spectral.fit_lorentzian(tr)
        assert fit["center"] == pytest.approx(738.7, abs=0.1)
        assert not fit.diagnostics.get("no_peak", False)

    def test_symmetric_trace_center_exact(self):
        x = np.linspace(-10, 10, 401)  # symmetric grid around 0
        y = spectral.lorentzian(x, 0.0, 3.0, 100.0, 5.0)
        fit = spectral.fit_lorentzian(SpectrumTrace(x, y))
        assert abs(fit["center"]) < 1e-9

    def test_flat_trace_flags_no_peak(self, rng):
        x = np.linspace(730, 740, 200)
        y = 100.0 + rng.normal(0, 1.0, x.size)
        fit = spectral.fit_lorentzian(SpectrumTrace(x, y))
        assert fit.diagnostics.get("no_peak", False)

    def test_axis_shift_equivariance(self):
        x = np.linspace(730, 745, 350)
        y = spectral.lorentzian(x, 736.5, 2.0, 500.0, 10.0)
        fit0 = spectral.fit_lorentzian(SpectrumTrace(x, y))
        shift = 3.25
        fit1 = spectral.fit_lorentzian(SpectrumTrace(x + shift, y))
        assert fit1["center"] - fit0["center"] == pytest.approx(shift, abs=1e-6)
        assert fit1["fwhm"] == pytest.approx(fit0["fwhm"], rel=1e-6)

    def test_doublet_axis_shift_equivariance(self):
        x = np.linspace(734, 740, 500)
        y = spectral.double_lorentzian(x, 736.57, 737.25, 0.45, 900.0, 1100.0, 30.0)
        fit0 = spectral.fit_double_lorentzian_equal_width(SpectrumTrace(x, y))
        shift = -2.5
        fit1 = spectral.fit_double_lorentzian_equal_width(SpectrumTrace(x + shift, y))
        assert fit1["c1"] - fit0["c1"] == pytest.approx(shift, abs=1e-6)
        assert fit1["c2"] - fit0["c2"] == pytest.approx(shift, abs=1e-6)
        assert fit1["fwhm"] == pytest.approx(fit0["fwhm"], rel=1e-6)


class TestDoublet:
    def test_splitting_recovery(self):
        tr = synth.synth_doublet_spectrum(seed=2)
        fit = spectral.fit_double_lorentzian_equal_width(tr)
        split = spectral.doublet_splitting_ghz(fit)
        true_split = constants.splitting_ghz(constants.SIV_ZPL_AB_NM, constants.SIV_ZPL_CD_NM)
        assert split == pytest.approx(true_split, rel=0.05)
        assert fit["c1"] < fit["c2"]

    def test_quoted_splitting_value(self):
        # the fixture doublet itself realizes the quoted 370 GHz splitting
        true_split = constants.splitting_ghz(736.57, 737.25)
        assert true_split == pytest.approx(370.0, abs=10.0)

    def test_symmetric_doublet(self):
        x = np.linspace(-5, 5, 800)
        y = spectral.double_lorentzian(x, -1.0, 1.0, 0.5, 200.0, 200.0, 0.0)
        fit = spectral.fit_double_lorentzian_equal_width(SpectrumTrace(x, y))
        assert fit["c1"] == pytest.approx(-1.0, abs=1e-6)
        assert fit["c2"] == pytest.approx(1.0, abs=1e-6)
        assert 0.5 * (fit["c1"] + fit["c2"]) == pytest.approx(0.0, abs=1e-6)

    def test_center_ordering_convention(self, rng):
        # ordering holds regardless of which peak is taller
        for seed in range(3):
            tr = synth.synth_doublet_spectrum(a1=1500.0, a2=400.0, seed=seed)
            fit = spectral.fit_double_lorentzian_equal_width(tr)
            assert fit["c1"] < fit["c2"]

    def test_single_peak_warns_degenerate(self):
        x = np.linspace(730, 745, 400)
        y = spectral.lorentzian(x, 736.9, 1.2, 800.0, 20.0)
        with pytest.warns(DegenerateFitWarning):
            fit = spectral.fit_double_lorentzian_equal_width(SpectrumTrace(x, y))
        assert fit.diagnostics.get("degenerate", False)


class TestCubicLaw:
    def test_intercept_recovery(self):
        series = synth.synth_temperature_series(seed=6)
        fit = spectral.fit_cubic_temperature(series)
        assert fit["value_at_0"] == pytest.approx(736.86, abs=0.03)

    def test_constant_data(self, rng):
        t = np.array([10.0, 50.0, 100.0, 200.0])
        v = np.full(4, 736.9)
        fit = spectral.fit_cubic_temperature(np.column_stack([t, v]))
        assert fit["value_at_0"] == pytest.approx(736.9, abs=1e-9)
        assert abs(fit["cubic_coeff"]) < 1e-12

    def test_linewidth_series_round_trip(self, rng):
        # same machinery fits a linewidth-vs-temperature series (positive cubic)
        t = np.array([4.0, 40.0, 80.0, 120.0, 200.0, 300.0])
        truth_w0, truth_c = 310.0, 4.1e-4  # GHz and GHz/K^3
        w = truth_w0 + truth_c * t**3 + rng.normal(0, 3.0, t.size)
        fit = spectral.fit_cubic_temperature(np.column_stack([t, w]))
        assert fit["value_at_0"] == pytest.approx(truth_w0, abs=15.0)
        assert fit["cubic_coeff"] == pytest.approx(truth_c, rel=0.15)
        assert fit["cubic_coeff"] > 0

    def test_equal_temperatures_rejected(self):
        with pytest.raises(ValueError):
            spectral.fit_cubic_temperature([[10.0, 1.0], [10.0, 2.0], [10.0, 3.0]])


class TestJacobians:
    def test_analytic_jacobians_match_central_differences(self, rng):
        x = np.linspace(730, 745, 120)
        # random points jittered on the scale of each parameter's feature
        # (a +-10% jitter on a wavelength-like center would leave the grid)
        cases = [
            (spectral.lorentzian, spectral.lorentzian_jac,
             [737.0, 2.0, 800.0, 20.0], [2.0, 0.5, 100.0, 10.0]),
            (spectral.double_lorentzian, spectral.double_lorentzian_jac,
             [736.5, 737.3, 0.5, 700.0, 900.0, 10.0], [0.3, 0.3, 0.1, 100.0, 100.0, 5.0]),
            (spectral.cubic_law, spectral.cubic_law_jac, [736.9, 7e-8], [0.5, 2e-8]),
        ]
        for f, jac, p0, jitter in cases:
            for _ in range(5):
                p = np.asarray(p0) + np.asarray(jitter) * rng.uniform(-1, 1, len(p0))
                j_a = jac(x, *p)
                j_n = np.empty_like(j_a)
                for i in range(len(p)):
                    # feature-scaled step: balances truncation (narrow lines
                    # have large third derivatives) against roundoff
                    h = max(jitter[i] * 1e-5, abs(p[i]) * 1e-8)
                    up, dn = p.copy(), p.copy()
                    up[i] += h
                    dn[i] -= h
                    j_n[:, i] = (f(x, *up) - f(x, *dn)) / (2 * h)
                scale = np.max(np.abs(j_a), axis=0) + 1e-30
                assert np.max(np.abs(j_a - j_n) / scale) < 1e-6
