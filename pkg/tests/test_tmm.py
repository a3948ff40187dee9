import numpy as np
import pytest

from microcav import tmm
from microcav import stack as st


def airy_slab(n0, n1, n2, d, wl):
    """Independent oracle: closed-form Airy etalon coefficients."""
    r01 = (n0 - n1) / (n0 + n1)
    r12 = (n1 - n2) / (n1 + n2)
    t01 = 2 * n0 / (n0 + n1)
    t12 = 2 * n1 / (n1 + n2)
    delta = 2 * np.pi * n1 * d / wl
    e2 = np.exp(2j * delta)
    r = (r01 + r12 * e2) / (1 + r01 * r12 * e2)
    t = t01 * t12 * np.exp(1j * delta) / (1 + r01 * r12 * e2)
    return r, t


class TestStackResponse:
    def test_airy_slab_powers(self, rng):
        for _ in range(200):
            n1 = rng.uniform(1.0, 3.5)
            d = rng.uniform(10, 5000)
            wl = rng.uniform(400, 1200)
            slab = st.LayerStack(st.AIR, (st.Layer(st.Material("x", n1), d),), st.AIR)
            resp = tmm.stack_response(slab, wl)
            r_a, t_a = airy_slab(1.0, n1, 1.0, d, wl)
            assert resp.R == pytest.approx(abs(r_a) ** 2, rel=1e-10, abs=1e-12)
            assert resp.T == pytest.approx(abs(t_a) ** 2, rel=1e-10)

    def test_airy_slab_complex_amplitudes(self, rng):
        # exp(+ikz) convention: phases must match the oracle, not just powers
        for _ in range(50):
            n1 = rng.uniform(1.0, 3.5)
            d = rng.uniform(10, 3000)
            wl = rng.uniform(500, 900)
            slab = st.LayerStack(st.AIR, (st.Layer(st.Material("x", n1), d),), st.AIR)
            resp = tmm.stack_response(slab, wl)
            r_a, t_a = airy_slab(1.0, n1, 1.0, d, wl)
            assert abs(resp.r - r_a) < 1e-12
            assert abs(resp.t - t_a) < 1e-12

    def test_energy_conservation_lossless(self, rng):
        for _ in range(100):
            n_layers = rng.integers(1, 9)
            layers = tuple(
                st.Layer(st.Material("m", rng.uniform(1.0, 3.2)), rng.uniform(20, 900))
                for _ in range(n_layers)
            )
            s = st.LayerStack(st.Material("a", rng.uniform(1, 2)), layers, st.Material("b", rng.uniform(1, 2)))
            resp = tmm.stack_response(s, rng.uniform(400, 1000))
            assert abs(resp.R + resp.T - 1.0) < 1e-9
            assert abs(resp.A) < 1e-9

    def test_reciprocity(self, rng):
        for _ in range(60):
            layers = tuple(
                st.Layer(st.Material("m", rng.uniform(1.0, 3.2)), rng.uniform(20, 900))
                for _ in range(rng.integers(2, 8))
            )
            s = st.LayerStack(st.Material("a", rng.uniform(1, 2)), layers, st.Material("b", rng.uniform(1, 2)))
            wl = rng.uniform(400, 1000)
            assert abs(tmm.stack_response(s, wl).T - tmm.stack_response(s.reversed(), wl).T) < 1e-9

    def test_scale_invariance(self, rng):
        for _ in range(40):
            n1, n2 = rng.uniform(1.2, 3.0, 2)
            d1, d2 = rng.uniform(50, 1500, 2)
            wl = rng.uniform(500, 900)
            k = rng.uniform(0.3, 4.0)
            s1 = st.LayerStack(st.AIR, (st.Layer(st.Material("a", n1), d1), st.Layer(st.Material("b", n2), d2)), st.AIR)
            s2 = st.LayerStack(st.AIR, (st.Layer(st.Material("a", n1), k * d1), st.Layer(st.Material("b", n2), k * d2)), st.AIR)
            r1 = tmm.stack_response(s1, wl)
            r2 = tmm.stack_response(s2, k * wl)
            assert r1.R == pytest.approx(r2.R, abs=1e-12)
            assert r1.T == pytest.approx(r2.T, abs=1e-12)

    def test_two_layer_vs_hand_composed_product(self):
        # manual characteristic-matrix composition as a second oracle
        wl, n1, d1, n2, d2 = 736.0, 2.417, 410.0, 1.46, 230.0
        def layer_m(n, d):
            delta = 2 * np.pi * n * d / wl
            return np.array([[np.cos(delta), -1j * np.sin(delta) / n],
                             [-1j * n * np.sin(delta), np.cos(delta)]])
        m = layer_m(n1, d1) @ layer_m(n2, d2)
        n0 = ns = 1.0
        denom = n0 * m[0, 0] + n0 * ns * m[0, 1] + m[1, 0] + ns * m[1, 1]
        r_hand = (n0 * m[0, 0] + n0 * ns * m[0, 1] - m[1, 0] - ns * m[1, 1]) / denom
        s = st.LayerStack(st.AIR, (st.Layer(st.Material("1", n1), d1), st.Layer(st.Material("2", n2), d2)), st.AIR)
        assert abs(tmm.stack_response(s, wl).r - r_hand) < 1e-14

    def test_wavelength_must_be_positive(self):
        s = st.LayerStack(st.AIR, (st.Layer(st.DIAMOND, 100.0),), st.AIR)
        with pytest.raises(ValueError):
            tmm.stack_response(s, 0.0)

    def test_fixture_mirror_transmission(self, fixture_mirror):
        resp = tmm.stack_response(fixture_mirror.as_stack(), 736.0)
        assert resp.T == pytest.approx(1480e-6, rel=0.10)
        assert resp.R == pytest.approx(1 - 1480e-6, abs=2e-4)
        # design-wavelength reflection carries phase pi (node at the surface)
        assert np.angle(resp.r) == pytest.approx(np.pi, abs=1e-9)

    def test_absorbing_layer(self):
        lossy = st.Material("lossy", 2.0, 0.05)
        s = st.LayerStack(st.AIR, (st.Layer(lossy, 500.0),), st.AIR)
        resp = tmm.stack_response(s, 736.0)
        assert resp.A > 0
        assert resp.R + resp.T + resp.A == pytest.approx(1.0, abs=1e-12)


class TestFieldProfile:
    def test_entry_field_is_one_plus_r(self):
        s = st.LayerStack(st.AIR, (st.Layer(st.DIAMOND, 1420.0), st.Layer(st.SILICA, 300.0)), st.AIR)
        r, _ = tmm.amplitude_coefficients(s, 737.0)
        assert abs(tmm.evaluate_field(s, 737.0, 0.0) - (1 + r)) < 1e-12

    def test_exit_field_is_t(self):
        s = st.LayerStack(st.AIR, (st.Layer(st.DIAMOND, 1420.0),), st.AIR)
        _, t = tmm.amplitude_coefficients(s, 737.0)
        assert abs(tmm.evaluate_field(s, 737.0, 1420.0) - t) < 1e-12

    def test_interface_continuity(self, membrane_assembly):
        s = st.flatten_assembly(membrane_assembly)
        assert tmm.interface_mismatch(s, 737.25) < 1e-9

    def test_profile_normalization_and_grid(self, membrane_assembly):
        s = st.flatten_assembly(membrane_assembly)
        prof = tmm.field_profile(s, 737.25, samples_per_layer=60)
        assert np.max(np.abs(prof.E)) == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(prof.z_nm) > 0)
        assert prof.z_nm[0] == 0.0
        assert prof.z_nm[-1] == pytest.approx(s.total_thickness_nm)

    def test_min_samples_rejected(self, membrane_assembly):
        s = st.flatten_assembly(membrane_assembly)
        with pytest.raises(ValueError):
            tmm.field_profile(s, 737.0, samples_per_layer=1)

    def test_antinode_spacing_in_empty_cavity(self, hard_assembly):
        from microcav.resonance import PhaseModel

        pm = PhaseModel(hard_assembly, 730, 745)
        wl, _ = pm.nearest_resonance(737.0, hard_assembly.gap_nm)
        s = st.flatten_assembly(hard_assembly.with_gap(hard_assembly.gap_nm))
        prof = tmm.field_profile(s, wl, samples_per_layer=40000)
        gap0, gap1 = st.gap_window_nm(hard_assembly)
        sel = (prof.z_nm > gap0 + 50) & (prof.z_nm < gap1 - 50)
        intensity = np.abs(prof.E[sel]) ** 2
        from scipy.signal import find_peaks

        peaks, _ = find_peaks(intensity)
        spacings = np.diff(prof.z_nm[sel][peaks])
        assert np.allclose(spacings, wl / 2, rtol=2e-3)

    def test_segment_lookup(self, membrane_assembly):
        s = st.flatten_assembly(membrane_assembly)
        prof = tmm.field_profile(s, 737.0, samples_per_layer=10)
        z0, z1 = prof.segment("diamond")
        assert z1 - z0 == pytest.approx(1420.0)
        with pytest.raises(KeyError):
            prof.segment("unobtainium")
