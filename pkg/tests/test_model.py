import numpy as np
import pytest
import scipy.linalg

from excitonflow.model import (BathParams, ExcitonSystem, MarkovRates,
                               build_fmo_system, gibbs_state, spectral_density)
from excitonflow.units import ANGFREQ_RAD_FS, KB_CM1_PER_K


def test_angfreq_constant():
    assert ANGFREQ_RAD_FS == pytest.approx(1.88365e-4, rel=1e-5)


def test_thermal_energy_at_300k():
    # 208.51 cm^-1 to four significant figures
    assert KB_CM1_PER_K * 300.0 == pytest.approx(208.51, abs=0.005)


class TestBuildFmoSystem:
    def test_tabulated_entries(self):
        h = build_fmo_system().h_cm1
        assert h[1, 1] == 12410.0
        assert h[1, 2] == -87.7
        assert h[4, 7] == -63.3
        assert h[6, 6] == 12630.0

    def test_hermitian_exactly(self):
        h = build_fmo_system().h_cm1
        assert np.max(np.abs(h - h.T)) == 0.0
        assert h[2, 1] == h[1, 2]

    def test_ground_and_rc_decoupled(self):
        h = build_fmo_system(e_rc_cm1=50.0).h_cm1
        assert np.all(h[0, 1:] == 0.0)
        assert np.all(h[1:, 0] == 0.0)
        assert np.all(h[8, :8] == 0.0)
        assert h[8, 8] == 50.0

    def test_level_shift_moves_trap_sites_only(self):
        h0 = build_fmo_system().h_cm1
        h = build_fmo_system(delta_e_cm1=-100.0).h_cm1
        assert h[3, 3] == 12110.0
        assert h[4, 4] == 12220.0
        off = ~np.eye(9, dtype=bool)
        assert np.array_equal(h[off], h0[off])

    def test_reorg_shift_is_uniform(self):
        h = build_fmo_system(reorg_shift_cm1=35.0).h_cm1
        h0 = build_fmo_system().h_cm1
        diff = h - h0
        assert np.allclose(np.diag(diff)[1:8], 35.0)
        assert np.max(np.abs(diff - np.diag(np.diag(diff)))) == 0.0

    def test_rejects_asymmetric_hamiltonian(self):
        h = np.zeros((3, 3))
        h[0, 1] = 1.0
        with pytest.raises(ValueError):
            ExcitonSystem(h_cm1=h, site_indices=(0, 1, 2))


class TestParams:
    def test_bath_validation(self):
        with pytest.raises(ValueError):
            BathParams(lam_cm1=-1.0, gamma_fs1=0.01, temperature_k=300.0)
        with pytest.raises(ValueError):
            BathParams(lam_cm1=35.0, gamma_fs1=0.0, temperature_k=300.0)
        with pytest.raises(ValueError):
            BathParams(lam_cm1=35.0, gamma_fs1=0.01, temperature_k=0.0)

    def test_bath_from_timescale(self):
        bath = BathParams.from_timescale(35.0, 166.0, 300.0)
        assert bath.gamma_fs1 == pytest.approx(1.0 / 166.0)
        # correlation rate expressed as a wavenumber, gamma / (2 pi c)
        assert bath.gamma_cm1 == pytest.approx((1.0 / 166.0) / ANGFREQ_RAD_FS)

    def test_default_rates(self):
        rates = MarkovRates.from_inverse_ps()
        assert rates.gamma_rc_fs1 == pytest.approx(1.0 / 2500.0)
        assert rates.gamma_phot_fs1 == pytest.approx(1.0 / 250000.0)
        with pytest.raises(ValueError):
            MarkovRates(-1e-3, 0.0)


class TestSpectralDensity:
    bath = BathParams.from_timescale(35.0, 166.0, 300.0)

    def test_zero_at_zero(self):
        assert spectral_density(0.0, self.bath) == 0.0

    def test_peak_at_gamma(self):
        assert spectral_density(self.bath.gamma_cm1, self.bath) == pytest.approx(35.0)

    def test_against_direct_formula(self):
        # independent arithmetic: J = 2*lam*w*g/(w^2+g^2) with g in cm^-1
        g = (1.0 / 166.0) / ANGFREQ_RAD_FS
        expected = 2.0 * 35.0 * 100.0 * g / (100.0 ** 2 + g ** 2)
        assert spectral_density(100.0, self.bath) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("omega", [0.5, 10.0, 100.0, 1234.5])
    def test_odd(self, omega):
        assert spectral_density(-omega, self.bath) == -spectral_density(omega, self.bath)


class TestGibbsState:
    system = build_fmo_system()

    def test_infinite_temperature_is_uniform(self):
        rho = gibbs_state(self.system, 1e12)
        assert np.allclose(np.diag(rho), 1.0 / 7.0, atol=1e-10)

    def test_zero_temperature_limit_is_ground_projector(self):
        rho = gibbs_state(self.system, 0.1)
        energies, vecs = np.linalg.eigh(self.system.site_block())
        proj = np.outer(vecs[:, 0], vecs[:, 0])
        assert np.max(np.abs(rho - proj)) < 1e-10

    def test_unit_trace_and_positivity(self):
        rho = gibbs_state(self.system, 300.0)
        assert abs(np.trace(rho) - 1.0) < 1e-12
        assert np.min(np.linalg.eigvalsh(rho)) >= -1e-12

    def test_invariant_under_uniform_energy_shift(self):
        shifted = build_fmo_system(reorg_shift_cm1=500.0)
        a = np.diag(gibbs_state(self.system, 300.0))
        b = np.diag(gibbs_state(shifted, 300.0))
        assert np.max(np.abs(a - b)) < 1e-10

    def test_against_expm_oracle(self):
        # independent route: matrix exponential instead of eigendecomposition
        h = self.system.site_block()
        beta = 1.0 / (KB_CM1_PER_K * 300.0)
        raw = scipy.linalg.expm(-beta * (h - np.min(np.diag(h)) * np.eye(7)))
        oracle = raw / np.trace(raw)
        rho = gibbs_state(self.system, 300.0)
        assert np.max(np.abs(rho - oracle)) < 1e-12
        # site 3 dominates the thermal populations at 300 K
        assert np.argmax(np.diag(oracle)) == 2

    def test_rejects_nonpositive_temperature(self):
        with pytest.raises(ValueError):
            gibbs_state(self.system, 0.0)
        with pytest.raises(ValueError):
            gibbs_state(self.system, -10.0)
