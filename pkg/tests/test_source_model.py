import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cloneqkd.source_model import (
    DetectorModel, Poisson, Thermal, estimate_mean_photons, multiphoton_probability,
    photon_number_pmf, source_report,
)


class TestPmf:
    def test_poisson_vacuum(self):
        assert photon_number_pmf(Poisson(0.3), 0) == pytest.approx(math.exp(-0.3), rel=1e-14)

    def test_thermal_zero_mean(self):
        assert photon_number_pmf(Thermal(0.0), 0) == 1.0
        assert photon_number_pmf(Thermal(0.0), 3) == 0.0

    def test_thermal_formula(self):
        m = 0.4
        assert photon_number_pmf(Thermal(m), 3) == pytest.approx(m**3 / (1 + m) ** 4, rel=1e-13)

    def test_poisson_formula(self):
        lam = 2.5
        assert photon_number_pmf(Poisson(lam), 4) == pytest.approx(lam**4 * math.exp(-lam) / 24, rel=1e-13)

    @pytest.mark.parametrize("model", [Poisson, Thermal])
    def test_negative_mean(self, model):
        with pytest.raises(ValueError):
            model(-0.1)

    @pytest.mark.parametrize("n", [-1, 1.5])
    def test_bad_count(self, n):
        with pytest.raises(ValueError):
            photon_number_pmf(Poisson(1), n)

    def test_unknown_model(self):
        with pytest.raises(TypeError):
            photon_number_pmf(object(), 0)

    @given(st.floats(0, 1), st.sampled_from([Poisson, Thermal]))
    def test_normalized(self, m, model):
        total = math.fsum(photon_number_pmf(model(m), np.arange(201)))
        assert total == pytest.approx(1, abs=1e-12)

    def test_thermal_mean(self):
        n = np.arange(400)
        assert np.sum(n * photon_number_pmf(Thermal(0.7), n)) == pytest.approx(0.7, rel=1e-10)


class TestMultiphoton:
    def test_value(self):
        assert multiphoton_probability(7e-5) == pytest.approx(2.45e-9, abs=0.01e-9)

    def test_closed_form(self):
        lam = 0.3
        assert multiphoton_probability(lam) == pytest.approx(1 - math.exp(-lam) * (1 + lam), rel=1e-12)

    @given(st.floats(1e-9, 1e-3))
    def test_small_mean_asymptotic(self, lam):
        assert multiphoton_probability(lam) == pytest.approx(lam**2 / 2, rel=0.01)

    def test_negative(self):
        with pytest.raises(ValueError):
            multiphoton_probability(-1)


class TestEstimate:
    def test_worked_example(self):
        assert estimate_mean_photons(0.999965, 0.5) == pytest.approx(7.00e-5, abs=0.01e-5)

    def test_vacuum(self):
        assert estimate_mean_photons(1.0, 0.3) == 0.0

    def test_closed_form_unit_efficiency(self):
        assert estimate_mean_photons(math.exp(-0.5), 1.0) == pytest.approx(0.5, rel=1e-12)

    def test_random_against_closed_form(self, rng):
        for p0, eta in zip(rng.uniform(0.01, 1, 100), rng.uniform(0.01, 1, 100)):
            assert estimate_mean_photons(p0, eta) == pytest.approx(-math.log(p0) / eta, rel=1e-9)

    @pytest.mark.parametrize("p0,eta", [(0.0, 0.5), (1.2, 0.5), (0.5, 0.0), (0.5, 1.5)])
    def test_invalid(self, p0, eta):
        with pytest.raises(ValueError):
            estimate_mean_photons(p0, eta)


class TestReport:
    def test_source_check(self):
        r = source_report(DetectorModel(0.5, 1.0, 35.0, 35e3))
        assert r.p0 == pytest.approx(0.999965, abs=1e-12)
        assert r.mean_photons == pytest.approx(7.00e-5, abs=0.01e-5)
        assert r.p_multiphoton == pytest.approx(2.45e-9, abs=0.01e-9)
        assert r.dead_time_vacuum == pytest.approx(0.9976, abs=1e-4)
        assert r.dead_time_vacuum == pytest.approx(math.exp(-35 * r.mean_photons), rel=1e-12)
        assert set(r.as_dict()) == {"p0", "mean_photons", "p_multiphoton", "dead_time_vacuum"}

    def test_inconsistent_rate(self):
        with pytest.raises(ValueError, match="inconsistent"):
            source_report(DetectorModel(0.5, 1.0, 35.0, 2e9))

    @pytest.mark.parametrize("kwargs", [
        dict(efficiency=0.0), dict(efficiency=0.5, window=0.0),
        dict(efficiency=0.5, window=10.0, dead_time=5.0), dict(efficiency=0.5, click_rate=-1.0),
    ])
    def test_detector_validation(self, kwargs):
        with pytest.raises(ValueError):
            DetectorModel(**kwargs)
