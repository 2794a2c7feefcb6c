import math

import numpy as np
import pytest
import scipy.linalg

from app.core.exact_oracle import (
    exact_free_energy,
    exact_string_tension,
    gibbs_state,
    spectrum,
    state_fidelity,
    tension_from_free_energies,
    trace_distance,
)
from app.core.pauli_algebra import PauliSum, expectation, to_dense
from app.core.schwinger_model import build_hamiltonian
from app.errors import ConfigError, DimensionMismatchError, SizeLimitError
from app.experiments.analysis import fit_log_tension, is_strictly_decreasing
from app.models import SchwingerParams
from tests.conftest import random_density, random_pauli_sum

TENSION_PARAMS = SchwingerParams(n_sites=6, mass=1.0, coupling=1.0, hopping=1.0, background_field=0.5)


class TestExactFreeEnergy:
    def test_zero_hamiltonian(self):
        values = exact_free_energy(PauliSum.zero(2), 0.5)
        assert values.free_energy == pytest.approx(-math.log(4) / 0.5, abs=1e-12)
        assert values.energy == pytest.approx(0.0, abs=1e-12)
        assert values.entropy == pytest.approx(math.log(4), abs=1e-12)

    @pytest.mark.parametrize("beta", [0.1, 1.0, 10.0])
    def test_single_site_closed_form(self, beta):
        values = exact_free_energy(PauliSum.from_dict({"Z": -1.0}, 1), beta)
        assert values.free_energy == pytest.approx(-math.log(2 * math.cosh(beta)) / beta, abs=1e-12)
        assert values.energy == pytest.approx(-math.tanh(beta), abs=1e-12)

    @pytest.mark.parametrize("beta", [0.1, 1.0, 10.0])
    def test_matches_matrix_exponential(self, rng, two_site_params, beta):
        for hamiltonian in (build_hamiltonian(two_site_params), random_pauli_sum(rng, 3, 10)):
            dense = to_dense(hamiltonian)
            partition = np.trace(scipy.linalg.expm(-beta * dense)).real
            values = exact_free_energy(hamiltonian, beta)
            assert values.free_energy == pytest.approx(-math.log(partition) / beta, rel=1e-10, abs=1e-10)
            assert values.free_energy == pytest.approx(values.energy - values.entropy / beta, abs=1e-10)

    def test_low_temperature_limit(self, four_site_params):
        hamiltonian = build_hamiltonian(four_site_params)
        ground = spectrum(hamiltonian).ground_energy
        values = exact_free_energy(hamiltonian, 1e3)
        assert values.energy == pytest.approx(ground, abs=1e-8)
        assert ground - math.log(16) / 1e3 <= values.free_energy <= ground + 1e-12

    def test_high_temperature_entropy(self, four_site_params):
        values = exact_free_energy(build_hamiltonian(four_site_params), 1e-6)
        assert values.entropy == pytest.approx(4 * math.log(2), abs=1e-6)

    def test_entropy_is_temperature_derivative(self, four_site_params):
        hamiltonian = build_hamiltonian(four_site_params)
        temperature, h = 2.0, 1e-5
        slope = (
            exact_free_energy(hamiltonian, 1 / (temperature + h)).free_energy
            - exact_free_energy(hamiltonian, 1 / (temperature - h)).free_energy
        ) / (2 * h)
        assert -slope == pytest.approx(exact_free_energy(hamiltonian, 1 / temperature).entropy, abs=1e-6)

    def test_invalid_beta(self, two_site_params):
        with pytest.raises(ConfigError):
            exact_free_energy(build_hamiltonian(two_site_params), 0.0)

    def test_size_limit(self):
        with pytest.raises(SizeLimitError):
            exact_free_energy(PauliSum.identity(13), 1.0)
        with pytest.raises(SizeLimitError):
            spectrum(PauliSum.identity(2), max_sites=1)


class TestSpectrum:
    def test_cached_and_read_only(self, two_site_params):
        hamiltonian = build_hamiltonian(two_site_params)
        first = spectrum(hamiltonian)
        assert spectrum(build_hamiltonian(two_site_params)) is first
        with pytest.raises(ValueError):
            first.eigenvalues[0] = 0.0

    def test_ascending(self, rng):
        values = spectrum(random_pauli_sum(rng, 3, 6)).eigenvalues
        assert np.all(np.diff(values) >= 0)

    def test_gibbs_state_energy(self, four_site_params):
        hamiltonian = build_hamiltonian(four_site_params)
        rho = gibbs_state(hamiltonian, 0.7)
        assert expectation(hamiltonian, rho) == pytest.approx(exact_free_energy(hamiltonian, 0.7).energy, abs=1e-10)


class TestStringTension:
    def test_zero_background_field(self):
        assert exact_string_tension(TENSION_PARAMS.replace(background_field=0.0), 1.0) == 0.0
        assert exact_string_tension(TENSION_PARAMS.replace(background_field=0.0, chemical_potential=1.5), 1.0) == 0.0

    def test_recomputed_from_free_energies(self):
        beta = 0.5
        f_eps = exact_free_energy(build_hamiltonian(TENSION_PARAMS), beta).free_energy
        f_zero = exact_free_energy(build_hamiltonian(TENSION_PARAMS.replace(background_field=0.0)), beta).free_energy
        # N g a = 6 * 1 * 0.5; the offset vanishes at eps = 1/2
        assert exact_string_tension(TENSION_PARAMS, beta) == pytest.approx((f_eps - f_zero) / 3.0, abs=1e-12)

    def test_decreasing_over_full_temperature_grid(self):
        temperatures = [0.5, 1.0, *range(2, 11)]
        sigmas = [exact_string_tension(TENSION_PARAMS, 1 / t) for t in temperatures]
        assert is_strictly_decreasing(sigmas)
        assert sigmas[0] > 0.0 > sigmas[-1]

    def test_log_tension_nearly_linear_in_temperature(self):
        temperatures = [0.5, 1.0, *range(2, 11)]
        params = TENSION_PARAMS.replace(background_field=0.25)
        fit = fit_log_tension(temperatures, [exact_string_tension(params, 1 / t) for t in temperatures])
        assert fit is not None
        assert fit.slope < 0.0
        assert fit.r_squared >= 0.95

    def test_negative_region_at_high_temperature(self):
        surface = [
            exact_string_tension(TENSION_PARAMS.replace(chemical_potential=mu), 1 / t)
            for t in (2.0, 5.0, 10.0)
            for mu in (0.0, 1.0, 2.0)
        ]
        assert min(surface) < 0.0
        assert exact_string_tension(TENSION_PARAMS, 0.1) < 0.0

    def test_requires_positive_coupling(self):
        params = TENSION_PARAMS.replace(coupling=0.0)
        with pytest.raises(ConfigError):
            exact_string_tension(params, 1.0)
        with pytest.raises(ConfigError):
            tension_from_free_energies(1.0, 0.0, params)


class TestStateComparison:
    def test_identical_states(self, rng):
        rho = random_density(rng, 2)
        assert state_fidelity(rho, rho) == pytest.approx(1.0, abs=1e-9)
        assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_pure_states(self):
        up, down = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
        assert state_fidelity(up, down) == pytest.approx(0.0, abs=1e-12)
        assert trace_distance(up, down) == pytest.approx(1.0, abs=1e-12)

    def test_pure_against_maximally_mixed(self):
        pure = np.zeros((4, 4))
        pure[1, 1] = 1.0
        assert state_fidelity(pure, np.eye(4) / 4) == pytest.approx(0.25, abs=1e-12)
        assert trace_distance(pure, np.eye(4) / 4) == pytest.approx(0.75, abs=1e-12)

    def test_symmetric_and_bounded(self, rng):
        for _ in range(10):
            rho, sigma = random_density(rng, 2), random_density(rng, 2)
            fidelity = state_fidelity(rho, sigma)
            assert 0.0 <= fidelity <= 1.0
            assert fidelity == pytest.approx(state_fidelity(sigma, rho), abs=1e-8)
            # Fuchs-van de Graaf
            assert 1 - math.sqrt(fidelity) <= trace_distance(rho, sigma) + 1e-9

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            trace_distance(np.eye(2) / 2, np.eye(4) / 4)
