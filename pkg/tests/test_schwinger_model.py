import numpy as np
import pytest

from app.core.pauli_algebra import identity_coefficient, to_dense
from app.core.schwinger_model import (
    build_hamiltonian,
    electric_field_operator,
    electric_field_profile,
    total_charge_operator,
    trial_charge_offset,
)
from app.core.thermal_ansatz import initial_state
from app.errors import ConfigError, DimensionMismatchError
from app.models import SchwingerParams


class TestSchwingerParams:
    def test_spacing_from_hopping(self):
        params = SchwingerParams(n_sites=4, hopping=2.0)
        assert params.lattice_spacing == pytest.approx(0.25)

    def test_hopping_from_spacing(self):
        params = SchwingerParams(n_sites=4, lattice_spacing=0.25)
        assert params.hopping == pytest.approx(2.0)

    def test_default_spacing(self):
        params = SchwingerParams(n_sites=4)
        assert (params.lattice_spacing, params.hopping) == (0.5, 1.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_sites": 3},
            {"n_sites": 0},
            {"n_sites": 4, "coupling": -1.0},
            {"n_sites": 4, "lattice_spacing": 0.0},
            {"n_sites": 4, "lattice_spacing": 0.5, "hopping": 2.0},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SchwingerParams(**kwargs)

    def test_replace_revalidates(self):
        params = SchwingerParams(n_sites=4)
        assert params.replace(lattice_spacing=0.25).hopping == pytest.approx(2.0)
        with pytest.raises(ConfigError):
            params.replace(n_sites=5)


class TestBuildHamiltonian:
    def test_hopping_only(self):
        params = SchwingerParams(n_sites=2, mass=0.0, coupling=0.0, hopping=1.0)
        assert build_hamiltonian(params).as_dict() == {"XX": 0.5, "YY": 0.5}

    def test_two_site_expansion(self, two_site_params):
        # L_1^2 = (Z_1 - 1)^2 / 4 = (1 - Z_1) / 2, times g^2 a / 2 = 1/4
        expected = {"II": 0.125, "ZI": -0.625, "IZ": 0.5, "XX": 0.5, "YY": 0.5}
        terms = build_hamiltonian(two_site_params).as_dict()
        assert terms.keys() == expected.keys()
        for key, value in expected.items():
            assert terms[key] == pytest.approx(value, abs=1e-14)

    def test_chemical_potential_shift(self, two_site_params):
        base = build_hamiltonian(two_site_params).as_dict()
        shifted = build_hamiltonian(two_site_params.replace(chemical_potential=2.0)).as_dict()
        assert shifted["ZI"] == pytest.approx(base["ZI"] - 1.0)
        assert shifted["IZ"] == pytest.approx(base["IZ"] - 1.0)
        for key in ("II", "XX", "YY"):
            assert shifted[key] == base[key]

    @pytest.mark.parametrize("n_sites", [4, 6])
    @pytest.mark.parametrize("convention", ["gauss", "literal"])
    def test_electric_term_matches_field_operators(self, n_sites, convention):
        params = SchwingerParams(
            n_sites=n_sites, mass=0.7, coupling=1.3, hopping=1.0, background_field=0.3, electric_convention=convention
        )
        electric = to_dense(build_hamiltonian(params)) - to_dense(build_hamiltonian(params.replace(coupling=0.0)))
        fields = [to_dense(electric_field_operator(params, j)) for j in range(1, n_sites)]
        expected = params.coupling**2 * params.lattice_spacing / 2 * sum(f @ f for f in fields)
        np.testing.assert_allclose(electric, expected, atol=1e-10)

    @pytest.mark.parametrize("mu", [0.0, 1.5])
    def test_conserves_total_charge(self, mu):
        params = SchwingerParams(n_sites=6, mass=1.0, coupling=1.0, background_field=0.5, chemical_potential=mu)
        h = to_dense(build_hamiltonian(params))
        q = to_dense(total_charge_operator(6))
        np.testing.assert_allclose(h @ q - q @ h, 0.0, atol=1e-10)

    def test_identity_coefficient_derivative_in_epsilon(self):
        params = SchwingerParams(n_sites=6, mass=1.0, coupling=1.0, lattice_spacing=0.5)
        eps, h = 0.7, 1e-4

        def coefficient(value: float) -> float:
            return identity_coefficient(build_hamiltonian(params.replace(background_field=value)))

        numeric = (coefficient(eps + h) - coefficient(eps - h)) / (2 * h)
        # g^2 a * sum_j (eps - 1/2 [j odd]) = 0.5 * (5 * 0.7 - 1.5)
        assert numeric == pytest.approx(1.0, abs=1e-8)

    def test_coefficients_quadratic_in_epsilon(self):
        params = SchwingerParams(n_sites=4, mass=1.0, coupling=1.0)
        sums = [build_hamiltonian(params.replace(background_field=float(e))).as_dict() for e in range(4)]
        for key in set().union(*sums):
            c = [s.get(key, 0.0) for s in sums]
            assert c[3] - 3 * c[2] + 3 * c[1] - c[0] == pytest.approx(0.0, abs=1e-10)


class TestTrialChargeOffset:
    def test_zero_field(self):
        assert trial_charge_offset(SchwingerParams(n_sites=6)) == 0.0

    def test_half_field_root(self):
        assert trial_charge_offset(SchwingerParams(n_sites=6, background_field=0.5)) == 0.0

    def test_unit_field(self):
        params = SchwingerParams(n_sites=6, coupling=1.0, lattice_spacing=0.5, background_field=1.0)
        assert trial_charge_offset(params) == pytest.approx(0.625)

    @pytest.mark.parametrize("coupling,spacing,n_sites", [(0.5, 0.1, 2), (2.0, 1.0, 8)])
    def test_roots_for_any_parameters(self, coupling, spacing, n_sites):
        base = SchwingerParams(n_sites=n_sites, coupling=coupling, lattice_spacing=spacing)
        for eps in (0.0, 0.5):
            assert trial_charge_offset(base.replace(background_field=eps)) == 0.0


class TestElectricField:
    def test_first_link(self):
        params = SchwingerParams(n_sites=2)
        assert electric_field_operator(params, 1).as_dict() == {"II": -0.5, "ZI": 0.5}

    def test_second_link(self):
        params = SchwingerParams(n_sites=4)
        assert electric_field_operator(params, 2).as_dict() == {"IZII": 0.5, "ZIII": 0.5}

    def test_background_shift(self):
        params = SchwingerParams(n_sites=4, background_field=0.5)
        assert electric_field_operator(params, 2).as_dict() == {"IIII": 0.5, "IZII": 0.5, "ZIII": 0.5}

    def test_literal_convention(self):
        params = SchwingerParams(n_sites=2, electric_convention="literal")
        assert electric_field_operator(params, 1).as_dict() == {"II": -1.0, "ZI": 1.0}

    @pytest.mark.parametrize("link", [0, 4])
    def test_out_of_range(self, link):
        with pytest.raises(DimensionMismatchError):
            electric_field_operator(SchwingerParams(n_sites=4), link)

    def test_profile_on_filled_state(self):
        # every site in |1>: L_j = (1/2) sum_l (-1 + (-1)^l)
        params = SchwingerParams(n_sites=4)
        profile = electric_field_profile(params, initial_state(np.zeros(4)))
        np.testing.assert_allclose(profile, [-1.0, -1.0, -2.0], atol=1e-12)
