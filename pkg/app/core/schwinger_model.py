"""Qubit Hamiltonian of the lattice Schwinger model.

The continuum theory is 1+1 dimensional QED with a single fermion flavour.
Discretising with staggered (Kogut-Susskind) fermions puts particles on odd and
antiparticles on even sites of an N-site open chain. Gauss law fixes the
electric field on link j from the charges to its left,

    L_j = eps + kappa * sum_{l<=j} (Z_l + (-1)^l),

so the gauge links drop out. After Jordan-Wigner the nearest-neighbour hopping
becomes (w/2)(X_j X_{j+1} + Y_j Y_{j+1}), with w = 1/(2a). The string factors
cancel between neighbours.

With the standard occupation n_l = (Z_l + 1)/2, Gauss law gives kappa = 1/2
("gauss" convention, the default). The "literal" convention sets kappa = 1.
"""

from __future__ import annotations

from collections import defaultdict

from app.core.pauli_algebra import PauliSum, PauliTerm, canonicalize, expectation
from app.errors import DimensionMismatchError
from app.models import SchwingerParams
from app.utils.logger import setup_logging

logger = setup_logging(__name__, level="INFO")


def _label(n_sites: int, ops: dict[int, str]) -> str:
    return PauliTerm.on_sites(1.0, n_sites, ops).operators


def _staggered_offset(params: SchwingerParams, link: int) -> float:
    """Constant part of L_j: eps + kappa * sum_{l<=j} (-1)^l."""
    return params.background_field + params.kappa * (-1.0 if link % 2 else 0.0)


def build_hamiltonian(params: SchwingerParams) -> PauliSum:
    """Return the canonical G_eps(mu) = H_eps - (mu/2) sum_j Z_j.

    Terms: hopping, staggered mass (m/2) sum_j (-1)^j Z_j and the electric energy
    (g^2 a / 2) sum_{j<N} L_j^2 expanded into identity, Z and ZZ strings.
    """
    n = params.n_sites
    coeffs: defaultdict[str, float] = defaultdict(float)
    identity = "I" * n

    half_hop = params.hopping / 2.0
    for j in range(1, n):
        coeffs[_label(n, {j: "X", j + 1: "X"})] += half_hop
        coeffs[_label(n, {j: "Y", j + 1: "Y"})] += half_hop

    for j in range(1, n + 1):
        sign = -1.0 if j % 2 else 1.0
        coeffs[_label(n, {j: "Z"})] += 0.5 * params.mass * sign - 0.5 * params.chemical_potential

    # L_j^2 = c^2 + k^2 j + 2 c k sum_l Z_l + 2 k^2 sum_{l<l'} Z_l Z_l'
    electric = params.coupling**2 * params.lattice_spacing / 2.0
    kappa = params.kappa
    for j in range(1, n):
        offset = _staggered_offset(params, j)
        coeffs[identity] += electric * (offset**2 + kappa**2 * j)
        for l in range(1, j + 1):
            coeffs[_label(n, {l: "Z"})] += electric * 2.0 * offset * kappa
            for k in range(l + 1, j + 1):
                coeffs[_label(n, {l: "Z", k: "Z"})] += electric * 2.0 * kappa**2

    hamiltonian = canonicalize(PauliSum(tuple(PauliTerm(c, s) for s, c in coeffs.items()), n))
    logger.debug(
        "Built Hamiltonian N=%d eps=%.4g mu=%.4g with %d terms",
        n,
        params.background_field,
        params.chemical_potential,
        len(hamiltonian),
    )
    return hamiltonian


def trial_charge_offset(params: SchwingerParams) -> float:
    """f_eps = (g^2 a (N-1) / 2) (eps^2 - eps/2)."""
    eps = params.background_field
    return params.coupling**2 * params.lattice_spacing * (params.n_sites - 1) / 2.0 * (eps**2 - eps / 2.0)


def electric_field_operator(params: SchwingerParams, link_index: int) -> PauliSum:
    n = params.n_sites
    if not 1 <= link_index <= n - 1:
        raise DimensionMismatchError(f"link_index must be in 1..{n - 1}, got {link_index}")
    terms = [PauliTerm(_staggered_offset(params, link_index), "I" * n)]
    terms.extend(PauliTerm.on_sites(params.kappa, n, {l: "Z"}) for l in range(1, link_index + 1))
    return canonicalize(PauliSum(tuple(terms), n))


def total_charge_operator(n_sites: int) -> PauliSum:
    """Q = (1/2) sum_j Z_j, conserved by every Hamiltonian built here."""
    return canonicalize(
        PauliSum(tuple(PauliTerm.on_sites(0.5, n_sites, {j: "Z"}) for j in range(1, n_sites + 1)), n_sites)
    )


def electric_field_profile(params: SchwingerParams, rho) -> list[float]:
    """<L_j> for j = 1..N-1 in the state ``rho``."""
    return [expectation(electric_field_operator(params, j), rho) for j in range(1, params.n_sites)]


__all__ = [
    "build_hamiltonian",
    "electric_field_operator",
    "electric_field_profile",
    "total_charge_operator",
    "trial_charge_offset",
]
