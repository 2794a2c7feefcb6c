"""Shared fixtures for the test suite."""

from __future__ import annotations

import math
from functools import reduce

import numpy as np
import pytest

from app.core.pauli_algebra import PAULI_MATRICES, PauliSum, PauliTerm
from app.models import AnsatzParams, SchwingerParams


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def two_site_params() -> SchwingerParams:
    return SchwingerParams(n_sites=2, mass=1.0, coupling=1.0, lattice_spacing=0.5)


@pytest.fixture
def four_site_params() -> SchwingerParams:
    return SchwingerParams(n_sites=4, mass=1.0, coupling=1.0, hopping=1.0)


def kron_string(operators: str) -> np.ndarray:
    """Reference dense matrix of a Pauli string built with np.kron."""
    return reduce(np.kron, [PAULI_MATRICES[label] for label in operators])


def random_pauli_sum(rng: np.random.Generator, n_sites: int, n_terms: int) -> PauliSum:
    terms = []
    for _ in range(n_terms):
        ops = "".join(rng.choice(list("IXYZ"), size=n_sites))
        terms.append(PauliTerm(float(rng.normal()), ops))
    return PauliSum.from_terms(terms, n_sites)


def random_density(rng: np.random.Generator, n_sites: int) -> np.ndarray:
    dim = 2**n_sites
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_params(rng: np.random.Generator, n_sites: int, depth: int, theta_margin: float = 0.0) -> AnsatzParams:
    size = AnsatzParams.vector_length(n_sites, depth)
    vector = rng.uniform(-math.pi, math.pi, size=size)
    vector[:n_sites] = rng.uniform(theta_margin, math.pi / 2 - theta_margin, size=n_sites)
    return AnsatzParams.from_vector(vector, n_sites, depth)
