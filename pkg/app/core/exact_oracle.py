"""Exact Gibbs thermodynamics by full diagonalisation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from app.core.pauli_algebra import PauliSum, canonicalize, to_dense
from app.core.schwinger_model import build_hamiltonian, trial_charge_offset
from app.core.thermal_ansatz import DensityMatrix
from app.errors import ConfigError, DimensionMismatchError
from app.models import SchwingerParams, ThermalValues
from app.utils.logger import setup_logging

logger = setup_logging(__name__, level="INFO")


@dataclass(frozen=True, slots=True)
class Spectrum:
    """Ascending eigenvalues with matching eigenvector columns (both read-only)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dimension(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not math.isfinite(beta) or beta <= 0:
        raise ConfigError(f"beta must be finite and positive, got {beta}")
    return beta


@lru_cache(maxsize=128)
def _cached_spectrum(hamiltonian: PauliSum) -> Spectrum:
    matrix = to_dense(hamiltonian)
    logger.debug("Diagonalising %d-dimensional Hamiltonian", matrix.shape[0])
    eigenvalues, eigenvectors = scipy.linalg.eigh(matrix)
    eigenvalues.setflags(write=False)
    eigenvectors.setflags(write=False)
    return Spectrum(eigenvalues=eigenvalues, eigenvectors=eigenvectors)


def spectrum(hamiltonian: PauliSum, *, max_sites: int | None = None) -> Spectrum:
    """Full spectrum of ``hamiltonian``; memoised per canonical PauliSum."""
    canonical = canonicalize(hamiltonian)
    # raises SizeLimitError before the cache is touched
    to_dense(canonical, max_sites=max_sites)
    return _cached_spectrum(canonical)


def boltzmann_weights(spec: Spectrum, beta: float) -> tuple[np.ndarray, float]:
    """Normalised weights and ln Z shifted by the ground energy."""
    beta = _check_beta(beta)
    exponents = -beta * (spec.eigenvalues - spec.ground_energy)
    log_partition = float(logsumexp(exponents))
    return np.exp(exponents - log_partition), log_partition


def exact_free_energy(hamiltonian: PauliSum, beta: float) -> ThermalValues:
    """(F, E, S) of the Gibbs state at inverse temperature ``beta``."""
    spec = spectrum(hamiltonian)
    weights, log_partition = boltzmann_weights(spec, beta)
    free = spec.ground_energy - log_partition / beta
    energy = float(np.dot(weights, spec.eigenvalues))
    return ThermalValues(free, energy, beta * (energy - free))


def gibbs_state(hamiltonian: PauliSum, beta: float) -> DensityMatrix:
    spec = spectrum(hamiltonian)
    weights, _ = boltzmann_weights(spec, beta)
    vectors = spec.eigenvectors
    matrix = (vectors * weights[None, :]) @ vectors.conj().T
    return DensityMatrix(0.5 * (matrix + matrix.conj().T))


def tension_from_free_energies(free_eps: float, free_zero: float, params: SchwingerParams) -> float:
    """sigma = (F_eps - F_0 - f_eps) / (N g a)."""
    if params.coupling <= 0:
        raise ConfigError("String tension requires coupling g > 0")
    scale = params.n_sites * params.coupling * params.lattice_spacing
    return (free_eps - free_zero - trial_charge_offset(params)) / scale


def exact_string_tension(params_base: SchwingerParams, beta: float) -> float:
    """Exact sigma_eps(beta); mu is the same in the eps and eps = 0 Hamiltonians."""
    if params_base.coupling <= 0:
        raise ConfigError("String tension requires coupling g > 0")
    free_eps = exact_free_energy(build_hamiltonian(params_base), beta).free_energy
    free_zero = exact_free_energy(build_hamiltonian(params_base.replace(background_field=0.0)), beta).free_energy
    return tension_from_free_energies(free_eps, free_zero, params_base)


def _matrices(rho, sigma) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(getattr(rho, "matrix", rho))
    b = np.asarray(getattr(sigma, "matrix", sigma))
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Cannot compare states of shape {a.shape} and {b.shape}")
    return a, b


def state_fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, clipped to [0, 1]."""
    a, b = _matrices(rho, sigma)
    values, vectors = scipy.linalg.eigh(a)
    root = (vectors * np.sqrt(np.clip(values, 0.0, None))[None, :]) @ vectors.conj().T
    inner = root @ b @ root
    inner_values = scipy.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    fidelity = float(np.sum(np.sqrt(np.clip(inner_values, 0.0, None))) ** 2)
    return min(max(fidelity, 0.0), 1.0)


def trace_distance(rho, sigma) -> float:
    a, b = _matrices(rho, sigma)
    diff = a - b
    return 0.5 * float(np.sum(np.abs(scipy.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


__all__ = [
    "Spectrum",
    "ThermalValues",
    "exact_free_energy",
    "exact_string_tension",
    "gibbs_state",
    "spectrum",
    "state_fidelity",
    "tension_from_free_energies",
    "trace_distance",
]
