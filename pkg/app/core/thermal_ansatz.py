"""Product-spectrum ansatz: rho(omega) = U(phi) rho0(theta) U(phi)^dagger.

rho0 is a product of diagonal single-qubit mixed states with weights
sin^2(theta_i) on |0> and cos^2(theta_i) on |1>, i.e. the reduced state of the
two-qubit ancilla circuit after tracing out the ancilla. U(phi) is a stack of
blocks; each applies exp(-i sum zeta_i Z_i), then exp(-i sum lambda_i X_i), then
exp(-i sum alpha_i Z_i Z_{i+1}). Block 1 acts first.

The Z and ZZ layers are diagonal in the computational basis, so they are stored
as phase vectors. The X layer is a Kronecker product of 2x2 rotations. All
builders accept a leading batch axis so many parameter vectors can be realised
in one pass.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import entr

from app.errors import ConfigError, DimensionMismatchError, NumericalError
from app.models import AnsatzParams, RotationBlock, build_model
from app.utils.logger import setup_logging

logger = setup_logging(__name__, level="INFO")

STATE_TOLERANCE = 1e-10
PROBABILITY_CLAMP = 1e-12


@dataclass(frozen=True, slots=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator on 2^N dimensions."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=complex)
        dim = matrix.shape[0] if matrix.ndim == 2 else 0
        if matrix.ndim != 2 or matrix.shape != (dim, dim) or dim < 2 or dim & (dim - 1):
            raise DimensionMismatchError(f"Density matrix must be 2^N x 2^N, got shape {matrix.shape}")
        if not np.allclose(matrix, matrix.conj().T, atol=STATE_TOLERANCE, rtol=0.0):
            raise NumericalError("Density matrix is not Hermitian")
        trace = np.trace(matrix)
        if abs(trace - 1.0) > STATE_TOLERANCE:
            raise NumericalError(f"Density matrix trace is {trace.real:.12g}, expected 1")
        lowest = float(np.linalg.eigvalsh(matrix)[0])
        if lowest < -STATE_TOLERANCE:
            raise NumericalError(f"Density matrix has negative eigenvalue {lowest:.3e}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_sites(self) -> int:
        return self.dimension.bit_length() - 1

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


# ---------------------------------------------------------------------
# Initial product state and its entropy
# ---------------------------------------------------------------------


def single_site_weights(theta: Sequence[float] | np.ndarray) -> np.ndarray:
    """(..., N, 2) array of [sin^2 theta, cos^2 theta]."""
    theta = np.asarray(theta, dtype=float)
    s = np.sin(theta) ** 2
    return np.stack([s, 1.0 - s], axis=-1)


def product_probabilities(theta: Sequence[float] | np.ndarray) -> np.ndarray:
    """Diagonal of rho0(theta); a leading batch axis is supported."""
    weights = single_site_weights(theta)
    probs = np.ones(weights.shape[:-2] + (1,))
    for site in range(weights.shape[-2]):
        pair = weights[..., site, :]
        probs = (probs[..., :, None] * pair[..., None, :]).reshape(weights.shape[:-2] + (-1,))
    return probs


def initial_state(theta: Sequence[float] | np.ndarray) -> DensityMatrix:
    return DensityMatrix(np.diag(product_probabilities(theta)).astype(complex))


def entropy(theta: Sequence[float] | np.ndarray) -> float:
    """Analytic von Neumann entropy of rho0(theta), in nats."""
    weights = single_site_weights(theta)
    return float(np.sum(entr(weights)))


def entropy_gradient(theta: Sequence[float] | np.ndarray) -> np.ndarray:
    """dS/dtheta_i = sin(2 theta_i) ln(cot^2 theta_i), sin^2 clamped away from 0 and 1."""
    theta = np.asarray(theta, dtype=float)
    s = np.clip(np.sin(theta) ** 2, PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
    return np.sin(2.0 * theta) * np.log((1.0 - s) / s)


def von_neumann_entropy(rho: DensityMatrix | np.ndarray) -> float:
    matrix = np.asarray(getattr(rho, "matrix", rho))
    eigenvalues = np.clip(np.linalg.eigvalsh(matrix), 0.0, None)
    return float(np.sum(entr(eigenvalues)))


# ---------------------------------------------------------------------
# Layered unitary
# ---------------------------------------------------------------------


@lru_cache(maxsize=16)
def basis_signs(n_sites: int) -> np.ndarray:
    """z[i, b] = +1 if site i+1 of basis state b is |0>, else -1 (site 1 = most significant bit)."""
    states = np.arange(2**n_sites)
    shifts = n_sites - 1 - np.arange(n_sites)
    signs = 1.0 - 2.0 * ((states[None, :] >> shifts[:, None]) & 1)
    signs.setflags(write=False)
    return signs


@lru_cache(maxsize=16)
def _bond_signs(n_sites: int) -> np.ndarray:
    signs = basis_signs(n_sites)
    bonds = signs[:-1] * signs[1:]
    bonds.setflags(write=False)
    return bonds


def z_layer_phases(zeta: np.ndarray) -> np.ndarray:
    """Diagonal of exp(-i sum zeta_i Z_i); shape (..., 2^N)."""
    zeta = np.asarray(zeta, dtype=float)
    return np.exp(-1j * (zeta @ basis_signs(zeta.shape[-1])))


def zz_layer_phases(alpha: np.ndarray, n_sites: int) -> np.ndarray:
    """Diagonal of exp(-i sum alpha_i Z_i Z_{i+1}); shape (..., 2^N)."""
    alpha = np.asarray(alpha, dtype=float)
    if n_sites == 1:
        return np.ones(alpha.shape[:-1] + (2,), dtype=complex)
    return np.exp(-1j * (alpha @ _bond_signs(n_sites)))


def apply_x_layer(unitary: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Left-multiply by exp(-i sum lambda_i X_i), one 2x2 rotation per site."""
    lam = np.asarray(lam, dtype=float)
    n_sites = lam.shape[-1]
    batch = unitary.shape[:-2]
    dim = unitary.shape[-1]
    state = unitary.reshape(batch + (2,) * n_sites + (dim,))
    pad = (1,) * n_sites
    for site in range(n_sites):
        axis = len(batch) + site
        c = np.cos(lam[..., site]).reshape(batch + pad)
        s = np.asarray(-1j * np.sin(lam[..., site])).reshape(batch + pad)
        upper = np.take(state, 0, axis=axis)
        lower = np.take(state, 1, axis=axis)
        state = np.stack([c * upper + s * lower, s * upper + c * lower], axis=axis)
    return state.reshape(batch + (dim, dim))


def x_layer(lam: np.ndarray) -> np.ndarray:
    """exp(-i sum lambda_i X_i) as a dense matrix; shape (..., 2^N, 2^N)."""
    lam = np.asarray(lam, dtype=float)
    dim = 2 ** lam.shape[-1]
    identity = np.broadcast_to(np.eye(dim, dtype=complex), lam.shape[:-1] + (dim, dim))
    return apply_x_layer(identity, lam)


def apply_block(unitary: np.ndarray, zeta: np.ndarray, lam: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Left-multiply ``unitary`` by one block (Z layer first, then X, then ZZ)."""
    n_sites = np.shape(zeta)[-1]
    rotated = z_layer_phases(zeta)[..., :, None] * unitary
    rotated = apply_x_layer(rotated, lam)
    return zz_layer_phases(alpha, n_sites)[..., :, None] * rotated


def build_unitary(blocks: Sequence[RotationBlock], n_sites: int | None = None) -> np.ndarray:
    """U(phi) = B_p ... B_1 as a dense 2^N x 2^N matrix."""
    if n_sites is None:
        if not blocks:
            raise ConfigError("n_sites is required when there are no blocks")
        n_sites = blocks[0].n_sites
    unitary = np.eye(2**n_sites, dtype=complex)
    for block in blocks:
        if block.n_sites != n_sites:
            raise DimensionMismatchError(f"Block acts on {block.n_sites} sites, expected {n_sites}")
        unitary = apply_block(
            unitary, np.asarray(block.zeta), np.asarray(block.lambda_), np.asarray(block.alpha)
        )
    return unitary


def split_vectors(vectors: np.ndarray, n_sites: int, depth: int) -> tuple[np.ndarray, list[tuple[np.ndarray, ...]]]:
    """Split (B, P) flat parameter vectors into theta (B, N) and per-block (zeta, lambda, alpha)."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    expected = AnsatzParams.vector_length(n_sites, depth)
    if vectors.shape[-1] != expected:
        raise DimensionMismatchError(f"Parameter vectors have {vectors.shape[-1]} entries, expected {expected}")
    theta = vectors[:, :n_sites]
    blocks = []
    offset = n_sites
    for _ in range(depth):
        blocks.append(
            (
                vectors[:, offset : offset + n_sites],
                vectors[:, offset + n_sites : offset + 2 * n_sites],
                vectors[:, offset + 2 * n_sites : offset + 3 * n_sites - 1],
            )
        )
        offset += 3 * n_sites - 1
    return theta, blocks


def unitary_batch(vectors: np.ndarray, n_sites: int, depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (theta (B, N), U (B, 2^N, 2^N)) for a stack of flat parameter vectors."""
    theta, blocks = split_vectors(vectors, n_sites, depth)
    unitary = np.broadcast_to(np.eye(2**n_sites, dtype=complex), (theta.shape[0], 2**n_sites, 2**n_sites)).copy()
    for zeta, lam, alpha in blocks:
        unitary = apply_block(unitary, zeta, lam, alpha)
    return theta, unitary


def realize_state(params: AnsatzParams) -> DensityMatrix:
    unitary = build_unitary(params.blocks, params.n_sites)
    probs = product_probabilities(params.theta)
    matrix = (unitary * probs[None, :]) @ unitary.conj().T
    # exact Hermitian part; the anti-Hermitian residue is rounding only
    return DensityMatrix(0.5 * (matrix + matrix.conj().T))


# ---------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------


def save_checkpoint(params: AnsatzParams, path: str | Path) -> Path:
    """Write ``params`` as JSON (atomic replace)."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = target.with_suffix(target.suffix + ".tmp")
    with tmp_path.open("w", encoding="utf-8") as handle:
        json.dump(params.to_document(), handle, indent=2)
    os.replace(tmp_path, target)
    logger.info("Saved ansatz checkpoint (N=%d, p=%d) to %s", params.n_sites, params.depth, target)
    return target


def load_checkpoint(path: str | Path) -> AnsatzParams:
    source = Path(path)
    try:
        document = json.loads(source.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"Cannot read checkpoint {source}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Checkpoint {source} is not valid JSON: {exc.msg}") from exc
    return build_model(AnsatzParams, document)


__all__ = [
    "DensityMatrix",
    "build_unitary",
    "entropy",
    "entropy_gradient",
    "initial_state",
    "load_checkpoint",
    "product_probabilities",
    "realize_state",
    "save_checkpoint",
    "unitary_batch",
    "von_neumann_entropy",
]
