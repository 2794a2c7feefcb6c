"""Variational free energy F = E - S/beta and its multi-start minimisation."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from app.core.pauli_algebra import PauliSum, expectation, to_dense
from app.core.thermal_ansatz import (
    entropy,
    entropy_gradient,
    product_probabilities,
    realize_state,
    unitary_batch,
)
from app.errors import ConfigError, DimensionMismatchError
from app.models import AnsatzParams, OptimizerConfig, ThermalResult, ThermalValues
from app.utils.logger import setup_logging

logger = setup_logging(__name__, level="INFO")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
THETA_INIT_MARGIN = 0.05
ANGLE_INIT_SCALE = 0.01
# complex entries held per batched energy evaluation
BATCH_ELEMENT_BUDGET = 2**23


@dataclass(frozen=True, slots=True)
class ObjectiveSpec:
    hamiltonian: PauliSum
    beta: float

    def __post_init__(self) -> None:
        beta = float(self.beta)
        if not math.isfinite(beta) or beta <= 0:
            raise ConfigError(f"beta must be finite and positive, got {self.beta}")
        object.__setattr__(self, "beta", beta)

    @property
    def n_sites(self) -> int:
        return self.hamiltonian.n_sites


def _check_dimensions(spec: ObjectiveSpec, params: AnsatzParams) -> None:
    if params.n_sites != spec.n_sites:
        raise DimensionMismatchError(
            f"Ansatz acts on {params.n_sites} sites, Hamiltonian on {spec.n_sites}"
        )


def objective(spec: ObjectiveSpec, params: AnsatzParams) -> ThermalValues:
    """(F, E, S) of rho(params): E = Tr[rho H], S analytic, F = E - S/beta."""
    _check_dimensions(spec, params)
    energy = expectation(spec.hamiltonian, realize_state(params))
    ent = entropy(params.theta)
    return ThermalValues(energy - ent / spec.beta, energy, ent)


class BatchEvaluator:
    """Energies and free energies for stacks of flat parameter vectors."""

    def __init__(self, spec: ObjectiveSpec, depth: int, fd_step: float = 1e-4) -> None:
        self.spec = spec
        self.n_sites = spec.n_sites
        self.depth = depth
        self.fd_step = fd_step
        self.size = AnsatzParams.vector_length(self.n_sites, depth)
        self._dense = to_dense(spec.hamiltonian)
        dim = self._dense.shape[0]
        self._chunk = max(1, BATCH_ELEMENT_BUDGET // (dim * dim))

    def energies(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        out = np.empty(vectors.shape[0])
        for start in range(0, vectors.shape[0], self._chunk):
            chunk = vectors[start : start + self._chunk]
            theta, unitary = unitary_batch(chunk, self.n_sites, self.depth)
            # <b| U^dagger H U |b> for every basis state b
            diagonal = np.einsum("bkj,bkj->bj", unitary.conj(), self._dense @ unitary).real
            out[start : start + len(chunk)] = np.sum(product_probabilities(theta) * diagonal, axis=1)
        return out

    def entropies(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        return np.array([entropy(row[: self.n_sites]) for row in vectors])

    def free_energies(self, vectors: np.ndarray) -> np.ndarray:
        return self.energies(vectors) - self.entropies(vectors) / self.spec.beta

    def free_energy(self, vector: np.ndarray) -> float:
        return float(self.free_energies(vector)[0])

    def value_and_gradient(self, vector: np.ndarray) -> tuple[float, np.ndarray]:
        """F and dF: central differences on E, analytic entropy term for theta."""
        x = np.asarray(vector, dtype=float)
        h = self.fd_step
        shifts = h * np.eye(self.size)
        stack = np.vstack([x[None, :], x + shifts, x - shifts])
        values = self.energies(stack)
        grad = (values[1 : self.size + 1] - values[self.size + 1 :]) / (2.0 * h)
        theta = x[: self.n_sites]
        grad[: self.n_sites] -= entropy_gradient(theta) / self.spec.beta
        return float(values[0] - entropy(theta) / self.spec.beta), grad


def gradient(spec: ObjectiveSpec, params: AnsatzParams, fd_step: float = 1e-4) -> np.ndarray:
    _check_dimensions(spec, params)
    evaluator = BatchEvaluator(spec, params.depth, fd_step)
    return evaluator.value_and_gradient(params.to_vector())[1]


@dataclass(slots=True)
class RestartOutcome:
    index: int
    vector: np.ndarray
    free_energy: float
    converged: bool
    iterations: int
    trace: list[tuple[int, float]] = field(default_factory=list)


def initial_vector(n_sites: int, depth: int, seed: int, restart: int) -> np.ndarray:
    """Restart ``restart`` draws from default_rng([seed, restart])."""
    rng = np.random.default_rng([seed, restart])
    theta = rng.uniform(THETA_INIT_MARGIN, math.pi / 2 - THETA_INIT_MARGIN, size=n_sites)
    angles = rng.normal(0.0, ANGLE_INIT_SCALE, size=AnsatzParams.vector_length(n_sites, depth) - n_sites)
    return np.concatenate([theta, angles])


def _window_converged(trace: list[tuple[int, float]], window: int, tol: float) -> bool:
    return len(trace) > window and abs(trace[-1][1] - trace[-1 - window][1]) < tol


def _run_adam(evaluator: BatchEvaluator, x0: np.ndarray, config: OptimizerConfig, index: int) -> RestartOutcome:
    x = x0.copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    best_x, best_f = x.copy(), math.inf
    trace: list[tuple[int, float]] = []
    converged = False
    iteration = 0
    for iteration in range(1, config.max_iters + 1):
        value, grad = evaluator.value_and_gradient(x)
        if value < best_f:
            best_f, best_x = value, x.copy()
        trace.append((iteration - 1, best_f))
        if _window_converged(trace, config.window, config.tol):
            converged = True
            break
        m = ADAM_BETA1 * m + (1 - ADAM_BETA1) * grad
        v = ADAM_BETA2 * v + (1 - ADAM_BETA2) * grad**2
        m_hat = m / (1 - ADAM_BETA1**iteration)
        v_hat = v / (1 - ADAM_BETA2**iteration)
        x = x - config.step * m_hat / (np.sqrt(v_hat) + ADAM_EPSILON)
    return RestartOutcome(index, best_x, best_f, converged, iteration, trace)


def _run_simplex(evaluator: BatchEvaluator, x0: np.ndarray, config: OptimizerConfig, index: int) -> RestartOutcome:
    trace: list[tuple[int, float]] = []

    def callback(intermediate_result) -> None:
        best = min(float(intermediate_result.fun), trace[-1][1] if trace else math.inf)
        trace.append((len(trace), best))

    result = scipy_minimize(
        evaluator.free_energy,
        x0,
        method="Nelder-Mead",
        callback=callback,
        options={"maxiter": config.max_iters, "fatol": config.tol, "xatol": 1e-8, "adaptive": True},
    )
    value = float(result.fun)
    if not trace or value < trace[-1][1]:
        trace.append((len(trace), value))
    converged = bool(result.success) or _window_converged(trace, config.window, config.tol)
    return RestartOutcome(index, np.asarray(result.x, dtype=float), value, converged, int(result.nit), trace)


def _polish(evaluator: BatchEvaluator, outcome: RestartOutcome, config: OptimizerConfig) -> RestartOutcome:
    result = scipy_minimize(
        evaluator.value_and_gradient,
        outcome.vector,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": config.polish_iters},
    )
    if float(result.fun) < outcome.free_energy:
        outcome.vector = np.asarray(result.x, dtype=float)
        outcome.free_energy = float(result.fun)
        outcome.trace.append((len(outcome.trace), outcome.free_energy))
        # L-BFGS-B success alone does not count as convergence
        outcome.converged = outcome.converged or _window_converged(outcome.trace, config.window, config.tol)
    return outcome


def _run_restart(
    evaluator: BatchEvaluator, config: OptimizerConfig, index: int, start: np.ndarray
) -> RestartOutcome:
    logger.debug("Restart %d starting (seed=%d)", index, config.seed)
    if config.optimizer == "simplex":
        outcome = _run_simplex(evaluator, start, config, index)
    else:
        outcome = _run_adam(evaluator, start, config, index)
        if config.polish and config.polish_iters > 0:
            outcome = _polish(evaluator, outcome, config)
    if not outcome.converged:
        logger.warning(
            "Restart %d did not converge within %d iterations (F=%.10f)",
            index,
            config.max_iters,
            outcome.free_energy,
        )
    else:
        logger.debug("Restart %d finished: F=%.10f after %d iterations", index, outcome.free_energy, outcome.iterations)
    return outcome


def minimize(
    spec: ObjectiveSpec,
    config: OptimizerConfig,
    *,
    initial: AnsatzParams | None = None,
    workers: int = 1,
) -> ThermalResult:
    """Best-of-restarts minimisation of the variational free energy.

    Ties between restarts go to the lowest restart index. ``initial`` replaces
    the random start of restart 0.
    """
    n_sites, depth = spec.n_sites, config.depth
    if initial is not None:
        _check_dimensions(spec, initial)
        if initial.depth != depth:
            raise DimensionMismatchError(f"Warm start has depth {initial.depth}, config asks for {depth}")
    evaluator = BatchEvaluator(spec, depth, config.fd_step)

    starts = [initial_vector(n_sites, depth, config.seed, r) for r in range(config.restarts)]
    if initial is not None:
        starts[0] = initial.to_vector()

    if workers > 1 and config.restarts > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes = list(
                executor.map(lambda r: _run_restart(evaluator, config, r, starts[r]), range(config.restarts))
            )
    else:
        outcomes = [_run_restart(evaluator, config, r, starts[r]) for r in range(config.restarts)]

    best = outcomes[0]
    for outcome in outcomes[1:]:
        if outcome.free_energy < best.free_energy:
            best = outcome

    params = AnsatzParams.from_vector(best.vector, n_sites, depth)
    values = objective(spec, params)
    logger.info(
        "Minimised F=%.10f (E=%.8f, S=%.8f) at beta=%.4g, p=%d; best restart %d of %d",
        values.free_energy,
        values.energy,
        values.entropy,
        spec.beta,
        depth,
        best.index,
        config.restarts,
    )
    return ThermalResult(
        free_energy=values.free_energy,
        energy=values.energy,
        entropy=values.entropy,
        beta=spec.beta,
        params=params,
        trace=tuple((int(i), float(f)) for i, f in best.trace),
        seed=config.seed,
        restarts_used=config.restarts,
        best_restart=best.index,
        converged=best.converged,
    )


__all__ = [
    "BatchEvaluator",
    "ObjectiveSpec",
    "gradient",
    "initial_vector",
    "minimize",
    "objective",
]
