"""Evaluation of single sweep grid points, with the shared eps = 0 solve cache."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from threading import Lock

from app.core.exact_oracle import exact_free_energy, tension_from_free_energies
from app.core.free_energy import ObjectiveSpec, minimize
from app.core.schwinger_model import build_hamiltonian
from app.errors import NumericalError
from app.models import SchwingerParams, SweepConfig, SweepRow, ThermalResult
from app.utils.logger import setup_logging

logger = setup_logging(__name__, level="INFO")

BOUND_TOLERANCE = 1e-9

FreeZeroKey = tuple[float, float, int, int]


@dataclass(frozen=True, slots=True)
class GridPoint:
    index: int
    beta: float
    epsilon: float
    mu: float
    depth: int

    @property
    def temperature(self) -> float:
        return 1.0 / self.beta


def expand_grid(config: SweepConfig) -> list[GridPoint]:
    """Grid points in emission order: beta (or T) outermost, then eps, mu, depth."""
    points: list[GridPoint] = []
    for beta in config.grid.betas:
        for eps in config.grid.epsilon:
            for mu in config.grid.mu:
                for depth in config.depths:
                    points.append(GridPoint(len(points), beta, eps, mu, depth))
    return points


class PointRunner:
    """Computes SweepRows; eps = 0 variational solves are shared across eps values."""

    def __init__(self, config: SweepConfig) -> None:
        self.config = config
        self.mode = config.mode
        self._free_zero: dict[FreeZeroKey, ThermalResult] = {}
        self._lock = Lock()

    def params_for(self, point: GridPoint, *, epsilon: float | None = None) -> SchwingerParams:
        eps = point.epsilon if epsilon is None else epsilon
        return self.config.model.replace(background_field=eps, chemical_potential=point.mu)

    def _key(self, point: GridPoint) -> FreeZeroKey:
        return (point.beta, point.mu, point.depth, self.config.optimizer.seed)

    def _solve(self, params: SchwingerParams, beta: float, depth: int) -> ThermalResult:
        spec = ObjectiveSpec(build_hamiltonian(params), beta)
        optimizer = self.config.optimizer.model_copy(update={"depth": depth})
        return minimize(spec, optimizer)

    def prepare(self, points: list[GridPoint], workers: int = 1) -> None:
        """Run every distinct eps = 0 solve before the grid is dispatched."""
        if self.mode == "exact":
            return
        pending: dict[FreeZeroKey, GridPoint] = {}
        for point in points:
            key = self._key(point)
            if key not in self._free_zero and key not in pending:
                pending[key] = point
        if not pending:
            return
        logger.info("Solving %d reference (eps = 0) points", len(pending))

        def solve(point: GridPoint) -> ThermalResult:
            return self._solve(self.params_for(point, epsilon=0.0), point.beta, point.depth)

        with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
            results = list(executor.map(solve, pending.values()))
        with self._lock:
            self._free_zero.update(zip(pending.keys(), results))

    def _free_zero_result(self, point: GridPoint) -> ThermalResult:
        key = self._key(point)
        with self._lock:
            cached = self._free_zero.get(key)
        if cached is not None:
            logger.debug("eps = 0 cache hit for beta=%.4g mu=%.4g p=%d", point.beta, point.mu, point.depth)
            return cached
        result = self._solve(self.params_for(point, epsilon=0.0), point.beta, point.depth)
        with self._lock:
            return self._free_zero.setdefault(key, result)

    def evaluate(self, point: GridPoint) -> SweepRow:
        start = time.perf_counter()
        params = self.params_for(point)
        fields: dict = {}

        if self.mode in ("exact", "both"):
            free_exact = exact_free_energy(build_hamiltonian(params), point.beta).free_energy
            free_zero_exact = exact_free_energy(
                build_hamiltonian(self.params_for(point, epsilon=0.0)), point.beta
            ).free_energy
            fields.update(
                F_exact=free_exact,
                F0_exact=free_zero_exact,
                sigma_exact=tension_from_free_energies(free_exact, free_zero_exact, params),
            )

        if self.mode in ("variational", "both"):
            reference = self._free_zero_result(point)
            result = reference if point.epsilon == 0 else self._solve(params, point.beta, point.depth)
            fields.update(
                F_var=result.free_energy,
                E_var=result.energy,
                S_var=result.entropy,
                F0_var=reference.free_energy,
                sigma_var=tension_from_free_energies(result.free_energy, reference.free_energy, params),
                converged=result.converged,
                trace=result.trace,
            )

        if self.mode == "both":
            self._check_bound(point, fields["F_var"], fields["F_exact"])
            self._check_bound(point, fields["F0_var"], fields["F0_exact"])

        row = SweepRow(
            T=point.temperature,
            beta=point.beta,
            epsilon=point.epsilon,
            mu=point.mu,
            depth=point.depth,
            seed=self.config.optimizer.seed,
            wall_time_ms=(time.perf_counter() - start) * 1000.0,
            **fields,
        )
        logger.info(
            "Point %d done: T=%.4g eps=%.4g mu=%.4g p=%d sigma_var=%s sigma_exact=%s",
            point.index,
            point.temperature,
            point.epsilon,
            point.mu,
            point.depth,
            row.sigma_var,
            row.sigma_exact,
        )
        return row

    @staticmethod
    def _check_bound(point: GridPoint, free_var: float, free_exact: float) -> None:
        if free_var < free_exact - BOUND_TOLERANCE:
            logger.warning(
                "Variational bound violated at point %d: F_var=%.12f < F_exact=%.12f", point.index, free_var, free_exact
            )
            raise NumericalError(
                f"Variational free energy {free_var:.12f} lies below the exact value {free_exact:.12f} "
                f"at beta={point.beta}, eps={point.epsilon}, mu={point.mu}"
            )
