"""Data models shared by the simulator core, the sweep harness and the CLI."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Literal, NamedTuple, Sequence, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.errors import ConfigError, DimensionMismatchError, short_error_message

SPACING_TOLERANCE = 1e-12
DEFAULT_LATTICE_SPACING = 0.5

ModelT = TypeVar("ModelT", bound=BaseModel)


def build_model(model_cls: type[ModelT], data: Any) -> ModelT:
    """Validate ``data`` into ``model_cls``, turning pydantic failures into ConfigError."""
    try:
        return model_cls.model_validate(data)
    except ValidationError as exc:
        details = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or model_cls.__name__}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(short_error_message(ValueError(details))) from exc


def _check_finite(values: Sequence[float], name: str) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if not all(math.isfinite(v) for v in out):
        raise ValueError(f"{name} must contain only finite values")
    return out


# ---------------------------------------------------------------------
# Physical model
# ---------------------------------------------------------------------


class SchwingerParams(BaseModel):
    """Physical parameters of one lattice Schwinger Hamiltonian.

    ``lattice_spacing`` and ``hopping`` are tied by hopping = 1/(2a). Supplying one
    determines the other; supplying neither selects a = 0.5, hopping = 1.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_sites: int = Field(..., ge=2, description="Number of staggered sites N (even)")
    mass: float = Field(1.0, description="Fermion mass m")
    coupling: float = Field(1.0, ge=0.0, description="Gauge coupling g")
    lattice_spacing: float = Field(DEFAULT_LATTICE_SPACING, gt=0.0, description="Lattice spacing a")
    hopping: float = Field(1.0, gt=0.0, description="Hopping amplitude 1/(2a)")
    background_field: float = Field(0.0, description="Background electric field epsilon")
    chemical_potential: float = Field(0.0, description="Chemical potential mu")
    electric_convention: Literal["gauss", "literal"] = Field(
        "gauss", description="'gauss' keeps the 1/2 inside L_j, 'literal' drops it"
    )

    @model_validator(mode="before")
    @classmethod
    def _resolve_spacing(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        spacing = data.get("lattice_spacing")
        hopping = data.get("hopping")
        if spacing is None and hopping is None:
            data["lattice_spacing"] = DEFAULT_LATTICE_SPACING
            data["hopping"] = 1.0 / (2.0 * DEFAULT_LATTICE_SPACING)
        elif hopping is None:
            if float(spacing) <= 0:
                raise ValueError("lattice_spacing must be positive")
            data["hopping"] = 1.0 / (2.0 * float(spacing))
        elif spacing is None:
            if float(hopping) <= 0:
                raise ValueError("hopping must be positive")
            data["lattice_spacing"] = 1.0 / (2.0 * float(hopping))
        elif float(spacing) <= 0 or abs(float(hopping) - 1.0 / (2.0 * float(spacing))) > SPACING_TOLERANCE:
            raise ValueError(f"hopping={hopping} is inconsistent with lattice_spacing={spacing} (need 1/(2a))")
        return data

    @field_validator("n_sites")
    @classmethod
    def _even_sites(cls, value: int) -> int:
        if value % 2:
            raise ValueError(f"n_sites must be even, got {value}")
        return value

    @field_validator("mass", "coupling", "background_field", "chemical_potential")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("parameter must be finite")
        return value

    @property
    def kappa(self) -> float:
        """Prefactor of the fermion sum inside L_j."""
        return 0.5 if self.electric_convention == "gauss" else 1.0

    def replace(self, **changes: Any) -> SchwingerParams:
        """Validated copy with ``changes`` applied; changing a or hopping re-derives the other."""
        data = self.model_dump()
        if "lattice_spacing" in changes and "hopping" not in changes:
            data.pop("hopping")
        if "hopping" in changes and "lattice_spacing" not in changes:
            data.pop("lattice_spacing")
        data.update(changes)
        return build_model(SchwingerParams, data)


# ---------------------------------------------------------------------
# Variational parameters
# ---------------------------------------------------------------------


class RotationBlock(BaseModel):
    """One block of the layered unitary: Z layer, X layer, then ZZ layer."""

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    zeta: tuple[float, ...]
    lambda_: tuple[float, ...] = Field(..., alias="lambda")
    alpha: tuple[float, ...]

    @field_validator("zeta", "lambda_", "alpha", mode="before")
    @classmethod
    def _to_floats(cls, value: Any) -> tuple[float, ...]:
        return _check_finite(np.asarray(value, dtype=float).ravel().tolist(), "rotation angles")

    @model_validator(mode="after")
    def _check_lengths(self) -> RotationBlock:
        n = len(self.zeta)
        if n < 1 or len(self.lambda_) != n or len(self.alpha) != n - 1:
            raise ValueError(
                f"block needs N zeta, N lambda and N-1 alpha angles, got "
                f"{len(self.zeta)}/{len(self.lambda_)}/{len(self.alpha)}"
            )
        return self

    @property
    def n_sites(self) -> int:
        return len(self.zeta)


class AnsatzParams(BaseModel):
    """Mixing angles theta plus the rotation blocks of the layered unitary."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    theta: tuple[float, ...]
    blocks: tuple[RotationBlock, ...] = ()

    @field_validator("theta", mode="before")
    @classmethod
    def _theta_floats(cls, value: Any) -> tuple[float, ...]:
        return _check_finite(np.asarray(value, dtype=float).ravel().tolist(), "theta")

    @model_validator(mode="after")
    def _check_sites(self) -> AnsatzParams:
        if not self.theta:
            raise ValueError("theta must not be empty")
        for index, block in enumerate(self.blocks, start=1):
            if block.n_sites != len(self.theta):
                raise ValueError(f"block {index} acts on {block.n_sites} sites, theta has {len(self.theta)}")
        return self

    @property
    def n_sites(self) -> int:
        return len(self.theta)

    @property
    def depth(self) -> int:
        return len(self.blocks)

    @staticmethod
    def vector_length(n_sites: int, depth: int) -> int:
        return n_sites + depth * (3 * n_sites - 1)

    @classmethod
    def zeros(cls, n_sites: int, depth: int) -> AnsatzParams:
        return cls.from_vector(np.zeros(cls.vector_length(n_sites, depth)), n_sites, depth)

    def to_vector(self) -> np.ndarray:
        """Flat layout: theta, then per block zeta, lambda, alpha."""
        parts = [self.theta]
        for block in self.blocks:
            parts.extend((block.zeta, block.lambda_, block.alpha))
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    @classmethod
    def from_vector(cls, vector: Sequence[float] | np.ndarray, n_sites: int, depth: int) -> AnsatzParams:
        vec = np.asarray(vector, dtype=float).ravel()
        expected = cls.vector_length(n_sites, depth)
        if vec.size != expected:
            raise DimensionMismatchError(
                f"Parameter vector has {vec.size} entries, expected {expected} for N={n_sites}, p={depth}"
            )
        theta = vec[:n_sites]
        blocks = []
        offset = n_sites
        for _ in range(depth):
            zeta = vec[offset : offset + n_sites]
            lam = vec[offset + n_sites : offset + 2 * n_sites]
            alpha = vec[offset + 2 * n_sites : offset + 3 * n_sites - 1]
            blocks.append(RotationBlock(zeta=zeta, alpha=alpha, **{"lambda": lam}))
            offset += 3 * n_sites - 1
        return cls(theta=theta, blocks=tuple(blocks))

    def to_document(self) -> dict[str, Any]:
        """JSON-ready {theta, blocks: [{zeta, lambda, alpha}]} checkpoint document."""
        return self.model_dump(mode="json", by_alias=True)


# ---------------------------------------------------------------------
# Optimizer and sweep configuration
# ---------------------------------------------------------------------


class OptimizerConfig(BaseModel):
    """Settings for the restart-capable free-energy minimizer."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    depth: int = Field(2, ge=0, description="Number of rotation blocks p")
    restarts: int = Field(8, ge=1)
    max_iters: int = Field(2000, ge=1)
    tol: float = Field(1e-7, gt=0.0, description="Free-energy change tolerance over `window` iterations")
    step: float = Field(0.05, gt=0.0, description="Adam step size")
    optimizer: Literal["gradient", "simplex"] = "gradient"
    seed: int = Field(0, ge=0)
    window: int = Field(25, ge=1)
    fd_step: float = Field(1e-4, gt=0.0, description="Central-difference step for energy gradients")
    polish: bool = True
    polish_iters: int = Field(200, ge=0)


class GridSpec(BaseModel):
    """Sweep axes. Exactly one of ``beta`` / ``temperature`` (alias ``T``) is given."""

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    beta: tuple[float, ...] | None = None
    temperature: tuple[float, ...] | None = Field(None, alias="T")
    epsilon: tuple[float, ...] = Field((0.0,), min_length=1)
    mu: tuple[float, ...] = Field((0.0,), min_length=1)
    depth: tuple[int, ...] | None = Field(None, min_length=1)

    @model_validator(mode="after")
    def _check_axes(self) -> GridSpec:
        if (self.beta is None) == (self.temperature is None):
            raise ValueError("exactly one of 'beta' or 'T' grids must be supplied")
        axis = self.beta if self.beta is not None else self.temperature
        if not axis:
            raise ValueError("temperature grid must not be empty")
        if not all(math.isfinite(v) and v > 0 for v in axis):
            raise ValueError("beta / T values must be finite and positive")
        for name in ("epsilon", "mu"):
            _check_finite(getattr(self, name), name)
        if self.depth is not None and any(d < 0 for d in self.depth):
            raise ValueError("depth values must be non-negative")
        return self

    @property
    def betas(self) -> tuple[float, ...]:
        if self.beta is not None:
            return self.beta
        return tuple(1.0 / t for t in self.temperature or ())

    def depths(self, default: int) -> tuple[int, ...]:
        return self.depth if self.depth is not None else (default,)

    def n_points(self, default_depth: int) -> int:
        return len(self.betas) * len(self.epsilon) * len(self.mu) * len(self.depths(default_depth))


class SweepConfig(BaseModel):
    """One sweep: model template, grid axes, optimizer settings and output target."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    model: SchwingerParams
    grid: GridSpec
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    mode: Literal["variational", "exact", "both"] = "both"
    output_path: Path = Path("results/sweep.csv")
    workers: int = Field(1, ge=1)
    max_points: int = Field(2000, ge=1, description="Upper bound on grid points per sweep")

    @model_validator(mode="after")
    def _check_budget(self) -> SweepConfig:
        points = self.grid.n_points(self.optimizer.depth)
        if points > self.max_points:
            raise ValueError(f"grid has {points} points, exceeding max_points={self.max_points}")
        return self

    @model_validator(mode="after")
    def _fields_on_grid(self) -> SweepConfig:
        # the grid supplies epsilon and mu per point; a model value would be silently replaced
        for name, axis in (("background_field", "epsilon"), ("chemical_potential", "mu")):
            if getattr(self.model, name) != 0.0:
                raise ValueError(f"model.{name} is not used by sweeps; list it under grid.{axis}")
        return self

    @property
    def depths(self) -> tuple[int, ...]:
        return self.grid.depths(self.optimizer.depth)


# ---------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------


class ThermalValues(NamedTuple):
    free_energy: float
    energy: float
    entropy: float


class ThermalResult(BaseModel):
    """Outcome of one variational minimisation (best over restarts).

    ``converged`` means the best-so-far trace moved less than ``tol`` over the last
    ``window`` entries. The simplex path also accepts Nelder-Mead's own fatol stop.
    """

    model_config = ConfigDict(frozen=True)

    free_energy: float
    energy: float
    entropy: float
    beta: float = Field(..., gt=0.0)
    params: AnsatzParams
    trace: tuple[tuple[int, float], ...] = ()
    seed: int
    restarts_used: int = Field(..., ge=1)
    best_restart: int = Field(0, ge=0)
    converged: bool

    @model_validator(mode="after")
    def _check_consistency(self) -> ThermalResult:
        scale = max(1.0, abs(self.energy) + abs(self.entropy / self.beta))
        if abs(self.free_energy - (self.energy - self.entropy / self.beta)) > 1e-10 * scale:
            raise ValueError("free_energy must equal energy - entropy / beta")
        return self


CSV_COLUMNS: tuple[str, ...] = (
    "T",
    "beta",
    "epsilon",
    "mu",
    "depth",
    "F_var",
    "E_var",
    "S_var",
    "F_exact",
    "sigma_var",
    "sigma_exact",
    "converged",
    "seed",
    "wall_time_ms",
)


@dataclass(slots=True, frozen=True)
class SweepRow:
    """One grid point. Variational fields are None in exact mode and vice versa."""

    T: float
    beta: float
    epsilon: float
    mu: float
    depth: int
    seed: int
    F_var: float | None = None
    E_var: float | None = None
    S_var: float | None = None
    F_exact: float | None = None
    sigma_var: float | None = None
    sigma_exact: float | None = None
    converged: bool | None = None
    wall_time_ms: float = 0.0
    F0_var: float | None = None
    F0_exact: float | None = None
    trace: tuple[tuple[int, float], ...] = field(default=(), repr=False)

    def csv_record(self) -> dict[str, Any]:
        record = asdict(self)
        return {name: record[name] for name in CSV_COLUMNS}

    def audit_record(self) -> dict[str, Any]:
        record = asdict(self)
        record["trace"] = [list(point) for point in self.trace]
        return record


@dataclass(slots=True, frozen=True)
class SweepReport:
    """Paths and rows produced by one study."""

    study: str
    rows: tuple[SweepRow, ...]
    csv_path: Path
    audit_path: Path
    extra_paths: tuple[Path, ...] = ()
