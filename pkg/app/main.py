"""Command-line interface: terms | exact | optimize | sweep {convergence|tension|surface}."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import pandas as pd
from dotenv import load_dotenv

from app.config_loader import (
    STUDIES,
    load_model_params,
    load_optimizer_config,
    load_sweep_config,
    log_retention_days,
)
from app.core.exact_oracle import (
    exact_free_energy,
    gibbs_state,
    state_fidelity,
    tension_from_free_energies,
    trace_distance,
)
from app.core.free_energy import ObjectiveSpec, minimize
from app.core.pauli_algebra import format_terms
from app.core.schwinger_model import build_hamiltonian, electric_field_profile
from app.core.thermal_ansatz import load_checkpoint, realize_state, save_checkpoint
from app.errors import ConfigError, ErrorCode, OutputError, SimulationError, short_error_message
from app.experiments import SweepOrchestrator
from app.utils.logger import cleanup_old_logs, reconfigure_loggers, setup_logging

logger = setup_logging(__name__, level="INFO")

EXIT_CODE_MAP: dict[ErrorCode, int] = {
    ErrorCode.CONFIG_ERROR: 1,
    ErrorCode.SIZE_LIMIT_EXCEEDED: 2,
    ErrorCode.DIMENSION_MISMATCH: 2,
    ErrorCode.NUMERICAL_ERROR: 2,
    ErrorCode.IO_ERROR: 2,
    ErrorCode.INTERNAL_ERROR: 2,
}

DEFAULT_TEMPERATURES: tuple[float, ...] = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0)
EXACT_COLUMNS: tuple[str, ...] = ("beta", "T", "F", "E", "S", "sigma", "epsilon", "mu")


class _ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as ConfigError so they map to exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------
# Argument helpers
# ---------------------------------------------------------------------


def _add_model_flags(parser: argparse.ArgumentParser, *, field_lists: bool = False) -> None:
    group = parser.add_argument_group("model")
    nargs = "+" if field_lists else None
    group.add_argument("--n", type=int, help="Number of sites N (even)")
    group.add_argument("--m", type=float, help="Fermion mass")
    group.add_argument("--g", type=float, help="Gauge coupling")
    group.add_argument("--a", type=float, help="Lattice spacing (hopping = 1/(2a))")
    group.add_argument("--hopping", type=float, help="Hopping amplitude")
    group.add_argument("--epsilon", type=float, nargs=nargs, help="Background electric field (list on exact and sweep)")
    group.add_argument("--mu", type=float, nargs=nargs, help="Chemical potential (list on exact and sweep)")
    group.add_argument("--convention", choices=["gauss", "literal"], help="Electric-field convention")


def _add_optimizer_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("optimizer")
    group.add_argument("--depth", type=int, help="Number of rotation blocks p")
    group.add_argument("--restarts", type=int)
    group.add_argument("--max-iters", dest="max_iters", type=int)
    group.add_argument("--tol", type=float)
    group.add_argument("--step", type=float)
    group.add_argument("--optimizer", choices=["gradient", "simplex"])


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="YAML/JSON config document")
    parser.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")


def _model_overrides(args: argparse.Namespace, *, include_fields: bool = True) -> dict[str, Any]:
    overrides = {
        "n_sites": args.n,
        "mass": args.m,
        "coupling": args.g,
        "lattice_spacing": args.a,
        "hopping": args.hopping,
        "background_field": args.epsilon,
        "chemical_potential": args.mu,
        "electric_convention": args.convention,
    }
    if not include_fields:
        overrides.pop("background_field")
        overrides.pop("chemical_potential")
    return overrides


def _optimizer_overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "depth": getattr(args, "depth", None),
        "restarts": getattr(args, "restarts", None),
        "max_iters": getattr(args, "max_iters", None),
        "tol": getattr(args, "tol", None),
        "step": getattr(args, "step", None),
        "optimizer": getattr(args, "optimizer", None),
        "seed": getattr(args, "seed", None),
    }


def _grid_overrides(args: argparse.Namespace) -> dict[str, Any]:
    # epsilon and mu are grid axes on a sweep, never model fields
    return {
        "beta": args.beta,
        "T": args.temperature,
        "epsilon": args.epsilon,
        "mu": args.mu,
        "depth": args.depths,
    }


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"Cannot write {out}: {exc.strerror or exc}") from exc
    logger.info("Wrote %s", out)


def _betas(args: argparse.Namespace) -> list[float]:
    if args.beta and args.temperature:
        raise ConfigError("Give either --beta or --T, not both")
    if args.beta:
        values = list(args.beta)
    else:
        values = [1.0 / t if t > 0 else float("nan") for t in (args.temperature or DEFAULT_TEMPERATURES)]
    if not all(v > 0 for v in values):
        raise ConfigError("beta and T values must be positive")
    return values


# ---------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------


def _cmd_terms(args: argparse.Namespace) -> int:
    params = load_model_params(args.config, _model_overrides(args))
    _emit(format_terms(build_hamiltonian(params)), args.out)
    return 0


def _cmd_exact(args: argparse.Namespace) -> int:
    base = load_model_params(args.config, _model_overrides(args, include_fields=False))
    epsilons = args.epsilon or [base.background_field]
    mus = args.mu or [base.chemical_potential]
    records = []
    for beta in _betas(args):
        for epsilon in epsilons:
            for mu in mus:
                params = base.replace(background_field=epsilon, chemical_potential=mu)
                free, energy, ent = exact_free_energy(build_hamiltonian(params), beta)
                sigma = None
                if params.coupling > 0:
                    reference = build_hamiltonian(params.replace(background_field=0.0))
                    sigma = tension_from_free_energies(free, exact_free_energy(reference, beta).free_energy, params)
                records.append(
                    {
                        "beta": beta,
                        "T": 1.0 / beta,
                        "F": free,
                        "E": energy,
                        "S": ent,
                        "sigma": sigma,
                        "epsilon": epsilon,
                        "mu": mu,
                    }
                )
    frame = pd.DataFrame.from_records(records, columns=EXACT_COLUMNS)
    _emit(frame.to_csv(index=False), args.out)
    return 0


def _cmd_optimize(args: argparse.Namespace) -> int:
    params = load_model_params(args.config, _model_overrides(args))
    optimizer = load_optimizer_config(args.config, _optimizer_overrides(args))
    hamiltonian = build_hamiltonian(params)
    initial = load_checkpoint(args.resume) if args.resume else None
    if initial is not None and args.depth is None:
        optimizer = optimizer.model_copy(update={"depth": initial.depth})
    result = minimize(ObjectiveSpec(hamiltonian, args.beta), optimizer, initial=initial, workers=args.workers)

    exact = exact_free_energy(hamiltonian, args.beta)
    rho = realize_state(result.params)
    target = gibbs_state(hamiltonian, args.beta)
    summary = {
        "n_sites": params.n_sites,
        "beta": args.beta,
        "depth": optimizer.depth,
        "free_energy": result.free_energy,
        "energy": result.energy,
        "entropy": result.entropy,
        "exact_free_energy": exact.free_energy,
        "relative_gap": abs(result.free_energy - exact.free_energy) / abs(exact.free_energy)
        if exact.free_energy
        else None,
        "fidelity": state_fidelity(rho, target),
        "trace_distance": trace_distance(rho, target),
        "electric_field_profile": electric_field_profile(params, rho),
        "converged": result.converged,
        "restarts": result.restarts_used,
        "best_restart": result.best_restart,
        "seed": result.seed,
        "iterations": len(result.trace),
    }
    if args.checkpoint:
        save_checkpoint(result.params, args.checkpoint)
        summary["checkpoint"] = str(args.checkpoint)
    _emit(json.dumps(summary, indent=2), args.out)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    overrides = {
        "model": _model_overrides(args, include_fields=False),
        "grid": _grid_overrides(args),
        "optimizer": _optimizer_overrides(args),
        "mode": args.mode,
        "workers": args.workers,
        "output_path": str(args.out) if args.out else None,
    }
    config = load_sweep_config(args.study, args.config, overrides)
    report = SweepOrchestrator(config, study=args.study).run()
    sys.stdout.write(f"{report.csv_path}\n{report.audit_path}\n")
    for path in report.extra_paths:
        sys.stdout.write(f"{path}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="schwinger-thermal",
        description="Variational Gibbs states and string tension of the lattice Schwinger model",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    terms = subparsers.add_parser("terms", help="Print the Hamiltonian as '<coefficient> <string>' lines")
    _add_common_flags(terms)
    _add_model_flags(terms)
    terms.add_argument("--out", type=Path)
    terms.set_defaults(handler=_cmd_terms)

    exact = subparsers.add_parser("exact", help="Exact F, E, S and sigma over a temperature grid (CSV)")
    _add_common_flags(exact)
    _add_model_flags(exact, field_lists=True)
    exact.add_argument("--beta", type=float, nargs="+")
    exact.add_argument("--T", dest="temperature", type=float, nargs="+")
    exact.add_argument("--out", type=Path)
    exact.set_defaults(handler=_cmd_exact)

    optimize = subparsers.add_parser("optimize", help="One variational solve with comparison to the exact state")
    _add_common_flags(optimize)
    _add_model_flags(optimize)
    _add_optimizer_flags(optimize)
    optimize.add_argument("--beta", type=float, default=1.0)
    optimize.add_argument("--seed", type=int)
    optimize.add_argument("--workers", type=int, default=1, help="Threads for independent restarts")
    optimize.add_argument("--resume", type=Path, help="Warm-start restart 0 from a checkpoint")
    optimize.add_argument("--checkpoint", type=Path, help="Write the optimised parameters here")
    optimize.add_argument("--out", type=Path)
    optimize.set_defaults(handler=_cmd_optimize)

    sweep = subparsers.add_parser("sweep", help="Run a parameter study and write CSV + JSON audit")
    sweep.add_argument("study", choices=list(STUDIES))
    _add_common_flags(sweep)
    _add_model_flags(sweep, field_lists=True)
    _add_optimizer_flags(sweep)
    grid = sweep.add_argument_group("grid")
    grid.add_argument("--beta", type=float, nargs="+", help="Inverse-temperature axis")
    grid.add_argument("--T", dest="temperature", type=float, nargs="+", help="Temperature axis")
    grid.add_argument("--depths", type=int, nargs="+", help="Depth axis (overrides --depth)")
    sweep.add_argument("--mode", choices=["variational", "exact", "both"])
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--workers", type=int)
    sweep.add_argument("--out", type=Path, help="CSV output path")
    sweep.set_defaults(handler=_cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.log_level:
            reconfigure_loggers(args.log_level.upper())
        cleanup_old_logs(log_retention_days())
        return args.handler(args)
    except SimulationError as exc:
        message = short_error_message(exc)
        logger.error("%s: %s", exc.error_code.value, message)
        sys.stderr.write(f"error [{exc.error_code.value}]: {message}\n")
        return EXIT_CODE_MAP.get(exc.error_code, 2)
    except Exception as exc:  # noqa: BLE001
        logger.exception("Unexpected failure: %s", exc)
        sys.stderr.write(f"error [{ErrorCode.INTERNAL_ERROR.value}]: {short_error_message(exc)}\n")
        return EXIT_CODE_MAP[ErrorCode.INTERNAL_ERROR]


if __name__ == "__main__":
    sys.exit(main())
