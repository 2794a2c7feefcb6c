"""Orchestrator for the three sweep studies: convergence, tension vs T and the (T, mu) surface."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

from app.errors import ConfigError
from app.experiments.analysis import convergence_gaps, log_tension_frame, tension_fits, tension_trends
from app.experiments.runner import GridPoint, PointRunner, expand_grid
from app.experiments.writer import SweepWriter
from app.models import SweepConfig, SweepReport, SweepRow
from app.utils.logger import setup_logging

logger = setup_logging(__name__, level="INFO")


class SweepOrchestrator:
    """Runs grid points on a bounded worker pool and persists tables in grid order."""

    def __init__(
        self,
        config: SweepConfig,
        *,
        study: str = "custom",
        fit_window: tuple[float, float] | None = None,
    ) -> None:
        self.config = config
        self.study = study
        self.fit_window = fit_window
        self.writer = SweepWriter(config.output_path)

    def run(self) -> SweepReport:
        studies: dict[str, Callable[[], SweepReport]] = {
            "convergence": self.run_convergence_study,
            "tension": self.run_tension_vs_temperature,
            "surface": self.run_tension_surface,
        }
        if self.study not in studies:
            raise ConfigError(f"Unknown study '{self.study}'. Available: {sorted(studies)}")
        return studies[self.study]()

    def run_convergence_study(self) -> SweepReport:
        rows = self._sweep("convergence")
        summary = {"convergence": convergence_gaps(rows)}
        for beta, entry in summary["convergence"].items():
            if not entry["non_increasing"]:
                logger.warning("Free-energy gap at beta=%s does not shrink monotonically with depth", beta)
        return self._persist("convergence", rows, summary)

    def run_tension_vs_temperature(self) -> SweepReport:
        if any(mu != 0 for mu in self.config.grid.mu):
            raise ConfigError("The tension study runs at mu = 0; use the surface study for finite mu")
        self._require_coupling()
        rows = self._sweep("tension")
        log_path = self.writer.write_table(log_tension_frame(rows), self.writer.sibling("_log_tension.csv"))
        summary = {
            "log_tension_fits": tension_fits(rows, self.fit_window),
            "fit_window": list(self.fit_window) if self.fit_window else None,
            "decreasing_in_T": tension_trends(rows),
        }
        return self._persist("tension", rows, summary, extra_paths=(log_path,))

    def run_tension_surface(self) -> SweepReport:
        if len(self.config.grid.epsilon) != 1:
            raise ConfigError("The surface study uses a single epsilon value")
        self._require_coupling()
        rows = self._sweep("surface")
        summary = {
            "decreasing_in_T": tension_trends(rows),
            "negative_exact_points": sum(1 for r in rows if r.sigma_exact is not None and r.sigma_exact < 0),
            "negative_var_points": sum(1 for r in rows if r.sigma_var is not None and r.sigma_var < 0),
        }
        return self._persist("surface", rows, summary)

    # ------------------------------------------------------------------
    # Internal helpers
    # ------------------------------------------------------------------

    def _require_coupling(self) -> None:
        if self.config.model.coupling <= 0:
            raise ConfigError("String tension requires coupling g > 0")

    def _sweep(self, study: str) -> list[SweepRow]:
        points = expand_grid(self.config)
        workers = self.config.workers
        logger.info(
            "Starting %s sweep: %d points, mode=%s, workers=%d", study, len(points), self.config.mode, workers
        )
        runner = PointRunner(self.config)
        runner.prepare(points, workers)
        if workers == 1:
            return [runner.evaluate(point) for point in points]
        with ThreadPoolExecutor(max_workers=workers) as executor:
            # map yields in submission order, i.e. grid order
            return list(executor.map(runner.evaluate, points))

    def _persist(
        self,
        study: str,
        rows: list[SweepRow],
        summary: dict,
        extra_paths: tuple = (),
    ) -> SweepReport:
        csv_path = self.writer.write_rows(rows)
        audit_path = self.writer.write_audit(
            {
                "study": study,
                "config": self.config.model_dump(mode="json", by_alias=True),
                "summary": summary,
                "rows": [row.audit_record() for row in rows],
            }
        )
        logger.info("%s study finished: %d rows", study.capitalize(), len(rows))
        return SweepReport(study, tuple(rows), csv_path, audit_path, tuple(extra_paths))


__all__ = ["GridPoint", "SweepOrchestrator"]
