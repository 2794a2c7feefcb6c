"""Config document loading: packaged study defaults, user files and CLI overrides."""

from __future__ import annotations

import copy
import os
from pathlib import Path
from typing import Any, Mapping

import yaml

from app.errors import ConfigError
from app.models import OptimizerConfig, SchwingerParams, SweepConfig, build_model
from app.utils.logger import setup_logging

logger = setup_logging(__name__, level="DEBUG")

PROJECT_ROOT = Path(__file__).resolve().parent.parent
SWEEP_CONFIG_DIR = PROJECT_ROOT / "config" / "sweeps"
STUDIES = ("convergence", "tension", "surface")
TEMPERATURE_KEYS = ("beta", "T", "temperature")


def _resolve_path(path: str | Path) -> Path:
    candidate = Path(os.path.expandvars(str(path))).expanduser()
    return candidate if candidate.is_absolute() else (Path.cwd() / candidate).resolve()


def default_config_path(study: str) -> Path:
    if study not in STUDIES:
        raise ConfigError(f"Unknown study '{study}'. Available: {list(STUDIES)}")
    return SWEEP_CONFIG_DIR / f"{study}.yaml"


def load_document(path: str | Path) -> dict[str, Any]:
    """Read a YAML (or JSON) mapping from ``path``."""
    resolved = _resolve_path(path)
    try:
        text = resolved.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read config file {resolved}: {exc.strerror or exc}") from exc
    try:
        document = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"Config file {resolved} is not valid YAML: {exc}") from exc
    if not isinstance(document, dict):
        raise ConfigError(f"Config file {resolved} must contain a mapping at the top level")
    logger.debug("Loaded config document %s with keys %s", resolved, sorted(document))
    return document


def deep_merge(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    """Recursively overlay ``overrides`` on ``base``; None values in overrides are ignored."""
    merged = copy.deepcopy(dict(base))
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _merge_layer(base: dict[str, Any], layer: Mapping[str, Any]) -> dict[str, Any]:
    """deep_merge where a later layer's a (or hopping) replaces the earlier pair."""
    base = copy.deepcopy(base)
    model_layer = layer.get("model") or {}
    model_base = base.get("model")
    if isinstance(model_base, dict) and isinstance(model_layer, Mapping):
        given = {k for k in ("lattice_spacing", "hopping") if model_layer.get(k) is not None}
        if len(given) == 1:
            model_base.pop("lattice_spacing", None)
            model_base.pop("hopping", None)
    grid_layer = layer.get("grid") or {}
    grid_base = base.get("grid")
    if isinstance(grid_base, dict) and any(grid_layer.get(k) is not None for k in TEMPERATURE_KEYS):
        for key in TEMPERATURE_KEYS:
            grid_base.pop(key, None)
    return deep_merge(base, layer)


def load_sweep_config(
    study: str | None = None,
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> SweepConfig:
    """Build a SweepConfig from packaged defaults < config file < overrides."""
    document: dict[str, Any] = {}
    if study is not None:
        default_path = default_config_path(study)
        if default_path.exists():
            document = load_document(default_path)
        else:
            logger.warning("No packaged defaults for study '%s' at %s", study, default_path)
    if path is not None:
        document = _merge_layer(document, load_document(path))
    if overrides:
        document = _merge_layer(document, overrides)
    if "output_path" in document and document["output_path"] is not None:
        document["output_path"] = str(_resolve_path(document["output_path"]))
    config = build_model(SweepConfig, document)
    logger.info(
        "Sweep config ready: study=%s mode=%s points=%d workers=%d",
        study or "custom",
        config.mode,
        config.grid.n_points(config.optimizer.depth),
        config.workers,
    )
    return config


def log_retention_days() -> int:
    raw = os.getenv("LOG_RETENTION_DAYS", "30")
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("Ignoring invalid LOG_RETENTION_DAYS=%s", raw)
        return 30


def _section(path: str | Path | None, key: str) -> dict[str, Any]:
    if path is None:
        return {}
    section = load_document(path).get(key) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"'{key}' section of {path} must be a mapping")
    return section


def load_model_params(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> SchwingerParams:
    """SchwingerParams from the ``model`` section of a config file, overlaid with flags."""
    document = _merge_layer({"model": _section(path, "model")}, {"model": dict(overrides or {})})
    model = document["model"]
    if model.get("n_sites") is None:
        raise ConfigError("Number of sites is required (--n or model.n_sites)")
    return build_model(SchwingerParams, model)


def load_optimizer_config(
    path: str | Path | None = None, overrides: Mapping[str, Any] | None = None
) -> OptimizerConfig:
    return build_model(OptimizerConfig, deep_merge(_section(path, "optimizer"), overrides or {}))
