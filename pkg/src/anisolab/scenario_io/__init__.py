"""Scenario configs, the built-in catalog, runners, and report output."""

from .config import (
    CHECK_PARAMS,
    ScenarioConfig,
    parse_scenario,
    serialize_scenario,
    validate_config,
)
from .catalog import CATALOG_TEXTS, catalog_config, catalog_names
from .runner import build_chart, build_field, build_scenario, run_check, run_config
from .report import (
    CheckReport,
    ReportDocument,
    build_report,
    check_table_csv,
    emit_report,
    profile_csv,
)

__all__ = [
    "CHECK_PARAMS",
    "ScenarioConfig",
    "parse_scenario",
    "serialize_scenario",
    "validate_config",
    "CATALOG_TEXTS",
    "catalog_config",
    "catalog_names",
    "build_chart",
    "build_field",
    "build_scenario",
    "run_check",
    "run_config",
    "CheckReport",
    "ReportDocument",
    "build_report",
    "check_table_csv",
    "emit_report",
    "profile_csv",
]
