"""Spatial adiabatic passage of an interacting boson pair."""

from _sapsim import (
    SERIES_COLUMNS,
    ConfigError,
    NumericalError,
    ResourceError,
    __version__,
    energy_from_g,
    g_from_energy,
    hubbard_run,
    rate_table,
    run_sap,
    run_scenario,
    scenario_hash,
    trap_positions,
    validate_scenario,
)

__all__ = [
    "SERIES_COLUMNS",
    "ConfigError",
    "NumericalError",
    "ResourceError",
    "__version__",
    "energy_from_g",
    "g_from_energy",
    "hubbard_run",
    "rate_table",
    "run_sap",
    "run_scenario",
    "scenario_hash",
    "trap_positions",
    "validate_scenario",
]
