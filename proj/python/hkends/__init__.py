"""Heat kernel estimates on manifolds with ends."""

from ._core import (
    DecayFit,
    Error,
    Report,
    Scenario,
    StageError,
    cone_profile,
    describe,
    describe_scenario,
    exterior_parabola_profile,
    fit_decay,
    list_scenarios,
    load_scenario,
    parse_scenario,
    run_pipeline,
)

__all__ = [
    "DecayFit",
    "Error",
    "Report",
    "Scenario",
    "StageError",
    "cone_profile",
    "describe",
    "describe_scenario",
    "exterior_parabola_profile",
    "fit_decay",
    "list_scenarios",
    "load_scenario",
    "parse_scenario",
    "run_pipeline",
]
