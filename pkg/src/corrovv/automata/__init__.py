"""Timed automata, rule diagrams and zone-based safety checking."""
from .checker import (
    Assumption,
    Verdict,
    Witness,
    WitnessStep,
    export_assumptions,
    reachability,
    replay_witness,
)
from .model import (
    ClockConstraint,
    DurationBound,
    Edge,
    Location,
    ModelError,
    ModelFile,
    ObservationEnvironment,
    ObservationParameter,
    RuleDiagram,
    SafetyProperty,
    Step,
    TimedAutomaton,
    compile_diagram,
    load_model,
    model_from_dict,
    parse_clock_constraints,
)

__all__ = [
    "Assumption", "ClockConstraint", "DurationBound", "Edge", "Location", "ModelError",
    "ModelFile", "ObservationEnvironment", "ObservationParameter", "RuleDiagram",
    "SafetyProperty", "Step", "TimedAutomaton", "Verdict", "Witness", "WitnessStep",
    "compile_diagram", "export_assumptions", "load_model", "model_from_dict",
    "parse_clock_constraints", "reachability", "replay_witness",
]
