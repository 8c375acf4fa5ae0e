"""Application layer."""

from cqed_anyons.application.interferometry import (
    BraidingPhase,
    InterferometryResult,
    InterferometryVariant,
    run_interferometry,
)
from cqed_anyons.application.models import (
    InvariantCheck,
    PhysicsInvariantError,
    SimulationError,
    SweepPoint,
    UsageError,
)
from cqed_anyons.application.toric import (
    MinimalLattice,
    PreparedState,
    prepare_ground_state,
)

__all__ = [
    "BraidingPhase",
    "InterferometryResult",
    "InterferometryVariant",
    "InvariantCheck",
    "MinimalLattice",
    "PhysicsInvariantError",
    "PreparedState",
    "SimulationError",
    "SweepPoint",
    "UsageError",
    "prepare_ground_state",
    "run_interferometry",
]
