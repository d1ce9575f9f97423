"""Flow engine: domains, fields, batched integration and scattering data."""
from .domain import (DegenerateMetric, DomainError, FieldSpec, FlowSystem, ImplicitDomain,
                     geodesic_field, local_model_system)
from .integrate import (BudgetExceeded, Event, Tolerances, TrajectoryRecord, integrate_trajectory,
                        tangency_multiplicity, trace)

__all__ = [
    "BudgetExceeded", "DegenerateMetric", "DomainError", "Event", "FieldSpec", "FlowSystem",
    "ImplicitDomain", "Tolerances", "TrajectoryRecord", "geodesic_field", "integrate_trajectory",
    "local_model_system", "tangency_multiplicity", "trace",
]
