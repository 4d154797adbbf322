from .binding import (
    AllocationPlan,
    Binding,
    BindingTable,
    PlanError,
    RangeError,
    ResolvedRcb,
    UnresolvedSymbol,
    bind,
    is_resolved,
    plan_buffers,
    release_after,
)
from .context import InputSizeError, NotProvisioned, ProvisionError, Runtime
from .executor import (
    ExecError,
    ExecRecord,
    ExecTrace,
    PipelineError,
    PipelineResult,
    execute,
    execute_pipeline,
    stage_ticks,
)

__all__ = [
    "AllocationPlan",
    "Binding",
    "BindingTable",
    "PlanError",
    "RangeError",
    "ResolvedRcb",
    "UnresolvedSymbol",
    "bind",
    "is_resolved",
    "plan_buffers",
    "release_after",
    "InputSizeError",
    "NotProvisioned",
    "ProvisionError",
    "Runtime",
    "ExecError",
    "ExecRecord",
    "ExecTrace",
    "PipelineError",
    "PipelineResult",
    "execute",
    "execute_pipeline",
    "stage_ticks",
]
