from .settings import (
    runtime_config, log_config, Family, Task, HeadKind, InitMode, MetricKind, RunKind,
    head_kind_for, metric_kind_for
)

__all__ = [
    "runtime_config", "log_config", "Family", "Task", "HeadKind", "InitMode", "MetricKind",
    "RunKind", "head_kind_for", "metric_kind_for"
]
