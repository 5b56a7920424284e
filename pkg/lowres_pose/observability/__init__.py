"""Observability module for OpenTelemetry tracing."""

from lowres_pose.observability.tracing import (
    get_tracer,
    initialize_tracing,
    set_span_attributes,
    shutdown_tracing,
)

__all__ = ["get_tracer", "initialize_tracing", "set_span_attributes", "shutdown_tracing"]
