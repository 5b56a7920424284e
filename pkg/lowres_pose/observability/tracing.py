"""OpenTelemetry tracing for training, evaluation and complexity runs."""

import logging
from typing import Any, Mapping, Optional

from opentelemetry import trace
from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import OTLPSpanExporter
from opentelemetry.sdk.resources import Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor, ConsoleSpanExporter

from lowres_pose import __version__
from lowres_pose.config import settings

logger = logging.getLogger(__name__)

# Global tracer provider
_tracer_provider: Optional[TracerProvider] = None


def initialize_tracing(enabled: Optional[bool] = None) -> None:
    """Install a TracerProvider exporting over OTLP, or to the console.

    ``enabled`` overrides ``settings.opentelemetry_enabled``. Without an OTLP
    endpoint spans go to the console exporter.
    """
    global _tracer_provider

    if not (settings.opentelemetry_enabled if enabled is None else enabled):
        logger.debug("OpenTelemetry tracing is disabled")
        return

    if _tracer_provider is not None:
        logger.debug("Tracing already initialized, skipping")
        return

    resource = Resource.create(
        {
            "service.name": "lowres-pose",
            "service.version": __version__,
        }
    )
    _tracer_provider = TracerProvider(resource=resource)

    if settings.otlp_endpoint:
        exporter = OTLPSpanExporter(
            endpoint=settings.otlp_endpoint,
            headers=settings.otlp_headers or None,
        )
        _tracer_provider.add_span_processor(BatchSpanProcessor(exporter))
        logger.info("Initialized OTLP tracing exporter to %s", settings.otlp_endpoint)
    else:
        _tracer_provider.add_span_processor(BatchSpanProcessor(ConsoleSpanExporter()))
        logger.info("Initialized console tracing exporter")

    trace.set_tracer_provider(_tracer_provider)


def shutdown_tracing() -> None:
    """Flush remaining spans and drop the provider."""
    global _tracer_provider

    if _tracer_provider is not None:
        _tracer_provider.shutdown()
        _tracer_provider = None
        logger.info("OpenTelemetry tracing shut down")


def get_tracer(name: str) -> trace.Tracer:
    """Tracer for a module; a no-op tracer until tracing is initialized."""
    if _tracer_provider is not None:
        return _tracer_provider.get_tracer(name)
    return trace.get_tracer(name)


def set_span_attributes(span: trace.Span, attributes: Mapping[str, Any], prefix: str = "") -> None:
    """Attach scalar attributes; values of other types are stringified."""
    for key, value in attributes.items():
        if value is None:
            continue
        if not isinstance(value, (bool, int, float, str)):
            value = str(value)
        span.set_attribute(f"{prefix}{key}", value)
