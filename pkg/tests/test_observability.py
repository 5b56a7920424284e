"""Tests for OpenTelemetry observability module."""

import pytest
from opentelemetry import trace
from opentelemetry.sdk.trace import TracerProvider

from lowres_pose.observability import (
    get_tracer,
    initialize_tracing,
    set_span_attributes,
    shutdown_tracing,
)
from lowres_pose.observability import tracing


@pytest.fixture(autouse=True)
def reset_tracing():
    shutdown_tracing()
    yield
    shutdown_tracing()


class TestTracingInitialization:
    """Test OpenTelemetry tracing initialization."""

    def test_disabled_by_default(self):
        """Test nothing is installed when tracing is disabled."""
        initialize_tracing(enabled=False)
        assert tracing._tracer_provider is None

    def test_initialize_tracing(self):
        """Test enabling installs an SDK provider once."""
        initialize_tracing(enabled=True)
        provider = tracing._tracer_provider
        assert isinstance(provider, TracerProvider)
        initialize_tracing(enabled=True)
        assert tracing._tracer_provider is provider

    def test_get_tracer(self):
        """Test getting a tracer instance."""
        initialize_tracing(enabled=True)
        tracer = get_tracer("test_module")
        assert isinstance(tracer, trace.Tracer)

    def test_tracer_creates_spans(self):
        """Test that tracer can create recording spans."""
        initialize_tracing(enabled=True)
        tracer = get_tracer("test_module")
        with tracer.start_as_current_span("train.epoch") as span:
            span.set_attribute("epoch", 1)
            assert span.is_recording()

    def test_shutdown_tracing(self):
        """Test shutdown drops the provider and tracers still work."""
        initialize_tracing(enabled=True)
        shutdown_tracing()
        assert tracing._tracer_provider is None
        assert get_tracer("test_module") is not None


class TestSpanAttributes:
    """Test attribute flattening onto spans."""

    @pytest.fixture
    def span(self):
        tracer = TracerProvider().get_tracer("test")
        with tracer.start_as_current_span("test_span") as span:
            yield span

    def test_scalars_and_prefix(self, span):
        """Test scalars keep their type under the prefix."""
        set_span_attributes(span, {"epochs": 2, "lr": 1e-3, "flip": True}, prefix="train.")
        assert span.attributes["train.epochs"] == 2
        assert span.attributes["train.lr"] == 1e-3
        assert span.attributes["train.flip"] is True

    def test_none_skipped(self, span):
        """Test None values are not set."""
        set_span_attributes(span, {"limit": None})
        assert "limit" not in span.attributes

    def test_non_scalars_stringified(self, span):
        """Test lists and mappings become strings."""
        set_span_attributes(span, {"extent": (64, 64), "loss": {"kind": "mse"}})
        assert span.attributes["extent"] == "(64, 64)"
        assert span.attributes["loss"] == "{'kind': 'mse'}"
