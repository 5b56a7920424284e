"""Versioning utilities for schemas."""

from pydantic import BaseModel, ConfigDict


class VersionedSchema(BaseModel):
    """Base class for versioned, strictly-keyed configuration schemas."""

    version: str = "v1"

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    @classmethod
    def get_version(cls) -> str:
        """Get schema version."""
        return cls.model_fields["version"].default
