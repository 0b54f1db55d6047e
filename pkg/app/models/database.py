"""
Database models for TinyDB storage
"""

from datetime import datetime
from typing import Any, Dict, List, Optional
from uuid import UUID, uuid4

from pydantic import BaseModel, Field, field_serializer

from app.models.schemas import Pipeline, ResidualEntry


class JobRecord(BaseModel):
    """A finished job with its report"""

    id: UUID = Field(default_factory=uuid4)
    pipeline: Pipeline = Field(..., description="Pipeline that ran")
    config: Dict[str, Any] = Field(..., description="Job configuration as submitted")
    exit_code: int = Field(..., description="Process-style exit status")
    entries: List[ResidualEntry] = Field(default_factory=list, description="Residual entries")
    info: Dict[str, str] = Field(default_factory=dict, description="Verdicts and diagnostics")
    error: Optional[Dict[str, Any]] = Field(None, description="Error block of a failed job")
    artifacts: List[str] = Field(default_factory=list, description="Files written")
    created_at: datetime = Field(default_factory=datetime.now)

    @field_serializer("id")
    def serialize_id(self, value: UUID) -> str:
        return str(value)

    @field_serializer("created_at")
    def serialize_created_at(self, value: datetime) -> str:
        return value.isoformat()

    @property
    def passed(self) -> bool:
        return self.exit_code == 0
