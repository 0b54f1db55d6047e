"""
Pydantic models for job configuration, reports and API request/response schemas
"""

from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional, Union
from uuid import UUID

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Pipeline(str, Enum):
    GENERATE = "generate"
    VERIFY = "verify"
    LIMITS = "limits"
    DEFORM = "deform"
    CLASSIFY = "classify"


class Projection(str, Enum):
    DROP_X0 = "drop_x0"
    DROP_X3 = "drop_x3"
    POINCARE_BALL = "poincare_ball"


class MeshFormat(str, Enum):
    OBJ = "obj"
    PLY = "ply"


# Complex scalars are given as numbers or constant expressions such as "1+i"
ComplexInput = Union[float, str]


class JobConfig(BaseModel):
    """A complete job, read from a flat YAML mapping"""

    model_config = ConfigDict(extra="forbid")

    pipeline: Pipeline = Field(Pipeline.GENERATE, description="Pipeline to run")

    # Weierstrass data
    g: str = Field(..., description="Meromorphic g(z) as an expression")
    w: str = Field("1", description="omega = w(z) dz as an expression")
    eps: int = Field(..., description="Epsilon, -1 or +1")
    a: float = Field(0.0, description="Real constant a")
    b: float = Field(0.0, description="Real constant b")
    c: ComplexInput = Field(0.0, description="Complex constant c")
    f0: ComplexInput = Field(1.0, description="Value of f at the base point")

    # Domain
    x_min: float = -0.5
    x_max: float = 0.5
    y_min: float = -0.5
    y_max: float = 0.5
    grid_n: int = Field(65, description="Nodes along the real axis")
    z0: ComplexInput = Field(0.0, description="Base point, snapped to the nearest node")

    # Special cases
    r: Optional[float] = Field(None, description="Curvature parameter for null curve checks")
    r_list: Optional[List[float]] = Field(None, description="Deformation sweep values")
    extrapolation_levels: Optional[int] = Field(None, description="Smallest r values used for X_0")
    assert_complete: bool = Field(False, description="User asserts the surface is meant to be complete")

    # Output
    out_dir: Optional[str] = Field(None, description="Directory for report, mesh and CSV files")
    mesh: bool = True
    mesh_format: MeshFormat = MeshFormat.OBJ
    projection: Optional[Projection] = Field(None, description="Defaults by epsilon")

    # Tolerances
    tol_scale: float = Field(1.0, description="Multiplier for verification tolerances")
    tolerances: Dict[str, float] = Field(default_factory=dict, description="Per-name overrides")

    @field_validator("eps")
    @classmethod
    def validate_eps(cls, v: int) -> int:
        if v not in (-1, 1):
            raise ValueError("eps must be -1 or +1")
        return v

    @field_validator("grid_n")
    @classmethod
    def validate_grid_n(cls, v: int) -> int:
        if v < 9:
            raise ValueError("grid_n must be at least 9")
        return v

    @field_validator("tol_scale")
    @classmethod
    def validate_tol_scale(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("tol_scale must be positive")
        return v

    @field_validator("r_list")
    @classmethod
    def validate_r_list(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None and any(r <= 0 for r in v):
            raise ValueError("r_list values must be positive")
        return v

    @model_validator(mode="after")
    def validate_rectangle(self):
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise ValueError("The rectangle must have positive width and height")
        return self


class ResidualEntry(BaseModel):
    name: str = Field(..., description="Residual name")
    value: float = Field(..., description="Measured residual")
    tolerance: float = Field(..., description="Acceptance tolerance")
    passed: bool = Field(..., description="value <= tolerance")


class SurfaceReport(BaseModel):
    """Everything a job reports, in insertion order"""

    pipeline: Pipeline
    exit_code: int = 0
    entries: List[ResidualEntry] = Field(default_factory=list)
    info: Dict[str, str] = Field(default_factory=dict)
    error: Optional[Dict[str, Any]] = None

    def add(self, name: str, value: float, tolerance: float) -> ResidualEntry:
        entry = ResidualEntry(name=name, value=float(value), tolerance=float(tolerance), passed=bool(value <= tolerance))
        self.entries.append(entry)
        return entry

    @property
    def passed(self) -> bool:
        return self.error is None and all(e.passed for e in self.entries)


class JobResponse(BaseModel):
    id: UUID = Field(..., description="Job ID")
    pipeline: Pipeline = Field(..., description="Pipeline that ran")
    exit_code: int = Field(..., description="0 success, 1 validation failure, 2 numeric failure")
    passed: bool = Field(..., description="Every residual within tolerance")
    created_at: datetime = Field(..., description="Creation time")


class JobDetailResponse(JobResponse):
    config: Dict[str, Any] = Field(..., description="Job configuration")
    entries: List[ResidualEntry] = Field(default_factory=list, description="Residuals")
    info: Dict[str, str] = Field(default_factory=dict, description="Verdicts and diagnostics")
    error: Optional[Dict[str, Any]] = Field(None, description="Machine-readable error block")
    artifacts: List[str] = Field(default_factory=list, description="Files written")


class ClassifyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    g: str = Field(..., description="Rational g(z)")
    w: str = Field(..., description="Polynomial w(z), omega = w dz")
    eps: int = Field(-1, description="Epsilon, -1 or +1")
    a: float = 0.0
    b: float = 0.0
    c: ComplexInput = 0.0
    assert_complete: bool = False

    @field_validator("eps")
    @classmethod
    def validate_eps(cls, v: int) -> int:
        if v not in (-1, 1):
            raise ValueError("eps must be -1 or +1")
        return v


class ClassifyResponse(BaseModel):
    label: str = Field(..., description="AdmissibleFTC or Reject(reason)")
    admissible: bool
    reason: Optional[str] = None
    cause: Optional[str] = None
    normalization_applied: bool = False
    screen: str = Field(..., description="Completeness screen outcome")
    screen_message: str = ""
    parallel_H: Optional[str] = Field(None, description="Parallel mean curvature verdict from the constants")


class MessageResponse(BaseModel):
    message: str = Field(..., description="Response message")


class SystemInfo(BaseModel):
    app_name: str
    version: str
    fd_order: int
    workers: int
    tolerances: Dict[str, float]
