"""
Error hierarchy shared by the geometry modules, the CLI and the API
"""

from typing import Any, Dict


class SurfaceError(Exception):
    """Base error carrying a stable code and the process exit status it maps to"""

    code = "surface_error"
    exit_code = 2

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable error block"""
        return {
            "code": self.code,
            "message": self.message,
            "details": {k: _plain(v) for k, v in sorted(self.details.items())},
        }


def _plain(value: Any) -> Any:
    if isinstance(value, complex):
        return f"{value.real:.12g}{value.imag:+.12g}i"
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item"):
        return _plain(value.item())
    return value


# Validation failures (exit 1)


class ValidationFailure(SurfaceError):
    code = "validation_failure"
    exit_code = 1


class InvalidData(ValidationFailure):
    code = "invalid_data"


class ConfigError(ValidationFailure):
    code = "config_error"


class ExpressionSyntaxError(ValidationFailure):
    code = "syntax_error"

    def __init__(self, message: str, position: int, **details: Any):
        super().__init__(f"{message} at position {position}", position=position, **details)
        self.position = position


class UnknownIdentifierError(ValidationFailure):
    code = "unknown_identifier"

    def __init__(self, name: str, position: int):
        super().__init__(
            f"Unknown identifier '{name}' at position {position}",
            name=name,
            position=position,
        )
        self.name = name
        self.position = position


class C1Violation(ValidationFailure):
    code = "c1_violation"


class C2Violation(ValidationFailure):
    code = "c2_violation"


class ZeroOfF(ValidationFailure):
    code = "zero_of_f"


class FVanishes(ValidationFailure):
    code = "f_vanishes"


class GNotZeroAtBase(ValidationFailure):
    code = "g_not_zero_at_base"


class CommonFactor(ValidationFailure):
    code = "common_factor"


class FlatData(ValidationFailure):
    code = "flat_data"


class DependentInputs(ValidationFailure):
    code = "dependent_inputs"


class RealityViolated(ValidationFailure):
    code = "reality_violated"


class ProjectionInvalid(ValidationFailure):
    code = "projection_invalid"


# Numeric failures (exit 2)


class NumericFailure(SurfaceError):
    code = "numeric_failure"
    exit_code = 2


class PoleProximity(NumericFailure):
    code = "pole_proximity"


class RootFindingFailure(NumericFailure):
    code = "root_finding_failure"


class LoopClosureFailure(NumericFailure):
    code = "loop_closure_failure"


class DetDrift(NumericFailure):
    code = "det_drift"


class SingularFrame(NumericFailure):
    code = "singular_frame"


class FrameDegeneracy(NumericFailure):
    code = "frame_degeneracy"


class DomainTopologyError(NumericFailure):
    code = "domain_topology"
