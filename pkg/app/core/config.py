"""
Application configuration
"""

import random
from functools import lru_cache
from pathlib import Path
from socket import AF_INET, SO_REUSEADDR, SOCK_STREAM, SOL_SOCKET, socket
from typing import Dict, List

from platformdirs import user_data_dir
from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings

# Guards that protect root finding and pole detection; tolerance scaling leaves them alone
UNSCALED_TOLERANCES = frozenset({"pole_eps", "coprime_eps", "f_eps", "q_eps", "q_bound", "cond_max"})


def find_free_port():
    """
    Find a random free 5-digit port (10000-65535).
    This works on Windows, macOS, and Linux.
    """
    for _ in range(20):
        port = random.randint(10000, 65535)
        with socket(AF_INET, SOCK_STREAM) as s:
            s.setsockopt(SOL_SOCKET, SO_REUSEADDR, 1)
            try:
                s.bind(("", port))
                return port
            except OSError:
                continue
    # Fallback: let OS pick any free port
    with socket(AF_INET, SOCK_STREAM) as s:
        s.setsockopt(SOL_SOCKET, SO_REUSEADDR, 1)
        s.bind(("", 0))
        return s.getsockname()[1]


class Tolerances(BaseModel):
    """Numerical tolerances used by construction and verification"""

    tol_det: float = Field(1e-9, description="Allowed |det F - 1|")
    tol_inner: float = Field(1e-10, description="Relative drift of the Minkowski product")
    pole_eps: float = Field(1e-12, description="Denominator magnitude treated as a pole")
    coprime_eps: float = Field(1e-10, description="Minimum normalized resultant")
    tol_loop: float = Field(1e-9, description="Loop closure per unit perimeter")
    tol_path: float = Field(1e-7, description="Disagreement between two spanning trees")
    f_eps: float = Field(1e-8, description="Magnitude of f treated as a zero")
    q_eps: float = Field(1e-12, description="Max |q| below which the data is flat")
    q_bound: float = Field(1e8, description="Max |q| accepted as bounded")
    f_const_eps: float = Field(1e-10, description="Relative variation of a constant f")
    tol_geo: float = Field(1e-5, description="Relative geometric identity residual")
    tol_H: float = Field(1e-5, description="Marginally trapped residual")
    tol_K: float = Field(1e-4, description="Gauss curvature agreement")
    K_floor: float = Field(1e-8, description="|K| below which the sign is not tested")
    tol_pde: float = Field(1e-5, description="Structure equation residual")
    tol_ode: float = Field(1e-6, description="Second-order ODE residual")
    tol_wronskian: float = Field(1e-8, description="Wronskian identity residual")
    tol_schwarz: float = Field(1e-5, description="Schwarzian identity residual")
    tol_null: float = Field(1e-8, description="Nullity of dB relative to |dB|^2")
    tol_oracle: float = Field(1e-6, description="Pipeline against closed-form oracle")
    tol_reality: float = Field(1e-9, description="Reality condition of the decomposition")
    tol_division: float = Field(1e-10, description="Relative remainder of exact division")
    cond_max: float = Field(1e8, description="Condition number bound for linear solves")

    def scaled(self, factor: float) -> "Tolerances":
        """Return a copy with every verification tolerance multiplied by factor"""
        if factor <= 0:
            raise ValueError(f"Tolerance scale must be positive, got {factor}")
        data = self.model_dump()
        for key, value in data.items():
            if key not in UNSCALED_TOLERANCES:
                data[key] = value * factor
        return Tolerances(**data)

    def merged(self, overrides: Dict[str, float]) -> "Tolerances":
        """Return a copy with per-job overrides applied"""
        unknown = sorted(set(overrides) - set(type(self).model_fields))
        if unknown:
            raise ValueError(f"Unknown tolerance names: {', '.join(unknown)}")
        return self.model_copy(update={k: float(v) for k, v in overrides.items()})


class Settings(BaseSettings):
    """Application settings"""

    app_name: str = "bryant4"
    version: str = "1.0.0"

    data_dir: Path = Path(user_data_dir(app_name, app_name))

    # Database
    database_path: str = str(data_dir / "jobs.json")

    # API
    api_host: str = "127.0.0.1"
    api_port: int | None = None

    # CORS
    cors_origins: list = ["*"]

    log_level: str = "INFO"

    # Numerics
    workers: int = 4
    fd_order: int = 6
    min_substeps: int = 4
    substep_norm_target: float = 0.1
    mask_radius_factor: float = 3.0
    default_r_list: List[float] = [0.4, 0.2, 0.1, 0.05, 0.025]
    tolerances: Tolerances = Tolerances()

    model_config = {
        "env_file": ".env",
        "env_prefix": "BRYANT4_",
        "env_nested_delimiter": "__",
    }


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    settings = Settings()
    if settings.api_port is None:
        # If not defined, pick a random free 5-digit port
        settings.api_port = find_free_port()
    return settings
