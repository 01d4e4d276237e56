"""
errbound/schemas/problem.py

Pydantic models for the [options] section of a problem file and the
per-instance tolerances carried by an analysis.
"""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from errbound.core.config import settings
from errbound.utils.constants import MSG_RADII_DECREASING
from errbound.utils.validation_utils import is_strictly_decreasing


class Tolerances(BaseModel):
    """Numerical tolerances of one instance (defaults from settings)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    active_tol: float = Field(default_factory=lambda: settings.ACTIVE_TOL, gt=0.0, description="Active-piece and active-row tolerance")
    boundary_tol: float = Field(default_factory=lambda: settings.BOUNDARY_TOL, gt=0.0, description="|f(g(x))| accepted on the boundary")
    feasibility_tol: float = Field(default_factory=lambda: settings.FEASIBILITY_TOL, ge=0.0, description="f(g(x_bar)) accepted as feasible")
    division_guard: float = Field(default_factory=lambda: settings.DIVISION_GUARD, gt=0.0, description="Smallest [f(g(x))]_+ used in a ratio")
    equivalence_tol: float = Field(default_factory=lambda: settings.EQUIVALENCE_TOL, ge=0.0, description="Slack of the pointwise equivalence test")


class ProblemOptions(BaseModel):
    """The [options] section: schedule, seed and tolerance overrides."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: Optional[str] = Field(default=None, description="Instance name shown in reports")
    radii: List[float] = Field(default_factory=lambda: list(settings.DEFAULT_RADII), description="Strictly decreasing radii")
    samples: int = Field(default_factory=lambda: settings.SAMPLES_PER_RADIUS, gt=0, description="Samples per radius")
    seed: Optional[int] = Field(default=None, description="Instance seed (CLI flag takes precedence)")
    tolerances: Tolerances = Field(default_factory=Tolerances)

    @field_validator("radii")
    @classmethod
    def validate_radii(cls, v: List[float]) -> List[float]:
        """Radii must shrink towards x_bar."""
        if not is_strictly_decreasing(v):
            raise ValueError(MSG_RADII_DECREASING)
        return v
