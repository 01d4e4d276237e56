"""
errbound/core/config.py

Purpose: Toolkit configuration

- Loads environment variables (prefix ERRBOUND_, optional .env file)
- Centralizes numerical tolerances, enumeration limits and sampling schedules
- Validates configuration on startup
- Environment-specific logging choice
"""

from typing import List, Literal, Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Toolkit settings loaded from environment variables.
    Every numerical default used by the services lives here.
    """

    # Environment
    ENVIRONMENT: Literal["development", "production"] = "development"

    # Application
    APP_NAME: str = Field(
        default="errbound",
        description="Application name (logger namespace)"
    )
    LOG_LEVEL: str = Field(
        default="WARNING",
        description="Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)"
    )
    SEED: int = Field(
        default=0,
        description="Seed fallback when neither the command line nor the problem file sets one"
    )
    WORKERS: int = Field(
        default=1,
        description="Thread pool size for per-radius evaluation (1 = sequential)"
    )

    # Geometry
    ACTIVE_TOL: float = Field(
        default=1e-9,
        description="Row is active at z when |a.z - b| <= tol * (1 + |b|)"
    )
    ENUMERATION_MAX_DIM: int = Field(
        default=6,
        description="Largest dimension for exact vertex/ray enumeration"
    )
    ENUMERATION_MAX_ROWS: int = Field(
        default=64,
        description="Largest row count for exact vertex/ray enumeration"
    )
    ENUMERATION_MAX_BASES: int = Field(
        default=200_000,
        description="Largest number of row subsets examined by basis enumeration"
    )
    PROJECTION_ENUM_MAX_DIM: int = Field(
        default=4,
        description="Projection by active-set enumeration up to this dimension, Dykstra above"
    )
    PROJECTION_TOL: float = Field(
        default=1e-10,
        description="Convergence tolerance of Dykstra's alternating projections"
    )
    PROJECTION_MAX_ITER: int = Field(
        default=20_000,
        description="Iteration cap of Dykstra's alternating projections"
    )
    INFINITE_EXCESS_THRESHOLD: float = Field(
        default=1e-7,
        description="A recession ray farther than this from D makes the excess infinite"
    )
    EXCESS_FALLBACK_STARTS: int = Field(
        default=16,
        description="Multistart count of the approximate excess maximisation"
    )
    EXCESS_FALLBACK_BOX: float = Field(
        default=1e6,
        description="Box half-width bounding the LPs of the approximate excess maximisation"
    )
    EXCESS_ASCENT_STEPS: int = Field(
        default=200,
        description="Edge moves allowed per start of the approximate excess maximisation"
    )
    EXCESS_EDGE_BUDGET: int = Field(
        default=256,
        description="Active-row subsets tried per vertex when listing edge neighbours"
    )

    # Functions
    JACOBIAN_CHECK_POINTS: int = Field(
        default=5,
        description="Random points used for the construction-time Jacobian check"
    )
    JACOBIAN_CHECK_RTOL: float = Field(
        default=1e-5,
        description="Relative tolerance of analytic vs central-difference Jacobians"
    )
    LIMINF_K0: int = Field(default=6, description="First exponent of the step schedule t = 2^-k")
    LIMINF_K1: int = Field(default=24, description="Last exponent of the step schedule t = 2^-k")
    LIMINF_PERTURBATIONS: int = Field(
        default=8,
        description="Random direction perturbations of radius t per step"
    )

    # Regularity
    RANK_TOL: float = Field(
        default=1e-10,
        description="Jacobian is surjective when sigma_min > RANK_TOL * ||J||"
    )
    LM_LAMBDA0: float = Field(default=1e-3, description="Initial Levenberg-Marquardt damping")
    LM_MAX_ITER: int = Field(default=50, description="Levenberg-Marquardt iteration cap")
    LM_RESIDUAL_TOL: float = Field(default=1e-10, description="Residual tolerance for preimage solves")
    LM_STARTS: int = Field(default=4, description="Multistart count for preimage solves")
    GRID_POINTS_PER_AXIS: int = Field(
        default=400,
        description="Grid fallback resolution per axis (n <= 3)"
    )
    GRID_BUDGET: int = Field(
        default=160_000,
        description="Total point budget of any fallback grid"
    )
    PREIMAGE_SEARCH_HALFWIDTH: float = Field(
        default=1.0,
        description="Half-width of the grid fallback box around x"
    )
    MAX_SEARCH_RADIUS: float = Field(
        default=1.0,
        description="Upper bound of the uniform-regularity radius search"
    )
    ROBINSON_RADIUS_FACTOR: float = Field(
        default=1e-3,
        description="Interiority probe radius r = factor * (1 + ||g(x_bar)||)"
    )
    SHAPIRO_INITIAL_RADIUS: float = Field(default=0.5, description="Largest delta of the Shapiro tests")
    SHAPIRO_SHRINK: float = Field(default=0.5, description="Geometric factor between delta levels")
    SHAPIRO_LEVELS: int = Field(default=10, description="Number of delta levels")
    SHAPIRO_PAIRS: int = Field(default=40, description="Sampled pairs per delta level")
    SHAPIRO_EPSILONS: List[float] = Field(
        default=[0.5, 0.2, 0.1],
        description="Epsilon grid used by the analyzer's epigraph test"
    )

    # Analyzer
    DEFAULT_RADII: List[float] = Field(
        default=[1e-1, 1e-2, 1e-3],
        description="Default shrinking radius schedule"
    )
    SAMPLES_PER_RADIUS: int = Field(default=200, description="Default samples per radius")
    BOUNDARY_SAMPLES: int = Field(default=200, description="Boundary candidates per radius of the theoretical modulus")
    EMPIRICAL_INNER_FRACTION: float = Field(
        default=0.5,
        description="Empirical samples lie in fraction*r <= |x - x_bar| <= r (0 = whole ball)"
    )
    BOUNDARY_TOL: float = Field(
        default=1e-10,
        description="|f(g(x))| bound for accepted boundary samples"
    )
    FEASIBILITY_TOL: float = Field(
        default=1e-9,
        description="x_bar must satisfy f(g(x_bar)) <= tol"
    )
    DIVISION_GUARD: float = Field(
        default=1e-12,
        description="Samples with [phi(x)]_+ at or below this are discarded"
    )
    DIVERGENCE_GROWTH: float = Field(
        default=10.0,
        description="Per-radius growth factor that signals divergence"
    )
    DIVERGENCE_FLOOR: float = Field(
        default=1e6,
        description="Final per-radius sup needed to declare divergence"
    )
    AGREEMENT_GAP: float = Field(
        default=0.05,
        description="Relative gap tolerated between theoretical and empirical moduli"
    )
    DISTANCE_GRID_BUDGET: int = Field(
        default=2_000,
        description="Seed grid budget of solution_set_distance for n <= 3"
    )
    DISTANCE_STARTS: int = Field(
        default=3,
        description="Local refinements per solution_set_distance call"
    )
    EQUIVALENCE_TOL: float = Field(
        default=1e-6,
        description="Tolerance band of the pointwise equivalence test"
    )
    DIRECTIONS: int = Field(
        default=512,
        description="Random unit directions for pointwise and linearized tests"
    )
    REGULARITY_PAIRS: int = Field(default=100, description="Pairs of the empirical regularity sampler")
    CONTACT_EPSILON: float = Field(
        default=0.05,
        description="Contact epsilon used for the reported sufficiency constant"
    )

    # Output
    FLOAT_DIGITS: int = Field(
        default=17,
        description="Significant digits used when numbers are written to files"
    )
    DEFAULT_OUT_DIR: Optional[str] = Field(
        default=None,
        description="Report directory when --out is not given (None = no files)"
    )

    @property
    def is_development(self) -> bool:
        """Check if running in development mode."""
        return self.ENVIRONMENT == "development"

    @property
    def is_production(self) -> bool:
        """Check if running in production mode."""
        return self.ENVIRONMENT == "production"

    model_config = SettingsConfigDict(
        env_prefix="ERRBOUND_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )


# Global settings instance
settings = Settings()


def validate_settings(config: Optional[Settings] = None) -> bool:
    """
    Validates numeric consistency of the settings.
    Raises ValueError listing every violated constraint.
    """
    config = config or settings
    errors = []

    if config.LIMINF_K0 >= config.LIMINF_K1:
        errors.append("LIMINF_K0 must be smaller than LIMINF_K1")
    if config.ENUMERATION_MAX_DIM < 1:
        errors.append("ENUMERATION_MAX_DIM must be positive")
    if config.PROJECTION_ENUM_MAX_DIM > config.ENUMERATION_MAX_DIM:
        errors.append("PROJECTION_ENUM_MAX_DIM cannot exceed ENUMERATION_MAX_DIM")
    if not 0.0 < config.SHAPIRO_SHRINK < 1.0:
        errors.append("SHAPIRO_SHRINK must lie in (0, 1)")
    radii = config.DEFAULT_RADII
    if not radii or any(r <= 0 for r in radii) or any(a <= b for a, b in zip(radii, radii[1:])):
        errors.append("DEFAULT_RADII must be positive and strictly decreasing")
    if config.BOUNDARY_SAMPLES < 1:
        errors.append("BOUNDARY_SAMPLES must be positive")
    if not 0.0 <= config.EMPIRICAL_INNER_FRACTION < 1.0:
        errors.append("EMPIRICAL_INNER_FRACTION must lie in [0, 1)")
    if config.WORKERS < 1:
        errors.append("WORKERS must be at least 1")
    if config.FLOAT_DIGITS < 17:
        errors.append("FLOAT_DIGITS below 17 breaks the problem-file round trip")

    if errors:
        raise ValueError(f"Configuration validation failed: {', '.join(errors)}")

    return True
