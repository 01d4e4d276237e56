"""
errbound/schemas/report.py

Pydantic models for the reports produced by the regularity testers and the analyzer.
Infinite moduli serialize as the JSON constant Infinity.
"""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

Verdict = Literal["pass", "fail", "inconclusive"]
Diagnosis = Literal["error-bound-holds", "no-error-bound", "hypotheses-violated", "inconclusive"]
Trend = Literal["increasing", "decreasing", "stable", "mixed", "n/a"]


class ReportModel(BaseModel):
    """Base for report models: immutable, Infinity-aware JSON."""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")


class WorstPair(ReportModel):
    """Sampled pair (x, y) realising the largest regularity ratio."""

    x: List[float] = Field(..., description="Point near x_bar")
    y: List[float] = Field(..., description="Target near g(x_bar)")
    ratio: float = Field(..., ge=0.0, description="d(x, g^-1(y)) / |g(x) - y|")


class RegularityReport(ReportModel):
    """Linear and sampled metric-regularity data of g at x_bar."""

    surjective: bool = Field(..., description="Jacobian at x_bar has full row rank")
    sigma_min: float = Field(..., ge=0.0, description="m-th singular value of the Jacobian")
    kappa_linear: float = Field(..., description="1 / sigma_min (inf when not surjective)")
    kappa_empirical: float = Field(..., ge=0.0, description="Largest sampled ratio")
    sample_count: int = Field(..., ge=0, description="Pairs entering kappa_empirical")
    failed_pairs: int = Field(default=0, ge=0, description="Pairs whose preimage solve failed")
    worst_pair: Optional[WorstPair] = Field(default=None, description="Pair realising kappa_empirical")


class ShapiroReport(ReportModel):
    """Outcome of a sampled Shapiro contact test."""

    epsilon_grid: List[float] = Field(..., description="Tested epsilons")
    delta_found: List[float] = Field(..., description="Per epsilon: radius where the inequality held (inf if none)")
    contact_ratio_sup: float = Field(..., ge=0.0, description="Largest ratio at the smallest radius")
    verdict: Verdict = Field(..., description="pass, fail or inconclusive")
    skipped_pairs: int = Field(default=0, ge=0, description="Pairs skipped (estimator undefined)")
    note: Optional[str] = Field(default=None, description="Scope of the verdict")

    @field_validator("delta_found")
    @classmethod
    def validate_deltas(cls, v: List[float]) -> List[float]:
        if any(d <= 0 for d in v):
            raise ValueError("delta values must be positive")
        return v


class BoundarySample(ReportModel):
    """Point of bd(S) near x_bar with its residual and origin."""

    point: List[float] = Field(..., description="Boundary point")
    residual: float = Field(..., ge=0.0, description="|f(g(point))|")
    source: Literal["projection", "bisection", "anchor"] = Field(..., description="How it was produced")


class BoundaryCheck(ReportModel):
    """Sampled check of bd(S_f) in f^-1(0)."""

    verdict: Verdict
    sampled_points: int = Field(..., ge=0)
    worst_value: float = Field(default=0.0, ge=0.0, description="Largest -f on sampled boundary points")


class RadiusTrace(ReportModel):
    """One line of the per-radius trace."""

    radius: float = Field(..., gt=0.0)
    tau_theoretical_sup: float = Field(..., ge=0.0)
    tau_empirical_sup: float = Field(..., ge=0.0)
    sample_count: int = Field(..., ge=0)


class Witness(ReportModel):
    """Empirical sample with its distance, violation and ratio."""

    radius: float
    x: List[float]
    distance: float = Field(..., ge=0.0, description="d(x, S)")
    violation: float = Field(..., ge=0.0, description="[f(g(x))]_+")
    ratio: float = Field(..., ge=0.0)
    distance_to_x_bar: float = Field(..., ge=0.0)


class ModulusTrace(ReportModel):
    """Limiting value and per-radius sups of one modulus estimate."""

    value: float = Field(..., ge=0.0)
    sups: List[float] = Field(default_factory=list)
    counts: List[int] = Field(default_factory=list)
    trend: Trend = "n/a"
    diverged: bool = False
    interior: bool = False
    flagged: int = Field(default=0, ge=0, description="Samples excluded after a failure")
    applicable: bool = Field(default=True, description="False when the hypotheses behind the estimate failed")
    region: Optional[str] = Field(default=None, description="Sampled region, when narrower than B(x_bar, r)")


class Hypotheses(ReportModel):
    """Hypothesis checks reported by analyze."""

    boundary_condition: Optional[BoundaryCheck] = None
    interior_domain: bool = True
    metric_regularity: Optional[RegularityReport] = None
    robinson: Optional[bool] = None
    shapiro: Optional[ShapiroReport] = None


class AnalysisReport(ReportModel):
    """Complete result of one analysis run."""

    instance: str
    seed: int
    version: str
    radii: List[float]
    samples_per_radius: int
    hypotheses: Hypotheses
    tau_theoretical: float = Field(..., ge=0.0)
    tau_empirical: float = Field(..., ge=0.0)
    theoretical: ModulusTrace
    empirical: ModulusTrace
    traces: List[RadiusTrace]
    agreement: float = Field(..., description="Relative gap |tau_t - tau_e| / (1 + tau_t)")
    sufficiency_bound: Optional[float] = None
    kernel_inclusion: Optional[bool] = None
    diagnosis: Diagnosis
    notes: List[str] = Field(default_factory=list)
    errors: List[str] = Field(default_factory=list)
    witnesses: List[Witness] = Field(default_factory=list)
