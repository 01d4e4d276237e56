"""
errbound/utils/constants.py

Purpose: Centralized static content

- Exit codes of the command-line driver
- Report templates and CSV headers
- Validation messages shared by the parser and the analyzer
- File names written into a report directory

(Prevents hardcoding across the codebase)
"""

# ============================================================
# EXIT CODES
# ============================================================

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2
EXIT_HYPOTHESES_VIOLATED = 3
EXIT_INCONCLUSIVE = 4

# Diagnosis value -> exit code (total over schemas.report.Diagnosis)
DIAGNOSIS_EXIT_CODES = {
    "error-bound-holds": EXIT_OK,
    "no-error-bound": EXIT_FAILED,
    "hypotheses-violated": EXIT_HYPOTHESES_VIOLATED,
    "inconclusive": EXIT_INCONCLUSIVE,
}

# Verdict value -> exit code for the check-* commands
VERDICT_EXIT_CODES = {
    "pass": EXIT_OK,
    "fail": EXIT_FAILED,
    "inconclusive": EXIT_INCONCLUSIVE,
}

# ============================================================
# REPORT FILES
# ============================================================

REPORT_TEXT_FILE = "report.txt"
REPORT_JSON_FILE = "report.json"
TRACE_CSV_FILE = "trace.csv"
WITNESS_CSV_FILE = "witnesses.csv"
PLOT_CSV_FILE = "plot_data.csv"

TRACE_CSV_HEADER = ["radius", "tau_theoretical_sup", "tau_empirical_sup", "sample_count"]
WITNESS_CSV_HEADER = ["radius", "x", "distance", "violation", "ratio"]
PLOT_CSV_HEADER = ["distance_to_x_bar", "ratio"]

# Vector entries inside one CSV cell
VECTOR_SEPARATOR = " "

REPORT_TITLE = "Local error bound analysis"

REPORT_HEADER_TEMPLATE = """{title}
{underline}
instance        : {instance}
seed            : {seed}
version         : {version}
radii           : {radii}
samples/radius  : {samples}
"""

HYPOTHESES_TEMPLATE = """
Hypotheses
----------
boundary condition bd(S_f) in f^-1(0) : {boundary}
interior of domain                     : {interior}
Jacobian surjective at x_bar           : {surjective}
sigma_min / kappa_linear               : {sigma_min} / {kappa_linear}
kappa_empirical (worst of {pairs} pairs) : {kappa_empirical}
Robinson qualification                 : {robinson}
epigraphical contact test              : {shapiro}
"""

MODULUS_TEMPLATE = """
Moduli
------
tau_theoretical = {tau_theoretical}{applicability}
tau_empirical = {tau_empirical}
empirical region  : {region}
theoretical trend : {theoretical_trend}
empirical trend   : {empirical_trend}
empirical diverged: {diverged}
interior x_bar    : {interior_flag}
relative gap      : {agreement}
sufficiency bound : {sufficiency}

diagnosis: {diagnosis}
"""

NON_SURJECTIVE_NOTE = "Jacobian of g at x_bar is not surjective (g is not metrically regular there)"
NOT_APPLICABLE_NOTE = "tau_theoretical is not applicable: a hypothesis check failed, the value is reported for reference only"
EPIGRAPH_IMPLICATION_NOTE = (
    "Tested the directional-derivative inequality only; a pass supports the "
    "epigraphical contact property, it does not by itself give the set property "
    "when phi is discontinuous."
)

# ============================================================
# VALIDATION MESSAGES
# ============================================================

MSG_AT_LEAST_ONE_PIECE = "f needs at least one piece"
MSG_NOT_IN_SOLUTION_SET = "x_bar not in solution set: f(g(x_bar)) = {value:.6g} exceeds tolerance"
MSG_RADII_DECREASING = "radii must be positive and strictly decreasing"
MSG_DIMENSION_MISMATCH = "{what}: expected dimension {expected}, got {actual}"
MSG_UNKNOWN_KIND = "unknown map kind '{kind}' (expected affine, polynomial, quadratic or composite)"
MSG_MISSING_SECTION = "missing section [{section}]"
MSG_ORACLE_NOT_SERIALIZABLE = "maps built from callables cannot be written to a problem file"

# ============================================================
# SHAPIRO TEST DEFAULTS
# ============================================================

SHAPIRO_SET_EPSILONS = (0.5, 0.25, 0.1)
