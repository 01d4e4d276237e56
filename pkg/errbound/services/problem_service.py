"""
errbound/services/problem_service.py

Purpose: Problem files

- Parser for the sectioned problem format (errors anchored at line and column)
- Writer with 17 significant digits (lossless round trip)
- Parser for excess problems ([C] polyhedron, [D] cone)
- Catalogue of built-in instances

Grammar (comments start with '#'):

    [f]                       one piece per line: slope_1, ..., slope_m, intercept
    [g]                       kind = affine | polynomial | quadratic | composite
                              affine:     row = ...      (one per output), offset = ...
                              polynomial: component = exp:coef, exp:coef   (one per coordinate)
                              quadratic:  matrix.j = r11, r12; r21, r22   linear.j = ...   constant.j = c
                              composite:  sections [g.inner] and [g.outer] hold the two maps
    [point]                   x_bar entries, comma separated
    [options]                 name, radii, samples, seed, active_tol, boundary_tol,
                              feasibility_tol, division_guard, equivalence_tol
"""

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from errbound.core.config import settings
from errbound.core.exceptions import ErrboundError
from errbound.core.logging import get_logger
from errbound.schemas.problem import ProblemOptions, Tolerances
from errbound.services.analyzer_service import ProblemInstance
from errbound.services.function_service import MaxAffineFunction, SmoothMap
from errbound.services.geometry_service import PolyCone, Polyhedron
from errbound.utils.constants import (
    MSG_AT_LEAST_ONE_PIECE,
    MSG_MISSING_SECTION,
    MSG_ORACLE_NOT_SERIALIZABLE,
    MSG_UNKNOWN_KIND,
)
from errbound.utils.validation_utils import parse_number

logger = get_logger(__name__)

SECTION_PATTERN = re.compile(r"^\[\s*([A-Za-z][\w.]*)\s*\]$")
INDEXED_KEY_PATTERN = re.compile(r"^(matrix|linear|constant)\.(\d+)$")

TOLERANCE_KEYS = tuple(Tolerances.model_fields)
OPTION_KEYS = ("name", "radii", "samples", "seed") + TOLERANCE_KEYS


class ProblemFileError(ErrboundError):
    """Malformed or invalid problem file, anchored at a line and column when known."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None,
                 source: Optional[str] = None):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        super().__init__(str(self))

    def __str__(self) -> str:
        location = self.source or "<problem>"
        if self.line is not None:
            location += f":{self.line}"
            if self.column is not None:
                location += f":{self.column}"
        return f"{location}: {self.message}"


@dataclass(frozen=True)
class _Line:
    number: int
    text: str
    indent: int


@dataclass(frozen=True)
class ExcessProblem:
    """Input of the excess command: e(C, D) and an optional certificate level tau."""
    C: Polyhedron
    D: PolyCone
    tau: Optional[float] = None
    samples: int = 256
    seed: int = 0


def format_number(value: float) -> str:
    return format(float(value), f".{settings.FLOAT_DIGITS}g")


def _format_list(values) -> str:
    return ", ".join(format_number(v) for v in np.ravel(values))


# ============================================================================
# LEXING
# ============================================================================

class _Reader:
    """Section table of one problem text with located number parsing."""

    def __init__(self, text: str, source: Optional[str]):
        self.source = source
        self.sections: Dict[str, List[_Line]] = {}
        self.headers: Dict[str, int] = {}
        current = None
        for number, raw in enumerate(text.splitlines(), start=1):
            content = raw.split("#", 1)[0].rstrip()
            stripped = content.strip()
            if not stripped:
                continue
            match = SECTION_PATTERN.match(stripped)
            if match:
                current = match.group(1).lower()
                if current in self.sections:
                    raise self.error(f"duplicate section [{current}]", number, 1)
                self.sections[current] = []
                self.headers[current] = number
                continue
            if current is None:
                raise self.error("content before the first section", number, 1)
            self.sections[current].append(_Line(number, stripped, len(content) - len(content.lstrip())))

    def error(self, message: str, line: Optional[int] = None, column: Optional[int] = None) -> ProblemFileError:
        return ProblemFileError(message, line, column, self.source)

    def section(self, name: str) -> List[_Line]:
        if name not in self.sections:
            raise self.error(MSG_MISSING_SECTION.format(section=name))
        return self.sections[name]

    def numbers(self, line: _Line, text: str, start: int, separator: str = ",") -> List[float]:
        """Parses `text` (found at 0-based offset `start` of the line) as a number list."""
        values = []
        offset = 0
        for token in text.split(separator):
            column = line.indent + start + offset + (len(token) - len(token.lstrip())) + 1
            try:
                values.append(parse_number(token))
            except ValueError as exc:
                raise self.error(str(exc), line.number, column) from exc
            offset += len(token) + len(separator)
        return values

    def key_value(self, line: _Line) -> Tuple[str, str, int]:
        if "=" not in line.text:
            raise self.error("expected 'key = value'", line.number, line.indent + 1)
        key, value = line.text.split("=", 1)
        start = len(key) + 1 + (len(value) - len(value.lstrip()))
        return key.strip().lower(), value.strip(), start


# ============================================================================
# PARSING
# ============================================================================

def _parse_f(reader: _Reader) -> MaxAffineFunction:
    lines = reader.section("f")
    if not lines:
        raise reader.error(MSG_AT_LEAST_ONE_PIECE, reader.headers["f"], 1)
    rows = []
    for line in lines:
        row = reader.numbers(line, line.text, 0)
        if len(row) < 2:
            raise reader.error("a piece needs at least one slope and an intercept", line.number, line.indent + 1)
        if rows and len(row) != len(rows[0]):
            raise reader.error(f"expected {len(rows[0])} entries, got {len(row)}", line.number, line.indent + 1)
        rows.append(row)
    table = np.array(rows)
    return MaxAffineFunction(table[:, :-1], table[:, -1])


def _parse_terms(reader: _Reader, line: _Line, text: str, start: int) -> List[Tuple[int, float]]:
    terms = []
    offset = 0
    for token in text.split(","):
        column = line.indent + start + offset + 1
        if ":" not in token:
            raise reader.error(f"expected 'exponent:coefficient', got '{token.strip()}'", line.number, column)
        exponent_text, coefficient_text = token.split(":", 1)
        try:
            exponent = parse_number(exponent_text)
            coefficient = parse_number(coefficient_text)
        except ValueError as exc:
            raise reader.error(str(exc), line.number, column) from exc
        if exponent < 0 or exponent != int(exponent):
            raise reader.error(f"exponent {exponent_text.strip()} is not a non-negative integer", line.number, column)
        terms.append((int(exponent), coefficient))
        offset += len(token) + 1
    return terms


def _parse_map(reader: _Reader, name: str) -> SmoothMap:
    lines = reader.section(name)
    header = reader.headers[name]
    entries: List[Tuple[str, str, int, _Line]] = [reader.key_value(line) + (line,) for line in lines]
    kinds = [(value, line) for key, value, _, line in entries if key == "kind"]
    if not kinds:
        raise reader.error(f"[{name}] needs 'kind = ...'", header, 1)
    kind, kind_line = kinds[0][0].lower(), kinds[0][1]

    try:
        if kind == "affine":
            rows = [reader.numbers(line, value, start) for key, value, start, line in entries if key == "row"]
            offsets = [reader.numbers(line, value, start) for key, value, start, line in entries if key == "offset"]
            if not rows:
                raise reader.error("affine map needs at least one 'row = ...'", header, 1)
            return SmoothMap.affine(np.array(rows), offsets[0] if offsets else None)

        if kind == "polynomial":
            components = [_parse_terms(reader, line, value, start)
                          for key, value, start, line in entries if key == "component"]
            if not components:
                raise reader.error("polynomial map needs at least one 'component = ...'", header, 1)
            return SmoothMap.polynomial(components)

        if kind == "quadratic":
            indexed: Dict[str, Dict[int, Tuple[str, int, _Line]]] = {"matrix": {}, "linear": {}, "constant": {}}
            for key, value, start, line in entries:
                match = INDEXED_KEY_PATTERN.match(key)
                if match:
                    indexed[match.group(1)][int(match.group(2))] = (value, start, line)
            m = len(indexed["matrix"])
            if m == 0 or sorted(indexed["matrix"]) != list(range(m)):
                raise reader.error("quadratic map needs matrix.0 ... matrix.(m-1)", header, 1)
            matrices = []
            for j in range(m):
                value, start, line = indexed["matrix"][j]
                matrices.append(_parse_matrix(reader, line, value, start))
            n = matrices[0].shape[0]
            linear = np.zeros((m, n))
            constants = np.zeros(m)
            for j, (value, start, line) in indexed["linear"].items():
                if j < m:
                    linear[j] = reader.numbers(line, value, start)
            for j, (value, start, line) in indexed["constant"].items():
                if j < m:
                    constants[j] = reader.numbers(line, value, start)[0]
            return SmoothMap.quadratic(np.array(matrices), linear, constants)

        if kind == "composite":
            inner = _parse_map(reader, f"{name}.inner")
            outer = _parse_map(reader, f"{name}.outer")
            return SmoothMap.compose(outer, inner)
    except ProblemFileError:
        raise
    except ErrboundError as exc:
        raise reader.error(f"[{name}]: {exc}", header, 1) from exc
    except ValueError as exc:
        raise reader.error(f"[{name}]: {exc}", header, 1) from exc

    raise reader.error(MSG_UNKNOWN_KIND.format(kind=kind), kind_line.number, kind_line.indent + 1)


def _parse_matrix(reader: _Reader, line: _Line, value: str, start: int) -> np.ndarray:
    rows = []
    offset = 0
    for chunk in value.split(";"):
        rows.append(reader.numbers(line, chunk, start + offset))
        offset += len(chunk) + 1
    if any(len(row) != len(rows) for row in rows):
        raise reader.error("quadratic matrix must be square", line.number, line.indent + start + 1)
    return np.array(rows)


def _parse_point(reader: _Reader) -> np.ndarray:
    lines = reader.section("point")
    values: List[float] = []
    for line in lines:
        values.extend(reader.numbers(line, line.text, 0))
    if not values:
        raise reader.error("[point] is empty", reader.headers["point"], 1)
    return np.array(values)


def _parse_options(reader: _Reader) -> ProblemOptions:
    raw: Dict[str, object] = {}
    lines_by_key: Dict[str, _Line] = {}
    for line in reader.sections.get("options", []):
        key, value, start = reader.key_value(line)
        if key not in OPTION_KEYS:
            raise reader.error(f"unknown option '{key}'", line.number, line.indent + 1)
        lines_by_key[key] = line
        if key == "name":
            raw[key] = value
        elif key == "radii":
            raw[key] = reader.numbers(line, value, start)
        elif key in ("samples", "seed"):
            number = reader.numbers(line, value, start)[0]
            if number != int(number):
                raise reader.error(f"{key} must be an integer", line.number, line.indent + start + 1)
            raw[key] = int(number)
        else:
            raw[key] = reader.numbers(line, value, start)[0]

    tolerances = {key: raw.pop(key) for key in TOLERANCE_KEYS if key in raw}
    try:
        return ProblemOptions(**raw, tolerances=Tolerances(**tolerances))
    except ValidationError as exc:
        first = exc.errors()[0]
        field_name = str(first["loc"][0]) if first["loc"] else ""
        line = lines_by_key.get(field_name)
        if line is None and tolerances:
            line = next((lines_by_key[k] for k in tolerances if k in lines_by_key), None)
        raise reader.error(
            f"option '{field_name}': {first['msg']}",
            line.number if line else reader.headers.get("options"),
            line.indent + 1 if line else 1,
        ) from exc


def parse_problem_text(text: str, source: Optional[str] = None) -> ProblemInstance:
    """
    Parses a problem document into a validated ProblemInstance.

    Raises:
        ProblemFileError: Syntax or section errors (with line and column)
        ProblemValidationError: The instance breaks an invariant (e.g. x_bar not feasible)
    """
    reader = _Reader(text, source)
    f = _parse_f(reader)
    g = _parse_map(reader, "g")
    x_bar = _parse_point(reader)
    options = _parse_options(reader)

    default_name = Path(source).stem if source else "instance"
    return ProblemInstance(
        f=f,
        g=g,
        x_bar=x_bar,
        radii=tuple(options.radii),
        samples_per_radius=options.samples,
        tolerances=options.tolerances,
        seed=options.seed if options.seed is not None else settings.SEED,
        name=options.name or default_name,
    )


def parse_problem(path: Union[str, Path]) -> ProblemInstance:
    """
    Reads and parses a problem file.

    Raises:
        ProblemFileError: Unreadable file or malformed content
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemFileError(f"cannot read problem file: {exc.strerror or exc}", source=str(path)) from exc
    logger.debug(f"Parsing problem file {path}")
    return parse_problem_text(text, str(path))


def parse_seed_in_file(path: Union[str, Path]) -> Optional[int]:
    """The [options] seed of a problem file, if present."""
    reader = _Reader(Path(path).read_text(encoding="utf-8"), str(path))
    if "options" not in reader.sections:
        return None
    return _parse_options(reader).seed


def parse_excess_text(text: str, source: Optional[str] = None) -> ExcessProblem:
    """
    Parses an excess document: [C] rows "a_1, ..., a_n, b" (a.x <= b),
    [D] cone normals (may be empty), optional [options] tau, samples, seed.
    """
    reader = _Reader(text, source)
    c_lines = reader.section("c")
    if not c_lines:
        raise reader.error("[c] needs at least one row", reader.headers["c"], 1)
    c_rows = [reader.numbers(line, line.text, 0) for line in c_lines]
    if any(len(row) != len(c_rows[0]) or len(row) < 2 for row in c_rows):
        raise reader.error("[c] rows must have equal length n + 1 >= 2", c_lines[0].number, 1)
    table = np.array(c_rows)
    dim = table.shape[1] - 1

    d_rows = [reader.numbers(line, line.text, 0) for line in reader.section("d")]
    for line, row in zip(reader.sections["d"], d_rows):
        if len(row) != dim:
            raise reader.error(f"[d] rows need {dim} entries", line.number, line.indent + 1)

    tau, samples, seed = None, 256, settings.SEED
    for line in reader.sections.get("options", []):
        key, value, start = reader.key_value(line)
        number = reader.numbers(line, value, start)[0]
        if key == "tau":
            tau = number
        elif key == "samples":
            samples = int(number)
        elif key == "seed":
            seed = int(number)
        else:
            raise reader.error(f"unknown option '{key}'", line.number, line.indent + 1)

    try:
        C = Polyhedron(table[:, :-1], table[:, -1], dim=dim)
        D = PolyCone(np.array(d_rows).reshape(-1, dim), dim=dim)
    except ErrboundError as exc:
        raise reader.error(str(exc)) from exc
    return ExcessProblem(C=C, D=D, tau=tau, samples=samples, seed=seed)


def parse_excess_problem(path: Union[str, Path]) -> ExcessProblem:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemFileError(f"cannot read excess file: {exc.strerror or exc}", source=str(path)) from exc
    return parse_excess_text(text, str(path))


# ============================================================================
# WRITING
# ============================================================================

def _write_map(g: SmoothMap, name: str) -> List[str]:
    lines = [f"[{name}]", f"kind = {g.kind}"]
    parameters = g.parameters
    if g.kind == "affine":
        lines.extend(f"row = {_format_list(row)}" for row in parameters["matrix"])
        lines.append(f"offset = {_format_list(parameters['offset'])}")
    elif g.kind == "polynomial":
        for component in parameters["components"]:
            terms = ", ".join(f"{exponent}:{format_number(coefficient)}" for exponent, coefficient in component)
            lines.append(f"component = {terms}")
    elif g.kind == "quadratic":
        for j, matrix in enumerate(parameters["matrices"]):
            lines.append(f"matrix.{j} = " + "; ".join(_format_list(row) for row in matrix))
            lines.append(f"linear.{j} = {_format_list(parameters['linear'][j])}")
            lines.append(f"constant.{j} = {format_number(parameters['constants'][j])}")
    elif g.kind == "composite":
        lines.append("")
        lines.extend(_write_map(parameters["inner"], f"{name}.inner"))
        lines.append("")
        lines.extend(_write_map(parameters["outer"], f"{name}.outer"))
    else:
        raise ProblemFileError(MSG_ORACLE_NOT_SERIALIZABLE)
    return lines


def write_problem(instance: ProblemInstance) -> str:
    """Problem document for an instance; parse_problem_text inverts it exactly."""
    lines = ["# slopes..., intercept", "[f]"]
    for slope, intercept in instance.f.pieces:
        lines.append(_format_list(list(slope) + [intercept]))
    lines.append("")
    lines.extend(_write_map(instance.g, "g"))
    lines.extend(["", "[point]", _format_list(instance.x_bar), "", "[options]"])
    lines.append(f"name = {instance.name}")
    lines.append(f"radii = {_format_list(instance.radii)}")
    lines.append(f"samples = {instance.samples_per_radius}")
    lines.append(f"seed = {instance.seed}")
    for key, value in instance.tolerances.model_dump().items():
        lines.append(f"{key} = {format_number(value)}")
    return "\n".join(lines) + "\n"


# ============================================================================
# BUILT-IN INSTANCES
# ============================================================================

def _cubic(intercept: float, x_bar: float, name: str) -> ProblemInstance:
    return ProblemInstance(
        f=MaxAffineFunction([[1.0]], [intercept]),
        g=SmoothMap.polynomial([[(3, 1.0)]]),
        x_bar=np.array([x_bar]),
        name=name,
    )


BUILTIN_INSTANCES = {
    # f(y) = y - 1, g(x) = x^3 at 1: S = (-inf, 1], modulus 1/3
    "cubic-regular": lambda: _cubic(-1.0, 1.0, "cubic-regular"),
    # f(y) = y, g(x) = x^3 at 0: Jacobian vanishes, no local error bound
    "cubic-degenerate": lambda: _cubic(0.0, 0.0, "cubic-degenerate"),
    # f(y) = max(y1, y2), g = identity at the corner of the orthant: modulus sqrt(2)
    "orthant-corner": lambda: ProblemInstance(
        f=MaxAffineFunction(np.eye(2), [0.0, 0.0]),
        g=SmoothMap.identity(2),
        x_bar=np.zeros(2),
        name="orthant-corner",
    ),
    # f(y) = y, g = identity at 0: d(x, S) = [x]_+, modulus 1
    "halfline": lambda: ProblemInstance(
        f=MaxAffineFunction([[1.0]], [0.0]),
        g=SmoothMap.identity(1),
        x_bar=np.zeros(1),
        name="halfline",
    ),
}


def builtin_instance(name: str, **changes) -> ProblemInstance:
    """
    A catalogue instance, optionally with overridden fields (radii, seed, ...).

    Raises:
        KeyError: Unknown name
    """
    if name not in BUILTIN_INSTANCES:
        raise KeyError(f"unknown instance '{name}' (available: {', '.join(sorted(BUILTIN_INSTANCES))})")
    instance = BUILTIN_INSTANCES[name]()
    return instance.with_options(**changes) if changes else instance
