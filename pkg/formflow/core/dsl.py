"""Block language for relations, form literals and characteristic problems.

    relation "first law" on (T, V) {
      constants { R: 1.0; c_v: 2.5 }
      psi: unknown
      omega: c_v*dT + (R*T/V)*dV
      connection: zero
      domain { T: 1 .. 10; V: 1 .. 5 }
    }
    form 2 on (x, y, z): x*dx^dy + dz^dx

    hj on (x) { E: p^2/2 }
    initial { u0: x; seed: x }
    bundle { from: -1; to: 1; count: 5 }
    integrate { step: 0.01; steps: 100 }

Entries end at a newline or ';'. ``#`` starts a comment. Differentials
``dX`` and wedges ``dX^dY`` are recognised for the declared coordinates only.
"""
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import expr as ex
from .characteristics import CauchyData, FirstOrderPDE, HamiltonJacobiProblem, Problem, momentum_name
from .errors import DomainViolationError, DslSyntaxError, ExpressionSyntaxError, FormflowError, UnboundVariableError
from .expr import Expression
from .forms import Connection, DifferentialForm, permutation_sign
from .grid import Grid
from .relations import FunctionalRelation

logger = logging.getLogger(__name__)

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_STRING = re.compile(r'"([^"\\\n]*)"')
_INT = re.compile(r"\d+")
_BLOCKS = ("relation", "form", "pde", "hj", "initial", "bundle", "integrate")


@dataclass
class Value:
    text: str
    offset: int


@dataclass
class Section:
    offset: int
    entries: Dict[str, Union[Value, 'Section']] = field(default_factory=dict)
    keys: Dict[str, int] = field(default_factory=dict)

    def value(self, key: str) -> Optional[Value]:
        found = self.entries.get(key)
        if isinstance(found, Section):
            raise DslSyntaxError(f"'{key}' must be a value, not a block", self.keys[key])
        return found

    def section(self, key: str) -> Optional['Section']:
        found = self.entries.get(key)
        if isinstance(found, Value):
            raise DslSyntaxError(f"'{key}' must be a block", self.keys[key], {"'{'"})
        return found

    def require(self, key: str) -> Value:
        found = self.value(key)
        if found is None:
            raise DslSyntaxError(f"missing '{key}'", self.offset, {key})
        return found

    def check_keys(self, allowed: Sequence[str]) -> None:
        for key, offset in self.keys.items():
            if key not in allowed:
                raise DslSyntaxError(f"unknown entry '{key}'", offset, set(allowed))


class _Reader:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def offset(self, index: Optional[int] = None) -> int:
        return len(self.text[:self.pos if index is None else index].encode("utf-8"))

    def error(self, message: str, expected=(), index: Optional[int] = None) -> DslSyntaxError:
        return DslSyntaxError(message, self.offset(index), expected)

    def skip(self, newlines: bool = True) -> None:
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "#":
                end = self.text.find("\n", self.pos)
                self.pos = len(self.text) if end < 0 else end
            elif ch in " \t\r" or (newlines and ch in "\n;"):
                self.pos += 1
            else:
                return

    def at_end(self) -> bool:
        self.skip()
        return self.pos >= len(self.text)

    def peek(self, symbol: str) -> bool:
        self.skip()
        return self.text.startswith(symbol, self.pos)

    def expect(self, symbol: str) -> None:
        if not self.peek(symbol):
            raise self.error(f"expected '{symbol}'", {f"'{symbol}'"})
        self.pos += len(symbol)

    def _match(self, pattern: re.Pattern, what: str) -> re.Match:
        self.skip()
        match = pattern.match(self.text, self.pos)
        if not match:
            raise self.error(f"expected {what}", {what})
        self.pos = match.end()
        return match

    def ident(self) -> str:
        return self._match(_IDENT, "identifier").group()

    def string(self) -> str:
        return self._match(_STRING, "string").group(1)

    def integer(self) -> int:
        return int(self._match(_INT, "integer").group())

    def coords(self) -> Tuple[str, ...]:
        self.expect("(")
        names = [self.ident()]
        while self.peek(","):
            self.pos += 1
            names.append(self.ident())
        self.expect(")")
        if len(set(names)) != len(names):
            raise self.error(f"repeated coordinate in {tuple(names)}")
        return tuple(names)

    def value(self) -> Value:
        """Raw text up to the end of the entry, with balanced parentheses."""
        self.skip(newlines=False)
        start, depth = self.pos, 0
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            elif depth <= 0 and ch in "\n;}#":
                break
            self.pos += 1
        raw = self.text[start:self.pos]
        if not raw.strip():
            raise self.error("expected a value", {"value"}, start)
        return Value(raw.rstrip(), self.offset(start))

    def section(self) -> Section:
        self.skip()
        section = Section(self.offset())
        self.expect("{")
        while not self.peek("}"):
            if self.pos >= len(self.text):
                raise self.error("unterminated block", {"'}'"})
            key_at = self.offset()
            words = [self.ident()]
            self.skip(newlines=False)
            while _IDENT.match(self.text, self.pos):
                words.append(self.ident())
                self.skip(newlines=False)
            key = " ".join(words)
            if key in section.entries:
                raise DslSyntaxError(f"duplicate entry '{key}'", key_at)
            section.keys[key] = key_at
            if self.peek("{"):
                section.entries[key] = self.section()
            else:
                self.expect(":")
                section.entries[key] = self.value()
        self.expect("}")
        return section


# Values

def _expression(value: Value, constants: Mapping[str, float]) -> Expression:
    try:
        e = ex.parse(value.text)
    except ExpressionSyntaxError as exc:
        raise DslSyntaxError(f"invalid expression {value.text.strip()!r}", value.offset + exc.offset,
                             exc.expected) from exc
    return ex.substitute(e, constants)


def _number(value: Value, constants: Mapping[str, float]) -> float:
    e = _expression(value, constants)
    try:
        return float(ex.evaluate(e, {}))
    except UnboundVariableError as exc:
        raise DslSyntaxError(f"expected a number, found unknown name '{exc.name}'", value.offset) from exc
    except DomainViolationError as exc:
        raise DslSyntaxError(f"expected a number: {exc}", value.offset) from exc


def _count(value: Value, constants: Mapping[str, float]) -> int:
    number = _number(value, constants)
    if number != int(number):
        raise DslSyntaxError(f"expected an integer, got {number!r}", value.offset)
    return int(number)


def _constants(section: Optional[Section]) -> Dict[str, float]:
    out: Dict[str, float] = {}
    if section is None:
        return out
    for key in section.entries:
        if not _IDENT.fullmatch(key):
            raise DslSyntaxError(f"invalid constant name '{key}'", section.keys[key])
        out[key] = _number(section.value(key), out)
    return out


def _domain(section: Optional[Section], coords: Sequence[str],
            constants: Mapping[str, float]) -> Dict[str, Tuple[float, float]]:
    out: Dict[str, Tuple[float, float]] = {}
    if section is None:
        return out
    for key in section.entries:
        if key not in coords:
            raise DslSyntaxError(f"'{key}' is not a coordinate", section.keys[key], set(coords))
        value = section.value(key)
        lo, sep, hi = value.text.partition("..")
        if not sep:
            raise DslSyntaxError("expected a range 'lo .. hi'", value.offset, {"'..'"})
        hi_offset = value.offset + len((lo + sep).encode("utf-8"))
        out[key] = (_number(Value(lo, value.offset), constants), _number(Value(hi, hi_offset), constants))
    return out


# Form literals

def _differential_pattern(coords: Sequence[str]) -> Tuple[re.Pattern, re.Pattern]:
    names = "|".join(re.escape(c) for c in sorted(coords, key=len, reverse=True))
    single = rf"d({names})(?![A-Za-z0-9_])"
    wedge = re.compile(rf"(?<![A-Za-z0-9_])d(?:{names})(?![A-Za-z0-9_])(?:\s*\^\s*d(?:{names})(?![A-Za-z0-9_]))*")
    return wedge, re.compile(single)


def parse_form(text: str, coords: Sequence[str], degree: Optional[int] = None,
               constants: Optional[Mapping[str, float]] = None, offset: int = 0) -> DifferentialForm:
    """Read ``a*dx^dy + ...``; each term must be linear in exactly one wedge of differentials."""
    coords = tuple(coords)
    wedge_re, single_re = _differential_pattern(coords)
    pieces, placeholders, shifts = [], {}, []
    last = 0
    for match in wedge_re.finditer(text):
        names = tuple(single_re.findall(match.group()))
        name = placeholders.setdefault(names, f"__d{len(placeholders)}")
        pieces.append(text[last:match.start()])
        pieces.append(name)
        last = match.end()
        shifts.append((len("".join(pieces)), match.end() - (len("".join(pieces)))))
    pieces.append(text[last:])
    rewritten = "".join(pieces)

    def original_offset(exc: ExpressionSyntaxError) -> int:
        index = len(rewritten.encode("utf-8")[:exc.offset].decode("utf-8", errors="ignore"))
        delta = 0
        for end, shift in shifts:
            if end <= index:
                delta = shift
        return offset + len(text[:index + delta].encode("utf-8"))

    try:
        e = ex.parse(rewritten)
    except ExpressionSyntaxError as exc:
        raise DslSyntaxError(f"invalid form {text.strip()!r}", original_offset(exc), exc.expected) from exc
    e = ex.substitute(e, constants or {})

    degrees = {len(names) for names in placeholders}
    if len(degrees) > 1:
        raise DslSyntaxError(f"form mixes terms of degrees {sorted(degrees)}", offset)
    found = degrees.pop() if degrees else (degree if degree is not None else 1)
    if degree is not None and found != degree:
        raise DslSyntaxError(f"declared degree {degree} but terms have degree {found}", offset)
    if found == 0:
        return DifferentialForm.scalar(coords, e)

    symbols = set(placeholders.values())
    coefficients: Dict[Tuple[int, ...], Expression] = {}
    for names, symbol in placeholders.items():
        coefficient = ex.differentiate(e, symbol)
        if ex.free_variables(coefficient) & symbols:
            raise DslSyntaxError(f"form is not linear in d{'^d'.join(names)}", offset)
        index = tuple(coords.index(n) for n in names)
        sign = permutation_sign(index)
        if sign == 0:
            continue
        key = tuple(sorted(index))
        term = coefficient if sign > 0 else ex.neg(coefficient)
        coefficients[key] = ex.add(coefficients.get(key, ex.ZERO), term)
    rest = ex.substitute(e, {symbol: 0.0 for symbol in symbols})
    if rest != ex.ZERO:
        raise DslSyntaxError(f"term {ex.to_text(rest)!r} carries no differential", offset)
    return DifferentialForm(coords, found, coefficients)


def _connection(entry: Union[Value, Section, None], coords: Sequence[str],
                constants: Mapping[str, float]) -> Optional[Connection]:
    if entry is None:
        return None
    if isinstance(entry, Value):
        if entry.text.strip() != "zero":
            raise DslSyntaxError("connection must be 'zero' or a block of 's a b: value' entries", entry.offset,
                                 {"zero", "'{'"})
        return None
    components = {}
    for key in entry.entries:
        names = key.split()
        if len(names) != 3 or any(n not in coords for n in names):
            raise DslSyntaxError(f"connection key '{key}' must name three coordinates", entry.keys[key], set(coords))
        components[tuple(names)] = _expression(entry.value(key), constants)
    return Connection(tuple(coords), components)


# Blocks

@dataclass
class RelationBlock:
    label: str
    omega: DifferentialForm
    psi: Optional[Expression] = None
    connection: Optional[Connection] = None
    domain: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    count: int = 20
    offset: int = 0

    def relation(self) -> FunctionalRelation:
        return FunctionalRelation(self.omega, self.connection, self.psi, self.label)

    def grid(self) -> Optional[Grid]:
        """Grid over the declared domain; None unless every coordinate has a range."""
        if set(self.domain) != set(self.omega.coords):
            return None
        return Grid.uniform({c: self.domain[c] for c in self.omega.coords}, self.count)


@dataclass
class FormBlock:
    form: DifferentialForm
    offset: int = 0


@dataclass
class CharacteristicsRun:
    problem: Problem
    data: CauchyData
    seeds: np.ndarray
    step: float
    steps: int


@dataclass
class DslDocument:
    relations: List[RelationBlock] = field(default_factory=list)
    forms: List[FormBlock] = field(default_factory=list)
    problem: Optional[Problem] = None
    sections: Dict[str, Section] = field(default_factory=dict)
    constants: Dict[str, float] = field(default_factory=dict)

    def characteristics(self) -> CharacteristicsRun:
        if self.problem is None:
            raise DslSyntaxError("no 'pde' or 'hj' block", 0, {"pde", "hj"})
        initial = self.sections.get("initial")
        bundle = self.sections.get("bundle")
        if initial is None or bundle is None:
            raise DslSyntaxError("characteristics need 'initial' and 'bundle' blocks", 0, {"initial", "bundle"})
        constants = self.constants
        initial.check_keys(("u0", "seed", "fixed", "momenta"))
        seed = initial.require("seed").text.strip()
        if seed not in self.problem.coords:
            raise DslSyntaxError(f"seed '{seed}' is not a coordinate", initial.require("seed").offset,
                                 set(self.problem.coords))
        fixed_section = initial.section("fixed")
        fixed = {k: _number(fixed_section.value(k), constants) for k in fixed_section.entries} if fixed_section else {}
        momenta_section = initial.section("momenta")
        momenta = ({k: _expression(momenta_section.value(k), constants) for k in momenta_section.entries}
                   if momenta_section else {})
        data = CauchyData(_expression(initial.require("u0"), constants), seed, fixed, momenta)

        bundle.check_keys(("from", "to", "count"))
        lo = _number(bundle.require("from"), constants)
        hi = _number(bundle.require("to"), constants)
        count = _count(bundle.require("count"), constants)
        seeds = np.linspace(lo, hi, count)

        step, steps = 0.01, 100
        integration = self.sections.get("integrate")
        if integration is not None:
            integration.check_keys(("step", "steps"))
            if integration.value("step") is not None:
                step = _number(integration.value("step"), constants)
            if integration.value("steps") is not None:
                steps = _count(integration.value("steps"), constants)
        return CharacteristicsRun(self.problem, data, seeds, step, steps)


def _relation_block(reader: _Reader, start: int) -> RelationBlock:
    label = reader.string() if reader.peek('"') else ""
    if reader.ident() != "on":
        raise reader.error("expected 'on'", {"on"})
    coords = reader.coords()
    body = reader.section()
    body.check_keys(("constants", "psi", "omega", "connection", "domain", "count"))
    constants = _constants(body.section("constants"))
    omega = body.require("omega")
    form = parse_form(omega.text, coords, None, constants, omega.offset)
    psi_value = body.value("psi")
    psi = None
    if psi_value is not None and psi_value.text.strip() != "unknown":
        psi = _expression(psi_value, constants)
    count_value = body.value("count")
    return RelationBlock(
        label=label,
        omega=form,
        psi=psi,
        connection=_connection(body.entries.get("connection"), coords, constants),
        domain=_domain(body.section("domain"), coords, constants),
        count=_count(count_value, constants) if count_value else 20,
        offset=start,
    )


def _form_block(reader: _Reader, start: int) -> FormBlock:
    degree = reader.integer()
    if reader.ident() != "on":
        raise reader.error("expected 'on'", {"on"})
    coords = reader.coords()
    reader.expect(":")
    value = reader.value()
    try:
        form = parse_form(value.text, coords, degree, {}, value.offset)
    except FormflowError as exc:
        if isinstance(exc, DslSyntaxError):
            raise
        raise DslSyntaxError(str(exc), value.offset) from exc
    return FormBlock(form, start)


def _problem_block(reader: _Reader, kind: str) -> Tuple[Problem, Dict[str, float]]:
    if reader.ident() != "on":
        raise reader.error("expected 'on'", {"on"})
    coords = reader.coords()
    body = reader.section()
    constants = _constants(body.section("constants"))
    if kind == "pde":
        body.check_keys(("F", "constants"))
        F = _expression(body.require("F"), constants)
        if "t" not in coords and (ex.depends_on(F, "t") or ex.depends_on(F, momentum_name("t"))):
            coords = ("t",) + coords
        return FirstOrderPDE(coords, F), constants
    body.check_keys(("E", "constants", "time"))
    time = body.value("time")
    return HamiltonJacobiProblem(coords, _expression(body.require("E"), constants),
                                 time=time.text.strip() if time else "t"), constants


def parse_document(text: str) -> DslDocument:
    reader = _Reader(text)
    document = DslDocument()
    while not reader.at_end():
        start = reader.offset()
        keyword = reader.ident()
        if keyword not in _BLOCKS:
            raise DslSyntaxError(f"unknown block '{keyword}'", start, set(_BLOCKS))
        if keyword == "relation":
            document.relations.append(_relation_block(reader, start))
        elif keyword == "form":
            document.forms.append(_form_block(reader, start))
        elif keyword in ("pde", "hj"):
            if document.problem is not None:
                raise DslSyntaxError("only one 'pde' or 'hj' block per document", start)
            try:
                document.problem, document.constants = _problem_block(reader, keyword)
            except DslSyntaxError:
                raise
            except FormflowError as exc:
                raise DslSyntaxError(str(exc), start) from exc
        else:
            if keyword in document.sections:
                raise DslSyntaxError(f"duplicate '{keyword}' block", start)
            document.sections[keyword] = reader.section()
    logger.debug("parsed %d relation(s), %d form(s), problem=%s", len(document.relations), len(document.forms),
                 type(document.problem).__name__ if document.problem else None)
    return document


def load(path: str) -> DslDocument:
    with open(path, "r", encoding="utf-8") as f:
        return parse_document(f.read())
