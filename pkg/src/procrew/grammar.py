"""Canonical text format for procedures: parsing, rendering, model-output
answer extraction, and statement splitting.

Grammar (EBNF):

    procedure   = { action_line } ;
    action_line = ident "(" [ arg { "," arg } ] ")" [ "->" out { "," out } ] ";" ;
    arg         = ident "=" value ;
    value       = chem | mixref | quantity | string | list | flag ;
    chem        = "chem(" string { "," ident "=" quantity } ")" ;
    mixref      = "mix(" integer ")" ;
    out         = "mix(" integer ")" ;
    quantity    = number unit | number "-" number unit ;
    list        = "[" [ value { "," value } ] "]" ;
    flag        = "true" | "false" ;
    string      = '"' escaped-chars '"' ;

Action idents are the snake_case action names (``filter_solution``,
``yield_statement``, ...). Whitespace is insignificant outside strings;
``# ...`` comments run to end of line. Quantities are normalized to canonical
units at parse time; unknown units are preserved verbatim and flagged.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .schema import ACTION_BY_NAME, DEFAULT_SCHEMA, ActionType, SchemaConfig


class ProcedureSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class UnknownActionError(ProcedureSyntaxError):
    def __init__(self, name: str, line: int, col: int):
        super().__init__(f"unknown action {name!r}", line, col)
        self.name = name


class MalformedValueError(ProcedureSyntaxError):
    pass


class AnswerFormatError(ValueError):
    """Raised when a raw model output does not follow the reasoning format."""


@dataclass(frozen=True)
class QuantityLiteral:
    """Scalar or range quantity; ``hi`` is set for ranges like 89-90 °C."""

    value: float
    unit: str
    hi: Optional[float] = None
    nonstandard: bool = False


@dataclass(frozen=True)
class MixtureRef:
    index: int


@dataclass
class ChemicalLiteral:
    """A named chemical with labeled quantities, e.g. chem("NaCl", mass=5 g)."""

    name: str
    quantities: dict[str, QuantityLiteral] = field(default_factory=dict)

    def __eq__(self, other):
        return (
            isinstance(other, ChemicalLiteral)
            and self.name == other.name
            and self.quantities == other.quantities
        )


Value = Union[ChemicalLiteral, MixtureRef, QuantityLiteral, str, bool, list]


@dataclass
class Action:
    action_type: ActionType
    args: dict[str, Value] = field(default_factory=dict)
    outputs: list[int] = field(default_factory=list)

    def __eq__(self, other):
        return (
            isinstance(other, Action)
            and self.action_type == other.action_type
            and self.args == other.args
            and self.outputs == other.outputs
        )


@dataclass
class Procedure:
    actions: list[Action]
    source_span: Optional[list[tuple[int, int]]] = field(default=None, compare=False)

    def __eq__(self, other):
        return isinstance(other, Procedure) and self.actions == other.actions


@dataclass(frozen=True)
class RawModelOutput:
    text: str


@dataclass(frozen=True)
class AnswerFormatConfig:
    reasoning_open: str = "<think>"
    reasoning_close: str = "</think>"


DEFAULT_ANSWER_FORMAT = AnswerFormatConfig()


# --- tokenizer ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>[^\S\n]+)
    | (?P<comment>\#[^\n]*)
    | (?P<nl>\n)
    | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
    | (?P<string>"(?:[^"\\\n]|\\.)*")
    | (?P<word>[A-Za-z_°µμ%][A-Za-z_0-9°µμ%/]*)
    | (?P<punct>->|[(),;=\[\]\-])
    """,
    re.VERBOSE,
)

_STRING_UNESCAPE = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}

# tokens are (kind, text, offset) tuples; line/col derived only when erroring
_K, _T, _O = 0, 1, 2


def _line_col(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens: list[tuple[str, str, int]] = []
    append = tokens.append
    pos = 0
    for m in _TOKEN_RE.finditer(text):
        if m.start() != pos:
            line, col = _line_col(text, pos)
            raise ProcedureSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind not in ("ws", "comment", "nl"):
            append((kind, m.group(), m.start()))
        pos = m.end()
    if pos != len(text):
        line, col = _line_col(text, pos)
        raise ProcedureSyntaxError(f"unexpected character {text[pos]!r}", line, col)
    append(("eof", "", pos))
    return tokens


def _unescape(raw: str) -> str:
    out: list[str] = []
    i, n = 1, len(raw) - 1  # strip surrounding quotes
    while i < n:
        c = raw[i]
        if c == "\\":
            i += 1
            esc = raw[i]
            out.append(_STRING_UNESCAPE.get(esc, esc))
        else:
            out.append(c)
        i += 1
    return "".join(out)


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")


# --- parser ------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[tuple[str, str, int]], config: SchemaConfig, source: str):
        self.tokens = tokens
        self.pos = 0
        self.config = config
        self.source = source

    def _fail(self, message: str, tok, cls=ProcedureSyntaxError):
        line, col = _line_col(self.source, tok[_O])
        raise cls(message, line, col)

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def next(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, text: Optional[str] = None) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        if tok[_K] != kind or (text is not None and tok[_T] != text):
            expected = text if text is not None else kind
            self._fail(f"expected {expected!r}, found {tok[_T] or tok[_K]!r}", tok)
        self.pos += 1
        return tok

    def parse_procedure(self) -> Procedure:
        actions = []
        spans = []
        while self.tokens[self.pos][_K] != "eof":
            start = self.tokens[self.pos][_O]
            actions.append(self.parse_action_line())
            terminator = self.tokens[self.pos - 1]
            spans.append((start, terminator[_O] + len(terminator[_T])))
        return Procedure(actions=actions, source_span=spans)

    def parse_action_line(self) -> Action:
        action = self.parse_action()
        self.expect("punct", ";")
        return action

    def parse_action(self) -> Action:
        tok = self.expect("word")
        action_type = ACTION_BY_NAME.get(tok[_T])
        if action_type is None:
            line, col = _line_col(self.source, tok[_O])
            raise UnknownActionError(tok[_T], line, col)
        self.expect("punct", "(")
        args: dict[str, Value] = {}
        if not self._at_punct(")"):
            while True:
                name_tok = self.expect("word")
                if name_tok[_T] in args:
                    self._fail(f"duplicate argument {name_tok[_T]!r}", name_tok)
                self.expect("punct", "=")
                args[name_tok[_T]] = self.parse_value()
                if self._at_punct(","):
                    self.pos += 1
                else:
                    break
        self.expect("punct", ")")
        outputs: list[int] = []
        if self._at_punct("->"):
            self.pos += 1
            while True:
                outputs.append(self.parse_mixref().index)
                if self._at_punct(","):
                    self.pos += 1
                else:
                    break
        return Action(action_type=action_type, args=args, outputs=outputs)

    def _at_punct(self, text: str) -> bool:
        tok = self.tokens[self.pos]
        return tok[_K] == "punct" and tok[_T] == text

    def parse_value(self) -> Value:
        tok = self.peek()
        kind = tok[_K]
        if kind == "string":
            self.pos += 1
            return _unescape(tok[_T])
        if kind == "number" or (kind == "punct" and tok[_T] == "-"):
            return self.parse_quantity()
        if kind == "punct" and tok[_T] == "[":
            self.pos += 1
            items: list[Value] = []
            if not self._at_punct("]"):
                while True:
                    items.append(self.parse_value())
                    if self._at_punct(","):
                        self.pos += 1
                    else:
                        break
            self.expect("punct", "]")
            return items
        if kind == "word":
            text = tok[_T]
            if text == "chem":
                return self.parse_chem()
            if text == "mix":
                return self.parse_mixref()
            if text == "true":
                self.pos += 1
                return True
            if text == "false":
                self.pos += 1
                return False
        self._fail(f"expected a value, found {tok[_T] or tok[_K]!r}", tok, MalformedValueError)

    def parse_chem(self) -> ChemicalLiteral:
        self.expect("word", "chem")
        self.expect("punct", "(")
        name_tok = self.expect("string")
        name = _unescape(name_tok[_T])
        quantities: dict[str, QuantityLiteral] = {}
        while self._at_punct(","):
            self.pos += 1
            label_tok = self.expect("word")
            if label_tok[_T] in quantities:
                self._fail(f"duplicate quantity label {label_tok[_T]!r}", label_tok, MalformedValueError)
            self.expect("punct", "=")
            quantities[label_tok[_T]] = self.parse_quantity()
        self.expect("punct", ")")
        return ChemicalLiteral(name=name, quantities=quantities)

    def parse_mixref(self) -> MixtureRef:
        self.expect("word", "mix")
        self.expect("punct", "(")
        tok = self.expect("number")
        try:
            index = int(tok[_T])
        except ValueError:
            self._fail(f"mixture index must be an integer, found {tok[_T]!r}", tok, MalformedValueError)
        self.expect("punct", ")")
        return MixtureRef(index=index)

    def _parse_number(self) -> float:
        sign = 1.0
        if self._at_punct("-"):
            self.pos += 1
            sign = -1.0
        tok = self.expect("number")
        return sign * float(tok[_T])

    def parse_quantity(self) -> QuantityLiteral:
        lo = self._parse_number()
        hi: Optional[float] = None
        if self._at_punct("-"):
            self.pos += 1
            hi = self._parse_number()
        tok = self.expect("word")
        unit = tok[_T]
        value, canon_unit, standard = self.config.canonicalize(lo, unit)
        if hi is not None:
            hi_value, _, _ = self.config.canonicalize(hi, unit)
        else:
            hi_value = None
        return QuantityLiteral(value=value, unit=canon_unit, hi=hi_value, nonstandard=not standard)


def parse_procedure(text: str, config: SchemaConfig = DEFAULT_SCHEMA) -> Procedure:
    """Parse canonical procedure text; raises ProcedureSyntaxError with
    line/column on malformed input."""
    return _Parser(_tokenize(text), config, text).parse_procedure()


def parse_action_text(text: str, config: SchemaConfig = DEFAULT_SCHEMA) -> Action:
    """Parse a single action statement (trailing ';' optional)."""
    parser = _Parser(_tokenize(text), config, text)
    action = parser.parse_action()
    if parser._at_punct(";"):
        parser.next()
    tok = parser.peek()
    if tok[_K] != "eof":
        parser._fail(f"trailing input {tok[_T]!r}", tok)
    return action


# --- renderer ----------------------------------------------------------------


def format_number(v: float) -> str:
    """Shortest decimal that round-trips; at most 6 significant digits when
    that is lossless."""
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    short = f"{v:.6g}"
    return short if float(short) == v else repr(v)


def _render_quantity(q: QuantityLiteral) -> str:
    if q.hi is not None:
        return f"{format_number(q.value)}-{format_number(q.hi)} {q.unit}"
    return f"{format_number(q.value)} {q.unit}"


def _render_value(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{_escape(v)}"'
    if isinstance(v, QuantityLiteral):
        return _render_quantity(v)
    if isinstance(v, MixtureRef):
        return f"mix({v.index})"
    if isinstance(v, ChemicalLiteral):
        parts = [f'"{_escape(v.name)}"']
        parts.extend(f"{label}={_render_quantity(q)}" for label, q in v.quantities.items())
        return f"chem({', '.join(parts)})"
    if isinstance(v, list):
        return f"[{', '.join(_render_value(item) for item in v)}]"
    raise TypeError(f"cannot render value of type {type(v).__name__}")


def render_action(action: Action, config: SchemaConfig = DEFAULT_SCHEMA) -> str:
    schema = config.schema_for(action.action_type)
    ordered = [name for name in schema.param_names() if name in action.args]
    ordered.extend(name for name in action.args if name not in set(schema.param_names()))
    args = ", ".join(f"{name}={_render_value(action.args[name])}" for name in ordered)
    line = f"{action.action_type.value}({args})"
    if action.outputs:
        outs = ", ".join(f"mix({i})" for i in action.outputs)
        line += f" -> {outs}"
    return line + ";"


def render_procedure(p: Procedure, config: SchemaConfig = DEFAULT_SCHEMA) -> str:
    """Canonical text: one action per line, params in schema order, quantities
    in canonical units. parse(render(p)) == p."""
    return "\n".join(render_action(a, config) for a in p.actions)


# --- model-output handling ----------------------------------------------------


def extract_answer(raw: Union[RawModelOutput, str], fmt: AnswerFormatConfig = DEFAULT_ANSWER_FORMAT) -> tuple[str, str]:
    """Split a raw generation into (reasoning, answer).

    Raises AnswerFormatError when the reasoning block is absent, unbalanced,
    duplicated, or the answer that follows is empty: the whole-response
    penalty path.
    """
    text = raw.text if isinstance(raw, RawModelOutput) else raw
    closes = text.count(fmt.reasoning_close)
    # count opens that are not part of a close, for delimiter pairs where one
    # contains the other
    opens = text.replace(fmt.reasoning_close, "\x00").count(fmt.reasoning_open)
    if opens != 1 or closes != 1:
        raise AnswerFormatError(f"expected exactly one {fmt.reasoning_open}...{fmt.reasoning_close} block")
    start = text.find(fmt.reasoning_open)
    end = text.find(fmt.reasoning_close)
    if end < start:
        raise AnswerFormatError("reasoning block is unbalanced")
    if text[:start].strip():
        raise AnswerFormatError("text before the reasoning block")
    reasoning = text[start + len(fmt.reasoning_open):end]
    answer = text[end + len(fmt.reasoning_close):].strip()
    if not answer:
        raise AnswerFormatError("empty answer block")
    return reasoning, answer


def split_actions(answer: str) -> list[str]:
    """Split an answer block on top-level ';' terminators.

    Terminators inside strings, parentheses, or brackets are ignored; comments
    are skipped. Malformed segments are preserved so the reward engine can
    score them positionally. Total: returns a possibly-empty list.
    """
    segments: list[str] = []
    buf: list[str] = []
    depth = 0
    in_string = False
    in_comment = False
    i, n = 0, len(answer)
    while i < n:
        c = answer[i]
        if in_comment:
            if c == "\n":
                in_comment = False
                buf.append(c)
            i += 1
            continue
        if in_string:
            buf.append(c)
            if c == "\\" and i + 1 < n:
                buf.append(answer[i + 1])
                i += 2
                continue
            if c == '"':
                in_string = False
            i += 1
            continue
        if c == "#":
            in_comment = True
            i += 1
            continue
        if c == '"':
            in_string = True
            buf.append(c)
        elif c in "([":
            depth += 1
            buf.append(c)
        elif c in ")]":
            depth = max(0, depth - 1)
            buf.append(c)
        elif c == ";" and depth == 0:
            seg = "".join(buf).strip()
            if seg:
                segments.append(seg)
            buf = []
        else:
            buf.append(c)
        i += 1
    tail = "".join(buf).strip()
    if tail:
        segments.append(tail)
    return segments
