"""The constrained action grammar for switching plans.

This is the wire format between a candidate generator (an LLM or a stub
policy) and everything else, so parsing is strict: case-sensitive tokens,
no duplicate lines, ``do_nothing`` only on its own.  Serialization always
produces the canonical form — terms sorted by their byte-wise serialized
text — which reproduces the corridor-tagged-before-bare ordering of plans
like ``open(S3:21); open(S7:98); open(131)``.

EBNF (normative):

    plan      = "do_nothing" | action , { ";" , action } ;
    action    = "open(" , [ corridor , ":" ] , line , ")" ;
    corridor  = "S" , digits ;
    line      = digits ;   (* line id >= 1 *)
    digits    = digit , { digit } ;

Whitespace around terms and separators is ignored.  Anything else rejects.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

GRAMMAR_EBNF = """\
plan      = "do_nothing" | action , { ";" , action } ;
action    = "open(" , [ corridor , ":" ] , line , ")" ;
corridor  = "S" , digits ;
line      = digits ;
digits    = digit , { digit } ;
"""

_TERM = re.compile(r"^open\((?:(S[0-9]+):)?([0-9]+)\)$")


class GrammarReason(str, Enum):
    EMPTY_INPUT = "empty_input"
    BAD_TERM = "bad_term"
    INVALID_LINE = "invalid_line"
    DUPLICATE_LINE = "duplicate_line"
    DO_NOTHING_MIXED = "do_nothing_mixed"


class GrammarError(ValueError):
    """Rejection with a machine-readable reason code and a text position."""

    def __init__(self, reason: GrammarReason, position: int, detail: str):
        super().__init__(f"{reason.value} at position {position}: {detail}")
        self.reason = reason
        self.position = position
        self.detail = detail


@dataclass(frozen=True, order=True)
class Action:
    """One grammar term; ``line is None`` encodes do_nothing.

    Ordering is the normative canonical order: corridor-tagged terms sort
    before bare terms (matching the canonical display form), byte-wise on
    the serialized term within each group.
    """

    group: int
    text: str
    line: Optional[int]
    corridor: Optional[str]

    @staticmethod
    def do_nothing() -> "Action":
        return Action(2, "do_nothing", None, None)

    @staticmethod
    def open_line(line: int) -> "Action":
        if line < 1:
            raise ValueError("line ids start at 1")
        return Action(1, f"open({line})", line, None)

    @staticmethod
    def open_corridor_line(corridor: str, line: int) -> "Action":
        if line < 1:
            raise ValueError("line ids start at 1")
        if not re.match(r"^S[0-9]+$", corridor):
            raise ValueError(f"corridor name {corridor!r} must match S<number>")
        return Action(0, f"open({corridor}:{line})", line, corridor)

    @property
    def is_do_nothing(self) -> bool:
        return self.line is None

    def term(self) -> str:
        return self.text


@dataclass(frozen=True)
class SwitchPlan:
    """A canonicalized set of open actions (possibly the empty do_nothing)."""

    actions: tuple[Action, ...]
    canonical_string: str

    @staticmethod
    def from_actions(actions: Iterable[Action]) -> "SwitchPlan":
        ordered = tuple(sorted(actions))
        if any(a.is_do_nothing for a in ordered) and len(ordered) > 1:
            raise ValueError("do_nothing cannot be combined with opens")
        if not ordered or (len(ordered) == 1 and ordered[0].is_do_nothing):
            return SwitchPlan((Action.do_nothing(),), "do_nothing")
        lines = [a.line for a in ordered]
        if len(set(lines)) != len(lines):
            raise ValueError("duplicate line ids in plan")
        return SwitchPlan(ordered, "; ".join(a.term() for a in ordered))

    @staticmethod
    def do_nothing() -> "SwitchPlan":
        return SwitchPlan.from_actions([])

    @property
    def is_do_nothing(self) -> bool:
        return self.actions[0].is_do_nothing

    def open_line_ids(self) -> tuple[int, ...]:
        """Opened line ids in canonical order; empty for do_nothing."""
        return tuple(a.line for a in self.actions if a.line is not None)


def parse_actions(text: str) -> SwitchPlan:
    """Parse arbitrary model output into a canonical plan, or reject.

    Accepts semicolon-separated terms with flexible surrounding whitespace.
    Duplicates are an error rather than a silent merge so that sloppy
    generators are surfaced.
    """
    if text is None or not text.strip():
        raise GrammarError(GrammarReason.EMPTY_INPUT, 0, "empty action string")

    actions: list[Action] = []
    seen_lines: dict[int, int] = {}
    saw_do_nothing = False
    pos = 0
    for raw_term in text.split(";"):
        term = raw_term.strip()
        term_pos = pos + (len(raw_term) - len(raw_term.lstrip()))
        pos += len(raw_term) + 1
        if not term:
            raise GrammarError(GrammarReason.BAD_TERM, term_pos, "empty term")
        if term == "do_nothing":
            saw_do_nothing = True
            actions.append(Action.do_nothing())
            continue
        m = _TERM.match(term)
        if not m:
            raise GrammarError(
                GrammarReason.BAD_TERM, term_pos, f"unrecognized term {term!r}"
            )
        corridor, line_text = m.group(1), m.group(2)
        line = int(line_text)
        if line < 1:
            raise GrammarError(
                GrammarReason.INVALID_LINE, term_pos, f"line id {line} out of range"
            )
        if line in seen_lines:
            raise GrammarError(
                GrammarReason.DUPLICATE_LINE, term_pos, f"line {line} opened twice"
            )
        seen_lines[line] = term_pos
        if corridor is None:
            actions.append(Action.open_line(line))
        else:
            actions.append(Action.open_corridor_line(corridor, line))

    if saw_do_nothing and len(actions) > 1:
        raise GrammarError(
            GrammarReason.DO_NOTHING_MIXED, 0, "do_nothing mixed with open actions"
        )
    return SwitchPlan.from_actions(actions)


def canonicalize(plan: SwitchPlan) -> SwitchPlan:
    """Idempotent re-canonicalization (sorting is already canonical)."""
    return SwitchPlan.from_actions(plan.actions)


def serialize(plan: SwitchPlan) -> str:
    return plan.canonical_string
