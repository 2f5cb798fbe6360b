"""MATPOWER case-file parsing (the subset this toolkit needs).

Reads the ``baseMVA``, ``bus``, ``gen``, ``branch`` and ``gencost`` matrices
of a MATPOWER-format case function.  Anything the DC model ignores is kept on
an :class:`~pspskit.network.AcCaseData` record attached to the returned case.

Deliberate strictness: out-of-service branches or generators, piecewise cost
models, phase shifters and nonpositive reactances are errors, not skips.
Forced outages belong in a scenario's availability mask, not in the case.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .network import AcCaseData, Bus, CaseError, Generator, Line, NetworkCase

# MATPOWER column positions (0-based).
_BUS_I, _BUS_TYPE, _PD, _QD, _GS, _BS = 0, 1, 2, 3, 4, 5
_VM = 7
_GEN_BUS, _PG, _QG, _QMAX, _QMIN, _VG, _MBASE, _GEN_STATUS, _PMAX, _PMIN = range(10)
_F_BUS, _T_BUS, _BR_R, _BR_X, _BR_B, _RATE_A = 0, 1, 2, 3, 4, 5
_TAP, _SHIFT, _BR_STATUS = 8, 9, 10
_COST_MODEL, _NCOST = 0, 3

_REF_BUS_TYPE = 3


class MatpowerParseError(CaseError):
    """Syntax or content error in a MATPOWER case, with position info."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


@dataclass
class _Matrix:
    rows: list[list[float]]
    row_lines: list[int]  # source line number per row


def _strip_comment(line: str) -> str:
    pos = line.find("%")
    return line if pos < 0 else line[:pos]


def _parse_matrices(text: str) -> tuple[str, dict[str, _Matrix], dict[str, float]]:
    """Extract the case name, matrix assignments and scalar assignments."""
    name = "case"
    fn = re.search(r"function\s+\w+\s*=\s*(\w+)", text)
    if fn:
        name = fn.group(1)

    matrices: dict[str, _Matrix] = {}
    scalars: dict[str, float] = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        raw = _strip_comment(lines[i])
        m = re.match(r"\s*mpc\.(\w+)\s*=\s*(.*)", raw)
        if not m:
            i += 1
            continue
        field_name, rest = m.group(1), m.group(2).strip()
        if rest.startswith("["):
            rows: list[list[float]] = []
            row_lines: list[int] = []
            buf = rest[1:]
            start = i
            while True:
                closed = "]" in buf
                body = buf.split("]", 1)[0] if closed else buf
                for chunk in body.split(";"):
                    chunk = chunk.strip()
                    if chunk:
                        rows.append(_parse_row(chunk, start + 1))
                        row_lines.append(start + 1)
                if closed:
                    break
                start += 1
                if start >= len(lines):
                    raise MatpowerParseError(
                        f"unterminated matrix mpc.{field_name}", line=i + 1
                    )
                buf = _strip_comment(lines[start])
            matrices[field_name] = _Matrix(rows, row_lines)
            i = start + 1
        else:
            value = rest.rstrip(";").strip().strip("'\"")
            try:
                scalars[field_name] = float(value)
            except ValueError:
                pass  # version strings and the like
            i += 1
    return name, matrices, scalars


def _parse_row(chunk: str, line_no: int) -> list[float]:
    out = []
    col = 1
    for tok in chunk.split():
        try:
            out.append(float(tok))
        except ValueError:
            raise MatpowerParseError(
                f"cannot parse numeric token {tok!r}", line=line_no, column=col
            ) from None
        col += len(tok) + 1
    return out


def parse_matpower_case(
    text: str,
    *,
    name: str | None = None,
    shed_cost_per_mw: float = 1000.0,
    default_rating_mw: float | None = None,
    ignore_quadratic_cost: bool = False,
) -> NetworkCase:
    """Parse a MATPOWER case function body into a :class:`NetworkCase`.

    ``default_rating_mw`` substitutes for branch ratings given as 0 (the
    MATPOWER convention for "unlimited"); without it such branches are an
    error because every line here needs a finite rating.  Quadratic gencost
    coefficients are rejected unless ``ignore_quadratic_cost`` is set, in
    which case only the linear coefficient feeds the DC objective (constant
    terms never affect the optimizer and are dropped silently).
    """
    parsed_name, matrices, scalars = _parse_matrices(text)
    case_name = name or parsed_name

    for required in ("bus", "gen", "branch", "gencost"):
        if required not in matrices:
            raise MatpowerParseError(f"missing matrix mpc.{required}")
    if "baseMVA" not in scalars:
        raise MatpowerParseError("missing scalar mpc.baseMVA")
    base_mva = scalars["baseMVA"]

    bus_m = matrices["bus"]
    gen_m = matrices["gen"]
    br_m = matrices["branch"]
    gc_m = matrices["gencost"]

    buses = []
    for row, ln_no in zip(bus_m.rows, bus_m.row_lines):
        if len(row) < 13:
            raise MatpowerParseError("bus row too short", line=ln_no)
        buses.append(
            Bus(
                id=int(row[_BUS_I]),
                demand_mw=row[_PD],
                is_reference=int(row[_BUS_TYPE]) == _REF_BUS_TYPE,
            )
        )
    bus_ids = {b.id for b in buses}
    bus_pos = {b.id: i for i, b in enumerate(buses)}

    lines = []
    resistance, charging, tap = [], [], []
    for k, (row, ln_no) in enumerate(zip(br_m.rows, br_m.row_lines), start=1):
        if len(row) < 11:
            raise MatpowerParseError("branch row too short", line=ln_no)
        if int(row[_BR_STATUS]) != 1:
            raise MatpowerParseError(
                f"branch row {k} is out of service; encode outages via the "
                "scenario availability mask instead",
                line=ln_no,
            )
        if row[_BR_X] <= 0:
            raise MatpowerParseError(
                f"branch row {k}: reactance must be > 0, got {row[_BR_X]}", line=ln_no
            )
        if row[_SHIFT] != 0:
            raise MatpowerParseError(
                f"branch row {k}: phase shifters are not supported", line=ln_no
            )
        rating = row[_RATE_A]
        if rating <= 0:
            if default_rating_mw is None:
                raise MatpowerParseError(
                    f"branch row {k}: rating is {rating}; pass default_rating_mw "
                    "to substitute a finite rating",
                    line=ln_no,
                )
            rating = default_rating_mw
        lines.append(
            Line(
                id=k,
                from_bus=int(row[_F_BUS]),
                to_bus=int(row[_T_BUS]),
                reactance_pu=row[_BR_X],
                rating_mw=rating,
            )
        )
        resistance.append(row[_BR_R])
        charging.append(row[_BR_B])
        tap.append(row[_TAP] if row[_TAP] != 0 else 1.0)

    if len(gc_m.rows) != len(gen_m.rows):
        raise MatpowerParseError(
            f"gencost has {len(gc_m.rows)} rows for {len(gen_m.rows)} generators"
        )

    gens = []
    gen_vg, gen_qmax, gen_qmin = [], [], []
    for k, (row, ln_no) in enumerate(zip(gen_m.rows, gen_m.row_lines), start=1):
        if len(row) < 10:
            raise MatpowerParseError("gen row too short", line=ln_no)
        if int(row[_GEN_STATUS]) != 1:
            raise MatpowerParseError(
                f"generator row {k} is out of service; remove it or put it in service",
                line=ln_no,
            )
        if int(row[_GEN_BUS]) not in bus_ids:
            raise MatpowerParseError(
                f"generator row {k}: unknown bus {int(row[_GEN_BUS])}", line=ln_no
            )
        cost_row = gc_m.rows[k - 1]
        cost_line = gc_m.row_lines[k - 1]
        gens.append(
            Generator(
                id=k,
                bus=int(row[_GEN_BUS]),
                p_min_mw=row[_PMIN],
                p_max_mw=row[_PMAX],
                cost_per_mw=_linear_cost(cost_row, cost_line, k, ignore_quadratic_cost),
            )
        )
        gen_vg.append(row[_VG])
        gen_qmax.append(row[_QMAX])
        gen_qmin.append(row[_QMIN])

    ac = AcCaseData(
        line_resistance_pu=tuple(resistance),
        line_charging_pu=tuple(charging),
        line_tap_ratio=tuple(tap),
        bus_reactive_demand_mvar=tuple(r[_QD] for r in bus_m.rows),
        bus_shunt_gs_mw=tuple(r[_GS] for r in bus_m.rows),
        bus_shunt_bs_mvar=tuple(r[_BS] for r in bus_m.rows),
        bus_type=tuple(int(r[_BUS_TYPE]) for r in bus_m.rows),
        bus_vm_setpoint=tuple(r[_VM] for r in bus_m.rows),
        gen_vm_setpoint=tuple(gen_vg),
        gen_q_max_mvar=tuple(gen_qmax),
        gen_q_min_mvar=tuple(gen_qmin),
    )

    # Bus ids in MATPOWER files may in principle be arbitrary; this toolkit
    # requires the contiguous 1..n convention used by the shipped cases.
    if sorted(bus_ids) != list(range(1, len(buses) + 1)):
        raise MatpowerParseError("bus ids must be contiguous 1..n")
    del bus_pos

    return NetworkCase(
        name=case_name,
        buses=tuple(buses),
        lines=tuple(lines),
        generators=tuple(gens),
        base_mva=base_mva,
        shed_cost_per_mw=shed_cost_per_mw,
        ac=ac,
    )


def _linear_cost(row: list[float], line_no: int, gen_no: int, ignore_quadratic: bool) -> float:
    if int(row[_COST_MODEL]) != 2:
        raise MatpowerParseError(
            f"gencost row {gen_no}: only polynomial cost model 2 is supported",
            line=line_no,
        )
    ncost = int(row[_NCOST])
    coeffs = row[4 : 4 + ncost]
    if len(coeffs) != ncost:
        raise MatpowerParseError(f"gencost row {gen_no}: truncated coefficients", line=line_no)
    if ncost > 3:
        raise MatpowerParseError(
            f"gencost row {gen_no}: polynomial degree {ncost - 1} > 2 unsupported",
            line=line_no,
        )
    if ncost == 3:
        if coeffs[0] != 0 and not ignore_quadratic:
            raise MatpowerParseError(
                f"gencost row {gen_no}: quadratic coefficient {coeffs[0]} present; "
                "pass ignore_quadratic_cost=True to use the linear term only",
                line=line_no,
            )
        return coeffs[1]
    if ncost == 2:
        return coeffs[0]
    return 0.0
