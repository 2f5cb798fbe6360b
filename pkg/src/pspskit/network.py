"""Grid data model: buses, lines, generators, corridors.

All downstream modules treat :class:`NetworkCase` as the single source of
truth for network structure.  Instances are immutable after construction and
safe to share across concurrent solves.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp

CASE_FORMAT = "psps-case/1"
CORRIDOR_SPEC_FORMAT = "psps-corridors/1"

_CORRIDOR_NAME = re.compile(r"^S[0-9]+$")


class CaseError(ValueError):
    """Network data violates a structural invariant."""


@dataclass(frozen=True)
class Bus:
    id: int
    demand_mw: float
    is_reference: bool = False


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    reactance_pu: float
    rating_mw: float


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_min_mw: float
    p_max_mw: float
    cost_per_mw: float


@dataclass(frozen=True)
class Corridor:
    name: str
    line_ids: tuple[int, ...]


@dataclass(frozen=True)
class AcCaseData:
    """AC-only case fields the DC model ignores.

    Arrays are positionally aligned with ``NetworkCase.lines`` / ``.buses`` /
    ``.generators``.  Tap ratios are normalized (0 in the source file means
    nominal and is stored as 1.0).  Generator reactive limits are parsed but
    not enforced by the power-flow solver.
    """

    line_resistance_pu: tuple[float, ...]
    line_charging_pu: tuple[float, ...]
    line_tap_ratio: tuple[float, ...]
    bus_reactive_demand_mvar: tuple[float, ...]
    bus_shunt_gs_mw: tuple[float, ...]
    bus_shunt_bs_mvar: tuple[float, ...]
    bus_type: tuple[int, ...]
    bus_vm_setpoint: tuple[float, ...]
    gen_vm_setpoint: tuple[float, ...]
    gen_q_max_mvar: tuple[float, ...]
    gen_q_min_mvar: tuple[float, ...]


@dataclass(frozen=True)
class NetworkCase:
    name: str
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    corridors: tuple[Corridor, ...] = ()
    base_mva: float = 100.0
    shed_cost_per_mw: float = 1000.0
    ac: Optional[AcCaseData] = None

    def __post_init__(self) -> None:
        validate_case(self)

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def n_generators(self) -> int:
        return len(self.generators)

    @cached_property
    def reference_bus(self) -> int:
        return next(b.id for b in self.buses if b.is_reference)

    @cached_property
    def _line_pos(self) -> dict[int, int]:
        return {ln.id: i for i, ln in enumerate(self.lines)}

    def line_position(self, line_id: int) -> int:
        """0-based position of a line id in the lines tuple."""
        try:
            return self._line_pos[line_id]
        except KeyError:
            raise CaseError(f"unknown line id {line_id}") from None

    def has_line(self, line_id: int) -> bool:
        return line_id in self._line_pos

    @cached_property
    def corridor_by_line(self) -> dict[int, str]:
        """Map line id -> corridor name, for corridor members only."""
        out: dict[int, str] = {}
        for c in self.corridors:
            for e in c.line_ids:
                out[e] = c.name
        return out

    @cached_property
    def corridor_by_name(self) -> dict[int, Corridor]:
        return {c.name: c for c in self.corridors}

    def with_corridors(self, corridors: Sequence[Corridor]) -> "NetworkCase":
        return replace(self, corridors=tuple(corridors))


def validate_case(case: NetworkCase) -> None:
    n = len(case.buses)
    if n == 0:
        raise CaseError("case has no buses")
    ids = [b.id for b in case.buses]
    if ids != list(range(1, n + 1)):
        raise CaseError("bus ids must be unique and contiguous 1..n")
    refs = [b.id for b in case.buses if b.is_reference]
    if len(refs) != 1:
        raise CaseError(f"expected exactly one reference bus, found {len(refs)}")
    for b in case.buses:
        if b.demand_mw < 0:
            raise CaseError(f"bus {b.id}: negative demand {b.demand_mw}")

    if case.base_mva <= 0:
        raise CaseError("base_mva must be positive")

    bus_set = set(ids)
    line_ids = [ln.id for ln in case.lines]
    if len(set(line_ids)) != len(line_ids):
        raise CaseError("line ids must be unique")
    for ln in case.lines:
        if ln.from_bus not in bus_set or ln.to_bus not in bus_set:
            raise CaseError(f"line {ln.id}: endpoint not a valid bus")
        if ln.from_bus == ln.to_bus:
            raise CaseError(f"line {ln.id}: from_bus equals to_bus")
        if ln.reactance_pu <= 0:
            raise CaseError(f"line {ln.id}: reactance must be > 0, got {ln.reactance_pu}")
        if ln.rating_mw <= 0:
            raise CaseError(f"line {ln.id}: rating must be > 0, got {ln.rating_mw}")

    for g in case.generators:
        if g.bus not in bus_set:
            raise CaseError(f"generator {g.id}: bus {g.bus} does not exist")
        if g.p_min_mw > g.p_max_mw:
            raise CaseError(f"generator {g.id}: p_min > p_max")
        if g.cost_per_mw < 0:
            raise CaseError(f"generator {g.id}: negative cost")

    if case.generators:
        max_cost = max(g.cost_per_mw for g in case.generators)
        if case.shed_cost_per_mw <= max_cost:
            raise CaseError(
                f"shed cost {case.shed_cost_per_mw} must exceed the highest "
                f"generator cost {max_cost}"
            )

    _validate_corridors(case.corridors, set(line_ids))

    if case.ac is not None:
        ac = case.ac
        per_line = (ac.line_resistance_pu, ac.line_charging_pu, ac.line_tap_ratio)
        per_bus = (
            ac.bus_reactive_demand_mvar,
            ac.bus_shunt_gs_mw,
            ac.bus_shunt_bs_mvar,
            ac.bus_type,
            ac.bus_vm_setpoint,
        )
        per_gen = (ac.gen_vm_setpoint, ac.gen_q_max_mvar, ac.gen_q_min_mvar)
        if any(len(a) != len(case.lines) for a in per_line):
            raise CaseError("AC line arrays misaligned with lines")
        if any(len(a) != len(case.buses) for a in per_bus):
            raise CaseError("AC bus arrays misaligned with buses")
        if any(len(a) != len(case.generators) for a in per_gen):
            raise CaseError("AC generator arrays misaligned with generators")


def _validate_corridors(corridors: Sequence[Corridor], line_ids: set[int]) -> None:
    seen_names: set[str] = set()
    seen_lines: set[int] = set()
    for c in corridors:
        if not _CORRIDOR_NAME.match(c.name):
            raise CaseError(f"corridor name {c.name!r} must match S<number>")
        if c.name in seen_names:
            raise CaseError(f"duplicate corridor name {c.name}")
        seen_names.add(c.name)
        if not c.line_ids:
            raise CaseError(f"corridor {c.name} has no lines")
        for e in c.line_ids:
            if e not in line_ids:
                raise CaseError(f"corridor {c.name}: unknown line id {e}")
            if e in seen_lines:
                raise CaseError(f"corridors overlap on line {e}")
            seen_lines.add(e)


def incidence_matrix(case: NetworkCase) -> sp.csc_matrix:
    """Signed bus-branch incidence: column e has +1 at from_bus, -1 at to_bus."""
    nb, nl = case.n_buses, case.n_lines
    rows = np.empty(2 * nl, dtype=np.int64)
    cols = np.empty(2 * nl, dtype=np.int64)
    vals = np.empty(2 * nl, dtype=np.float64)
    for j, ln in enumerate(case.lines):
        rows[2 * j] = ln.from_bus - 1
        rows[2 * j + 1] = ln.to_bus - 1
        cols[2 * j] = j
        cols[2 * j + 1] = j
        vals[2 * j] = 1.0
        vals[2 * j + 1] = -1.0
    return sp.csc_matrix((vals, (rows, cols)), shape=(nb, nl))


def load_corridors(case: NetworkCase, spec: Mapping | str) -> NetworkCase:
    """Attach corridors from a corridor spec document.

    ``spec`` is either the parsed JSON mapping or the raw JSON text of
    ``{"corridors": [{"name": "S1", "lines": [...]}, ...]}``.
    """
    if isinstance(spec, str):
        spec = json.loads(spec)
    entries = spec.get("corridors")
    if entries is None:
        raise CaseError('corridor spec missing "corridors" key')
    corridors = tuple(
        Corridor(name=str(e["name"]), line_ids=tuple(int(x) for x in e["lines"]))
        for e in entries
    )
    return case.with_corridors(corridors)


def corridors_to_json(case: NetworkCase) -> dict:
    return {
        "format": CORRIDOR_SPEC_FORMAT,
        "corridors": [{"name": c.name, "lines": list(c.line_ids)} for c in case.corridors],
    }


def case_to_json(case: NetworkCase) -> dict:
    """Toolkit-native JSON case document (format tag psps-case/1)."""
    doc: dict = {
        "format": CASE_FORMAT,
        "name": case.name,
        "base_mva": case.base_mva,
        "shed_cost_per_mw": case.shed_cost_per_mw,
        "buses": [
            {"id": b.id, "demand_mw": b.demand_mw, "is_reference": b.is_reference}
            for b in case.buses
        ],
        "lines": [
            {
                "id": ln.id,
                "from_bus": ln.from_bus,
                "to_bus": ln.to_bus,
                "reactance_pu": ln.reactance_pu,
                "rating_mw": ln.rating_mw,
            }
            for ln in case.lines
        ],
        "generators": [
            {
                "id": g.id,
                "bus": g.bus,
                "p_min_mw": g.p_min_mw,
                "p_max_mw": g.p_max_mw,
                "cost_per_mw": g.cost_per_mw,
            }
            for g in case.generators
        ],
        "corridors": [
            {"name": c.name, "lines": list(c.line_ids)} for c in case.corridors
        ],
    }
    if case.ac is not None:
        ac = case.ac
        doc["ac"] = {
            "line_resistance_pu": list(ac.line_resistance_pu),
            "line_charging_pu": list(ac.line_charging_pu),
            "line_tap_ratio": list(ac.line_tap_ratio),
            "bus_reactive_demand_mvar": list(ac.bus_reactive_demand_mvar),
            "bus_shunt_gs_mw": list(ac.bus_shunt_gs_mw),
            "bus_shunt_bs_mvar": list(ac.bus_shunt_bs_mvar),
            "bus_type": list(ac.bus_type),
            "bus_vm_setpoint": list(ac.bus_vm_setpoint),
            "gen_vm_setpoint": list(ac.gen_vm_setpoint),
            "gen_q_max_mvar": list(ac.gen_q_max_mvar),
            "gen_q_min_mvar": list(ac.gen_q_min_mvar),
        }
    return doc


def case_from_json(doc: Mapping | str) -> NetworkCase:
    if isinstance(doc, str):
        doc = json.loads(doc)
    if doc.get("format") != CASE_FORMAT:
        raise CaseError(f'expected "format": "{CASE_FORMAT}", got {doc.get("format")!r}')
    ac = None
    if doc.get("ac") is not None:
        a = doc["ac"]
        ac = AcCaseData(
            line_resistance_pu=tuple(a["line_resistance_pu"]),
            line_charging_pu=tuple(a["line_charging_pu"]),
            line_tap_ratio=tuple(a["line_tap_ratio"]),
            bus_reactive_demand_mvar=tuple(a["bus_reactive_demand_mvar"]),
            bus_shunt_gs_mw=tuple(a["bus_shunt_gs_mw"]),
            bus_shunt_bs_mvar=tuple(a["bus_shunt_bs_mvar"]),
            bus_type=tuple(int(t) for t in a["bus_type"]),
            bus_vm_setpoint=tuple(a["bus_vm_setpoint"]),
            gen_vm_setpoint=tuple(a["gen_vm_setpoint"]),
            gen_q_max_mvar=tuple(a["gen_q_max_mvar"]),
            gen_q_min_mvar=tuple(a["gen_q_min_mvar"]),
        )
    return NetworkCase(
        name=str(doc["name"]),
        buses=tuple(
            Bus(id=int(b["id"]), demand_mw=float(b["demand_mw"]),
                is_reference=bool(b["is_reference"]))
            for b in doc["buses"]
        ),
        lines=tuple(
            Line(
                id=int(ln["id"]),
                from_bus=int(ln["from_bus"]),
                to_bus=int(ln["to_bus"]),
                reactance_pu=float(ln["reactance_pu"]),
                rating_mw=float(ln["rating_mw"]),
            )
            for ln in doc["lines"]
        ),
        generators=tuple(
            Generator(
                id=int(g["id"]),
                bus=int(g["bus"]),
                p_min_mw=float(g["p_min_mw"]),
                p_max_mw=float(g["p_max_mw"]),
                cost_per_mw=float(g["cost_per_mw"]),
            )
            for g in doc["generators"]
        ),
        corridors=tuple(
            Corridor(name=str(c["name"]), line_ids=tuple(int(x) for x in c["lines"]))
            for c in doc.get("corridors", [])
        ),
        base_mva=float(doc["base_mva"]),
        shed_cost_per_mw=float(doc["shed_cost_per_mw"]),
        ac=ac,
    )


def save_case(case: NetworkCase, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(case_to_json(case), fh, indent=1)
        fh.write("\n")


def load_case(path: str) -> NetworkCase:
    """Load either a toolkit JSON case or a MATPOWER .m case by extension."""
    if path.endswith(".m"):
        from . import matpower

        with open(path, encoding="utf-8") as fh:
            return matpower.parse_matpower_case(fh.read())
    with open(path, encoding="utf-8") as fh:
        return case_from_json(json.load(fh))


def connected_components(n_buses: int, edges: Iterable[tuple[int, int]]) -> list[tuple[int, ...]]:
    """Connected components over 1-based bus ids; each returned sorted.

    Components are ordered by their lowest bus id, so the partition is
    deterministic for a given edge set.
    """
    adj: list[list[int]] = [[] for _ in range(n_buses + 1)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = [False] * (n_buses + 1)
    comps: list[tuple[int, ...]] = []
    for start in range(1, n_buses + 1):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        comps.append(tuple(sorted(comp)))
    return comps
