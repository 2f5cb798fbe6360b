"""PSPS scenario generation and the structured summary a policy consumes.

Scenarios force open a sampled subset of corridor lines (never non-corridor
lines) and carry the switching budgets.  Sampling uses only integer draws
from a seeded ``random.Random`` so generation reproduces exactly across
platforms.  The summary deliberately contains no numeric network parameters:
ids, counts and statuses only.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, TextIO

from .network import NetworkCase

SCENARIO_FORMAT = "psps-scenario/1"


@dataclass(frozen=True)
class PspsScenario:
    """One PSPS event instance over a named case."""

    id: str
    case_name: str
    availability: tuple[bool, ...]  # per line position; False = forced open
    line_budget: int
    corridor_budget: Optional[int] = None
    corridor_mode: bool = False

    def __post_init__(self):
        if self.line_budget < 0:
            raise ValueError("line budget must be >= 0")
        if self.corridor_mode and self.corridor_budget is None:
            raise ValueError("corridor mode requires a corridor budget")
        if self.corridor_budget is not None and self.corridor_budget < 0:
            raise ValueError("corridor budget must be >= 0")

    def forced_open_line_ids(self, case: NetworkCase) -> tuple[int, ...]:
        return tuple(
            ln.id for ln, up in zip(case.lines, self.availability) if not up
        )

    def available_line_ids(self, case: NetworkCase) -> tuple[int, ...]:
        return tuple(ln.id for ln, up in zip(case.lines, self.availability) if up)

    def is_available(self, case: NetworkCase, line_id: int) -> bool:
        return self.availability[case.line_position(line_id)]


@dataclass(frozen=True)
class GenerationConfig:
    count: int = 200
    seed: int = 0
    corridors_hit_range: tuple[int, int] = (1, 3)
    lines_per_corridor_range: tuple[float, float] = (0.3, 0.7)
    line_budget: int = 3
    corridor_budget: Optional[int] = None
    corridor_mode: bool = False


def generate_scenarios(case: NetworkCase, config: GenerationConfig) -> list[PspsScenario]:
    """Deterministically sample PSPS scenarios under the given seed."""
    lo_hit, hi_hit = config.corridors_hit_range
    if lo_hit < 0 or hi_hit < lo_hit:
        raise ValueError("invalid corridors_hit_range")
    if hi_hit > len(case.corridors):
        raise ValueError(
            f"corridors_hit_range asks for up to {hi_hit} corridors; "
            f"case has {len(case.corridors)}"
        )
    lo_f, hi_f = config.lines_per_corridor_range
    if not (0.0 <= lo_f <= hi_f <= 1.0):
        raise ValueError("lines_per_corridor_range must satisfy 0 <= lo <= hi <= 1")
    if config.corridor_mode and config.corridor_budget is None:
        raise ValueError("corridor mode requires corridor_budget")

    rng = random.Random(config.seed)
    out = []
    for k in range(config.count):
        n_hit = rng.randint(lo_hit, hi_hit)
        hit = rng.sample(range(len(case.corridors)), n_hit) if n_hit else []
        forced: set[int] = set()
        for ci in sorted(hit):
            members = case.corridors[ci].line_ids
            lo_n = max(1, math.ceil(lo_f * len(members)))
            hi_n = max(lo_n, math.floor(hi_f * len(members)))
            hi_n = min(hi_n, len(members))
            take = rng.randint(lo_n, hi_n)
            forced.update(rng.sample(members, take))
        availability = tuple(ln.id not in forced for ln in case.lines)
        out.append(
            PspsScenario(
                id=f"scn-{k:04d}",
                case_name=case.name,
                availability=availability,
                line_budget=config.line_budget,
                corridor_budget=config.corridor_budget,
                corridor_mode=config.corridor_mode,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorridorMemberStatus:
    line: int
    status: str  # "forced" | "eligible"


@dataclass(frozen=True)
class CorridorBreakdown:
    corridor: str
    members: tuple[CorridorMemberStatus, ...]


@dataclass(frozen=True)
class ScenarioSummary:
    scenario_id: str
    case_name: str
    n_buses: int
    n_lines: int
    n_gens: int
    forced_open_count: int
    corridor_breakdown: tuple[CorridorBreakdown, ...]
    line_budget: int
    corridor_budget: Optional[int]
    corridor_mode: bool

    def to_json_dict(self) -> dict:
        doc = {
            "scenario_id": self.scenario_id,
            "case": self.case_name,
            "case_dims": {
                "n_buses": self.n_buses,
                "n_lines": self.n_lines,
                "n_gens": self.n_gens,
            },
            "forced_open_count": self.forced_open_count,
            "budgets": {"K_line": self.line_budget},
            "corridors": [
                {
                    "name": c.corridor,
                    "members": [
                        {"line": m.line, "status": m.status} for m in c.members
                    ],
                }
                for c in self.corridor_breakdown
            ],
        }
        if self.corridor_mode:
            doc["budgets"]["K_corridor"] = self.corridor_budget
        return doc


def summarize(case: NetworkCase, scenario: PspsScenario) -> ScenarioSummary:
    """Abstract a scenario for the policy: structure only, no parameters."""
    breakdown = []
    for c in case.corridors:
        members = tuple(
            CorridorMemberStatus(
                line=e,
                status="eligible" if scenario.is_available(case, e) else "forced",
            )
            for e in c.line_ids
        )
        breakdown.append(CorridorBreakdown(corridor=c.name, members=members))
    return ScenarioSummary(
        scenario_id=scenario.id,
        case_name=case.name,
        n_buses=case.n_buses,
        n_lines=case.n_lines,
        n_gens=case.n_generators,
        forced_open_count=sum(1 for up in scenario.availability if not up),
        corridor_breakdown=tuple(breakdown),
        line_budget=scenario.line_budget,
        corridor_budget=scenario.corridor_budget,
        corridor_mode=scenario.corridor_mode,
    )


def render_summary_json(summary: ScenarioSummary) -> str:
    """Compact, key-sorted JSON rendering; the policy-facing user message."""
    return json.dumps(summary.to_json_dict(), sort_keys=True, separators=(",", ":"))


def render_summary_text(summary: ScenarioSummary) -> str:
    """Line-oriented human rendering; byte-stable for a given summary."""
    lines = [
        f"PSPS scenario {summary.scenario_id} on case {summary.case_name}",
        f"case dimensions: {summary.n_buses} buses, {summary.n_lines} lines, "
        f"{summary.n_gens} generators",
        f"forced open lines: {summary.forced_open_count}",
        f"line budget K_line = {summary.line_budget}",
    ]
    if summary.corridor_mode:
        lines.append(f"corridor budget K_corridor = {summary.corridor_budget}")
    for c in summary.corridor_breakdown:
        forced = [str(m.line) for m in c.members if m.status == "forced"]
        eligible = [str(m.line) for m in c.members if m.status == "eligible"]
        lines.append(
            f"corridor {c.corridor} ({len(c.members)} lines): "
            f"forced [{', '.join(forced)}] eligible [{', '.join(eligible)}]"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# JSONL persistence (schema psps-scenario/1)
# ---------------------------------------------------------------------------

def scenario_to_json_dict(scenario: PspsScenario, case: NetworkCase) -> dict:
    doc = {
        "id": scenario.id,
        "xi_zero_lines": list(scenario.forced_open_line_ids(case)),
        "K_line": scenario.line_budget,
        "K_corridor": scenario.corridor_budget,
        "corridor_mode": scenario.corridor_mode,
    }
    return doc


def scenario_from_json_dict(doc: dict, case: NetworkCase) -> PspsScenario:
    forced = set(int(x) for x in doc["xi_zero_lines"])
    unknown = forced - {ln.id for ln in case.lines}
    if unknown:
        raise ValueError(f"scenario {doc.get('id')}: unknown line ids {sorted(unknown)}")
    return PspsScenario(
        id=str(doc["id"]),
        case_name=case.name,
        availability=tuple(ln.id not in forced for ln in case.lines),
        line_budget=int(doc["K_line"]),
        corridor_budget=None if doc.get("K_corridor") is None else int(doc["K_corridor"]),
        corridor_mode=bool(doc.get("corridor_mode", False)),
    )


def write_scenarios_jsonl(
    scenarios: Sequence[PspsScenario],
    case: NetworkCase,
    fh: TextIO,
    *,
    seed: Optional[int] = None,
) -> None:
    header = {"format": SCENARIO_FORMAT, "case": case.name, "count": len(scenarios)}
    if seed is not None:
        header["seed"] = seed
    fh.write(json.dumps(header, sort_keys=True) + "\n")
    for s in scenarios:
        fh.write(json.dumps(scenario_to_json_dict(s, case), sort_keys=True) + "\n")


def read_scenarios_jsonl(fh: TextIO, case: NetworkCase) -> list[PspsScenario]:
    """Read scenario JSONL; a leading header object is accepted and checked."""
    scenarios = []
    for i, raw in enumerate(fh):
        raw = raw.strip()
        if not raw:
            continue
        doc = json.loads(raw)
        if "format" in doc and "id" not in doc:
            if doc["format"] != SCENARIO_FORMAT:
                raise ValueError(f"unsupported scenario format {doc['format']!r}")
            continue
        scenarios.append(scenario_from_json_dict(doc, case))
    return scenarios


def split_scenarios(
    scenarios: Sequence[PspsScenario], *, train_fraction: float = 0.8, seed: int = 0
) -> tuple[list[PspsScenario], list[PspsScenario], dict]:
    """Seeded shuffle split; returns (train, test, persistable index record)."""
    if not (0.0 < train_fraction < 1.0):
        raise ValueError("train_fraction must be in (0, 1)")
    order = list(range(len(scenarios)))
    random.Random(seed).shuffle(order)
    n_train = round(train_fraction * len(scenarios))
    train_idx = sorted(order[:n_train])
    test_idx = sorted(order[n_train:])
    record = {
        "seed": seed,
        "train_fraction": train_fraction,
        "train_indices": train_idx,
        "test_indices": test_idx,
        "train_ids": [scenarios[i].id for i in train_idx],
        "test_ids": [scenarios[i].id for i in test_idx],
    }
    return [scenarios[i] for i in train_idx], [scenarios[i] for i in test_idx], record
