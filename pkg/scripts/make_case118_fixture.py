#!/usr/bin/env python3
"""Build the 118-bus PSPS fixture: thermal ratings and corridor grouping.

The stock 118-bus case ships without branch ratings (rateA = 0 means
unlimited), which makes open-only switching pointless: with no thermal
limits the network never congests.  This script assigns deterministic
synthetic ratings from a base-case flow solve and groups geographically
proximate lines (by bus numbering regions) into nine disjoint corridors of
8-20 lines each.  Both outputs are committed; re-running must reproduce
them byte for byte.

Usage: python scripts/make_case118_fixture.py [--check]
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from pspskit import matpower
from pspskit.dcopf import Topology, solve_dcopf
from pspskit.network import Corridor, case_to_json, load_corridors

RATING_MARGIN = 2.00
RATING_STEP_MW = 5.0
RATING_FLOOR_MW = 120.0

# Bus-number regions for corridor grouping; a line joins the first corridor
# whose region contains both endpoints.  Region boundaries follow the three
# classical areas of the 118-bus system, subdivided.
CORRIDOR_REGIONS = [
    ("S1", 1, 14),
    ("S2", 15, 23),
    ("S3", 24, 32),
    ("S4", 33, 45),
    ("S5", 46, 58),
    ("S6", 59, 67),
    ("S7", 68, 81),
    ("S8", 82, 99),
    ("S9", 100, 118),
]
MAX_CORRIDOR_LINES = 20
MIN_CORRIDOR_LINES = 8


def assign_ratings(case):
    base = solve_dcopf(case, Topology.all_closed(case))
    ratings = []
    for i, ln in enumerate(case.lines):
        target = RATING_MARGIN * abs(base.flows_mw[i])
        stepped = RATING_STEP_MW * math.ceil(target / RATING_STEP_MW)
        ratings.append(max(stepped, RATING_FLOOR_MW))
    return ratings


def build_corridors(case):
    corridors = []
    taken: set[int] = set()
    for name, lo, hi in CORRIDOR_REGIONS:
        members = [
            ln.id
            for ln in case.lines
            if ln.id not in taken and lo <= ln.from_bus <= hi and lo <= ln.to_bus <= hi
        ]
        members = members[:MAX_CORRIDOR_LINES]
        if len(members) < MIN_CORRIDOR_LINES:
            raise SystemExit(f"corridor {name} has only {len(members)} lines")
        taken.update(members)
        corridors.append(Corridor(name, tuple(members)))
    return corridors


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--check", action="store_true",
                        help="verify the committed fixtures match a fresh build")
    args = parser.parse_args()

    raw = (ROOT / "cases" / "case118.m").read_text()
    unrated = matpower.parse_matpower_case(
        raw, ignore_quadratic_cost=True, default_rating_mw=1e6
    )
    ratings = assign_ratings(unrated)

    rated = matpower.parse_matpower_case(
        raw, ignore_quadratic_cost=True, default_rating_mw=1e6, name="case118_psps"
    )
    lines = tuple(
        ln.__class__(ln.id, ln.from_bus, ln.to_bus, ln.reactance_pu, ratings[i])
        for i, ln in enumerate(rated.lines)
    )
    import dataclasses

    rated = dataclasses.replace(rated, lines=lines)
    corridors = build_corridors(rated)
    rated = rated.with_corridors(corridors)

    case_doc = json.dumps(case_to_json(rated), indent=1) + "\n"
    corridor_doc = json.dumps(
        {"corridors": [{"name": c.name, "lines": list(c.line_ids)} for c in corridors]},
        indent=1,
    ) + "\n"

    case_path = ROOT / "cases" / "case118_psps.json"
    corridor_path = ROOT / "cases" / "corridors118.json"
    if args.check:
        if case_path.read_text() != case_doc or corridor_path.read_text() != corridor_doc:
            print("fixtures out of date; re-run without --check")
            return 1
        print("fixtures up to date")
        return 0
    case_path.write_text(case_doc)
    corridor_path.write_text(corridor_doc)
    sizes = {c.name: len(c.line_ids) for c in corridors}
    print(f"wrote {case_path.name} and {corridor_path.name}; corridor sizes {sizes}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
