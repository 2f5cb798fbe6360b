"""DC optimal power flow for a fixed effective topology.

The production path eliminates angles via per-island PTDF matrices and adds
thermal limits as cutting planes, which keeps each LP tiny; angles and
per-line flows are reconstructed exactly afterwards.  A second, angle-space
formulation with explicit switching variables and big-M decoupling backs the
oracle's relaxation bounds and the removal-vs-big-M equivalence tests.

Open lines are removed from the flow equations.  Islands are balanced
independently; an island whose generators' combined minimum output exceeds
its demand makes the whole topology infeasible (minimum output cannot be
relaxed and shedding cannot exceed demand).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .lp import LpProblem, LpSolution, LpStatus, solve_lp
from .network import NetworkCase, connected_components

BALANCE_TOL_MW = 1e-6
FLOW_LAW_TOL_PU = 1e-8
_CUT_TOL_PU = 1e-9


class DcInfeasible(Exception):
    """Topology admits no feasible dispatch; scored +inf by callers."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class Topology:
    """Per-line effective status g_e; False means removed from flow equations."""

    effective_status: tuple[bool, ...]

    @staticmethod
    def all_closed(case: NetworkCase) -> "Topology":
        return Topology(tuple(True for _ in case.lines))

    @staticmethod
    def from_open_lines(case: NetworkCase, open_line_ids: Sequence[int]) -> "Topology":
        opened = set(open_line_ids)
        unknown = opened - {ln.id for ln in case.lines}
        if unknown:
            raise ValueError(f"unknown line ids {sorted(unknown)}")
        return Topology(tuple(ln.id not in opened for ln in case.lines))

    def closed_positions(self) -> list[int]:
        return [i for i, up in enumerate(self.effective_status) if up]


@dataclass(frozen=True)
class DcSolution:
    dispatch_mw: np.ndarray   # per generator
    shed_mw: np.ndarray       # per bus
    angles_rad: np.ndarray    # per bus, one reference per island fixed at 0
    flows_mw: np.ndarray      # per line, 0 on open lines
    objective: float          # dollars
    islands: tuple[tuple[int, ...], ...]


def solve_dcopf(
    case: NetworkCase,
    topology: Topology,
    hot_lines: Optional[set[int]] = None,
) -> DcSolution:
    """Minimize generation plus shed cost over the DC feasible set.

    ``hot_lines`` is an optional shared cache of line positions whose thermal
    limits have bound in related solves; seeding the cutting planes with them
    saves LP rounds across a search.  It is read and updated in place.
    """
    if len(topology.effective_status) != case.n_lines:
        raise ValueError("topology length does not match line count")
    base = case.base_mva
    nb, nl = case.n_buses, case.n_lines
    demand_pu = np.array([b.demand_mw for b in case.buses]) / base

    closed = topology.closed_positions()
    edges = [(case.lines[i].from_bus, case.lines[i].to_bus) for i in closed]
    islands = tuple(connected_components(nb, edges))

    dispatch = np.zeros(case.n_generators)
    shed = np.zeros(nb)
    angles = np.zeros(nb)
    flows = np.zeros(nl)

    gens_by_bus: dict[int, list[int]] = {}
    for gi, g in enumerate(case.generators):
        gens_by_bus.setdefault(g.bus, []).append(gi)

    objective = 0.0
    for island in islands:
        island_set = set(island)
        ig = [gi for b in island for gi in gens_by_bus.get(b, [])]
        island_demand = sum(demand_pu[b - 1] for b in island)

        if not ig:
            for b in island:
                shed[b - 1] = case.buses[b - 1].demand_mw
            objective += case.shed_cost_per_mw * sum(
                case.buses[b - 1].demand_mw for b in island
            )
            continue

        p_min = sum(case.generators[gi].p_min_mw for gi in ig) / base
        if p_min > island_demand + 1e-12:
            raise DcInfeasible(
                f"island containing bus {island[0]} has minimum generation "
                f"{p_min * base:.3f} MW above its demand {island_demand * base:.3f} MW"
            )

        il = [e for e in closed if case.lines[e].from_bus in island_set]
        _solve_island(
            case, island, ig, il, demand_pu, dispatch, shed, angles, flows,
            hot_lines,
        )
        objective += sum(
            case.generators[gi].cost_per_mw * dispatch[gi] for gi in ig
        ) + case.shed_cost_per_mw * sum(shed[b - 1] for b in island)

    solution = DcSolution(
        dispatch_mw=dispatch,
        shed_mw=shed,
        angles_rad=angles,
        flows_mw=flows,
        objective=float(objective),
        islands=islands,
    )
    _check_physics(case, topology, solution)
    return solution


def _island_ptdf(case: NetworkCase, island: Sequence[int], island_lines: Sequence[int]):
    """PTDF of an island plus the reduced reactance matrix for angle recovery."""
    pos = {b: k for k, b in enumerate(island)}
    ni = len(island)
    lap = np.zeros((ni, ni))
    for e in island_lines:
        ln = case.lines[e]
        w = 1.0 / ln.reactance_pu
        i, j = pos[ln.from_bus], pos[ln.to_bus]
        lap[i, i] += w
        lap[j, j] += w
        lap[i, j] -= w
        lap[j, i] -= w
    # Reference = lowest-index bus = island[0]; islands come sorted.
    red = lap[1:, 1:]
    x_red = np.linalg.inv(red) if red.size else np.zeros((0, 0))
    x_aug = np.zeros((ni, ni))
    x_aug[1:, 1:] = x_red
    ptdf = np.zeros((len(island_lines), ni))
    for r, e in enumerate(island_lines):
        ln = case.lines[e]
        w = 1.0 / ln.reactance_pu
        ptdf[r, :] = w * (x_aug[pos[ln.from_bus], :] - x_aug[pos[ln.to_bus], :])
    return ptdf, x_aug, pos


def _solve_island(case, island, ig, il, demand_pu, dispatch, shed, angles, flows,
                  hot_lines=None):
    base = case.base_mva
    gamma = case.shed_cost_per_mw
    ptdf, x_aug, pos = _island_ptdf(case, island, il)

    shed_buses = [b for b in island if demand_pu[b - 1] > 0]
    n_g, n_s = len(ig), len(shed_buses)
    d_vec = np.array([demand_pu[b - 1] for b in island])
    ratings = np.array([case.lines[e].rating_mw for e in il]) / base

    # Injection map: columns of the PTDF picked per variable's bus.
    gen_cols = np.array([pos[case.generators[gi].bus] for gi in ig], dtype=int)
    shed_cols = np.array([pos[b] for b in shed_buses], dtype=int)

    c = np.concatenate([
        np.array([case.generators[gi].cost_per_mw for gi in ig]) * base,
        np.full(n_s, gamma) * base,
    ])
    lo = np.concatenate([
        np.array([case.generators[gi].p_min_mw for gi in ig]) / base,
        np.zeros(n_s),
    ])
    hi = np.concatenate([
        np.array([case.generators[gi].p_max_mw for gi in ig]) / base,
        np.array([demand_pu[b - 1] for b in shed_buses]),
    ])
    balance = np.ones((1, n_g + n_s))
    rhs = np.array([d_vec.sum()])

    row_of = {e: r for r, e in enumerate(il)}
    cuts: list[int] = (  # row indices into il
        sorted(row_of[e] for e in hot_lines if e in row_of) if hot_lines else []
    )
    while True:
        n_cut = len(cuts)
        a = np.zeros((1 + n_cut, n_g + n_s + n_cut))
        a[0, : n_g + n_s] = balance
        b_eq = np.zeros(1 + n_cut)
        b_eq[0] = rhs[0]
        lo_full = np.concatenate([lo, -ratings[cuts]])
        hi_full = np.concatenate([hi, ratings[cuts]])
        c_full = np.concatenate([c, np.zeros(n_cut)])
        for k, r in enumerate(cuts):
            row = ptdf[r]
            a[1 + k, :n_g] = row[gen_cols]
            a[1 + k, n_g : n_g + n_s] = row[shed_cols]
            a[1 + k, n_g + n_s + k] = -1.0
            b_eq[1 + k] = float(row @ d_vec)

        sol = solve_lp(LpProblem(c_full, a, b_eq, lo_full, hi_full))
        if sol.status != LpStatus.OPTIMAL:
            raise DcInfeasible(
                f"island containing bus {island[0]}: no dispatch satisfies "
                "the thermal limits"
            )
        x = sol.values
        inj = -d_vec.copy()
        np.add.at(inj, gen_cols, x[:n_g])
        np.add.at(inj, shed_cols, x[n_g : n_g + n_s])
        line_flows = ptdf @ inj if il else np.zeros(0)
        cut_set = set(cuts)
        violated = [
            r for r in range(len(il))
            if r not in cut_set and abs(line_flows[r]) > ratings[r] + _CUT_TOL_PU
        ]
        if not violated:
            break
        cuts.extend(violated)
        cuts.sort()

    if hot_lines is not None:
        hot_lines.update(il[r] for r in cuts)
    for k, gi in enumerate(ig):
        dispatch[gi] = x[k] * base
    for k, b in enumerate(shed_buses):
        shed[b - 1] = x[n_g + k] * base
    theta = x_aug @ inj
    for b in island:
        angles[b - 1] = theta[pos[b]]
    for r, e in enumerate(il):
        flows[e] = line_flows[r] * base


def _check_physics(case: NetworkCase, topology: Topology, sol: DcSolution) -> None:
    """Defensive invariant checks; violations indicate a solver bug."""
    base = case.base_mva
    inj = np.zeros(case.n_buses)
    for gi, g in enumerate(case.generators):
        inj[g.bus - 1] += sol.dispatch_mw[gi]
    for b in case.buses:
        inj[b.id - 1] -= b.demand_mw - sol.shed_mw[b.id - 1]
    for i, ln in enumerate(case.lines):
        inj[ln.from_bus - 1] -= sol.flows_mw[i]
        inj[ln.to_bus - 1] += sol.flows_mw[i]
    worst = float(np.abs(inj).max()) if inj.size else 0.0
    if worst > BALANCE_TOL_MW:
        raise RuntimeError(f"bus balance residual {worst:.3e} MW exceeds {BALANCE_TOL_MW}")
    for i, ln in enumerate(case.lines):
        if topology.effective_status[i]:
            expected = (
                sol.angles_rad[ln.from_bus - 1] - sol.angles_rad[ln.to_bus - 1]
            ) / ln.reactance_pu
            if abs(expected - sol.flows_mw[i] / base) > FLOW_LAW_TOL_PU:
                raise RuntimeError(f"flow law violated on line {ln.id}")
            if abs(sol.flows_mw[i]) > ln.rating_mw + 1e-5:
                raise RuntimeError(f"thermal limit violated on line {ln.id}")
        elif sol.flows_mw[i] != 0.0:
            raise RuntimeError(f"nonzero flow on open line {ln.id}")


def transport_relaxation_objective(
    case: NetworkCase,
    closed_positions: Sequence[int],
    transport_positions: Sequence[int],
    hot_lines: Optional[set[int]] = None,
) -> float:
    """Optimum with flow laws dropped on the transport lines.

    Transport lines keep their thermal limit but move power freely, which
    relaxes every topology obtainable by opening any subset of them, so the
    returned value is a valid lower bound across that whole family.  Returns
    +inf when even the relaxation is infeasible.
    """
    base = case.base_mva
    nb = case.n_buses
    demand_pu = np.array([b.demand_mw for b in case.buses]) / base

    edges = [(case.lines[e].from_bus, case.lines[e].to_bus) for e in closed_positions]
    islands = connected_components(nb, edges)
    island_of = {}
    for k, isl in enumerate(islands):
        for b in isl:
            island_of[b] = k

    gens = list(case.generators)
    shed_buses = [b.id for b in case.buses if b.demand_mw > 0]
    arcs = list(transport_positions)
    n_g, n_s, n_t = len(gens), len(shed_buses), len(arcs)

    c = np.concatenate([
        np.array([g.cost_per_mw for g in gens]) * base,
        np.full(n_s, case.shed_cost_per_mw) * base,
        np.zeros(n_t),
    ])
    lo = np.concatenate([
        np.array([g.p_min_mw for g in gens]) / base,
        np.zeros(n_s),
        np.array([-case.lines[e].rating_mw for e in arcs]) / base,
    ])
    hi = np.concatenate([
        np.array([g.p_max_mw for g in gens]) / base,
        np.array([demand_pu[b - 1] for b in shed_buses]),
        np.array([case.lines[e].rating_mw for e in arcs]) / base,
    ])

    # Per-bus variable incidence for building balance and cut rows.
    col_bus_sign: list[list[tuple[int, float]]] = [[] for _ in range(nb + 1)]
    for k, g in enumerate(gens):
        col_bus_sign[g.bus].append((k, 1.0))
    for k, b in enumerate(shed_buses):
        col_bus_sign[b].append((n_g + k, 1.0))
    for k, e in enumerate(arcs):
        ln = case.lines[e]
        col_bus_sign[ln.from_bus].append((n_g + n_s + k, -1.0))
        col_bus_sign[ln.to_bus].append((n_g + n_s + k, 1.0))

    balance = np.zeros((len(islands), n_g + n_s + n_t))
    balance_rhs = np.zeros(len(islands))
    for k, isl in enumerate(islands):
        for b in isl:
            for col, sign in col_bus_sign[b]:
                balance[k, col] += sign
            balance_rhs[k] += demand_pu[b - 1]

    # Per-island PTDF over closed lines, for thermal cuts.
    island_lines = [
        [e for e in closed_positions if island_of[case.lines[e].from_bus] == k]
        for k in range(len(islands))
    ]
    ptdfs = [
        _island_ptdf(case, islands[k], island_lines[k]) for k in range(len(islands))
    ]

    def cut_row(k: int, r: int) -> tuple[np.ndarray, float]:
        ptdf, _, pos = ptdfs[k]
        row = np.zeros(n_g + n_s + n_t)
        rhs = 0.0
        for b in islands[k]:
            coeff = ptdf[r, pos[b]]
            if coeff == 0.0:
                continue
            for col, sign in col_bus_sign[b]:
                row[col] += sign * coeff
            rhs += coeff * demand_pu[b - 1]
        return row, rhs

    cuts: list[tuple[int, int]] = []  # (island, row-in-island-ptdf)
    if hot_lines:
        for k in range(len(islands)):
            for r, e in enumerate(island_lines[k]):
                if e in hot_lines:
                    cuts.append((k, r))
        cuts.sort()
    while True:
        n_cut = len(cuts)
        n_rows = len(islands) + n_cut
        a = np.zeros((n_rows, n_g + n_s + n_t + n_cut))
        a[: len(islands), : n_g + n_s + n_t] = balance
        b_eq = np.concatenate([balance_rhs, np.zeros(n_cut)])
        lo_full = np.concatenate([lo, np.zeros(n_cut)])
        hi_full = np.concatenate([hi, np.zeros(n_cut)])
        c_full = np.concatenate([c, np.zeros(n_cut)])
        for idx, (k, r) in enumerate(cuts):
            row, rhs = cut_row(k, r)
            a[len(islands) + idx, : n_g + n_s + n_t] = row
            a[len(islands) + idx, n_g + n_s + n_t + idx] = -1.0
            b_eq[len(islands) + idx] = rhs
            e = island_lines[k][r]
            lo_full[n_g + n_s + n_t + idx] = -case.lines[e].rating_mw / base
            hi_full[n_g + n_s + n_t + idx] = case.lines[e].rating_mw / base

        sol = solve_lp(LpProblem(c_full, a, b_eq, lo_full, hi_full))
        if sol.status != LpStatus.OPTIMAL:
            return math.inf
        x = sol.values

        inj = -demand_pu.copy()
        for b in range(1, nb + 1):
            for col, sign in col_bus_sign[b]:
                inj[b - 1] += sign * x[col]
        cut_set = set(cuts)
        violated = []
        for k in range(len(islands)):
            ptdf, _, pos = ptdfs[k]
            if not island_lines[k]:
                continue
            local = np.array([inj[b - 1] for b in islands[k]])
            flows = ptdf @ local
            for r, e in enumerate(island_lines[k]):
                if (k, r) in cut_set:
                    continue
                if abs(flows[r]) > case.lines[e].rating_mw / base + _CUT_TOL_PU:
                    violated.append((k, r))
        if not violated:
            if hot_lines is not None:
                hot_lines.update(island_lines[k][r] for k, r in cuts)
            return float(sol.objective_value)
        cuts.extend(violated)
        cuts.sort()


def effective_topology(case: NetworkCase, scenario, open_line_ids: Sequence[int]) -> Topology:
    """Compose the PSPS availability mask with operator opens: g = xi * z."""
    opened = set(open_line_ids)
    status = tuple(
        bool(up) and ln.id not in opened
        for ln, up in zip(case.lines, scenario.availability)
    )
    return Topology(status)


def evaluate_plan_dc(case: NetworkCase, scenario, plan) -> DcSolution:
    """DC economic evaluation of a plan on a scenario.

    The plan is assumed structurally verified upstream (grammar, availability,
    budgets); this only composes the topology and solves.  Propagates
    :class:`DcInfeasible` for topologies with no feasible dispatch.
    """
    return solve_dcopf(case, effective_topology(case, scenario, plan.open_line_ids()))


# ---------------------------------------------------------------------------
# Angle-space formulation with explicit switching variables (big-M decoupling)
# ---------------------------------------------------------------------------

class LineMode(Enum):
    CLOSED = "closed"        # z fixed 1: exact flow law, full thermal limit
    OPEN = "open"            # line removed: no flow variable at all
    OPEN_BIGM = "open_bigm"  # z fixed 0: the literal big-M encoding of open
    RELAXED = "relaxed"      # z free in [0, 1] (counts against the budget)
    TRANSPORT = "transport"  # no flow law at all, |P| <= rating


def angle_spread_bound(case: NetworkCase, line_positions: Sequence[int]) -> float:
    """Sound bound on any island's angle spread under normalization.

    Along a closed line, |theta_i - theta_j| = |P| x <= S x, so within an
    island the spread is at most the total S*x mass of the given lines.
    Deliberately conservative: a diameter would be tighter but must be taken
    per candidate island, not over the full graph.
    """
    return float(
        sum(
            (case.lines[e].rating_mw / case.base_mva) * case.lines[e].reactance_pu
            for e in line_positions
        )
    )


def build_switching_lp(
    case: NetworkCase,
    modes: Sequence[LineMode],
    budget: Optional[int] = None,
) -> tuple[LpProblem, dict]:
    """Angle-space LP over mixed line modes.

    With every mode CLOSED/OPEN this is the literal fixed-z system (big-M
    decoupling on open lines); with RELAXED modes and a budget it is the
    node relaxation used for branch-and-bound lower bounds.  Returns the
    problem plus an index map for extracting values.
    """
    base = case.base_mva
    nb, nl = case.n_buses, case.n_lines
    if len(modes) != nl:
        raise ValueError("modes length must match line count")

    relevant = [e for e in range(nl) if modes[e] != LineMode.OPEN]
    spread = angle_spread_bound(case, relevant)

    # Reference pinning must follow the angle-coupling graph: CLOSED and
    # RELAXED lines couple angles (a relaxed line's z may reach 1), while
    # OPEN/OPEN_BIGM/TRANSPORT lines leave their endpoints free to shift.
    coupling_edges = [
        (case.lines[e].from_bus, case.lines[e].to_bus)
        for e in range(nl)
        if modes[e] in (LineMode.CLOSED, LineMode.RELAXED)
    ]
    comps = connected_components(nb, coupling_edges)

    # Variable layout: theta | P_g | P_s | P_line (non-open) | z (relaxed
    # lines only) | row slacks appended per inequality.
    idx_theta = {b.id: k for k, b in enumerate(case.buses)}
    off = nb
    idx_gen = {gi: off + gi for gi in range(case.n_generators)}
    off += case.n_generators
    idx_shed = {b.id: off + k for k, b in enumerate(case.buses)}
    off += nb
    flow_lines = [e for e in range(nl) if modes[e] != LineMode.OPEN]
    idx_flow = {e: off + k for k, e in enumerate(flow_lines)}
    off += len(flow_lines)
    z_lines = [e for e in range(nl) if modes[e] == LineMode.RELAXED]
    idx_z = {e: off + k for k, e in enumerate(z_lines)}
    off += len(z_lines)

    rows: list[dict[int, float]] = []
    rhs: list[float] = []
    slack_bounds: list[tuple[float, float]] = []

    def add_row(coeffs: dict[int, float], b: float, slack: Optional[tuple[float, float]] = None):
        rows.append(coeffs)
        rhs.append(b)
        slack_bounds.append(slack if slack is not None else (0.0, 0.0))

    lo = np.full(off, -np.inf)
    hi = np.full(off, np.inf)
    c = np.zeros(off)

    for comp in comps:
        ref = comp[0]
        lo[idx_theta[ref]] = hi[idx_theta[ref]] = 0.0

    for gi, g in enumerate(case.generators):
        lo[idx_gen[gi]] = g.p_min_mw / base
        hi[idx_gen[gi]] = g.p_max_mw / base
        c[idx_gen[gi]] = g.cost_per_mw * base
    for b in case.buses:
        lo[idx_shed[b.id]] = 0.0
        hi[idx_shed[b.id]] = b.demand_mw / base
        c[idx_shed[b.id]] = case.shed_cost_per_mw * base

    for e in z_lines:
        lo[idx_z[e]], hi[idx_z[e]] = 0.0, 1.0

    for e in flow_lines:
        ln = case.lines[e]
        s_pu = ln.rating_mw / base
        x = ln.reactance_pu
        p = idx_flow[e]
        ti, tj = idx_theta[ln.from_bus], idx_theta[ln.to_bus]
        if modes[e] == LineMode.TRANSPORT:
            lo[p], hi[p] = -s_pu, s_pu
        elif modes[e] == LineMode.CLOSED:
            # Exact flow law in x-scaled form plus plain thermal bounds.
            lo[p], hi[p] = -s_pu, s_pu
            add_row({ti: 1.0, tj: -1.0, p: -x}, 0.0)
        elif modes[e] == LineMode.OPEN_BIGM:
            # Literal z=0 encoding: zero flow, angle difference loose to M x.
            lo[p] = hi[p] = 0.0
            mx = x * s_pu + 2.0 * spread
            add_row({ti: 1.0, tj: -1.0}, 0.0, slack=(-mx, mx))
        else:  # RELAXED
            z = idx_z[e]
            # Thermal: -S z <= P <= S z.
            add_row({p: 1.0, z: -s_pu}, 0.0, slack=(0.0, np.inf))
            add_row({p: 1.0, z: s_pu}, 0.0, slack=(-np.inf, 0.0))
            # Decoupling (x-scaled): |x P - (ti - tj)| <= (x S + 2 spread)(1 - z).
            mx = x * s_pu + 2.0 * spread
            add_row({p: x, ti: -1.0, tj: 1.0, z: mx}, mx, slack=(0.0, np.inf))
            add_row({p: x, ti: -1.0, tj: 1.0, z: -mx}, -mx, slack=(-np.inf, 0.0))

    if budget is not None and z_lines:
        # sum(1 - z) <= budget  ->  sum z >= len - budget  (slack <= 0)
        add_row({idx_z[e]: 1.0 for e in z_lines}, float(len(z_lines) - budget),
                slack=(-np.inf, 0.0))

    # KCL per bus: sum(out flows) - sum(in flows) - P_g - P_s = -P_d.
    kcl: dict[int, dict[int, float]] = {b.id: {} for b in case.buses}
    for e in flow_lines:
        ln = case.lines[e]
        kcl[ln.from_bus][idx_flow[e]] = kcl[ln.from_bus].get(idx_flow[e], 0.0) + 1.0
        kcl[ln.to_bus][idx_flow[e]] = kcl[ln.to_bus].get(idx_flow[e], 0.0) - 1.0
    for gi, g in enumerate(case.generators):
        kcl[g.bus][idx_gen[gi]] = -1.0
    for b in case.buses:
        kcl[b.id][idx_shed[b.id]] = -1.0
        add_row(kcl[b.id], -b.demand_mw / base)

    n_rows = len(rows)
    n_vars = off + sum(1 for s in slack_bounds if s != (0.0, 0.0))
    a = np.zeros((n_rows, n_vars))
    b_eq = np.array(rhs)
    lo_full = np.concatenate([lo, np.zeros(n_vars - off)])
    hi_full = np.concatenate([hi, np.zeros(n_vars - off)])
    c_full = np.concatenate([c, np.zeros(n_vars - off)])
    slack_at = off
    for r, coeffs in enumerate(rows):
        for j, v in coeffs.items():
            a[r, j] = v
        if slack_bounds[r] != (0.0, 0.0):
            a[r, slack_at] = 1.0
            lo_full[slack_at], hi_full[slack_at] = slack_bounds[r]
            # Equilibrate: scaling a row and its slack bounds changes nothing
            # mathematically but keeps the basis well conditioned.
            scale = max(abs(v) for v in coeffs.values())
            if scale > 10.0:
                a[r, :] /= scale
                b_eq[r] /= scale
                lo_full[slack_at] /= scale
                hi_full[slack_at] /= scale
            slack_at += 1

    meta = {
        "idx_theta": idx_theta,
        "idx_gen": idx_gen,
        "idx_shed": idx_shed,
        "idx_flow": idx_flow,
        "idx_z": idx_z,
        "angle_spread": spread,
    }
    return LpProblem(c_full, a, b_eq, lo_full, hi_full), meta


def solve_switching_lp(
    case: NetworkCase,
    modes: Sequence[LineMode],
    budget: Optional[int] = None,
) -> LpSolution:
    problem, _ = build_switching_lp(case, modes, budget=budget)
    return solve_lp(problem)


@dataclass(frozen=True)
class SwitchingBound:
    """Node relaxation result for branch-and-bound in z-space."""

    objective: float                      # valid lower bound (+inf infeasible)
    z_values: dict[int, float]            # relaxed line position -> z in [0,1]
    phantom_pu: dict[int, float]          # |x P - (ti - tj)| decoupling slack
    integral: bool                        # no relaxed line uses its decoupling


def switching_relaxation_bound(
    case: NetworkCase,
    modes: Sequence[LineMode],
    budget: Optional[int],
) -> SwitchingBound:
    """Budget-aware lower bound over all completions of a partial z-fixing.

    Solved with scipy's HiGHS: this LP only steers pruning and branching, so
    a faster generic solver is fine; every objective the oracle reports still
    comes from the in-repo simplex via exact topology evaluations.
    """
    import scipy.sparse
    from scipy.optimize import linprog

    problem, meta = build_switching_lp(case, modes, budget=budget)
    bounds = np.column_stack([problem.lower, problem.upper])
    a_eq = scipy.sparse.csr_matrix(problem.a_eq)
    res = linprog(problem.objective, A_eq=a_eq, b_eq=problem.b_eq,
                  bounds=bounds, method="highs")
    if res.status == 4:  # numerical trouble: retry without presolve
        res = linprog(problem.objective, A_eq=a_eq, b_eq=problem.b_eq,
                      bounds=bounds, method="highs",
                      options={"presolve": False})
    if res.status == 2:  # infeasible relaxation: every completion is too
        return SwitchingBound(math.inf, {}, {}, True)
    if res.status != 0:
        # A bound that cannot be computed is soundly useless, never wrong.
        return SwitchingBound(-math.inf, {}, {e: math.inf for e in meta["idx_z"]}, False)
    x = res.x
    z_values, phantom = {}, {}
    for e, zi in meta["idx_z"].items():
        z_values[e] = float(x[zi])
        ln = case.lines[e]
        ti = meta["idx_theta"][ln.from_bus]
        tj = meta["idx_theta"][ln.to_bus]
        p = meta["idx_flow"][e]
        phantom[e] = abs(ln.reactance_pu * x[p] - (x[ti] - x[tj]))
    integral = all(v <= 1e-7 for v in phantom.values())
    return SwitchingBound(float(res.fun), z_values, phantom, integral)
