"""Exact native optimization over the assignment space.

``solve`` runs depth-first branch-and-bound over the pinned decision order
(internal vertices in topological order, then sinks). Routing during search
is bitset-vectorized: one Python int per vertex holds the reachability bit
of every examinee type, and weighted tallies decompose the weights into
bit-planes so a weighted sum costs one popcount per plane.

``brute_force`` is the ground-truth oracle: it enumerates every assignment
and scores it through the scalar evaluation path, sharing no routing code
with the search. ``verify`` independently re-checks any returned solution.

Ties between optimal assignments break toward the lexicographically smallest
vector of canonical candidate indices (internal vertices first, then sinks),
so repeated runs and both solvers agree on the exact same assignment.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import Assignment, InputError, Metrics, Vertex, evaluate
from .encoder import Instance, SETTINGS

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_LIMIT = "limit-reached"

BRUTE_FORCE_CAP = 2_000_000


class EnumerationCapError(RuntimeError):
    """Raised when the brute-force space exceeds the configured cap."""


@dataclass(frozen=True)
class SolveStats:
    nodes: int
    wall_time: float


@dataclass(frozen=True)
class Solution:
    """Result of one solve: status, the assignment (if any), and its scores."""

    setting: int
    status: str
    assignment: Assignment | None
    metrics: Metrics | None
    objective_value: int | Fraction | None
    best_bound: int | Fraction | None
    stats: SolveStats

    @property
    def gap(self) -> int | Fraction | None:
        if self.objective_value is None or self.best_bound is None:
            return None
        return abs(self.best_bound - self.objective_value)


@dataclass(frozen=True)
class SearchState:
    """A prefix of choices over the pinned decision order.

    ``choices[k]`` is the canonical candidate index at the k-th decision
    vertex (for sinks, the method's position in the method universe).
    """

    instance: Instance
    choices: tuple[int, ...]


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    issues: tuple[str, ...]


def _mask_from_bool(col: np.ndarray) -> int:
    return int.from_bytes(np.packbits(col, bitorder="little").tobytes(), "little")


class _Tables:
    """Per-instance bitset precomputation shared by bound and search."""

    def __init__(self, inst: Instance):
        self.inst = inst
        d = inst.diagram
        pop = inst.population
        n_t = len(pop.types)

        self.decision_order: tuple[Vertex, ...] = d.internals + d.sinks
        self.decision_pos = {v: k for k, v in enumerate(self.decision_order)}
        self.n_internal = len(d.internals)
        self.methods = pop.methods.methods
        self.costs = pop.methods.costs
        self.cost_order = sorted(range(len(self.methods)), key=lambda mi: self.costs[mi])
        self.full = (1 << n_t) - 1

        self.candidates = {u: inst.candidate_order(u) for u in d.internals}
        self.ones = {
            u: [_mask_from_bool(inst.indicator_column(c)) for c in self.candidates[u]]
            for u in d.internals
        }

        # branch order: candidates closest to the initial label first
        initial = inst.initial
        self.branch_order: dict[Vertex, list[int]] = {}
        for u in d.internals:
            base = initial.node_items[u]
            self.branch_order[u] = sorted(
                range(len(self.candidates[u])),
                key=lambda ci: (-len(self.candidates[u][ci] & base), tuple(sorted(self.candidates[u][ci]))),
            )
        self.sink_branch_order: dict[Vertex, list[int]] = {}
        for s in d.sinks:
            mi0 = pop.methods.index(initial.sink_methods[s])
            self.sink_branch_order[s] = [mi0] + [
                mi for mi in range(len(self.methods)) if mi != mi0
            ]

        # initial-label positions for the similarity objective
        self.match_choice: dict[Vertex, int | None] = {}
        for u in d.internals:
            base = initial.node_items[u]
            self.match_choice[u] = (
                self.candidates[u].index(base) if base in self.candidates[u] else None
            )
        for s in d.sinks:
            self.match_choice[s] = pop.methods.index(initial.sink_methods[s])

        self.y_masks = [0] * len(self.methods)
        self.yz_masks = [0] * len(self.methods)
        for ti, t in enumerate(pop.types):
            bit = 1 << ti
            for mi in range(len(self.methods)):
                if t.y[mi]:
                    self.y_masks[mi] |= bit
                    if t.z:
                        self.yz_masks[mi] |= bit

        weights = [t.weight for t in pop.types]
        top = max(weights, default=0)
        self.planes: list[tuple[int, int]] = []
        for k in range(top.bit_length()):
            mask = 0
            for ti, w in enumerate(weights):
                if (w >> k) & 1:
                    mask |= 1 << ti
            self.planes.append((k, mask))

        self.topo = d.topo_order
        self.arc_heads = {
            u: (d.out_arc(u, 0).head, d.out_arc(u, 1).head) for u in d.internals
        }

    def wsum(self, mask: int) -> int:
        return sum((mask & pm).bit_count() << k for k, pm in self.planes)


@dataclass(frozen=True)
class _Bounds:
    """Exact-or-optimistic scores of a partial state; exact once all fixed."""

    obj1_ub: int
    obj2_ub: int
    obj3_ub: int
    cost_lb: int


def _partial_bounds(tb: _Tables, choices: Sequence[int]) -> _Bounds:
    inst = tb.inst
    fixed = len(choices)

    # possible reach: fixed vertices split their types exactly, open vertices
    # forward every incoming type to both successors
    reach = {v: 0 for v in tb.topo}
    reach[inst.diagram.source] = tb.full
    for v in tb.topo:
        if v not in tb.arc_heads:
            continue
        r = reach[v]
        if not r:
            continue
        head0, head1 = tb.arc_heads[v]
        pos = tb.decision_pos[v]
        if pos < fixed:
            ones = tb.ones[v][choices[pos]]
            reach[head1] |= r & ones
            reach[head0] |= r & (tb.full ^ ones)
        else:
            reach[head1] |= r
            reach[head0] |= r

    # per-method attainability over sinks
    n_m = len(tb.methods)
    pm = [0] * n_m
    for s in inst.diagram.sinks:
        pos = tb.decision_pos[s]
        if pos < fixed:
            pm[choices[pos]] |= reach[s]
        else:
            for mi in range(n_m):
                pm[mi] |= reach[s]

    # two admissible reaction bounds: every type independently takes its
    # best attainable method (tight once sinks are fixed), and every sink
    # serves its possible audience with its single best method (tight while
    # sinks are open); take the smaller
    got2 = 0
    got3 = 0
    for mi in range(n_m):
        got2 |= pm[mi] & tb.y_masks[mi]
        got3 |= pm[mi] & tb.yz_masks[mi]
    obj2_ub = tb.wsum(got2)
    obj3_ub = tb.wsum(got3)

    per_sink2 = 0
    per_sink3 = 0
    for s in inst.diagram.sinks:
        r = reach[s]
        if not r:
            continue
        pos = tb.decision_pos[s]
        if pos < fixed:
            mi = choices[pos]
            per_sink2 += tb.wsum(r & tb.y_masks[mi])
            per_sink3 += tb.wsum(r & tb.yz_masks[mi])
        else:
            per_sink2 += max(tb.wsum(r & tb.y_masks[mi]) for mi in range(n_m))
            per_sink3 += max(tb.wsum(r & tb.yz_masks[mi]) for mi in range(n_m))
    obj2_ub = min(obj2_ub, per_sink2)
    obj3_ub = min(obj3_ub, per_sink3)

    cost_lb = 0
    remaining = tb.full
    for mi in tb.cost_order:
        take = remaining & pm[mi]
        if take:
            cost_lb += tb.costs[mi] * tb.wsum(take)
            remaining ^= take
    # types with no reachable sink method cannot occur: every type reaches a sink

    obj1_ub = 0
    for k, v in enumerate(tb.decision_order):
        match = tb.match_choice[v]
        if k < fixed:
            obj1_ub += int(match is not None and choices[k] == match)
        else:
            obj1_ub += int(match is not None)

    return _Bounds(obj1_ub=obj1_ub, obj2_ub=obj2_ub, obj3_ub=obj3_ub, cost_lb=cost_lb)


def _scaled_objective(b: _Bounds, setting: int, targets: tuple[int, int, int]) -> int:
    """Objective bound in exact integer arithmetic (setting 1 scaled by the targets)."""
    th1, th2, th3 = targets
    if setting == 1:
        return b.obj1_ub * th2 * th3 + b.obj2_ub * th1 * th3 + b.obj3_ub * th1 * th2
    if setting == 2:
        return b.cost_lb
    return b.obj1_ub


def bound(state: SearchState, setting: int) -> int | Fraction:
    """Admissible objective bound of a partial state.

    Upper bound for the maximization settings, lower cost bound for the
    minimization one; equals the exact objective when the state is complete.
    """
    if setting not in SETTINGS:
        raise InputError(f"unknown setting {setting}")
    tb = _Tables(state.instance)
    b = _partial_bounds(tb, state.choices)
    scaled = _scaled_objective(b, setting, state.instance.targets)
    if setting == 1:
        th1, th2, th3 = state.instance.targets
        return Fraction(scaled, th1 * th2 * th3)
    return scaled


def _assignment_from_choices(tb: _Tables, choices: Sequence[int]) -> Assignment:
    node_items = {
        u: tb.candidates[u][choices[tb.decision_pos[u]]]
        for u in tb.inst.diagram.internals
    }
    sink_methods = {
        s: tb.methods[choices[tb.decision_pos[s]]] for s in tb.inst.diagram.sinks
    }
    return Assignment(node_items=node_items, sink_methods=sink_methods)


def assignment_choice_vector(inst: Instance, phi: Assignment) -> tuple[int, ...]:
    """Canonical candidate-index vector used for tie-breaking."""
    vec = [inst.candidate_order(u).index(phi.node_items[u]) for u in inst.diagram.internals]
    vec += [inst.population.methods.index(phi.sink_methods[s]) for s in inst.diagram.sinks]
    return tuple(vec)


class _Search:
    def __init__(
        self,
        inst: Instance,
        setting: int,
        node_limit: int | None,
        time_limit: float | None,
    ):
        self.inst = inst
        self.setting = setting
        self.tb = _Tables(inst)
        self.targets = inst.targets
        self.budget = inst.budget
        self.maximize = setting in (1, 3)
        self.node_limit = node_limit
        self.time_limit = time_limit
        self.deadline = None if time_limit is None else time.perf_counter() + time_limit

        self.nodes = 0
        self.aborted = False
        self.inc_obj: int | None = None
        self.inc_vec: tuple[int, ...] | None = None
        self.open_bound: int | None = None

        order = self.tb.decision_order
        self.n_decisions = len(order)
        self.children: list[list[int]] = []
        for v in order:
            if v in self.tb.branch_order:
                self.children.append(self.tb.branch_order[v])
            else:
                self.children.append(self.tb.sink_branch_order[v])

    def _hit_limit(self) -> bool:
        if self.node_limit is not None and self.nodes >= self.node_limit:
            return True
        if self.deadline is not None and time.perf_counter() > self.deadline:
            return True
        return False

    def _note_open(self, scaled: int) -> None:
        if self.open_bound is None:
            self.open_bound = scaled
        elif self.maximize:
            self.open_bound = max(self.open_bound, scaled)
        else:
            self.open_bound = min(self.open_bound, scaled)

    def _feasible_prefix(self, b: _Bounds) -> bool:
        th1, th2, th3 = self.targets
        if self.setting in (1, 3) and b.cost_lb > self.budget:
            return False
        if self.setting in (2, 3) and (b.obj2_ub < th2 or b.obj3_ub < th3):
            return False
        if self.setting == 2 and 2 * b.obj1_ub < th1:
            return False
        return True

    def _prunable(self, scaled: int, choices: tuple[int, ...]) -> bool:
        if self.inc_obj is None:
            return False
        if self.maximize:
            if scaled < self.inc_obj:
                return True
        elif scaled > self.inc_obj:
            return True
        if scaled == self.inc_obj:
            # an equal-bound subtree can only matter through the tie-break
            pad = choices + (0,) * (self.n_decisions - len(choices))
            return pad >= self.inc_vec
        return False

    def run(self) -> None:
        self._dfs(())

    def _dfs(self, choices: tuple[int, ...]) -> None:
        if self.aborted:
            return
        self.nodes += 1
        b = _partial_bounds(self.tb, choices)
        if not self._feasible_prefix(b):
            return
        scaled = _scaled_objective(b, self.setting, self.targets)
        if self._hit_limit():
            self.aborted = True
            self._note_open(scaled)
            return
        if self._prunable(scaled, choices):
            return

        k = len(choices)
        if k == self.n_decisions:
            if (
                self.inc_obj is None
                or (self.maximize and scaled > self.inc_obj)
                or (not self.maximize and scaled < self.inc_obj)
                or (scaled == self.inc_obj and choices < self.inc_vec)
            ):
                self.inc_obj = scaled
                self.inc_vec = choices
            return

        for ci in self.children[k]:
            self._dfs(choices + (ci,))
            if self.aborted:
                self._note_open(scaled)
                return


def solve(
    inst: Instance,
    setting: int,
    node_limit: int | None = None,
    time_limit: float | None = None,
) -> Solution:
    """Branch-and-bound to proven optimality (or the best incumbent at a limit)."""
    if setting not in SETTINGS:
        raise InputError(f"unknown setting {setting}, expected 1, 2 or 3")
    started = time.perf_counter()
    search = _Search(inst, setting, node_limit, time_limit)
    search.run()
    wall = time.perf_counter() - started
    stats = SolveStats(nodes=search.nodes, wall_time=wall)
    return _solution_from_search(inst, setting, search, stats)


def _solution_from_search(
    inst: Instance, setting: int, search: _Search, stats: SolveStats
) -> Solution:
    th1, th2, th3 = inst.targets
    scale = th1 * th2 * th3

    def unscale(v: int | None) -> int | Fraction | None:
        if v is None:
            return None
        return Fraction(v, scale) if setting == 1 else v

    if search.inc_vec is None:
        if search.aborted:
            return Solution(
                setting=setting,
                status=STATUS_LIMIT,
                assignment=None,
                metrics=None,
                objective_value=None,
                best_bound=unscale(search.open_bound),
                stats=stats,
            )
        return Solution(
            setting=setting,
            status=STATUS_INFEASIBLE,
            assignment=None,
            metrics=None,
            objective_value=None,
            best_bound=None,
            stats=stats,
        )

    phi = _assignment_from_choices(search.tb, search.inc_vec)
    metrics = evaluate(inst.diagram, phi, inst.initial, inst.population)
    objective = unscale(search.inc_obj)
    if search.aborted:
        best = search.inc_obj
        if search.open_bound is not None:
            best = (
                max(best, search.open_bound)
                if search.maximize
                else min(best, search.open_bound)
            )
        return Solution(
            setting=setting,
            status=STATUS_LIMIT,
            assignment=phi,
            metrics=metrics,
            objective_value=objective,
            best_bound=unscale(best),
            stats=stats,
        )
    return Solution(
        setting=setting,
        status=STATUS_OPTIMAL,
        assignment=phi,
        metrics=metrics,
        objective_value=objective,
        best_bound=objective,
        stats=stats,
    )


def _setting_feasible(setting: int, m: Metrics, inst: Instance) -> bool:
    th1, th2, th3 = inst.targets
    if setting == 1:
        return m.cost <= inst.budget
    if setting == 2:
        return 2 * m.obj1 >= th1 and m.obj2 >= th2 and m.obj3 >= th3
    return m.cost <= inst.budget and m.obj2 >= th2 and m.obj3 >= th3


def _setting_objective(setting: int, m: Metrics, inst: Instance) -> int | Fraction:
    th1, th2, th3 = inst.targets
    if setting == 1:
        return Fraction(m.obj1, th1) + Fraction(m.obj2, th2) + Fraction(m.obj3, th3)
    if setting == 2:
        return m.cost
    return m.obj1


def brute_force(inst: Instance, setting: int, cap: int = BRUTE_FORCE_CAP) -> Solution:
    """Exhaustive oracle: score every assignment through the scalar evaluator."""
    if setting not in SETTINGS:
        raise InputError(f"unknown setting {setting}, expected 1, 2 or 3")
    d = inst.diagram
    space = 1
    for u in d.internals:
        space *= len(inst.families[u])
    space *= len(inst.population.methods) ** len(d.sinks)
    if space > cap:
        raise EnumerationCapError(f"{space} assignments exceed the cap of {cap}")

    started = time.perf_counter()
    orders = [inst.candidate_order(u) for u in d.internals]
    methods = inst.population.methods.methods
    maximize = setting in (1, 3)

    best_obj: int | Fraction | None = None
    best_phi: Assignment | None = None
    best_metrics: Metrics | None = None
    count = 0
    ranges = [range(len(o)) for o in orders] + [range(len(methods))] * len(d.sinks)
    for combo in itertools.product(*ranges):
        count += 1
        node_items = {u: orders[i][combo[i]] for i, u in enumerate(d.internals)}
        sink_methods = {
            s: methods[combo[len(orders) + j]] for j, s in enumerate(d.sinks)
        }
        phi = Assignment(node_items=node_items, sink_methods=sink_methods)
        m = evaluate(d, phi, inst.initial, inst.population)
        if not _setting_feasible(setting, m, inst):
            continue
        obj = _setting_objective(setting, m, inst)
        if best_obj is None or (obj > best_obj if maximize else obj < best_obj):
            best_obj, best_phi, best_metrics = obj, phi, m

    wall = time.perf_counter() - started
    stats = SolveStats(nodes=count, wall_time=wall)
    if best_phi is None:
        return Solution(
            setting=setting,
            status=STATUS_INFEASIBLE,
            assignment=None,
            metrics=None,
            objective_value=None,
            best_bound=None,
            stats=stats,
        )
    return Solution(
        setting=setting,
        status=STATUS_OPTIMAL,
        assignment=best_phi,
        metrics=best_metrics,
        objective_value=best_obj,
        best_bound=best_obj,
        stats=stats,
    )


def verify(sol: Solution, inst: Instance, setting: int) -> VerificationReport:
    """Re-derive everything the solution claims and flag each mismatch."""
    issues: list[str] = []
    if sol.setting != setting:
        issues.append(f"solution is for setting {sol.setting}, not {setting}")
    if sol.assignment is None:
        if sol.status == STATUS_OPTIMAL:
            issues.append("optimal status without an assignment")
        return VerificationReport(ok=not issues, issues=tuple(issues))

    phi = sol.assignment
    if not phi.covers(inst.diagram):
        issues.append("assignment does not cover the diagram")
        return VerificationReport(ok=False, issues=tuple(issues))
    for u in inst.diagram.internals:
        if phi.node_items[u] not in inst.families[u]:
            issues.append(f"candidate/constraint violation: label at {u} not permitted")
    for s in inst.diagram.sinks:
        if phi.sink_methods[s] not in inst.population.methods:
            issues.append(f"candidate/constraint violation: unknown method at {s}")
    if issues:
        return VerificationReport(ok=False, issues=tuple(issues))

    m = evaluate(inst.diagram, phi, inst.initial, inst.population)
    if sol.metrics is not None and m != sol.metrics:
        issues.append(f"metrics mismatch: recomputed {m}, reported {sol.metrics}")
    if not _setting_feasible(setting, m, inst):
        issues.append("candidate/constraint violation: setting side constraints fail")
    recomputed = _setting_objective(setting, m, inst)
    if sol.objective_value is not None and recomputed != sol.objective_value:
        issues.append(
            f"objective mismatch: recomputed {recomputed}, reported {sol.objective_value}"
        )
    return VerificationReport(ok=not issues, issues=tuple(issues))
