"""Cooking job-shop solver.

Depth-first branch and bound over pairwise ordering literals with integer
bounds propagation, conflict-set backjumping and an incumbent makespan bound.
A brute-force interleaving oracle covers small instances for verification.

Times are integer seconds throughout.  The strict completion-order chain
(order i must finish before order i+1) is encoded as ``end_i + 1 <= end_j``.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .model import (
    Assignment,
    Machine,
    Order,
    Schedule,
    TaskSpec,
    TaskStatus,
    schedule_from_assignments,
    validate_order,
)

__all__ = [
    "JsspInstance",
    "SolverConfig",
    "BranchingRule",
    "SolveStatus",
    "SolveResult",
    "PropagationResult",
    "propagate",
    "solve",
    "brute_force",
    "InstanceTooLarge",
]

# Pseudo-literal marking bounds derived from the incumbent makespan.
BOUND = -1


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class JsspInstance:
    orders: tuple[Order, ...]
    machines: tuple[Machine, ...]
    incompatible_pairs: frozenset[frozenset[str]] = frozenset()
    pinned: tuple[Assignment, ...] = ()
    # Earliest permitted start for any non-pinned task (the replanner's "now").
    release_s: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "orders", tuple(self.orders))
        object.__setattr__(self, "machines", tuple(self.machines))
        object.__setattr__(
            self,
            "incompatible_pairs",
            frozenset(frozenset(p) for p in self.incompatible_pairs),
        )
        object.__setattr__(self, "pinned", tuple(self.pinned))
        known = {m.id for m in self.machines}
        for pair in self.incompatible_pairs:
            for mid in pair:
                if mid not in known:
                    raise ValueError(f"incompatible pair references unknown machine {mid}")

    def validate(self) -> list[str]:
        out: list[str] = []
        for order in self.orders:
            out.extend(validate_order(order, self.machines))
        return out


class BranchingRule(str, Enum):
    SMALLEST_DOMAIN_FIRST = "smallest_domain_first"
    EARLIEST_DEADLINE_FIRST = "earliest_deadline_first"


@dataclass(frozen=True)
class SolverConfig:
    time_budget_ms: int = 30_000
    node_budget: int = 2_000_000
    random_seed: int = 0
    branching: BranchingRule = BranchingRule.SMALLEST_DOMAIN_FIRST

    def __post_init__(self) -> None:
        if self.time_budget_ms <= 0 or self.node_budget <= 0:
            raise ValueError("budgets must be positive")


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    TIMED_OUT = "timed_out"


@dataclass(frozen=True)
class SolveResult:
    status: SolveStatus
    schedule: Optional[Schedule]
    nodes: int = 0
    backtracks: int = 0

    @property
    def feasible(self) -> bool:
        return self.schedule is not None


# ---------------------------------------------------------------------------
# Compiled instance

A_FIRST = 0
B_FIRST = 1


@dataclass
class _Compiled:
    tasks: list[TaskSpec]
    index: dict[tuple[int, int], int]
    durations: list[int]
    horizon: int
    # (a, b) task indices of every cross-order conflicting pair, a < b
    pairs: list[tuple[int, int]]
    # precedence edges (pred, succ) of consecutive same-order tasks
    precedence: list[tuple[int, int]]
    # (first, last, slack) per order with a deadline: x_last <= x_first + slack
    deadlines: list[tuple[int, int, int]]
    # (last_i, last_j) for consecutive chain orders: e_i + 1 <= e_j
    chain: list[tuple[int, int]]
    pinned_at: dict[int, Assignment]
    order_deadline: dict[int, Optional[int]]
    release: int = 0


def _compile(instance: JsspInstance) -> _Compiled:
    tasks: list[TaskSpec] = []
    for order in instance.orders:
        tasks.extend(order.tasks)
    index = {t.key: k for k, t in enumerate(tasks)}
    durations = [t.duration_s for t in tasks]

    pinned_at: dict[int, Assignment] = {}
    for a in instance.pinned:
        if a.key not in index:
            raise KeyError(f"pinned assignment references unknown task {a.key}")
        pinned_at[index[a.key]] = a

    max_pinned_end = max((a.end_s for a in pinned_at.values()), default=0)
    horizon = (
        max(max_pinned_end, instance.release_s)
        + sum(durations)
        + len(instance.orders)
        + 1
    )

    precedence = []
    for order in instance.orders:
        for prev, nxt in zip(order.tasks, order.tasks[1:]):
            precedence.append((index[prev.key], index[nxt.key]))

    pairs = []
    for a, b in itertools.combinations(range(len(tasks)), 2):
        ta, tb = tasks[a], tasks[b]
        if ta.recipe_index == tb.recipe_index:
            continue  # precedence chain already serializes same-order tasks
        shared = set(ta.machines()) & set(tb.machines())
        incompatible = any(
            frozenset((ma, mb)) in instance.incompatible_pairs
            for ma in ta.machines()
            for mb in tb.machines()
        )
        if shared or incompatible:
            pairs.append((a, b))

    deadlines = []
    order_deadline: dict[int, Optional[int]] = {}
    for order in instance.orders:
        order_deadline[order.recipe_index] = order.deadline_s
        if order.deadline_s is None or not order.tasks or order.truncated:
            continue
        first = index[order.tasks[0].key]
        last = index[order.tasks[-1].key]
        slack = order.deadline_s - durations[last]
        deadlines.append((first, last, slack))

    chain = []
    chained = [o for o in sorted(instance.orders, key=lambda o: o.recipe_index)
               if o.tasks and not o.truncated]
    for prev, nxt in zip(chained, chained[1:]):
        chain.append((index[prev.tasks[-1].key], index[nxt.tasks[-1].key]))

    return _Compiled(
        tasks=tasks,
        index=index,
        durations=durations,
        horizon=horizon,
        pairs=pairs,
        precedence=precedence,
        deadlines=deadlines,
        chain=chain,
        pinned_at=pinned_at,
        order_deadline=order_deadline,
        release=instance.release_s,
    )


# ---------------------------------------------------------------------------
# Search state and propagation


@dataclass
class SearchState:
    lb: list[int]
    ub: list[int]
    expl_lb: list[frozenset[int]]
    expl_ub: list[frozenset[int]]
    # literal value per pair index: None undecided, A_FIRST/B_FIRST decided
    literal: list[Optional[int]]
    # reason set justifying each decided literal ({lit} for decisions)
    reason: list[frozenset[int]]
    incumbent: Optional[Schedule] = None
    incumbent_makespan: Optional[int] = None
    nodes: int = 0
    backtracks: int = 0

    def copy_domains(self) -> tuple:
        return (
            list(self.lb),
            list(self.ub),
            list(self.expl_lb),
            list(self.expl_ub),
            list(self.literal),
            list(self.reason),
        )

    def restore(self, snap: tuple) -> None:
        self.lb, self.ub, self.expl_lb, self.expl_ub, self.literal, self.reason = (
            list(snap[0]),
            list(snap[1]),
            list(snap[2]),
            list(snap[3]),
            list(snap[4]),
            list(snap[5]),
        )


@dataclass(frozen=True)
class PropagationResult:
    conflict: bool
    explanation: frozenset[int] = frozenset()


def _initial_state(comp: _Compiled) -> SearchState:
    n = len(comp.tasks)
    lb = [comp.release] * n
    ub = [comp.horizon - d for d in comp.durations]
    for k, a in comp.pinned_at.items():
        lb[k] = a.start_s
        ub[k] = a.start_s
    empty = frozenset()
    return SearchState(
        lb=lb,
        ub=ub,
        expl_lb=[empty] * n,
        expl_ub=[empty] * n,
        literal=[None] * len(comp.pairs),
        reason=[empty] * len(comp.pairs),
    )


def _propagate(comp: _Compiled, state: SearchState) -> PropagationResult:
    """Tighten start-time bounds to fixpoint; detect emptied domains.

    Every tightened bound carries the set of decided ordering literals that
    produced it; a conflict returns the union for the emptied domain.
    """
    lb, ub = state.lb, state.ub
    elb, eub = state.expl_lb, state.expl_ub
    d = comp.durations

    def raise_lb(k: int, value: int, expl: frozenset[int]) -> bool:
        if value > lb[k]:
            lb[k] = value
            elb[k] = expl
            return True
        return False

    def lower_ub(k: int, value: int, expl: frozenset[int]) -> bool:
        if value < ub[k]:
            ub[k] = value
            eub[k] = expl
            return True
        return False

    changed = True
    while changed:
        changed = False
        for pred, succ in comp.precedence:
            changed |= raise_lb(succ, lb[pred] + d[pred], elb[pred])
            changed |= lower_ub(pred, ub[succ] - d[pred], eub[succ])
        for first, last, slack in comp.deadlines:
            changed |= lower_ub(last, ub[first] + slack, eub[first])
            changed |= raise_lb(first, lb[last] - slack, elb[last])
        for last_i, last_j in comp.chain:
            gap = d[last_i] + 1 - d[last_j]
            changed |= raise_lb(last_j, lb[last_i] + gap, elb[last_i])
            changed |= lower_ub(last_i, ub[last_j] - gap, eub[last_j])
        for p, (a, b) in enumerate(comp.pairs):
            val = state.literal[p]
            if val is None:
                # Infer a forced ordering when one direction is impossible.
                a_first_ok = lb[a] + d[a] <= ub[b]
                b_first_ok = lb[b] + d[b] <= ub[a]
                if not a_first_ok and not b_first_ok:
                    return PropagationResult(
                        True, elb[a] | eub[b] | elb[b] | eub[a]
                    )
                if not a_first_ok:
                    state.literal[p] = B_FIRST
                    state.reason[p] = elb[a] | eub[b]
                    changed = True
                elif not b_first_ok:
                    state.literal[p] = A_FIRST
                    state.reason[p] = elb[b] | eub[a]
                    changed = True
                continue
            if val == A_FIRST:
                lead, trail = a, b
            else:
                lead, trail = b, a
            reason = state.reason[p]
            changed |= raise_lb(trail, lb[lead] + d[lead], elb[lead] | reason)
            changed |= lower_ub(lead, ub[trail] - d[lead], eub[trail] | reason)
        for k in range(len(lb)):
            if lb[k] > ub[k]:
                return PropagationResult(True, elb[k] | eub[k])
    return PropagationResult(False)


def propagate(instance: JsspInstance, state: Optional[SearchState] = None):
    """Public propagation entry: run bounds tightening on a fresh or given state.

    Returns ``(state, result)``.
    """
    comp = _compile(instance)
    if state is None:
        state = _initial_state(comp)
    result = _propagate(comp, state)
    return state, result


def _apply_incumbent_bound(comp: _Compiled, state: SearchState) -> None:
    if state.incumbent_makespan is None:
        return
    cap = state.incumbent_makespan - 1
    bound = frozenset((BOUND,))
    for k, dur in enumerate(comp.durations):
        if cap - dur < state.ub[k]:
            state.ub[k] = cap - dur
            state.expl_ub[k] = bound


def _pick_literal(
    comp: _Compiled, state: SearchState, rule: BranchingRule
) -> Optional[int]:
    best = None
    best_score = None
    for p, (a, b) in enumerate(comp.pairs):
        if state.literal[p] is not None:
            continue
        if rule is BranchingRule.EARLIEST_DEADLINE_FIRST:
            def dl(k: int) -> int:
                ml = comp.order_deadline.get(comp.tasks[k].recipe_index)
                return ml if ml is not None else 10**9
            score = (min(dl(a), dl(b)), comp.tasks[a].key, comp.tasks[b].key)
        else:
            dom = min(state.ub[a] - state.lb[a], state.ub[b] - state.lb[b])
            score = (dom, comp.tasks[a].key, comp.tasks[b].key)
        if best_score is None or score < best_score:
            best, best_score = p, score
    return best


def _leaf_schedule(comp: _Compiled, state: SearchState) -> Schedule:
    assignments = []
    for k, task in enumerate(comp.tasks):
        start = state.lb[k]
        pin = comp.pinned_at.get(k)
        status = pin.status if pin is not None else TaskStatus.PENDING
        tries = pin.tries if pin is not None else 0
        assignments.append(
            Assignment(
                recipe_index=task.recipe_index,
                task_index=task.task_index,
                machine=task.machine,
                start_s=start,
                end_s=start + task.duration_s,
                status=status,
                tries=tries,
            )
        )
    return schedule_from_assignments(assignments)


class _Budget(Exception):
    pass


def solve(instance: JsspInstance, config: SolverConfig = SolverConfig()) -> SolveResult:
    """Minimize makespan by DFS branch and bound with backjumping.

    Deterministic for a fixed instance and config.  Pinned assignments keep
    their exact start times.
    """
    problems = instance.validate()
    if problems:
        raise ValueError("invalid instance: " + "; ".join(problems))

    comp = _compile(instance)
    state = _initial_state(comp)

    root = _propagate(comp, state)
    if root.conflict:
        return SolveResult(SolveStatus.INFEASIBLE, None, nodes=1)

    deadline = time.monotonic() + config.time_budget_ms / 1000.0

    def search() -> frozenset[int]:
        state.nodes += 1
        if state.nodes > config.node_budget or time.monotonic() > deadline:
            raise _Budget
        _apply_incumbent_bound(comp, state)
        result = _propagate(comp, state)
        if result.conflict:
            return result.explanation
        lit = _pick_literal(comp, state, config.branching)
        if lit is None:
            sched = _leaf_schedule(comp, state)
            state.incumbent = sched
            state.incumbent_makespan = sched.makespan_s
            return frozenset((BOUND,))
        a, b = comp.pairs[lit]
        # Try the task with the earlier release first; deterministic tie-break.
        if (state.lb[a], comp.tasks[a].key) <= (state.lb[b], comp.tasks[b].key):
            values = (A_FIRST, B_FIRST)
        else:
            values = (B_FIRST, A_FIRST)
        combined: frozenset[int] = frozenset()
        for value in values:
            snap = state.copy_domains()
            state.literal[lit] = value
            state.reason[lit] = frozenset((lit,))
            expl = search()
            state.restore(snap)
            state.backtracks += 1
            if lit not in expl and BOUND not in expl:
                return expl  # backjump: conflict independent of this decision
            combined |= expl
        return combined - frozenset((lit,))

    timed_out = False
    try:
        search()
    except _Budget:
        timed_out = True

    if state.incumbent is None:
        status = SolveStatus.TIMED_OUT if timed_out else SolveStatus.INFEASIBLE
        return SolveResult(status, None, state.nodes, state.backtracks)
    status = SolveStatus.TIMED_OUT if timed_out else SolveStatus.OPTIMAL
    return SolveResult(status, state.incumbent, state.nodes, state.backtracks)


# ---------------------------------------------------------------------------
# Brute-force oracle

MAX_BRUTE_FORCE_TASKS = 12


def _sequence_makespan(
    comp: _Compiled, sequence: list[int]
) -> Optional[list[int]]:
    """Earliest feasible starts for a fixed global task sequence.

    Conflicting pairs are ordered by their sequence positions.  Returns None
    when the sequence admits no feasible placement.
    """
    d = comp.durations
    pos = {k: s for s, k in enumerate(sequence)}
    n = len(sequence)
    start = [comp.release] * n
    for k, a in comp.pinned_at.items():
        start[k] = a.start_s

    ordered_pairs = []
    for a, b in comp.pairs:
        if pos[a] < pos[b]:
            ordered_pairs.append((a, b))
        else:
            ordered_pairs.append((b, a))

    while True:
        changed = False

        def lift(k: int, value: int) -> None:
            nonlocal changed
            if value > start[k]:
                start[k] = value
                changed = True

        for pred, succ in comp.precedence:
            lift(succ, start[pred] + d[pred])
        for lead, trail in ordered_pairs:
            lift(trail, start[lead] + d[lead])
        for first, last, slack in comp.deadlines:
            lift(first, start[last] - slack)
        for last_i, last_j in comp.chain:
            lift(last_j, start[last_i] + d[last_i] + 1 - d[last_j])
        for k, a in comp.pinned_at.items():
            if start[k] > a.start_s:
                return None  # pinned start cannot move
        if max(start) > comp.horizon:
            return None
        if not changed:
            return start
    return None


def brute_force(instance: JsspInstance) -> SolveResult:
    """Exhaustive minimum-makespan search for small instances.

    Enumerates every global interleaving consistent with per-order precedence
    and left-shifts it into earliest feasible starts.
    """
    comp = _compile(instance)
    if len(comp.tasks) > MAX_BRUTE_FORCE_TASKS:
        raise InstanceTooLarge(
            f"{len(comp.tasks)} tasks exceeds brute-force limit "
            f"{MAX_BRUTE_FORCE_TASKS}"
        )

    per_order = [
        [comp.index[t.key] for t in order.tasks] for order in instance.orders
    ]
    best: Optional[tuple[int, list[int]]] = None

    def interleave(remaining: list[int], prefix: list[int]):
        nonlocal best
        if all(r == len(per_order[i]) for i, r in enumerate(remaining)):
            starts = _sequence_makespan(comp, prefix)
            if starts is None:
                return
            makespan = max(s + comp.durations[k] for k, s in enumerate(starts))
            if best is None or makespan < best[0]:
                best = (makespan, list(starts))
            return
        for i in range(len(per_order)):
            if remaining[i] < len(per_order[i]):
                remaining[i] += 1
                prefix.append(per_order[i][remaining[i] - 1])
                interleave(remaining, prefix)
                prefix.pop()
                remaining[i] -= 1

    interleave([0] * len(per_order), [])

    if best is None:
        return SolveResult(SolveStatus.INFEASIBLE, None)
    _, starts = best
    assignments = []
    for k, task in enumerate(comp.tasks):
        pin = comp.pinned_at.get(k)
        assignments.append(
            Assignment(
                recipe_index=task.recipe_index,
                task_index=task.task_index,
                machine=task.machine,
                start_s=starts[k],
                end_s=starts[k] + task.duration_s,
                status=pin.status if pin is not None else TaskStatus.PENDING,
                tries=pin.tries if pin is not None else 0,
            )
        )
    return SolveResult(SolveStatus.OPTIMAL, schedule_from_assignments(assignments))
