/**
 * Console state: the latest schedule snapshot plus events applied after its
 * cursor. The rendered view derives from nothing else, so reloading the
 * page and replaying snapshot + tail reconstructs an identical console.
 */

import type { AssignmentView, KitchenEvent, ScheduleSnapshot } from "./api.js";

export type Connection = "connecting" | "live" | "lost";

export interface ConsoleState {
  connection: Connection;
  snapshot: ScheduleSnapshot | null;
  /** Sequence number of the last event folded into the view. */
  cursor: number;
  clockS: number;
  /** Pending order chips keyed by recipe index (optimistic UI). */
  pendingOrders: number[];
  alerts: string[];
  /**
   * Set when an event cannot be folded incrementally (reschedule moves
   * pending bars, or a sequence gap was detected): the console must fetch
   * a fresh snapshot.
   */
  needsResync: boolean;
}

export function initialState(): ConsoleState {
  return {
    connection: "connecting",
    snapshot: null,
    cursor: -1,
    clockS: 0,
    pendingOrders: [],
    alerts: [],
    needsResync: false,
  };
}

export function applySnapshot(
  state: ConsoleState,
  snapshot: ScheduleSnapshot,
): ConsoleState {
  const scheduled = new Set(
    snapshot.assignments.map((a) => a.recipe_index),
  );
  return {
    ...state,
    snapshot,
    cursor: snapshot.cursor,
    clockS: snapshot.clock_s,
    pendingOrders: state.pendingOrders.filter((id) => !scheduled.has(id)),
    needsResync: false,
  };
}

function patchAssignment(
  assignments: AssignmentView[],
  recipeIndex: number,
  taskIndex: number,
  patch: Partial<AssignmentView>,
): AssignmentView[] {
  return assignments.map((a) =>
    a.recipe_index === recipeIndex && a.task_index === taskIndex
      ? { ...a, ...patch }
      : a,
  );
}

/** Fold one event into the view; marks needsResync when it cannot. */
export function applyEvent(
  state: ConsoleState,
  event: KitchenEvent,
): ConsoleState {
  if (event.seq <= state.cursor) {
    return state; // duplicate delivery
  }
  if (event.seq > state.cursor + 1) {
    // sequence gap: some event was missed, the incremental view is stale
    return { ...state, cursor: event.seq, needsResync: true };
  }
  const next: ConsoleState = {
    ...state,
    cursor: event.seq,
    clockS: Math.max(state.clockS, event.at_s),
  };
  if (state.snapshot === null) {
    return { ...next, needsResync: true };
  }
  const payload = event.payload;
  const recipeIndex = Number(payload["recipe_index"]);
  const taskIndex = Number(payload["task_index"]);
  switch (event.kind) {
    case "task_started":
      next.snapshot = {
        ...state.snapshot,
        assignments: patchAssignment(
          state.snapshot.assignments,
          recipeIndex,
          taskIndex,
          {
            status: "running",
            start_s: Number(payload["start_s"]),
            end_s: Number(payload["end_s"]),
          },
        ),
      };
      return next;
    case "task_completed":
      next.snapshot = {
        ...state.snapshot,
        assignments: patchAssignment(
          state.snapshot.assignments,
          recipeIndex,
          taskIndex,
          { status: "done" },
        ),
      };
      return next;
    case "task_canceled":
      next.snapshot = {
        ...state.snapshot,
        assignments: patchAssignment(
          state.snapshot.assignments,
          recipeIndex,
          taskIndex,
          { status: "canceled" },
        ),
      };
      return next;
    case "order_placed": {
      // the order's bars are not in the snapshot yet
      return { ...next, needsResync: true };
    }
    case "reschedule":
      // pending bars may have moved; only a fresh snapshot knows where
      return { ...next, needsResync: true };
    case "operator_alert":
      next.alerts = [...state.alerts, String(payload["message"] ?? "")];
      return next;
    default:
      // informational (appliance_status, task_failed before its cancel)
      return next;
  }
}

export function applyEvents(
  state: ConsoleState,
  events: KitchenEvent[],
): ConsoleState {
  return events.reduce(applyEvent, state);
}

export function addPendingOrder(
  state: ConsoleState,
  recipeIndex: number,
): ConsoleState {
  if (state.pendingOrders.includes(recipeIndex)) {
    return state;
  }
  return { ...state, pendingOrders: [...state.pendingOrders, recipeIndex] };
}

/** Recipe/task pairs whose fault button should be enabled. */
export function runningTasks(
  state: ConsoleState,
): { recipeIndex: number; taskIndex: number; machine: string }[] {
  if (state.snapshot === null) {
    return [];
  }
  return state.snapshot.assignments
    .filter((a) => a.status === "running")
    .map((a) => ({
      recipeIndex: a.recipe_index,
      taskIndex: a.task_index,
      machine: a.machine,
    }));
}
