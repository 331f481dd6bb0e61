import { describe, expect, it } from "vitest";

import type { KitchenEvent, ScheduleSnapshot } from "../src/api.js";
import {
  addPendingOrder,
  applyEvent,
  applyEvents,
  applySnapshot,
  initialState,
  runningTasks,
} from "../src/state.js";

function snapshot(cursor = 4): ScheduleSnapshot {
  return {
    schema: "kitchen-cell/v1",
    clock_s: 10,
    cursor,
    makespan_s: 120,
    assignments: [
      {
        recipe_index: 0,
        task_index: 0,
        name: "season",
        machine: "spice_dispenser",
        start_s: 0,
        end_s: 60,
        status: "running",
        tries: 0,
      },
      {
        recipe_index: 0,
        task_index: 1,
        name: "broil",
        machine: "broiler",
        start_s: 60,
        end_s: 120,
        status: "pending",
        tries: 0,
      },
    ],
    gantt: [],
  };
}

function event(
  seq: number,
  kind: string,
  payload: Record<string, unknown> = {},
  atS = 11,
): KitchenEvent {
  return { seq, at_s: atS, kind, payload };
}

describe("console state", () => {
  it("snapshot resets the cursor and clears resync", () => {
    let state = initialState();
    state = { ...state, needsResync: true };
    state = applySnapshot(state, snapshot());
    expect(state.cursor).toBe(4);
    expect(state.needsResync).toBe(false);
    expect(state.clockS).toBe(10);
  });

  it("task lifecycle events patch assignment statuses", () => {
    let state = applySnapshot(initialState(), snapshot());
    state = applyEvent(
      state,
      event(5, "task_completed", { recipe_index: 0, task_index: 0 }),
    );
    state = applyEvent(
      state,
      event(6, "task_started", {
        recipe_index: 0,
        task_index: 1,
        start_s: 61,
        end_s: 121,
      }),
    );
    const byTask = new Map(
      state.snapshot!.assignments.map((a) => [a.task_index, a]),
    );
    expect(byTask.get(0)?.status).toBe("done");
    expect(byTask.get(1)?.status).toBe("running");
    expect(byTask.get(1)?.start_s).toBe(61);
    expect(state.needsResync).toBe(false);
  });

  it("cancel events turn bars grey without a resync", () => {
    let state = applySnapshot(initialState(), snapshot());
    state = applyEvent(
      state,
      event(5, "task_canceled", { recipe_index: 0, task_index: 1 }),
    );
    expect(state.snapshot!.assignments[1]!.status).toBe("canceled");
    expect(state.needsResync).toBe(false);
  });

  it("reschedule and order_placed require a fresh snapshot", () => {
    const base = applySnapshot(initialState(), snapshot());
    expect(applyEvent(base, event(5, "reschedule")).needsResync).toBe(true);
    expect(applyEvent(base, event(5, "order_placed")).needsResync).toBe(true);
  });

  it("a sequence gap forces a resync", () => {
    const base = applySnapshot(initialState(), snapshot());
    const next = applyEvent(
      base,
      event(9, "task_completed", { recipe_index: 0, task_index: 0 }),
    );
    expect(next.needsResync).toBe(true);
    expect(next.cursor).toBe(9);
  });

  it("duplicate deliveries are ignored", () => {
    const base = applySnapshot(initialState(), snapshot());
    const next = applyEvent(
      base,
      event(4, "task_completed", { recipe_index: 0, task_index: 0 }),
    );
    expect(next).toBe(base);
  });

  it("alerts accumulate from operator_alert events", () => {
    const base = applySnapshot(initialState(), snapshot());
    const next = applyEvent(
      base,
      event(5, "operator_alert", { message: "order rejected" }),
    );
    expect(next.alerts).toEqual(["order rejected"]);
  });

  it("pending orders are deduplicated and cleared by the snapshot", () => {
    let state = addPendingOrder(initialState(), 0);
    state = addPendingOrder(state, 0);
    state = addPendingOrder(state, 3);
    expect(state.pendingOrders).toEqual([0, 3]);
    state = applySnapshot(state, snapshot());
    expect(state.pendingOrders).toEqual([3]); // recipe 0 now scheduled
  });

  it("runningTasks drives the fault buttons", () => {
    const state = applySnapshot(initialState(), snapshot());
    expect(runningTasks(state)).toEqual([
      { recipeIndex: 0, taskIndex: 0, machine: "spice_dispenser" },
    ]);
  });

  it("event replay is order-insensitive to batching", () => {
    const events = [
      event(5, "task_completed", { recipe_index: 0, task_index: 0 }),
      event(6, "task_started", {
        recipe_index: 0,
        task_index: 1,
        start_s: 60,
        end_s: 120,
      }),
    ];
    const oneByOne = events.reduce(
      applyEvent,
      applySnapshot(initialState(), snapshot()),
    );
    const batched = applyEvents(
      applySnapshot(initialState(), snapshot()),
      events,
    );
    expect(batched).toEqual(oneByOne);
  });
});
