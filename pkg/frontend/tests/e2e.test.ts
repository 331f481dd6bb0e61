/**
 * End-to-end test against a real server process. Run with `npm run test:e2e`
 * from a machine where the backend package is installed for python3.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { CellApi } from "../src/api.js";
import { buildModel, renderSvg } from "../src/gantt.js";
import {
  applyEvents,
  applySnapshot,
  initialState,
} from "../src/state.js";

const PORT = 8765;
const BASE = `http://127.0.0.1:${PORT}`;
const MACHINES = "../../src/kitchencell/data/machines.json";

let server: ChildProcess;
const api = new CellApi(BASE);

const friesOrder = {
  recipe_index: 0,
  name: "fries",
  deadline_s: null,
  tasks: [
    { task_index: 0, name: "dice", machine: "food_processor", duration_s: 120 },
    { task_index: 1, name: "fry", machine: "fryer", duration_s: 300 },
  ],
};

async function waitForServer(): Promise<void> {
  const deadline = Date.now() + 15_000;
  while (Date.now() < deadline) {
    try {
      await api.machines();
      return;
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 200));
    }
  }
  throw new Error("server did not come up");
}

beforeAll(async () => {
  server = spawn(
    "python3",
    ["-m", "kitchencell.cli", "serve", MACHINES, "--port", String(PORT)],
    { cwd: import.meta.dirname, stdio: "ignore" },
  );
  await waitForServer();
}, 30_000);

afterAll(() => {
  server.kill();
});

describe("operator console against a live server", () => {
  it("placing an order yields a reschedule event and new bars within 1 s", async () => {
    const before = await api.schedule();
    expect(before.assignments).toHaveLength(0);

    const acknowledged = await api.placeOrder(friesOrder);
    expect(acknowledged.id).toBe(0);
    const t0 = Date.now();

    // the reschedule event must be on the stream within a second
    let sawReschedule = false;
    while (Date.now() - t0 < 1_000) {
      const events = await api.eventBacklog(before.cursor);
      if (events.some((e) => e.kind === "reschedule")) {
        sawReschedule = true;
        break;
      }
      await new Promise((resolve) => setTimeout(resolve, 50));
    }
    expect(sawReschedule).toBe(true);

    const after = await api.schedule();
    expect(Date.now() - t0).toBeLessThan(1_000);
    expect(after.assignments).toHaveLength(friesOrder.tasks.length);
  });

  it("a reloaded console reconstructs the identical gantt from snapshot + tail", async () => {
    const machines = (await api.machines()).machines.map((m) => m.id);

    // console A: snapshot, then fold the event tail
    let consoleA = applySnapshot(initialState(), await api.schedule());
    consoleA = applyEvents(consoleA, await api.eventBacklog(consoleA.cursor));
    if (consoleA.needsResync) {
      consoleA = applySnapshot(consoleA, await api.schedule());
    }

    // console B: a fresh page load doing the same dance
    let consoleB = applySnapshot(initialState(), await api.schedule());
    consoleB = applyEvents(consoleB, await api.eventBacklog(consoleB.cursor));
    if (consoleB.needsResync) {
      consoleB = applySnapshot(consoleB, await api.schedule());
    }

    const svgA = renderSvg(buildModel(consoleA.snapshot!, machines));
    const svgB = renderSvg(buildModel(consoleB.snapshot!, machines));
    expect(svgA).toBe(svgB);
    expect(consoleA.cursor).toBe(consoleB.cursor);
  });

  it("surfaces solver diagnoses for infeasible orders", async () => {
    await expect(
      api.placeOrder({ ...friesOrder, recipe_index: 1, deadline_s: 1 }),
    ).rejects.toMatchObject({ status: 422 });
  });

  it("fault injection honours the running-task precondition", async () => {
    // paused simulation: fault rejected with 409
    await expect(api.injectFault(0, 0)).rejects.toMatchObject({
      status: 409,
    });
    await api.simStart();
    try {
      // the first task dispatched at t=0 and is running now
      const accepted = await api.injectFault(0, 0);
      expect(accepted.status).toBe("accepted");
      // a task that has not started yet cannot be faulted
      await expect(api.injectFault(0, 1)).rejects.toMatchObject({
        status: 409,
      });
    } finally {
      await api.simPause();
    }
  });
});
