import { describe, expect, it } from "vitest";

import type { CellApi } from "../src/api.js";
import { FaultDispatcher } from "../src/faults.js";

function fakeApi(behavior: () => Promise<{ status: string }>) {
  const calls: [number, number][] = [];
  const api = {
    injectFault: (recipeIndex: number, taskIndex: number) => {
      calls.push([recipeIndex, taskIndex]);
      return behavior();
    },
  } as unknown as CellApi;
  return { api, calls };
}

describe("fault dispatcher", () => {
  it("sends one request and reports the outcome", async () => {
    const { api, calls } = fakeApi(() => Promise.resolve({ status: "accepted" }));
    const dispatcher = new FaultDispatcher(api);
    await expect(dispatcher.inject(0, 1)).resolves.toBe("sent");
    expect(calls).toEqual([[0, 1]]);
  });

  it("collapses a double-click into a single request", async () => {
    let release!: () => void;
    const gate = new Promise<void>((resolve) => {
      release = resolve;
    });
    const { api, calls } = fakeApi(async () => {
      await gate;
      return { status: "accepted" };
    });
    const dispatcher = new FaultDispatcher(api);
    const first = dispatcher.inject(0, 0);
    const second = dispatcher.inject(0, 0); // while first is in flight
    expect(dispatcher.isInFlight(0, 0)).toBe(true);
    release();
    await expect(second).resolves.toBe("duplicate");
    await expect(first).resolves.toBe("sent");
    expect(calls).toHaveLength(1);
    expect(dispatcher.isInFlight(0, 0)).toBe(false);
  });

  it("allows different tasks concurrently", async () => {
    const { api, calls } = fakeApi(() => Promise.resolve({ status: "accepted" }));
    const dispatcher = new FaultDispatcher(api);
    await Promise.all([dispatcher.inject(0, 0), dispatcher.inject(1, 2)]);
    expect(calls).toHaveLength(2);
  });

  it("reports a rejection and clears the in-flight flag", async () => {
    const { api } = fakeApi(() => Promise.reject(new Error("409")));
    const dispatcher = new FaultDispatcher(api);
    await expect(dispatcher.inject(0, 0)).resolves.toBe("rejected");
    expect(dispatcher.isInFlight(0, 0)).toBe(false);
  });
});
