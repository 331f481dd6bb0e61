import { describe, expect, it } from "vitest";

import { parseSseFrame, parseSseStream } from "../src/api.js";

describe("SSE parsing", () => {
  it("parses id and data lines", () => {
    const event = parseSseFrame(
      'id: 7\ndata: {"seq": 7, "at_s": 1.5, "kind": "reschedule", "payload": {"reason": "order_placed"}}',
    );
    expect(event).not.toBeNull();
    expect(event?.seq).toBe(7);
    expect(event?.kind).toBe("reschedule");
    expect(event?.payload["reason"]).toBe("order_placed");
  });

  it("ignores keepalive comments", () => {
    expect(parseSseFrame(": keepalive")).toBeNull();
    expect(parseSseFrame("")).toBeNull();
  });

  it("splits a stream into ordered events", () => {
    const text = [
      'id: 0\ndata: {"seq": 0, "at_s": 0, "kind": "order_placed", "payload": {}}',
      ": keepalive",
      'id: 1\ndata: {"seq": 1, "at_s": 0, "kind": "reschedule", "payload": {}}',
    ].join("\n\n");
    const events = parseSseStream(text);
    expect(events.map((e) => e.seq)).toEqual([0, 1]);
  });

  it("falls back to the payload seq when no id line exists", () => {
    const event = parseSseFrame(
      'data: {"seq": 3, "at_s": 0, "kind": "task_started", "payload": {}}',
    );
    expect(event?.seq).toBe(3);
  });
});
