/** Typed client for the kitchen cell HTTP service. */

export interface AssignmentView {
  recipe_index: number;
  task_index: number;
  name: string;
  machine: string;
  start_s: number;
  end_s: number;
  status: string;
  tries: number;
}

export interface GanttBarView {
  label: string;
  start_s: number;
  end_s: number;
  status: string;
  recipe_index: number;
  task_index: number;
}

export interface GanttRowView {
  machine: string;
  bars: GanttBarView[];
}

export interface ScheduleSnapshot {
  schema: string;
  clock_s: number;
  cursor: number;
  makespan_s: number;
  assignments: AssignmentView[];
  gantt: GanttRowView[];
}

export interface MachineView {
  id: string;
  kind: string;
  busy: boolean;
  available: boolean;
}

export interface KitchenEvent {
  seq: number;
  at_s: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface OrderTask {
  task_index: number;
  name: string;
  machine: string;
  duration_s: number;
  [extra: string]: unknown;
}

export interface OrderDoc {
  recipe_index: number;
  name: string;
  deadline_s?: number | null;
  tasks: OrderTask[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function expect<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const detail =
      typeof body === "object" && body !== null && "error" in body
        ? String((body as { error: unknown }).error)
        : response.statusText;
    throw new ApiError(response.status, detail);
  }
  return body as T;
}

export class CellApi {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async post<T>(path: string, payload?: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: payload === undefined ? undefined : JSON.stringify(payload),
    });
    return expect<T>(response);
  }

  placeOrder(order: OrderDoc): Promise<{ id: number; at_s: number }> {
    return this.post("/orders", order);
  }

  injectFault(
    recipeIndex: number,
    taskIndex: number,
    kind = "machine_failure",
    detail = "",
  ): Promise<{ status: string }> {
    return this.post("/faults", {
      recipe_index: recipeIndex,
      task_index: taskIndex,
      kind,
      detail,
    });
  }

  async schedule(): Promise<ScheduleSnapshot> {
    const response = await this.fetchFn(this.baseUrl + "/schedule");
    return expect<ScheduleSnapshot>(response);
  }

  async machines(): Promise<{ machines: MachineView[] }> {
    const response = await this.fetchFn(this.baseUrl + "/machines");
    return expect<{ machines: MachineView[] }>(response);
  }

  simStart(): Promise<{ running: boolean; rate: number }> {
    return this.post("/sim/start");
  }

  simPause(): Promise<{ running: boolean; rate: number }> {
    return this.post("/sim/pause");
  }

  simRate(rate: number): Promise<{ running: boolean; rate: number }> {
    return this.post("/sim/rate", { rate });
  }

  eventsUrl(since: number, follow = true): string {
    return `${this.baseUrl}/events?since=${since}&follow=${follow}`;
  }

  /** One-shot fetch of the event backlog after `since` (no tailing). */
  async eventBacklog(since: number): Promise<KitchenEvent[]> {
    const response = await this.fetchFn(this.eventsUrl(since, false));
    if (!response.ok) {
      throw new ApiError(response.status, response.statusText);
    }
    return parseSseStream(await response.text());
  }
}

/**
 * Parse a complete server-sent-event payload into events.
 * Each frame carries `id: <seq>` and a JSON `data:` line.
 */
export function parseSseStream(text: string): KitchenEvent[] {
  const events: KitchenEvent[] = [];
  for (const frame of text.split("\n\n")) {
    const event = parseSseFrame(frame);
    if (event !== null) {
      events.push(event);
    }
  }
  return events;
}

export function parseSseFrame(frame: string): KitchenEvent | null {
  let id: number | null = null;
  let data: string | null = null;
  for (const line of frame.split("\n")) {
    if (line.startsWith("id: ")) {
      id = Number(line.slice(4));
    } else if (line.startsWith("data: ")) {
      data = line.slice(6);
    }
    // comment lines (keepalives) start with ":" and are ignored
  }
  if (data === null) {
    return null;
  }
  const doc = JSON.parse(data) as {
    seq: number;
    at_s: number;
    kind: string;
    payload: Record<string, unknown>;
  };
  return {
    seq: id ?? doc.seq,
    at_s: doc.at_s,
    kind: doc.kind,
    payload: doc.payload,
  };
}
