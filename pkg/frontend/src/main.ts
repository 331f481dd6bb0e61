/** Browser wiring: DOM, event stream, resync loop. */

import { CellApi, parseSseFrame } from "./api.js";
import { FaultDispatcher } from "./faults.js";
import { validateOrderDraft, type OrderDraft } from "./form.js";
import { buildModel, renderSvg } from "./gantt.js";
import {
  addPendingOrder,
  applyEvent,
  applySnapshot,
  initialState,
  runningTasks,
  type ConsoleState,
} from "./state.js";

const api = new CellApi("");
const faults = new FaultDispatcher(api);
let state: ConsoleState = initialState();
let machines: string[] = [];
let source: EventSource | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function render(): void {
  el<HTMLElement>("status").textContent =
    `${state.connection} · t = ${state.clockS.toFixed(0)} s`;
  if (state.snapshot !== null) {
    el<HTMLElement>("gantt").innerHTML = renderSvg(
      buildModel(state.snapshot, machines),
    );
  }
  el<HTMLElement>("pending").textContent = state.pendingOrders.length
    ? `pending orders: ${state.pendingOrders.join(", ")}`
    : "";
  el<HTMLElement>("alerts").textContent = state.alerts.slice(-3).join(" | ");
  const running = runningTasks(state);
  const panel = el<HTMLElement>("faults");
  panel.replaceChildren(
    ...running.map(({ recipeIndex, taskIndex, machine }) => {
      const button = document.createElement("button");
      button.textContent = `fault ${recipeIndex}.${taskIndex} (${machine})`;
      button.disabled = faults.isInFlight(recipeIndex, taskIndex);
      button.onclick = () => {
        void faults.inject(recipeIndex, taskIndex).then(render);
        render();
      };
      return button;
    }),
  );
}

async function resync(): Promise<void> {
  const snapshot = await api.schedule();
  state = applySnapshot(state, snapshot);
  connectStream(state.cursor);
  render();
}

function connectStream(since: number): void {
  source?.close();
  source = new EventSource(api.eventsUrl(since, true));
  source.onopen = () => {
    state = { ...state, connection: "live" };
    render();
  };
  source.onerror = () => {
    state = { ...state, connection: "lost" };
    render();
    // the browser retries EventSource automatically; a resync on the next
    // open rebuilds anything missed
  };
  source.onmessage = (message) => {
    const event = parseSseFrame(
      `id: ${message.lastEventId}\ndata: ${message.data}`,
    );
    if (event === null) {
      return;
    }
    state = applyEvent(state, event);
    if (state.needsResync) {
      void resync();
    } else {
      render();
    }
  };
}

function readOrderDraft(): OrderDraft {
  const tasksRaw = el<HTMLTextAreaElement>("order-tasks").value;
  const tasks = tasksRaw
    .split("\n")
    .map((line) => line.trim())
    .filter((line) => line !== "")
    .map((line) => {
      const [name = "", machine = "", durationS = ""] = line.split(",");
      return { name: name.trim(), machine: machine.trim(), durationS: durationS.trim() };
    });
  return {
    recipeIndex: el<HTMLInputElement>("order-recipe-index").value,
    name: el<HTMLInputElement>("order-name").value,
    deadlineS: el<HTMLInputElement>("order-deadline").value,
    tasks,
  };
}

async function submitOrder(): Promise<void> {
  const taken =
    state.snapshot?.assignments.map((a) => a.recipe_index) ?? [];
  const result = validateOrderDraft(readOrderDraft(), machines, [
    ...new Set(taken),
  ]);
  const errorBox = el<HTMLElement>("order-errors");
  if (!result.ok || result.order === null) {
    errorBox.textContent = result.errors.join("; ");
    return;
  }
  errorBox.textContent = "";
  try {
    const { id } = await api.placeOrder(result.order);
    state = addPendingOrder(state, id);
    render();
  } catch (error) {
    errorBox.textContent = String(
      error instanceof Error ? error.message : error,
    );
  }
}

async function boot(): Promise<void> {
  machines = (await api.machines()).machines.map((m) => m.id);
  el<HTMLButtonElement>("order-submit").onclick = () => void submitOrder();
  el<HTMLButtonElement>("sim-start").onclick = () => void api.simStart();
  el<HTMLButtonElement>("sim-pause").onclick = () => void api.simPause();
  el<HTMLInputElement>("sim-rate").onchange = (event) => {
    const rate = Number((event.target as HTMLInputElement).value);
    if (rate > 0) {
      void api.simRate(rate);
    }
  };
  await resync();
}

void boot();
