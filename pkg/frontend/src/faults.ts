/**
 * Fault-injection button policy: a button is enabled only while its task is
 * running, and double-clicks collapse into a single in-flight request.
 */

import type { CellApi } from "./api.js";

export type FaultOutcome = "sent" | "duplicate" | "rejected";

export class FaultDispatcher {
  private inFlight = new Set<string>();

  constructor(private readonly api: CellApi) {}

  isInFlight(recipeIndex: number, taskIndex: number): boolean {
    return this.inFlight.has(`${recipeIndex}:${taskIndex}`);
  }

  /**
   * Send one fault for the task; concurrent calls for the same task while
   * the first is still pending are dropped as duplicates.
   */
  async inject(
    recipeIndex: number,
    taskIndex: number,
    kind = "machine_failure",
  ): Promise<FaultOutcome> {
    const key = `${recipeIndex}:${taskIndex}`;
    if (this.inFlight.has(key)) {
      return "duplicate";
    }
    this.inFlight.add(key);
    try {
      await this.api.injectFault(recipeIndex, taskIndex, kind);
      return "sent";
    } catch {
      return "rejected";
    } finally {
      this.inFlight.delete(key);
    }
  }
}
