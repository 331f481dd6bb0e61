/** Client-side validation of the order form before anything hits the wire. */

import type { OrderDoc } from "./api.js";

export interface TaskDraft {
  name: string;
  machine: string;
  durationS: string; // raw input field values
}

export interface OrderDraft {
  recipeIndex: string;
  name: string;
  deadlineS: string; // empty string = no deadline
  tasks: TaskDraft[];
}

export interface ValidationResult {
  ok: boolean;
  errors: string[];
  order: OrderDoc | null;
}

const isNonNegativeInt = (raw: string): boolean =>
  /^\d+$/.test(raw.trim());

export function validateOrderDraft(
  draft: OrderDraft,
  knownMachines: string[],
  takenRecipeIndices: number[] = [],
): ValidationResult {
  const errors: string[] = [];
  if (!isNonNegativeInt(draft.recipeIndex)) {
    errors.push("recipe index must be a non-negative integer");
  } else if (takenRecipeIndices.includes(Number(draft.recipeIndex))) {
    errors.push(`recipe index ${draft.recipeIndex} is already in use`);
  }
  if (draft.name.trim() === "") {
    errors.push("order name is required");
  }
  if (draft.deadlineS.trim() !== "") {
    if (!isNonNegativeInt(draft.deadlineS) || Number(draft.deadlineS) < 1) {
      errors.push("deadline must be a positive integer number of seconds");
    }
  }
  if (draft.tasks.length === 0) {
    errors.push("at least one task is required");
  }
  draft.tasks.forEach((task, i) => {
    if (task.machine.trim() === "") {
      errors.push(`task ${i}: machine is required`);
    } else if (
      knownMachines.length > 0 &&
      !knownMachines.includes(task.machine.trim())
    ) {
      errors.push(`task ${i}: unknown machine ${task.machine.trim()}`);
    }
    if (!isNonNegativeInt(task.durationS) || Number(task.durationS) < 1) {
      errors.push(`task ${i}: duration must be a positive integer`);
    }
  });
  if (errors.length > 0) {
    return { ok: false, errors, order: null };
  }
  return {
    ok: true,
    errors: [],
    order: {
      recipe_index: Number(draft.recipeIndex),
      name: draft.name.trim(),
      deadline_s:
        draft.deadlineS.trim() === "" ? null : Number(draft.deadlineS),
      tasks: draft.tasks.map((task, i) => ({
        task_index: i,
        name: task.name.trim(),
        machine: task.machine.trim(),
        duration_s: Number(task.durationS),
      })),
    },
  };
}
