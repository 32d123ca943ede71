// Slider rating state: a continuous 1-5 value with two-decimal resolution,
// an untouched-slider confirmation gate, and a submit-once guard.

import type { AnnotationApi } from "./api.js";
import { draftKey, submittedKey, type KeyValueStore } from "./persistence.js";
import type { Task } from "./types.js";

export const SLIDER_MIN = 1.0;
export const SLIDER_MAX = 5.0;
export const SLIDER_DEFAULT = 3.0;

export function quantize(value: number): number {
  const clamped = Math.min(SLIDER_MAX, Math.max(SLIDER_MIN, value));
  return Math.round(clamped * 100) / 100;
}

export class RatingTaskState {
  value: number = SLIDER_DEFAULT;
  touched = false;

  constructor(
    readonly task: Task,
    private readonly store: KeyValueStore,
    private readonly annotator: string,
  ) {
    const raw = this.store.getItem(draftKey(annotator, task.task_id));
    if (raw !== null) {
      const saved = Number(raw);
      if (Number.isFinite(saved)) {
        this.value = quantize(saved);
        this.touched = true;
      }
    }
  }

  setValue(value: number): void {
    this.value = quantize(value);
    this.touched = true;
    this.store.setItem(draftKey(this.annotator, this.task.task_id), String(this.value));
  }

  /** Submitting an untouched slider needs an explicit confirmation. */
  get needsConfirmation(): boolean {
    return !this.touched;
  }

  get alreadySubmitted(): boolean {
    return this.store.getItem(submittedKey(this.annotator, this.task.task_id)) !== null;
  }

  async submit(api: AnnotationApi, confirmedDefault = false): Promise<boolean> {
    if (this.needsConfirmation && !confirmedDefault) {
      return false;
    }
    if (this.alreadySubmitted) {
      return true;
    }
    await api.submitRating(this.task.task_id, this.value, this.annotator);
    this.store.setItem(submittedKey(this.annotator, this.task.task_id), "1");
    this.store.removeItem(draftKey(this.annotator, this.task.task_id));
    return true;
  }
}
