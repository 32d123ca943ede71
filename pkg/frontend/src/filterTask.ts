// Keep/remove decision state for one filtering task: local-first, paginated,
// submitted image-by-image through the API.

import type { AnnotationApi } from "./api.js";
import { draftKey, submittedKey, type KeyValueStore } from "./persistence.js";
import type { FilterDecision, Task } from "./types.js";

export const FILTER_PAGE_SIZE = 24;

export interface SubmitResult {
  ok: boolean;
  submitted: number;
  failed: string[]; // image ids whose POST failed; decisions stay local
}

export class FilterTaskState {
  readonly decisions = new Map<string, FilterDecision>();
  page = 0;

  constructor(
    readonly task: Task,
    private readonly store: KeyValueStore,
    private readonly annotator: string,
    readonly pageSize: number = FILTER_PAGE_SIZE,
  ) {
    this.restore();
  }

  private get key(): string {
    return draftKey(this.annotator, this.task.task_id);
  }

  private restore(): void {
    const raw = this.store.getItem(this.key);
    if (!raw) return;
    try {
      const saved = JSON.parse(raw) as Record<string, FilterDecision>;
      for (const [imageId, decision] of Object.entries(saved)) {
        if (this.task.images.some((i) => i.image_id === imageId)) {
          this.decisions.set(imageId, decision);
        }
      }
    } catch {
      this.store.removeItem(this.key);
    }
  }

  private persist(): void {
    this.store.setItem(this.key, JSON.stringify(Object.fromEntries(this.decisions)));
  }

  setDecision(imageId: string, decision: FilterDecision): void {
    if (!this.task.images.some((i) => i.image_id === imageId)) {
      throw new Error(`image ${imageId} is not part of this task`);
    }
    this.decisions.set(imageId, decision);
    this.persist();
  }

  toggle(imageId: string): FilterDecision {
    const next: FilterDecision =
      this.decisions.get(imageId) === "reject" ? "accept" : "reject";
    this.setDecision(imageId, next);
    return next;
  }

  acceptRemaining(): void {
    for (const image of this.task.images) {
      if (!this.decisions.has(image.image_id)) {
        this.decisions.set(image.image_id, "accept");
      }
    }
    this.persist();
  }

  decisionOf(imageId: string): FilterDecision | undefined {
    return this.decisions.get(imageId);
  }

  get allDecided(): boolean {
    return this.task.images.every((i) => this.decisions.has(i.image_id));
  }

  get pageCount(): number {
    return Math.max(1, Math.ceil(this.task.images.length / this.pageSize));
  }

  pageImages(page = this.page): Task["images"] {
    const start = page * this.pageSize;
    return this.task.images.slice(start, start + this.pageSize);
  }

  nextPage(): number {
    this.page = Math.min(this.page + 1, this.pageCount - 1);
    return this.page;
  }

  previousPage(): number {
    this.page = Math.max(this.page - 1, 0);
    return this.page;
  }

  get alreadySubmitted(): boolean {
    return this.store.getItem(submittedKey(this.annotator, this.task.task_id)) !== null;
  }

  async submit(api: AnnotationApi): Promise<SubmitResult> {
    if (!this.allDecided) {
      throw new Error("every image needs a keep/remove decision before submitting");
    }
    if (this.alreadySubmitted) {
      return { ok: true, submitted: 0, failed: [] };
    }
    const failed: string[] = [];
    let submitted = 0;
    for (const image of this.task.images) {
      const decision = this.decisions.get(image.image_id)!;
      try {
        await api.submitFilter(this.task.task_id, image.image_id, decision, this.annotator);
        submitted += 1;
      } catch {
        failed.push(image.image_id);
      }
    }
    if (failed.length === 0) {
      this.store.setItem(submittedKey(this.annotator, this.task.task_id), "1");
      this.store.removeItem(this.key);
      return { ok: true, submitted, failed };
    }
    // decisions stay in the draft store so a retry can resubmit
    return { ok: false, submitted, failed };
  }
}
