// Local draft persistence so unsaved decisions survive a page reload.
// Browsers use localStorage; tests inject an in-memory store.

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class MemoryStore implements KeyValueStore {
  private readonly data = new Map<string, string>();

  getItem(key: string): string | null {
    return this.data.has(key) ? this.data.get(key)! : null;
  }

  setItem(key: string, value: string): void {
    this.data.set(key, value);
  }

  removeItem(key: string): void {
    this.data.delete(key);
  }
}

export function draftKey(annotator: string, taskId: string): string {
  return `draft:${annotator}:${taskId}`;
}

export function submittedKey(annotator: string, taskId: string): string {
  return `submitted:${annotator}:${taskId}`;
}
