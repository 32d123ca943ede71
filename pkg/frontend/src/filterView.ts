// DOM rendering for filtering tasks: a paginated image grid with keep/remove
// toggles, keyboard shortcuts, and a retry banner on network failure.
//
// Shortcuts: ArrowLeft/ArrowRight move the cursor, k keeps, r removes,
// PageUp/PageDown switch pages, Enter submits once everything is decided.

import type { AnnotationApi } from "./api.js";
import type { FilterTaskState } from "./filterTask.js";

export interface FilterViewCallbacks {
  onSubmitted(): void;
}

export function renderFilterTask(
  container: HTMLElement,
  state: FilterTaskState,
  api: AnnotationApi,
  callbacks: FilterViewCallbacks,
): void {
  container.replaceChildren();
  container.classList.add("filter-task");

  const prompt = document.createElement("p");
  prompt.className = "prompt";
  prompt.textContent = state.task.prompt_text;
  container.appendChild(prompt);

  const hint = document.createElement("p");
  hint.className = "hint";
  hint.textContent =
    "Remove every image that does not fit the text. Keys: k keep, r remove, arrows move, Enter submit.";
  container.appendChild(hint);

  const banner = document.createElement("div");
  banner.className = "banner";
  banner.hidden = true;
  container.appendChild(banner);

  const grid = document.createElement("div");
  grid.className = "grid";
  container.appendChild(grid);

  const pager = document.createElement("div");
  pager.className = "pager";
  container.appendChild(pager);

  const submit = document.createElement("button");
  submit.className = "submit";
  submit.textContent = "Submit decisions";
  container.appendChild(submit);

  let cursor = 0;

  function cellClass(imageId: string): string {
    const decision = state.decisionOf(imageId);
    return decision === undefined ? "undecided" : decision;
  }

  function drawGrid(): void {
    grid.replaceChildren();
    state.pageImages().forEach((image, index) => {
      const cell = document.createElement("figure");
      cell.className = `cell ${cellClass(image.image_id)}`;
      cell.dataset.imageId = image.image_id;
      if (index === cursor) cell.classList.add("cursor");

      const img = document.createElement("img");
      img.src = api.imageUrl(image.url);
      img.alt = image.image_id;
      img.loading = "lazy";
      cell.appendChild(img);

      const caption = document.createElement("figcaption");
      caption.textContent = state.decisionOf(image.image_id) ?? "undecided";
      cell.appendChild(caption);

      cell.addEventListener("click", () => {
        state.toggle(image.image_id);
        cursor = index;
        drawGrid();
        drawControls();
      });
      grid.appendChild(cell);
    });
  }

  function drawControls(): void {
    pager.textContent = `page ${state.page + 1} / ${state.pageCount} ` +
      `(${state.decisions.size} of ${state.task.images.length} decided)`;
    submit.disabled = !state.allDecided;
  }

  function decideAtCursor(decision: "accept" | "reject"): void {
    const image = state.pageImages()[cursor];
    if (image) {
      state.setDecision(image.image_id, decision);
      drawGrid();
      drawControls();
    }
  }

  async function doSubmit(): Promise<void> {
    submit.disabled = true;
    const result = await state.submit(api);
    if (result.ok) {
      banner.hidden = true;
      callbacks.onSubmitted();
    } else {
      banner.hidden = false;
      banner.textContent =
        `Network trouble: ${result.failed.length} decisions not saved yet. ` +
        "Your choices are kept locally; press Submit to retry.";
      submit.disabled = false;
    }
  }

  function onKey(event: KeyboardEvent): void {
    const pageSize = state.pageImages().length;
    switch (event.key) {
      case "ArrowRight":
        cursor = Math.min(cursor + 1, pageSize - 1);
        break;
      case "ArrowLeft":
        cursor = Math.max(cursor - 1, 0);
        break;
      case "PageDown":
        state.nextPage();
        cursor = 0;
        break;
      case "PageUp":
        state.previousPage();
        cursor = 0;
        break;
      case "k":
        decideAtCursor("accept");
        return;
      case "r":
        decideAtCursor("reject");
        return;
      case "Enter":
        if (state.allDecided) void doSubmit();
        return;
      default:
        return;
    }
    drawGrid();
    drawControls();
  }

  container.tabIndex = 0;
  container.addEventListener("keydown", onKey);
  submit.addEventListener("click", () => void doSubmit());

  drawGrid();
  drawControls();
}
