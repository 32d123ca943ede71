// Bootstrap: resolve the annotator id, then loop tasks until the queue is
// empty. The server decides what comes next; the browser only renders.

import { AnnotationApi } from "./api.js";
import { FilterTaskState } from "./filterTask.js";
import { renderFilterTask } from "./filterView.js";
import { RatingTaskState } from "./ratingTask.js";
import { renderRatingTask } from "./ratingView.js";

const api = new AnnotationApi(window.location.origin);

function annotatorId(): string {
  let id = window.localStorage.getItem("annotator_id");
  while (!id) {
    id = window.prompt("Annotator id:")?.trim() || null;
  }
  window.localStorage.setItem("annotator_id", id);
  return id;
}

async function loop(container: HTMLElement, annotator: string): Promise<void> {
  const task = await api.nextTask(annotator);
  if (task === null) {
    container.replaceChildren();
    const done = document.createElement("p");
    done.textContent = "All tasks complete. Thank you!";
    container.appendChild(done);
    return;
  }
  const advance = () => void loop(container, annotator);
  if (task.kind === "filter") {
    const state = new FilterTaskState(task, window.localStorage, annotator);
    renderFilterTask(container, state, api, { onSubmitted: advance });
    container.focus();
  } else {
    const state = new RatingTaskState(task, window.localStorage, annotator);
    renderRatingTask(container, state, api, { onSubmitted: advance });
  }
}

const root = document.getElementById("app");
if (root instanceof HTMLElement) {
  void loop(root, annotatorId());
}
