// DOM rendering for rating tasks: the prompt text (attention-check
// instructions stay embedded verbatim), the image set, and a 1-5 slider
// with two-decimal resolution.

import type { AnnotationApi } from "./api.js";
import { RatingTaskState, SLIDER_MAX, SLIDER_MIN } from "./ratingTask.js";

export interface RatingViewCallbacks {
  onSubmitted(): void;
  confirmDefault?: () => boolean; // injected for tests; window.confirm otherwise
}

export function renderRatingTask(
  container: HTMLElement,
  state: RatingTaskState,
  api: AnnotationApi,
  callbacks: RatingViewCallbacks,
): void {
  container.replaceChildren();
  container.classList.add("rating-task");

  const prompt = document.createElement("p");
  prompt.className = "prompt";
  prompt.textContent = state.task.prompt_text; // verbatim, checks included
  container.appendChild(prompt);

  const strip = document.createElement("div");
  strip.className = "image-strip";
  for (const image of state.task.images) {
    const img = document.createElement("img");
    img.src = api.imageUrl(image.url);
    img.alt = image.image_id;
    img.loading = "lazy";
    strip.appendChild(img);
  }
  container.appendChild(strip);

  const slider = document.createElement("input");
  slider.type = "range";
  slider.min = String(state.task.slider?.min ?? SLIDER_MIN);
  slider.max = String(state.task.slider?.max ?? SLIDER_MAX);
  slider.step = String(state.task.slider?.step ?? 0.01);
  slider.value = String(state.value);
  container.appendChild(slider);

  const readout = document.createElement("output");
  readout.textContent = state.value.toFixed(2);
  container.appendChild(readout);

  const banner = document.createElement("div");
  banner.className = "banner";
  banner.hidden = true;
  container.appendChild(banner);

  const submit = document.createElement("button");
  submit.className = "submit";
  submit.textContent = "Submit rating";
  container.appendChild(submit);

  slider.addEventListener("input", () => {
    state.setValue(Number(slider.value));
    readout.textContent = state.value.toFixed(2);
  });

  submit.addEventListener("click", async () => {
    submit.disabled = true;
    const confirmDefault =
      callbacks.confirmDefault ??
      (() =>
        window.confirm(
          "You have not moved the slider. Submit the default value anyway?",
        ));
    try {
      const confirmed = state.needsConfirmation ? confirmDefault() : true;
      const submitted = await state.submit(api, confirmed);
      if (submitted) {
        banner.hidden = true;
        callbacks.onSubmitted();
      } else {
        submit.disabled = false; // user declined the confirmation
      }
    } catch (error) {
      banner.hidden = false;
      banner.textContent = `Network trouble: ${String(error)}. Your value is kept; press Submit to retry.`;
      submit.disabled = false;
    }
  });
}
