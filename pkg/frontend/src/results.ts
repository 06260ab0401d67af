import type { QueryResponse, ResponseEntry } from "./types.js";
import { ServiceError } from "./api.js";

function formatScore(value: number): string {
  return value.toFixed(6);
}

function formatDistance(value: number): string {
  return value.toFixed(4);
}

function clinicalSummary(entry: ResponseEntry): string {
  return Object.entries(entry.clinical)
    .map(([name, value]) => `${name}: ${value}`)
    .join(", ");
}

function buildCard(entry: ResponseEntry, position: number): HTMLElement {
  const card = document.createElement("article");
  card.className = "result-card";
  card.dataset.id = String(entry.id);

  const head = document.createElement("header");
  head.textContent =
    `#${position + 1}  id ${entry.id}  class ${entry.label}`;
  card.appendChild(head);

  const score = document.createElement("div");
  score.className = "result-score";
  score.textContent = `score ${formatScore(entry.score)}`;
  card.appendChild(score);

  const image = document.createElement("div");
  image.className = "result-d-image";
  image.textContent = `image distance ${formatDistance(entry.d_image)}`;
  card.appendChild(image);

  if (entry.d_clinical !== null) {
    const clinical = document.createElement("div");
    clinical.className = "result-d-clinical";
    clinical.textContent = `clinical distance ${entry.d_clinical}`;
    card.appendChild(clinical);
  }

  // Image-only responses carry no clinical summary; hide the column
  // instead of rendering an empty shell.
  if (Object.keys(entry.clinical).length > 0) {
    const summary = document.createElement("div");
    summary.className = "result-clinical";
    summary.textContent = clinicalSummary(entry);
    card.appendChild(summary);
  }
  return card;
}

/** Paint the response exactly as received: entry i becomes card i.
 *
 * No sorting, filtering, or score arithmetic happens here; the service
 * order is the displayed order.
 */
export function renderResults(
  container: HTMLElement,
  response: QueryResponse,
): void {
  container.textContent = "";
  response.entries.forEach((entry, position) => {
    container.appendChild(buildCard(entry, position));
  });
  const footer = document.createElement("footer");
  footer.className = "results-footer";
  footer.textContent =
    `${response.entries.length} results, mode ${response.mode}, ` +
    `weights [${response.weights.join(", ")}], ` +
    `${response.timing_ms.toFixed(1)} ms`;
  container.appendChild(footer);
}

/** Render a failure where results would have appeared. */
export function renderError(container: HTMLElement, error: unknown): void {
  container.textContent = "";
  const box = document.createElement("div");
  box.className = "error-box";
  if (error instanceof ServiceError) {
    box.dataset.code = error.code;
    box.textContent = error.field
      ? `${error.code} (${error.field}): ${error.message}`
      : `${error.code}: ${error.message}`;
  } else {
    box.dataset.code = "internal-error";
    box.textContent = String(error);
  }
  container.appendChild(box);
}
