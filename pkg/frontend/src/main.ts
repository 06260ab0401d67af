import { ApiClient, ServiceError, type FetchLike } from "./api.js";
import { buildClinicalForm, ClinicalForm } from "./form.js";
import { renderError, renderResults } from "./results.js";
import { QueryRunner } from "./runner.js";
import { WeightSlider } from "./slider.js";
import type { Metadata, QueryMode, QueryRequestBody } from "./types.js";

export interface AppOptions {
  serviceUrl?: string;
  fetchFn?: FetchLike;
  debounceMs?: number;
}

interface Elements {
  serviceUrl: HTMLInputElement;
  connect: HTMLButtonElement;
  status: HTMLElement;
  sourceEmbedding: HTMLInputElement;
  sourceItem: HTMLInputElement;
  embedding: HTMLTextAreaElement;
  item: HTMLSelectElement;
  mode: HTMLSelectElement;
  k: HTMLInputElement;
  clinicalForm: HTMLElement;
  weightSlider: HTMLInputElement;
  weightOverride: HTMLInputElement;
  weightReadout: HTMLElement;
  run: HTMLButtonElement;
  results: HTMLElement;
  errors: Record<"k" | "weights" | "clinical" | "source", HTMLElement>;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [name, value] of Object.entries(attrs)) {
    node.setAttribute(name, value);
  }
  if (text !== "") {
    node.textContent = text;
  }
  return node;
}

function fieldErrorSpan(id: string): HTMLElement {
  return el("span", { id, class: "field-error", role: "alert" });
}

function buildLayout(root: HTMLElement): Elements {
  root.textContent = "";

  const config = el("section", { class: "panel", id: "panel-config" });
  config.appendChild(el("h2", {}, "service"));
  const serviceUrl = el("input", { id: "service-url", type: "text" });
  const connect = el("button", { id: "connect", type: "button" }, "connect");
  const status = el("span", { id: "status" }, "not connected");
  config.append(serviceUrl, connect, status);

  const source = el("section", { class: "panel", id: "panel-source" });
  source.appendChild(el("h2", {}, "query"));
  const sourceEmbedding = el("input", {
    id: "source-embedding", type: "radio", name: "source", value: "embedding",
  });
  const sourceItem = el("input", {
    id: "source-item", type: "radio", name: "source", value: "item",
  });
  sourceItem.checked = true;
  const embeddingLabel = el("label", {}, "paste embedding ");
  embeddingLabel.prepend(sourceEmbedding);
  const itemLabel = el("label", {}, "stored item ");
  itemLabel.prepend(sourceItem);
  const embedding = el("textarea", {
    id: "embedding", rows: "3",
    placeholder: "comma-separated numbers",
  });
  const item = el("select", { id: "item" });
  const sourceError = fieldErrorSpan("error-source");
  source.append(itemLabel, item, embeddingLabel, embedding, sourceError);

  const modeLabel = el("label", {}, "mode ");
  const mode = el("select", { id: "mode" });
  mode.append(
    el("option", { value: "cbidr" }, "cbidr (image + clinical)"),
    el("option", { value: "cbir" }, "cbir (image only)"),
  );
  modeLabel.appendChild(mode);
  const kLabel = el("label", {}, "k ");
  const k = el("input", { id: "k", type: "number", min: "1", value: "5" });
  kLabel.appendChild(k);
  const kError = fieldErrorSpan("error-k");
  source.append(modeLabel, kLabel, kError);

  const clinical = el("section", { class: "panel", id: "panel-clinical" });
  clinical.appendChild(el("h2", {}, "clinical fields"));
  const clinicalForm = el("div", { id: "clinical-form" });
  const clinicalError = fieldErrorSpan("error-clinical");
  clinical.append(clinicalForm, clinicalError);

  const weights = el("section", { class: "panel", id: "panel-weights" });
  weights.appendChild(el("h2", {}, "image weight"));
  const weightSlider = el("input", { id: "weight-slider" });
  const weightOverride = el("input", {
    id: "weight-override", type: "checkbox",
  });
  const overrideLabel = el(
    "label", {}, " unlock full range [0, 1]",
  );
  overrideLabel.prepend(weightOverride);
  const weightReadout = el("span", { id: "weight-readout" });
  const weightsError = fieldErrorSpan("error-weights");
  weights.append(weightSlider, weightReadout, overrideLabel, weightsError);

  const actions = el("section", { class: "panel", id: "panel-actions" });
  const run = el("button", { id: "run", type: "button" }, "search");
  actions.appendChild(run);

  const results = el("section", { class: "panel", id: "results" });

  root.append(config, source, clinical, weights, actions, results);
  return {
    serviceUrl, connect, status,
    sourceEmbedding, sourceItem, embedding, item,
    mode, k, clinicalForm,
    weightSlider, weightOverride, weightReadout,
    run, results,
    errors: {
      k: kError,
      weights: weightsError,
      clinical: clinicalError,
      source: sourceError,
    },
  };
}

function defaultServiceUrl(): string {
  if (typeof location !== "undefined" && location.search) {
    const fromQuery = new URLSearchParams(location.search).get("service");
    if (fromQuery) {
      return fromQuery;
    }
  }
  if (typeof location !== "undefined" && location.hostname) {
    return `${location.protocol}//${location.hostname}:8000`;
  }
  return "http://127.0.0.1:8000";
}

function parseEmbedding(text: string): number[] {
  const parts = text.split(/[\s,]+/).filter((p) => p !== "");
  if (parts.length === 0) {
    throw new ServiceError(
      "invalid-embedding", "paste at least one number", "embedding",
    );
  }
  return parts.map((part) => {
    const value = Number(part);
    if (Number.isNaN(value)) {
      throw new ServiceError(
        "invalid-embedding", `${part} is not a number`, "embedding",
      );
    }
    return value;
  });
}

export class App {
  readonly root: HTMLElement;
  readonly elements: Elements;
  readonly slider: WeightSlider;
  readonly ready: Promise<void>;

  private readonly client: () => ApiClient;
  private readonly runner: QueryRunner;
  private form: ClinicalForm | null = null;
  private metadata: Metadata | null = null;
  private api: ApiClient;

  constructor(root: HTMLElement, options: AppOptions = {}) {
    this.root = root;
    this.elements = buildLayout(root);
    const fetchFn = options.fetchFn;
    this.elements.serviceUrl.value =
      options.serviceUrl ?? defaultServiceUrl();
    this.api = new ApiClient(this.elements.serviceUrl.value, fetchFn);
    this.client = () => {
      if (this.api.baseUrl !== this.elements.serviceUrl.value.replace(/\/+$/, "")) {
        this.api = new ApiClient(this.elements.serviceUrl.value, fetchFn);
      }
      return this.api;
    };
    this.runner = new QueryRunner(
      // The runner always talks to the currently configured service.
      { query: (body) => this.client().query(body) },
      {
        onResult: (response) => renderResults(this.elements.results, response),
        onError: (error) => this.showError(error),
      },
    );
    this.slider = new WeightSlider(
      this.elements.weightSlider,
      this.elements.weightOverride,
      () => {
        this.updateWeightReadout();
        if (this.mode() === "cbidr") {
          void this.runQuery();
        }
      },
      options.debounceMs ?? 150,
    );
    this.updateWeightReadout();

    this.elements.connect.addEventListener("click", () => {
      void this.refreshMetadata();
    });
    this.elements.run.addEventListener("click", () => {
      void this.runQuery();
    });
    this.elements.mode.addEventListener("change", () => this.applyMode());
    this.elements.weightSlider.addEventListener("input", () =>
      this.updateWeightReadout(),
    );
    this.applyMode();

    this.ready = this.refreshMetadata();
  }

  mode(): QueryMode {
    return this.elements.mode.value as QueryMode;
  }

  async refreshMetadata(): Promise<void> {
    const { status, clinicalForm, item } = this.elements;
    status.textContent = "connecting...";
    try {
      this.metadata = await this.client().getMetadata();
    } catch (error) {
      this.metadata = null;
      this.form = null;
      status.textContent = error instanceof ServiceError
        ? `unavailable: ${error.code}`
        : "unavailable";
      clinicalForm.textContent = "";
      const note = el("p", { class: "form-disabled-note" },
        "metadata unavailable, clinical form disabled");
      const retry = el("button", { id: "retry", type: "button" }, "retry");
      retry.addEventListener("click", () => {
        void this.refreshMetadata();
      });
      clinicalForm.append(note, retry);
      return;
    }
    status.textContent =
      `${this.metadata.size} items, dim ${this.metadata.dim}, ` +
      `classes [${this.metadata.class_labels.join(", ")}]`;
    this.form = buildClinicalForm(
      clinicalForm, this.metadata.schema.fields,
    );
    item.textContent = "";
    for (const id of this.metadata.ids) {
      item.appendChild(el("option", { value: String(id) }, `id ${id}`));
    }
    this.applyMode();
  }

  buildRequestBody(): QueryRequestBody {
    const mode = this.mode();
    const wImage = this.slider.value;
    const body: QueryRequestBody = {
      mode,
      k: Number(this.elements.k.value),
      weights: [wImage, 1 - wImage],
    };
    if (this.elements.sourceItem.checked) {
      body.item_id = Number(this.elements.item.value);
    } else {
      body.embedding = parseEmbedding(this.elements.embedding.value);
      if (mode === "cbidr") {
        if (this.form === null) {
          throw new ServiceError(
            "metadata-not-loaded",
            "load metadata before running fused queries",
            "clinical",
          );
        }
        body.clinical = this.form.values();
      }
    }
    return body;
  }

  async runQuery(): Promise<void> {
    this.clearFieldErrors();
    let body: QueryRequestBody;
    try {
      body = this.buildRequestBody();
    } catch (error) {
      this.showError(error);
      return;
    }
    await this.runner.run(body);
  }

  private applyMode(): void {
    const fused = this.mode() === "cbidr";
    this.elements.weightSlider.disabled = !fused;
    this.elements.weightOverride.disabled = !fused;
    const formActive =
      fused && this.elements.sourceEmbedding.checked && this.form !== null;
    this.form?.setDisabled(!formActive);
  }

  private updateWeightReadout(): void {
    const wImage = this.slider.value;
    this.elements.weightReadout.textContent =
      ` weights [${wImage.toFixed(2)}, ${(1 - wImage).toFixed(2)}]`;
  }

  private clearFieldErrors(): void {
    for (const span of Object.values(this.elements.errors)) {
      span.textContent = "";
    }
  }

  private showError(error: unknown): void {
    renderError(this.elements.results, error);
    if (!(error instanceof ServiceError) || error.field === null) {
      return;
    }
    const field = error.field;
    let slot: HTMLElement | undefined;
    if (field === "k") {
      slot = this.elements.errors.k;
    } else if (field === "weights" || field.startsWith("weights")) {
      slot = this.elements.errors.weights;
    } else if (field === "clinical" || field.startsWith("clinical")) {
      slot = this.elements.errors.clinical;
    } else if (field === "embedding" || field === "item_id") {
      slot = this.elements.errors.source;
    }
    if (slot) {
      slot.textContent = error.message;
    }
  }
}

export function initApp(root: HTMLElement, options: AppOptions = {}): App {
  return new App(root, options);
}
