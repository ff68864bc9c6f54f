// Labeling workbench: batch table with per-sample label choices on the left,
// projected space view and the served query text on the right. The server is
// the source of truth; this component never reformats what it displays.

import { ServiceError, SessionClient } from "./api.js";
import { BatchLabeling } from "./labeling.js";
import { CanvasLike, LabeledPoint, SpaceView } from "./overlay.js";
import type {
  AttributeInfo,
  BatchDoc,
  Label,
  PredictionDoc,
  Sample,
  SessionResource,
} from "./types.js";

const LABELS: Label[] = ["relevant", "irrelevant", "similar"];

export interface AppOptions {
  client: SessionClient;
  root: HTMLElement;
  datasetId: string;
  seed?: number;
  canvasSize?: { width: number; height: number };
  // headless DOMs have no 2D context; tests inject a recording one
  contextFactory?: (canvas: HTMLCanvasElement) => CanvasLike | null;
}

export class LabelingApp {
  private readonly client: SessionClient;
  private readonly root: HTMLElement;
  private readonly datasetId: string;
  private readonly seed?: number;
  private readonly width: number;
  private readonly height: number;
  private readonly contextFactory: (canvas: HTMLCanvasElement) => CanvasLike | null;

  private session: SessionResource | null = null;
  private labeling: BatchLabeling | null = null;
  private view: SpaceView | null = null;
  private xDim = 0;
  private yDim = 1;
  private labeledPoints: LabeledPoint[] = [];
  private lastPrediction: PredictionDoc | null = null;

  private batchBody!: HTMLTableSectionElement;
  private submitButton!: HTMLButtonElement;
  private statusLine!: HTMLElement;
  private errorBanner!: HTMLElement;
  private errorText!: HTMLElement;
  private retryButton!: HTMLButtonElement;
  private queryText!: HTMLPreElement;
  private metricsLine!: HTMLElement;
  private canvas!: HTMLCanvasElement;
  private axisX!: HTMLSelectElement;
  private axisY!: HTMLSelectElement;
  private lastFailed: (() => Promise<void>) | null = null;

  constructor(opts: AppOptions) {
    this.client = opts.client;
    this.root = opts.root;
    this.datasetId = opts.datasetId;
    this.seed = opts.seed;
    this.width = opts.canvasSize?.width ?? 400;
    this.height = opts.canvasSize?.height ?? 400;
    this.contextFactory =
      opts.contextFactory ?? ((c) => c.getContext("2d") as CanvasLike | null);
  }

  get attributes(): AttributeInfo[] {
    return this.session?.attributes ?? [];
  }

  get sessionId(): string | null {
    return this.session?.session_id ?? null;
  }

  async start(): Promise<void> {
    this.buildSkeleton();
    await this.guard(async () => {
      this.session = await this.client.createSession({
        dataset_id: this.datasetId,
        seed: this.seed,
      });
      this.buildAxisSelectors();
      const ctx = this.contextFactory(this.canvas);
      if (ctx) {
        this.view = new SpaceView(ctx, this.projection(), this.xDim, this.yDim);
      }
      await this.loadBatch();
      await this.refreshPrediction();
    });
  }

  private projection() {
    return {
      xAttr: this.attributes[this.xDim],
      yAttr: this.attributes[this.yDim],
      width: this.width,
      height: this.height,
    };
  }

  private buildSkeleton(): void {
    this.root.innerHTML = "";
    const wrap = el("div", { class: "steer-app" });

    const left = el("section", { class: "batch-panel" });
    this.statusLine = el("p", { "data-testid": "status" });
    this.errorBanner = el("div", { class: "error-banner", "data-testid": "error", hidden: "" });
    this.errorText = el("span", { "data-testid": "error-text" });
    this.retryButton = el("button", { "data-testid": "retry" }, "Retry") as HTMLButtonElement;
    this.retryButton.addEventListener("click", () => {
      if (this.lastFailed) void this.guard(this.lastFailed);
    });
    this.errorBanner.append(this.errorText, this.retryButton);

    const table = el("table", { class: "batch-table" });
    this.batchBody = el("tbody", { "data-testid": "batch-body" }) as HTMLTableSectionElement;
    table.append(this.batchBody);

    this.submitButton = el(
      "button",
      { "data-testid": "submit", disabled: "" },
      "Submit feedback",
    ) as HTMLButtonElement;
    this.submitButton.addEventListener("click", () => void this.guard(() => this.submit()));
    left.append(this.statusLine, this.errorBanner, table, this.submitButton);

    const right = el("section", { class: "space-panel" });
    this.axisX = el("select", { "data-testid": "axis-x" }) as HTMLSelectElement;
    this.axisY = el("select", { "data-testid": "axis-y" }) as HTMLSelectElement;
    this.canvas = el("canvas", { "data-testid": "space-view" }) as HTMLCanvasElement;
    this.canvas.width = this.width;
    this.canvas.height = this.height;
    this.queryText = el("pre", { "data-testid": "query-text" }) as HTMLPreElement;
    this.metricsLine = el("p", { "data-testid": "metrics" });
    right.append(this.axisX, this.axisY, this.canvas, this.queryText, this.metricsLine);

    wrap.append(left, right);
    this.root.append(wrap);
  }

  private buildAxisSelectors(): void {
    for (const [sel, chosen] of [
      [this.axisX, this.xDim],
      [this.axisY, this.yDim],
    ] as const) {
      sel.innerHTML = "";
      this.attributes.forEach((a, i) => {
        const option = el("option", { value: String(i) }, a.name) as HTMLOptionElement;
        if (i === chosen) option.selected = true;
        sel.append(option);
      });
      sel.addEventListener("change", () => this.onAxisChange());
    }
  }

  private onAxisChange(): void {
    const x = Number(this.axisX.value);
    const y = Number(this.axisY.value);
    if (x === y) return; // distinct axes only; ignore until the user fixes it
    this.xDim = x;
    this.yDim = y;
    this.view?.setProjection(x, y, this.projection());
    this.renderSpace();
  }

  private async guard(action: () => Promise<void>): Promise<void> {
    try {
      await action();
      this.errorBanner.setAttribute("hidden", "");
      this.lastFailed = null;
    } catch (err) {
      this.lastFailed = action;
      this.errorText.textContent =
        err instanceof ServiceError ? `${err.code}: ${err.message}` : String(err);
      this.errorBanner.removeAttribute("hidden");
    }
  }

  private async loadBatch(): Promise<void> {
    if (!this.session) return;
    const batch = await this.client.getBatch(this.session.session_id);
    if (batch.status === "completed" || batch.samples.length === 0) {
      this.labeling = null;
      this.batchBody.innerHTML = "";
      this.statusLine.textContent = "Exploration complete — nothing left to label.";
      this.submitButton.setAttribute("disabled", "");
      return;
    }
    this.labeling = new BatchLabeling(batch.samples);
    this.renderBatch(batch);
    this.updateGate();
  }

  private renderBatch(batch: BatchDoc): void {
    this.batchBody.innerHTML = "";
    const names = this.attributes.map((a) => a.name);
    for (const sample of batch.samples) {
      const row = el("tr", { "data-tuple": String(sample.tuple_id) });
      row.append(el("td", {}, String(sample.tuple_id)));
      for (const name of names) {
        row.append(el("td", {}, formatValue(sample.values[name])));
      }
      row.append(el("td", { class: "phase-tag" }, sample.phase));
      const cell = el("td", { class: "label-cell" });
      for (const label of LABELS) {
        const b = el(
          "button",
          { "data-testid": `label-${sample.tuple_id}-${label}`, "data-label": label },
          label,
        ) as HTMLButtonElement;
        b.addEventListener("click", () => this.onLabel(sample, label, row));
        cell.append(b);
      }
      row.append(cell);
      const dims = el("td", { class: "dims-cell", hidden: "" });
      row.append(dims);
      this.batchBody.append(row);
    }
  }

  private onLabel(sample: Sample, label: Label, row: HTMLElement): void {
    if (!this.labeling) return;
    this.labeling.setLabel(sample.tuple_id, label);
    for (const b of row.querySelectorAll("button[data-label]")) {
      b.classList.toggle("chosen", b.getAttribute("data-label") === label);
    }
    const dims = row.querySelector(".dims-cell") as HTMLElement;
    if (label === "similar") {
      dims.removeAttribute("hidden");
      if (!dims.hasChildNodes()) {
        for (const attr of this.attributes) {
          const box = el("input", {
            type: "checkbox",
            "data-testid": `dim-${sample.tuple_id}-${attr.name}`,
          }) as HTMLInputElement;
          box.addEventListener("change", () =>
            this.labeling?.toggleDim(sample.tuple_id, attr.name),
          );
          const wrap = el("label", {}, attr.name);
          wrap.prepend(box);
          dims.append(wrap);
        }
      }
    } else {
      dims.setAttribute("hidden", "");
      dims.innerHTML = "";
    }
    this.updateGate();
  }

  private updateGate(): void {
    if (!this.labeling) return;
    const left = this.labeling.samples.length - this.labeling.labeledCount;
    this.statusLine.textContent =
      left === 0
        ? `All ${this.labeling.samples.length} samples labeled — ready to submit.`
        : `${left} of ${this.labeling.samples.length} samples still need a label.`;
    if (this.labeling.complete) this.submitButton.removeAttribute("disabled");
    else this.submitButton.setAttribute("disabled", "");
  }

  private async submit(): Promise<void> {
    if (!this.session || !this.labeling || !this.labeling.complete) return;
    const doc = this.labeling.toFeedback();
    const summary = await this.client.postFeedback(this.session.session_id, doc);
    for (const sample of this.labeling.samples) {
      const choice = this.labeling.choice(sample.tuple_id);
      this.labeledPoints.push({ values: sample.values, label: choice.label as Label });
    }
    if (summary.metrics) {
      const m = summary.metrics;
      this.metricsLine.textContent =
        `F=${m.f_measure.toFixed(3)} precision=${m.precision.toFixed(3)} ` +
        `recall=${m.recall.toFixed(3)} labeled=${m.labeled_count}`;
    }
    await this.refreshPrediction();
    await this.loadBatch();
  }

  private async refreshPrediction(): Promise<void> {
    if (!this.session) return;
    this.lastPrediction = await this.client.getPrediction(this.session.session_id);
    const model = this.lastPrediction.model;
    // byte-exact display of the served query; an absent model is an explicit
    // empty state, not an error
    this.queryText.textContent = model ? model.query_text : "(no model yet)";
    this.queryText.classList.toggle("empty-state", model === null);
    this.renderSpace();
  }

  private renderSpace(): void {
    if (!this.view || !this.lastPrediction) return;
    this.view.render({
      regions: this.lastPrediction.model?.relevant_regions ?? [],
      cells: this.lastPrediction.grid.cells,
      points: this.labeledPoints,
    });
  }
}

function el(tag: string, attrs: Record<string, string> = {}, text?: string): HTMLElement {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function formatValue(v: number | undefined): string {
  if (v === undefined) return "";
  return Number.isInteger(v) ? String(v) : v.toFixed(3);
}
