// Pending-label bookkeeping for one batch: the feedback document contains
// exactly what the user picked, and cannot be built until every sample has a
// label.

import type { FeedbackDoc, FeedbackEntry, Label, Sample } from "./types.js";

export interface PendingChoice {
  label: Label | null;
  dims: Set<string>; // attribute names ticked for a "similar" label
}

export class BatchLabeling {
  readonly samples: Sample[];
  private readonly choices = new Map<number, PendingChoice>();

  constructor(samples: Sample[]) {
    this.samples = samples;
    for (const s of samples) {
      this.choices.set(s.tuple_id, { label: null, dims: new Set() });
    }
  }

  choice(tupleId: number): PendingChoice {
    const c = this.choices.get(tupleId);
    if (!c) throw new Error(`tuple ${tupleId} is not part of this batch`);
    return c;
  }

  setLabel(tupleId: number, label: Label): void {
    const c = this.choice(tupleId);
    c.label = label;
    if (label !== "similar") c.dims.clear();
  }

  toggleDim(tupleId: number, attribute: string): void {
    const c = this.choice(tupleId);
    if (c.dims.has(attribute)) c.dims.delete(attribute);
    else c.dims.add(attribute);
  }

  get labeledCount(): number {
    let n = 0;
    for (const c of this.choices.values()) if (c.label !== null) n += 1;
    return n;
  }

  get complete(): boolean {
    return this.labeledCount === this.samples.length;
  }

  missing(): number[] {
    return this.samples
      .filter((s) => this.choice(s.tuple_id).label === null)
      .map((s) => s.tuple_id);
  }

  toFeedback(): FeedbackDoc {
    if (!this.complete) {
      throw new Error(`batch incompletely labeled: ${this.missing().length} samples left`);
    }
    const labels: FeedbackEntry[] = this.samples.map((s) => {
      const c = this.choice(s.tuple_id);
      const entry: FeedbackEntry = { tuple_id: s.tuple_id, label: c.label as Label };
      // no ticked dimensions means "all dimensions" on the server side
      if (c.label === "similar" && c.dims.size > 0) {
        entry.dimensions = [...c.dims].sort();
      }
      return entry;
    });
    return { labels };
  }
}
