import { describe, expect, it } from "vitest";

import { BatchLabeling } from "../src/labeling.js";
import type { Sample } from "../src/types.js";

function samples(n: number): Sample[] {
  return Array.from({ length: n }, (_, i) => ({
    tuple_id: 100 + i,
    values: { age: i, dosage: i / 2 },
    phase: "discovery",
  }));
}

describe("BatchLabeling", () => {
  it("blocks the feedback document until every sample is labeled", () => {
    const b = new BatchLabeling(samples(3));
    expect(b.complete).toBe(false);
    b.setLabel(100, "relevant");
    b.setLabel(101, "irrelevant");
    expect(b.complete).toBe(false);
    expect(() => b.toFeedback()).toThrow(/incompletely labeled/);
    b.setLabel(102, "irrelevant");
    expect(b.complete).toBe(true);
    expect(b.toFeedback().labels).toHaveLength(3);
  });

  it("contains exactly the user's selections, nothing fabricated", () => {
    const b = new BatchLabeling(samples(2));
    b.setLabel(100, "relevant");
    b.setLabel(101, "similar");
    const doc = b.toFeedback();
    expect(doc.labels).toEqual([
      { tuple_id: 100, label: "relevant" },
      { tuple_id: 101, label: "similar" },
    ]);
  });

  it("relabeling replaces the previous choice", () => {
    const b = new BatchLabeling(samples(1));
    b.setLabel(100, "relevant");
    b.setLabel(100, "irrelevant");
    expect(b.toFeedback().labels[0].label).toBe("irrelevant");
  });

  it("similar with no ticked dimensions omits the field (server defaults to all)", () => {
    const b = new BatchLabeling(samples(1));
    b.setLabel(100, "similar");
    expect(b.toFeedback().labels[0].dimensions).toBeUndefined();
  });

  it("ticked dimensions are sent sorted; switching away clears them", () => {
    const b = new BatchLabeling(samples(1));
    b.setLabel(100, "similar");
    b.toggleDim(100, "dosage");
    b.toggleDim(100, "age");
    expect(b.toFeedback().labels[0].dimensions).toEqual(["age", "dosage"]);
    b.setLabel(100, "irrelevant");
    b.setLabel(100, "similar");
    expect(b.toFeedback().labels[0].dimensions).toBeUndefined();
  });

  it("rejects tuples outside the batch", () => {
    const b = new BatchLabeling(samples(1));
    expect(() => b.setLabel(999, "relevant")).toThrow(/not part of this batch/);
  });
});
