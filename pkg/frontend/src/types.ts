// Wire contract of the exploration service (version 1 envelopes).

export type Label = "relevant" | "irrelevant" | "similar";

export interface Envelope<T> {
  version: number;
  data?: T;
  error?: WireError;
}

export interface WireError {
  code: string;
  message: string;
  field?: string;
}

export interface AttributeInfo {
  name: string;
  raw_min: number;
  raw_max: number;
}

export interface SessionResource {
  session_id: string;
  dataset_id: string;
  status: "ready" | "awaiting-feedback" | "completed";
  iteration: number;
  attributes: AttributeInfo[];
  has_truth: boolean;
  links: Record<string, string>;
}

export interface Sample {
  tuple_id: number;
  values: Record<string, number>;
  phase: string;
}

export interface BatchDoc {
  session_id: string;
  status: string;
  iteration?: number;
  samples: Sample[];
}

export interface FeedbackEntry {
  tuple_id: number;
  label: Label;
  dimensions?: string[];
}

export interface FeedbackDoc {
  labels: FeedbackEntry[];
}

export interface MetricsDoc {
  precision: number;
  recall: number;
  f_measure: number;
  labeled_count: number;
  iteration_seconds: number;
}

export interface FeedbackSummary {
  iteration: number;
  labeled: { relevant: number; irrelevant: number; similar: number };
  relevant_regions: number;
  query: string | null;
  session_status: string;
  metrics?: MetricsDoc;
  similar_dimensions?: Record<string, string[] | null>;
}

export interface RegionBounds {
  lows: number[];
  highs: number[];
  lo_strict: boolean[];
  hi_strict: boolean[];
}

export interface PredictedRegion {
  normalized: RegionBounds;
  raw: RegionBounds;
}

export interface GridCellDoc {
  level: number;
  idx: number[];
  state: string;
  s: number;
  lows: number[];
  highs: number[];
}

export interface GridSnapshot {
  levels: { level: number; beta: number }[];
  cells: GridCellDoc[];
  frontier_size: number;
}

export interface PredictionModel {
  attributes: string[];
  relevant_regions: PredictedRegion[];
  query_text: string;
  query: unknown;
}

export interface PredictionDoc {
  model: PredictionModel | null;
  grid: GridSnapshot;
}
