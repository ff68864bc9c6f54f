// 2-D projection of regions, grid cells and labeled points onto a canvas.
// A box projected onto an axis pair is a box, so any d reduces to rectangles.

import type { AttributeInfo, GridCellDoc, Label, PredictedRegion } from "./types.js";

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface LabeledPoint {
  values: Record<string, number>;
  label: Label;
}

// Narrow slice of CanvasRenderingContext2D the renderer needs; tests inject a
// recording implementation since headless DOMs ship no real 2D context.
export interface CanvasLike {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  globalAlpha: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
}

export interface Projection {
  xAttr: AttributeInfo;
  yAttr: AttributeInfo;
  width: number;
  height: number;
}

const GRID_COLORS: Record<string, string> = {
  "relevant-found": "#2e7d32",
  zoomed: "#9e9e9e",
  sampled: "#64b5f6",
  empty: "#e0e0e0",
  unexplored: "#f5f5f5",
};

const POINT_COLORS: Record<Label, string> = {
  relevant: "#2e7d32",
  irrelevant: "#c62828",
  similar: "#f9a825",
};

function spanX(p: Projection): number {
  return p.xAttr.raw_max - p.xAttr.raw_min;
}

function spanY(p: Projection): number {
  return p.yAttr.raw_max - p.yAttr.raw_min;
}

export function projectRawBox(
  lows: number[],
  highs: number[],
  xDim: number,
  yDim: number,
  p: Projection,
): Rect {
  const x0 = ((lows[xDim] - p.xAttr.raw_min) / spanX(p)) * p.width;
  const x1 = ((highs[xDim] - p.xAttr.raw_min) / spanX(p)) * p.width;
  // canvas y grows downward; attribute axis grows upward
  const y0 = p.height - ((highs[yDim] - p.yAttr.raw_min) / spanY(p)) * p.height;
  const y1 = p.height - ((lows[yDim] - p.yAttr.raw_min) / spanY(p)) * p.height;
  return { x: x0, y: y0, w: Math.max(x1 - x0, 1), h: Math.max(y1 - y0, 1) };
}

export function projectNormalizedBox(
  lows: number[],
  highs: number[],
  xDim: number,
  yDim: number,
  p: Projection,
): Rect {
  const x0 = (lows[xDim] / 100) * p.width;
  const x1 = (highs[xDim] / 100) * p.width;
  const y0 = p.height - (highs[yDim] / 100) * p.height;
  const y1 = p.height - (lows[yDim] / 100) * p.height;
  return { x: x0, y: y0, w: Math.max(x1 - x0, 1), h: Math.max(y1 - y0, 1) };
}

export function projectPoint(
  values: Record<string, number>,
  p: Projection,
): { x: number; y: number } {
  const x = ((values[p.xAttr.name] - p.xAttr.raw_min) / spanX(p)) * p.width;
  const y = p.height - ((values[p.yAttr.name] - p.yAttr.raw_min) / spanY(p)) * p.height;
  return { x, y };
}

export class SpaceView {
  constructor(
    private readonly ctx: CanvasLike,
    private projection: Projection,
    private xDim = 0,
    private yDim = 1,
  ) {}

  setProjection(xDim: number, yDim: number, projection: Projection): void {
    if (xDim === yDim) throw new Error("projection axes must be distinct attributes");
    this.xDim = xDim;
    this.yDim = yDim;
    this.projection = projection;
  }

  render(layers: {
    regions: PredictedRegion[];
    cells: GridCellDoc[];
    points: LabeledPoint[];
  }): { regionRects: Rect[]; cellRects: Rect[]; pointCount: number } {
    const p = this.projection;
    this.ctx.clearRect(0, 0, p.width, p.height);

    const cellRects: Rect[] = [];
    this.ctx.globalAlpha = 0.35;
    for (const cell of layers.cells) {
      const rect = projectNormalizedBox(cell.lows, cell.highs, this.xDim, this.yDim, p);
      this.ctx.fillStyle = GRID_COLORS[cell.state] ?? "#ffffff";
      this.ctx.fillRect(rect.x, rect.y, rect.w, rect.h);
      cellRects.push(rect);
    }

    const regionRects: Rect[] = [];
    this.ctx.globalAlpha = 0.45;
    this.ctx.fillStyle = "#66bb6a";
    this.ctx.strokeStyle = "#1b5e20";
    this.ctx.lineWidth = 2;
    for (const region of layers.regions) {
      const rect = projectRawBox(region.raw.lows, region.raw.highs, this.xDim, this.yDim, p);
      this.ctx.fillRect(rect.x, rect.y, rect.w, rect.h);
      this.ctx.strokeRect(rect.x, rect.y, rect.w, rect.h);
      regionRects.push(rect);
    }

    this.ctx.globalAlpha = 1.0;
    let pointCount = 0;
    for (const point of layers.points) {
      const { x, y } = projectPoint(point.values, p);
      this.ctx.fillStyle = POINT_COLORS[point.label];
      this.ctx.fillRect(x - 2, y - 2, 4, 4);
      pointCount += 1;
    }
    return { regionRects, cellRects, pointCount };
  }
}
