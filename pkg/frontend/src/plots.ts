// Canvas plot renderers. The engine sends data series; everything here
// is a plotting transform only.

import type { HistogramData, PairData, RankData, TraceData } from "./types.js";

export const CHAIN_COLORS = ["#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#b279a2"];

interface Frame {
  ctx: CanvasRenderingContext2D;
  x0: number;
  y0: number;
  w: number;
  h: number;
  xmin: number;
  xmax: number;
  ymin: number;
  ymax: number;
}

function frame(canvas: HTMLCanvasElement, xmin: number, xmax: number, ymin: number, ymax: number): Frame {
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const pad = 34;
  if (xmax - xmin <= 0) xmax = xmin + 1;
  if (ymax - ymin <= 0) ymax = ymin + 1;
  const f: Frame = {
    ctx,
    x0: pad,
    y0: 8,
    w: canvas.width - pad - 8,
    h: canvas.height - pad - 8,
    xmin,
    xmax,
    ymin,
    ymax,
  };
  ctx.strokeStyle = "#999";
  ctx.lineWidth = 1;
  ctx.strokeRect(f.x0, f.y0, f.w, f.h);
  ctx.fillStyle = "#666";
  ctx.font = "10px sans-serif";
  ctx.fillText(fmt(ymin), 2, f.y0 + f.h);
  ctx.fillText(fmt(ymax), 2, f.y0 + 10);
  ctx.fillText(fmt(xmin), f.x0, canvas.height - 14);
  const xe = fmt(xmax);
  ctx.fillText(xe, f.x0 + f.w - ctx.measureText(xe).width, canvas.height - 14);
  return f;
}

function fmt(v: number): string {
  if (!isFinite(v)) return "-";
  const a = Math.abs(v);
  if (a !== 0 && (a >= 1e4 || a < 1e-2)) return v.toExponential(1);
  return String(Math.round(v * 100) / 100);
}

const px = (f: Frame, x: number) => f.x0 + ((x - f.xmin) / (f.xmax - f.xmin)) * f.w;
const py = (f: Frame, y: number) => f.y0 + f.h - ((y - f.ymin) / (f.ymax - f.ymin)) * f.h;

export function drawTrace(canvas: HTMLCanvasElement, data: TraceData): void {
  const all = data.traces.flatMap((t) => t.values);
  const iters = data.traces.flatMap((t) => t.iterations);
  if (all.length === 0) return;
  const f = frame(canvas, Math.min(...iters), Math.max(...iters), Math.min(...all), Math.max(...all));
  for (const t of data.traces) {
    f.ctx.strokeStyle = CHAIN_COLORS[t.chain % CHAIN_COLORS.length];
    f.ctx.lineWidth = 1;
    f.ctx.beginPath();
    t.values.forEach((v, i) => {
      const x = px(f, t.iterations[i]);
      const y = py(f, v);
      if (i === 0) f.ctx.moveTo(x, y);
      else f.ctx.lineTo(x, y);
    });
    f.ctx.stroke();
  }
}

export function drawHistogram(canvas: HTMLCanvasElement, data: HistogramData): void {
  if (data.counts.length === 0) return;
  const f = frame(
    canvas,
    data.bin_edges[0],
    data.bin_edges[data.bin_edges.length - 1],
    0,
    Math.max(...data.counts),
  );
  f.ctx.fillStyle = "#4c78a8cc";
  data.counts.forEach((c, i) => {
    const x = px(f, data.bin_edges[i]);
    const xr = px(f, data.bin_edges[i + 1]);
    const y = py(f, c);
    f.ctx.fillRect(x, y, Math.max(1, xr - x - 1), f.y0 + f.h - y);
  });
}

export function drawRank(canvas: HTMLCanvasElement, data: RankData): void {
  if (data.chains.length === 0) return;
  const maxCount = Math.max(...data.chains.flatMap((c) => c.counts));
  const f = frame(canvas, 0, 1, 0, maxCount);
  const bins = data.chains[0].counts.length;
  const bw = 1 / bins;
  const lane = bw / data.chains.length;
  data.chains.forEach((c, k) => {
    f.ctx.fillStyle = CHAIN_COLORS[c.chain % CHAIN_COLORS.length] + "cc";
    c.counts.forEach((count, i) => {
      const x = px(f, i * bw + k * lane);
      const xr = px(f, i * bw + (k + 1) * lane);
      const y = py(f, count);
      f.ctx.fillRect(x, y, Math.max(1, xr - x), f.y0 + f.h - y);
    });
  });
  // uniform expectation guide
  const expected = data.chains[0].counts.reduce((a, b) => a + b, 0) / bins;
  f.ctx.strokeStyle = "#333";
  f.ctx.setLineDash([4, 3]);
  f.ctx.beginPath();
  f.ctx.moveTo(f.x0, py(f, expected));
  f.ctx.lineTo(f.x0 + f.w, py(f, expected));
  f.ctx.stroke();
  f.ctx.setLineDash([]);
}

export function drawPair(canvas: HTMLCanvasElement, data: PairData): void {
  if (data.x.length === 0) return;
  const f = frame(
    canvas,
    Math.min(...data.x),
    Math.max(...data.x),
    Math.min(...data.y),
    Math.max(...data.y),
  );
  f.ctx.fillStyle = "#4c78a866";
  data.x.forEach((x, i) => {
    f.ctx.beginPath();
    f.ctx.arc(px(f, x), py(f, data.y[i]), 1.6, 0, 2 * Math.PI);
    f.ctx.fill();
  });
}
