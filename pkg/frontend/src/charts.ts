// Canvas renderers for the live cuff trace and the audiogram. Pure
// draw-from-data functions, no retained state.

import { StreamEvent } from "./api.js";
import { BufferedEvent, isGap } from "./session.js";

const SWEEP_FREQUENCIES = [250, 500, 1000, 2000, 4000, 8000];

interface BpPoint {
  t: number;
  cuff: number;
  ow: number;
  afterGap: boolean;
}

function bpPoints(events: BufferedEvent[]): BpPoint[] {
  const out: BpPoint[] = [];
  let gapPending = false;
  for (const ev of events) {
    if (isGap(ev)) {
      gapPending = true;
      continue;
    }
    const e = ev as StreamEvent;
    if (typeof e.t_s !== "number") {
      continue;
    }
    out.push({
      t: e.t_s as number,
      cuff: e.cuff_mmHg as number,
      ow: e.ow as number,
      afterGap: gapPending,
    });
    gapPending = false;
  }
  return out;
}

export function drawBpTrace(canvas: HTMLCanvasElement, events: BufferedEvent[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    return;
  }
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const pts = bpPoints(events);
  if (pts.length < 2) {
    return;
  }
  const tMax = Math.max(pts[pts.length - 1].t, 1);
  const x = (t: number) => (t / tMax) * (w - 50) + 40;

  // cuff pressure, 0..200 mmHg on the upper two thirds
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(40, 0);
  ctx.lineTo(40, h);
  ctx.stroke();
  ctx.strokeStyle = "#0a6";
  ctx.beginPath();
  let pen = false;
  for (const p of pts) {
    const y = (1 - p.cuff / 200) * (h * 0.62);
    if (!pen || p.afterGap) {
      ctx.moveTo(x(p.t), y);
      pen = true;
    } else {
      ctx.lineTo(x(p.t), y);
    }
    if (p.afterGap) {
      ctx.fillStyle = "#c33";
      ctx.fillRect(x(p.t) - 1, 0, 2, h); // mark the buffered gap
    }
  }
  ctx.stroke();

  // oscillation waveform, +/-4 mmHg band at the bottom
  ctx.strokeStyle = "#36c";
  ctx.beginPath();
  pen = false;
  for (const p of pts) {
    const y = h * 0.8 - (p.ow / 4) * (h * 0.17);
    if (!pen || p.afterGap) {
      ctx.moveTo(x(p.t), y);
      pen = true;
    } else {
      ctx.lineTo(x(p.t), y);
    }
  }
  ctx.stroke();

  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText("cuff mmHg", 46, 12);
  ctx.fillText("oscillation", 46, h * 0.8 - 8);
  const last = pts[pts.length - 1];
  ctx.fillText(`${last.cuff.toFixed(1)} mmHg @ ${last.t.toFixed(1)} s`, w - 150, 12);
}

export function drawAudiogram(
  canvas: HTMLCanvasElement,
  gram: Record<string, number | null>,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    return;
  }
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const left = 40;
  const top = 14;
  const plotW = w - left - 10;
  const plotH = h - top - 24;
  const x = (i: number) => left + (i / (SWEEP_FREQUENCIES.length - 1)) * plotW;
  const y = (db: number) => top + ((db + 10) / 100) * plotH; // -10..90 dB HL, down = worse

  ctx.strokeStyle = "#ccc";
  ctx.fillStyle = "#444";
  ctx.font = "10px sans-serif";
  for (let db = 0; db <= 80; db += 20) {
    ctx.beginPath();
    ctx.moveTo(left, y(db));
    ctx.lineTo(left + plotW, y(db));
    ctx.stroke();
    ctx.fillText(String(db), 8, y(db) + 3);
  }
  SWEEP_FREQUENCIES.forEach((freq, i) => {
    ctx.fillText(String(freq), x(i) - 10, h - 8);
  });

  ctx.strokeStyle = "#c33";
  ctx.fillStyle = "#c33";
  ctx.beginPath();
  let pen = false;
  SWEEP_FREQUENCIES.forEach((freq, i) => {
    const level = gram[String(freq)];
    if (level === null || level === undefined) {
      ctx.fillText("NR", x(i) - 6, y(88));
      pen = false;
      return;
    }
    if (pen) {
      ctx.lineTo(x(i), y(level));
    } else {
      ctx.moveTo(x(i), y(level));
      pen = true;
    }
  });
  ctx.stroke();
  SWEEP_FREQUENCIES.forEach((freq, i) => {
    const level = gram[String(freq)];
    if (level !== null && level !== undefined) {
      ctx.beginPath();
      ctx.arc(x(i), y(level), 3, 0, 2 * Math.PI);
      ctx.fill();
    }
  });
}
