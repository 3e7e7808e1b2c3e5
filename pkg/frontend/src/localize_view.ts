import { ApiClient } from "./api.js";
import { StickFigurePlayer } from "./player.js";
import type { LocalizeResponse, MetaResponse } from "./types.js";

export const CHART_W = 640;
export const CHART_H = 160;
const PAD = 10;

/** x pixel of a frame index on the chart. */
export function frameToX(
  frame: number,
  stride: number,
  points: number,
): number {
  return PAD + ((CHART_W - 2 * PAD) * (frame / stride)) / Math.max(1, points - 1);
}

/** Inverse of frameToX, clamped to the curve's frame range. */
export function xToFrame(
  x: number,
  stride: number,
  points: number,
): number {
  const t = (x - PAD) / (CHART_W - 2 * PAD);
  const frame = Math.round(t * Math.max(1, points - 1) * stride);
  return Math.max(0, Math.min(frame, (points - 1) * stride));
}

/** Pick a motion and a query, POST /api/localize, and draw the similarity
 * timeline with the best segment highlighted.  Clicking the chart seeks the
 * stick-figure playback to the clicked time point. */
export class LocalizeView {
  readonly motionInput: HTMLInputElement;
  readonly queryInput: HTMLInputElement;
  readonly error: HTMLElement;
  readonly chart: SVGSVGElement;
  readonly canvas: HTMLCanvasElement;
  player: StickFigurePlayer | null = null;
  last: LocalizeResponse | null = null;

  constructor(
    readonly root: HTMLElement,
    private api: ApiClient,
    private meta: MetaResponse,
  ) {
    root.innerHTML = `
      <form class="localize-bar">
        <input class="motion-id" type="text" placeholder="motion id" />
        <input class="query" type="text" placeholder="moment description" />
        <button type="submit">Localize</button>
      </form>
      <p class="error" hidden></p>
      <svg class="chart" xmlns="http://www.w3.org/2000/svg"
           width="${CHART_W}" height="${CHART_H}"></svg>
      <canvas class="playback" width="240" height="240"></canvas>`;
    this.motionInput = root.querySelector(".motion-id") as HTMLInputElement;
    this.queryInput = root.querySelector(".query") as HTMLInputElement;
    this.error = root.querySelector(".error") as HTMLElement;
    this.chart = root.querySelector(".chart") as unknown as SVGSVGElement;
    this.canvas = root.querySelector(".playback") as HTMLCanvasElement;
    (root.querySelector("form") as HTMLFormElement).addEventListener(
      "submit",
      (ev) => {
        ev.preventDefault();
        void this.submit();
      },
    );
    this.chart.addEventListener("click", (ev) => {
      const rect = this.chart.getBoundingClientRect();
      this.seekFromChartX((ev as MouseEvent).clientX - rect.left);
    });
  }

  async submit(): Promise<void> {
    const motionId = this.motionInput.value.trim();
    const query = this.queryInput.value.trim();
    if (!motionId || !query) {
      this.error.textContent = "Pick a motion id and enter a query.";
      this.error.hidden = false;
      return;
    }
    this.error.hidden = true;
    try {
      const response = await this.api.localize(motionId, query);
      if (response === null) return; // superseded
      const motion = await this.api.motion(motionId);
      this.player?.pause();
      this.player = new StickFigurePlayer(this.canvas, motion,
                                          this.meta.bones);
      this.render(response);
      this.player.seek(response.best.start);
    } catch (err) {
      this.error.textContent = String(err);
      this.error.hidden = false;
    }
  }

  render(response: LocalizeResponse): void {
    this.last = response;
    const { curve, stride, best } = response;
    const n = curve.length;
    const lo = Math.min(...curve);
    const hi = Math.max(...curve);
    const span = hi - lo || 1;
    const points = curve
      .map((v, i) => {
        const x = PAD + ((CHART_W - 2 * PAD) * i) / Math.max(1, n - 1);
        const y = CHART_H - PAD - ((CHART_H - 2 * PAD) * (v - lo)) / span;
        return `${x.toFixed(1)},${y.toFixed(1)}`;
      })
      .join(" ");
    const x0 = frameToX(best.start, stride, n);
    const x1 = frameToX(best.end, stride, n);
    this.chart.innerHTML = `
      <rect class="best-segment" x="${x0.toFixed(1)}" y="${PAD}"
            width="${(x1 - x0).toFixed(1)}" height="${CHART_H - 2 * PAD}"
            fill="#b6e3b6" opacity="0.6"
            data-start="${best.start}" data-end="${best.end}"></rect>
      <polyline class="curve" points="${points}" fill="none"
                stroke="#2a6fdb" stroke-width="1.5"></polyline>
      <line class="best-marker" stroke="red" stroke-dasharray="4"
            x1="${((x0 + x1) / 2).toFixed(1)}" y1="${PAD}"
            x2="${((x0 + x1) / 2).toFixed(1)}" y2="${CHART_H - PAD}"></line>`;
  }

  seekFromChartX(x: number): void {
    if (!this.last || !this.player) return;
    const frame = xToFrame(x, this.last.stride, this.last.curve.length);
    this.player.seek(frame);
  }
}
