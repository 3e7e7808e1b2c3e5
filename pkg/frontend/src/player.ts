import { motionBounds, projectFrame, toCanvas } from "./projection.js";
import type { MotionPayload } from "./types.js";

/** Canvas stick-figure playback for one motion.
 *
 * Bones come from the gallery metadata; when the bone list does not match
 * the motion's joint count the renderer degrades to a point cloud.
 */
export class StickFigurePlayer {
  frame = 0;
  playing = false;
  azimuth = 0.6;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private canvas: HTMLCanvasElement,
    private motion: MotionPayload,
    private bones: number[][] | null,
  ) {}

  get frameCount(): number {
    return this.motion.joints.length;
  }

  seek(frame: number): void {
    this.frame = Math.max(0, Math.min(frame, this.frameCount - 1));
    this.render();
  }

  play(): void {
    if (this.playing || this.frameCount === 0) return;
    this.playing = true;
    const interval = 1000 / (this.motion.fps || 20);
    this.timer = setInterval(() => {
      this.frame = (this.frame + 1) % this.frameCount;
      this.render();
    }, interval);
  }

  pause(): void {
    this.playing = false;
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  setAzimuth(a: number): void {
    this.azimuth = a;
    this.render();
  }

  render(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx || this.frameCount === 0) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    const bounds = motionBounds(this.motion.joints, this.azimuth);
    const frame = this.motion.joints[this.frame];
    const pts = projectFrame(frame, this.azimuth).map((p) =>
      toCanvas(p, bounds, width, height),
    );
    const usableBones =
      this.bones !== null &&
      this.bones.every(([a, b]) => a < pts.length && b < pts.length);
    if (usableBones && this.bones) {
      ctx.strokeStyle = "#2a6fdb";
      ctx.lineWidth = 2;
      for (const [a, b] of this.bones) {
        ctx.beginPath();
        ctx.moveTo(pts[a].x, pts[a].y);
        ctx.lineTo(pts[b].x, pts[b].y);
        ctx.stroke();
      }
    }
    // joints always drawn; with no usable bone list this is the whole render
    ctx.fillStyle = "#16325c";
    for (const p of pts) {
      ctx.beginPath();
      ctx.arc(p.x, p.y, 3, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}
