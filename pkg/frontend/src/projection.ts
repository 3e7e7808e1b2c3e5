/** Orthographic 2D projection of 3D joints with a rotatable azimuth.
 *
 * The azimuth rotates the skeleton about the vertical (z) axis before
 * dropping the depth coordinate; no perspective, no external 3D engine.
 */

export interface Point2 {
  x: number;
  y: number;
}

export function projectJoint(
  joint: [number, number, number] | number[],
  azimuth: number,
): Point2 {
  const [x, y, z] = joint;
  const c = Math.cos(azimuth);
  const s = Math.sin(azimuth);
  // rotate (x, y) about the z axis, keep the rotated x as screen x and the
  // height z as screen y (y grows upward; canvas code flips it)
  return { x: x * c + y * s, y: z };
}

export function projectFrame(frame: number[][], azimuth: number): Point2[] {
  return frame.map((j) => projectJoint(j, azimuth));
}

export interface Bounds {
  minX: number;
  maxX: number;
  minY: number;
  maxY: number;
}

/** Bounds over every frame so the playback viewport never jumps. */
export function motionBounds(
  joints: number[][][],
  azimuth: number,
): Bounds {
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const frame of joints) {
    for (const p of projectFrame(frame, azimuth)) {
      minX = Math.min(minX, p.x);
      maxX = Math.max(maxX, p.x);
      minY = Math.min(minY, p.y);
      maxY = Math.max(maxY, p.y);
    }
  }
  return { minX, maxX, minY, maxY };
}

/** Map projected coordinates into a width x height box with padding,
 * preserving aspect ratio and flipping y for canvas coordinates. */
export function toCanvas(
  p: Point2,
  bounds: Bounds,
  width: number,
  height: number,
  pad = 10,
): Point2 {
  const spanX = Math.max(bounds.maxX - bounds.minX, 1e-6);
  const spanY = Math.max(bounds.maxY - bounds.minY, 1e-6);
  const scale = Math.min((width - 2 * pad) / spanX, (height - 2 * pad) / spanY);
  const cx = (bounds.minX + bounds.maxX) / 2;
  const cy = (bounds.minY + bounds.maxY) / 2;
  return {
    x: width / 2 + (p.x - cx) * scale,
    y: height / 2 - (p.y - cy) * scale,
  };
}
