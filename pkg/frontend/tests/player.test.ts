import { beforeEach, describe, expect, it } from "vitest";

import { StickFigurePlayer } from "../src/player.js";
import {
  motionBounds,
  projectFrame,
  projectJoint,
  toCanvas,
} from "../src/projection.js";
import { metaFixture, motionFixture, stubCanvas } from "./helpers.js";

describe("projection", () => {
  it("azimuth 0 keeps x and maps height to y", () => {
    expect(projectJoint([1, 2, 3], 0)).toEqual({ x: 1, y: 3 });
  });

  it("azimuth pi/2 swaps in the depth axis", () => {
    const p = projectJoint([1, 2, 3], Math.PI / 2);
    expect(p.x).toBeCloseTo(2, 10);
    expect(p.y).toBe(3);
  });

  it("bounds cover every frame", () => {
    const joints = [
      [[0, 0, 0], [2, 0, 1]],
      [[-1, 0, 0], [0, 0, 5]],
    ];
    const b = motionBounds(joints, 0);
    expect(b).toEqual({ minX: -1, maxX: 2, minY: 0, maxY: 5 });
  });

  it("toCanvas centers and flips y", () => {
    const b = { minX: 0, maxX: 2, minY: 0, maxY: 2 };
    const mid = toCanvas({ x: 1, y: 1 }, b, 100, 100);
    expect(mid).toEqual({ x: 50, y: 50 });
    const top = toCanvas({ x: 1, y: 2 }, b, 100, 100);
    expect(top.y).toBeLessThan(mid.y);
  });
});

describe("StickFigurePlayer", () => {
  let calls: { op: string; args: unknown[] }[];

  beforeEach(() => {
    calls = stubCanvas();
  });

  function makePlayer(bones: number[][] | null): StickFigurePlayer {
    const canvas = document.createElement("canvas");
    canvas.width = 160;
    canvas.height = 160;
    return new StickFigurePlayer(canvas, motionFixture.payload, bones);
  }

  it("draws one bone segment per metadata bone", () => {
    const player = makePlayer(metaFixture.bones);
    player.render();
    const strokes = calls.filter((c) => c.op === "stroke");
    expect(strokes).toHaveLength(metaFixture.bones.length);
  });

  it("degrades to a point cloud when bones do not fit the joints", () => {
    const player = makePlayer([[0, 99]]);
    player.render();
    expect(calls.filter((c) => c.op === "stroke")).toHaveLength(0);
    const arcs = calls.filter((c) => c.op === "arc");
    expect(arcs).toHaveLength(motionFixture.payload.joints[0].length);
  });

  it("seek clamps to the frame range", () => {
    const player = makePlayer(null);
    player.seek(9999);
    expect(player.frame).toBe(player.frameCount - 1);
    player.seek(-5);
    expect(player.frame).toBe(0);
  });

  it("play advances frames and pause stops", async () => {
    const player = makePlayer(null);
    player.play();
    expect(player.playing).toBe(true);
    await new Promise((r) => setTimeout(r, 120));
    player.pause();
    expect(player.playing).toBe(false);
    expect(player.frame).toBeGreaterThan(0);
  });
});
