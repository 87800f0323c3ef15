import { describe, expect, it } from "vitest";

import { SkeletonPairScene } from "../src/scene.js";

const HUMAN_PARENTS = [-1, 0, 1];
const ROBOT_PARENTS = [-1, 0, 1, 1];
const EFFECTORS = [2, 3];

describe("SkeletonPairScene", () => {
  it("lays out bone segments from joints and parents", () => {
    const scene = new SkeletonPairScene(HUMAN_PARENTS, ROBOT_PARENTS, EFFECTORS, 0.05);
    scene.updateHuman([
      [0, 0, 0],
      [0, 1, 0],
      [0, 2, 0.5],
    ]);
    const pos = scene.human.segmentPositions();
    // two bones -> two segments of two endpoints
    expect(Array.from(pos)).toEqual([0, 0, 0, 0, 1, 0, 0, 1, 0, 0, 2, 0.5]);
  });

  it("rest pose puts zero-length segments at identical endpoints", () => {
    const scene = new SkeletonPairScene(HUMAN_PARENTS, ROBOT_PARENTS, EFFECTORS, 0.05);
    const rest = [
      [0, 0, 0],
      [0, 0.5, 0],
      [0.3, 0.5, 0],
      [-0.3, 0.5, 0],
    ];
    scene.updateRobot(rest);
    const pos = scene.robot.segmentPositions();
    expect(pos[0]).toBe(0); // root endpoint of first bone
    expect(pos[4]).toBeCloseTo(0.5); // child endpoint y
    // markers sit on the effector joints
    expect(scene.effectorMarkers[0].position.x).toBeCloseTo(0.3);
    expect(scene.effectorMarkers[1].position.x).toBeCloseTo(-0.3);
  });

  it("highlights effectors when distance drops under the threshold", () => {
    const scene = new SkeletonPairScene(HUMAN_PARENTS, ROBOT_PARENTS, EFFECTORS, 0.05);
    const joints = [
      [0, 0, 0],
      [0, 0.5, 0],
      [0.3, 0.5, 0],
      [-0.3, 0.5, 0],
    ];
    scene.updateRobot(joints, [0.01, 0.4]);
    expect(scene.contactActive()).toEqual([true, false]);
    scene.updateRobot(joints, [0.2, 0.2]);
    expect(scene.contactActive()).toEqual([false, false]);
  });

  it("keeps both skeletons in one renderable group with distinct styling", () => {
    const scene = new SkeletonPairScene(HUMAN_PARENTS, ROBOT_PARENTS, EFFECTORS, 0.05);
    expect(scene.group.children.length).toBe(2 + EFFECTORS.length);
    const humanMat = scene.human.lines.material as unknown as {
      color: { getHex(): number };
    };
    const robotMat = scene.robot.lines.material as unknown as {
      color: { getHex(): number };
    };
    expect(humanMat.color.getHex()).not.toBe(robotMat.color.getHex());
  });
});
