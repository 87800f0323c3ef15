/**
 * Three.js scene graph for the skeleton pair: bone line segments for the
 * human and the robot (distinct styling) plus end-effector markers that
 * light up when the server-reported minimum surface distance drops under
 * the contact threshold. No renderer is created here, so everything is
 * testable headless.
 */

import * as THREE from "three";

const HUMAN_COLOR = 0x4aa3ff;
const ROBOT_COLOR = 0xff9f43;
const CONTACT_COLOR = 0xff3355;
const IDLE_MARKER_COLOR = 0x777777;

export class SkeletonLines {
  readonly lines: THREE.LineSegments;
  private readonly parents: number[];
  private readonly positions: THREE.BufferAttribute;

  constructor(parents: number[], color: number) {
    this.parents = parents;
    const boneCount = parents.filter((p) => p >= 0).length;
    const array = new Float32Array(boneCount * 2 * 3);
    this.positions = new THREE.BufferAttribute(array, 3);
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", this.positions);
    this.lines = new THREE.LineSegments(
      geometry,
      new THREE.LineBasicMaterial({ color }),
    );
    this.lines.frustumCulled = false;
  }

  update(joints: number[][]): void {
    let cursor = 0;
    for (let j = 0; j < this.parents.length; j++) {
      const p = this.parents[j];
      if (p < 0) continue;
      this.positions.setXYZ(cursor++, joints[p][0], joints[p][1], joints[p][2]);
      this.positions.setXYZ(cursor++, joints[j][0], joints[j][1], joints[j][2]);
    }
    this.positions.needsUpdate = true;
  }

  segmentPositions(): Float32Array {
    return this.positions.array as Float32Array;
  }
}

export class SkeletonPairScene {
  readonly group = new THREE.Group();
  readonly human: SkeletonLines;
  readonly robot: SkeletonLines;
  readonly effectorMarkers: THREE.Mesh[] = [];
  private contactTau: number;
  private readonly effectorIndices: number[];
  private readonly contact: boolean[];

  constructor(
    humanParents: number[],
    robotParents: number[],
    robotEffectors: number[],
    contactTau: number,
  ) {
    this.human = new SkeletonLines(humanParents, HUMAN_COLOR);
    this.robot = new SkeletonLines(robotParents, ROBOT_COLOR);
    this.group.add(this.human.lines);
    this.group.add(this.robot.lines);
    this.effectorIndices = robotEffectors;
    this.contactTau = contactTau;
    this.contact = robotEffectors.map(() => false);
    for (const _ of robotEffectors) {
      const marker = new THREE.Mesh(
        new THREE.SphereGeometry(0.035, 12, 12),
        new THREE.MeshBasicMaterial({ color: IDLE_MARKER_COLOR }),
      );
      this.group.add(marker);
      this.effectorMarkers.push(marker);
    }
  }

  setContactTau(tau: number): void {
    this.contactTau = tau;
  }

  updateHuman(joints: number[][]): void {
    this.human.update(joints);
  }

  updateRobot(joints: number[][], contactDistance?: number[]): void {
    this.robot.update(joints);
    this.effectorIndices.forEach((jointIndex, e) => {
      const marker = this.effectorMarkers[e];
      const j = joints[jointIndex];
      marker.position.set(j[0], j[1], j[2]);
      const touching =
        contactDistance !== undefined && contactDistance[e] < this.contactTau;
      this.contact[e] = touching;
      (marker.material as THREE.MeshBasicMaterial).color.setHex(
        touching ? CONTACT_COLOR : IDLE_MARKER_COLOR,
      );
    });
  }

  contactActive(): boolean[] {
    return [...this.contact];
  }
}
