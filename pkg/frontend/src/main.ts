/** Browser entry point: renderer, controls, and the session wiring. */

import * as THREE from "three";

import { RobotConnection } from "./connection.js";
import { SkeletonPairScene } from "./scene.js";
import { SessionClient } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/ws`;
}

const SYNTH_RECORDINGS = [
  "synth:high-five:1",
  "synth:handshake:1",
  "synth:wave:1",
  "synth:push:1",
  "synth:hug:1",
];

function main(): void {
  const canvasHost = el<HTMLDivElement>("scene");
  const renderer = new THREE.WebGLRenderer({ antialias: true });
  renderer.setSize(canvasHost.clientWidth, canvasHost.clientHeight || 560);
  canvasHost.appendChild(renderer.domElement);

  const scene = new THREE.Scene();
  scene.background = new THREE.Color(0x10141c);
  const camera = new THREE.PerspectiveCamera(
    50,
    (canvasHost.clientWidth || 960) / (canvasHost.clientHeight || 560),
    0.1,
    100,
  );
  camera.position.set(2.6, 1.9, 3.2);
  camera.lookAt(0, 0.9, 0);
  scene.add(new THREE.GridHelper(8, 16, 0x334, 0x223));

  const connection = new RobotConnection(wsUrl());
  const client = new SessionClient(connection);
  let pair: SkeletonPairScene | null = null;

  const status = el<HTMLSpanElement>("status");
  const commandSelect = el<HTMLSelectElement>("command");
  const recordingSelect = el<HTMLSelectElement>("recording");
  const scrubber = el<HTMLInputElement>("scrubber");
  const ratingBox = el<HTMLDivElement>("rating");
  const noteInput = el<HTMLInputElement>("note");
  const ackList = el<HTMLSpanElement>("acks");

  for (const r of SYNTH_RECORDINGS) {
    const opt = document.createElement("option");
    opt.value = r;
    opt.textContent = r;
    recordingSelect.appendChild(opt);
  }

  for (let r = 1; r <= 5; r++) {
    const b = document.createElement("button");
    b.textContent = "★".repeat(r);
    b.onclick = () => client.setPendingRating(r);
    ratingBox.appendChild(b);
  }

  el<HTMLButtonElement>("play").onclick = () => client.play();
  el<HTMLButtonElement>("pause").onclick = () => client.pause();
  el<HTMLButtonElement>("submit").onclick = () => {
    const rating = client.view.pendingRating;
    if (rating === null) {
      status.textContent = "pick a rating first";
      return;
    }
    client.submitFeedback(rating, noteInput.value || undefined);
    noteInput.value = "";
  };
  recordingSelect.onchange = () => client.selectRecording(recordingSelect.value);
  commandSelect.onchange = () => client.setCommand(commandSelect.value);
  scrubber.oninput = () => {
    const playback = client.view.playback;
    if (!playback) return;
    const t = (Number(scrubber.value) / 100) * (playback.frames / client.view.fps);
    client.scrub(t);
  };

  client.subscribe((view) => {
    status.textContent =
      `${view.connection} | session ${view.sessionId ?? "-"} | ` +
      `${view.sessionState} | drops ${view.drops} | stale ${view.staleDropped}`;
    if (view.vocab.length && commandSelect.options.length === 0) {
      for (const w of view.vocab) {
        const opt = document.createElement("option");
        opt.value = w;
        opt.textContent = w;
        commandSelect.appendChild(opt);
      }
    }
    if (view.command) commandSelect.value = view.command;
    if (!pair && view.robotParents.length) {
      pair = new SkeletonPairScene(
        view.humanParents,
        view.robotParents,
        view.robotEndEffectors,
        view.contactTau,
      );
      scene.add(pair.group);
    }
    if (pair && view.lastHuman) pair.updateHuman(view.lastHuman.joints);
    if (pair && view.lastRobot) {
      pair.updateRobot(view.lastRobot.joints, view.lastRobot.contact_distance);
    }
    if (view.playback && !scrubberActive) {
      scrubber.value = String(
        Math.round((view.playback.position / Math.max(view.playback.frames - 1, 1)) * 100),
      );
    }
    ackList.textContent = view.feedbackAcks.slice(-3).join(", ");
  });

  let scrubberActive = false;
  scrubber.onmousedown = () => (scrubberActive = true);
  scrubber.onmouseup = () => (scrubberActive = false);

  connection.connect();

  const animate = () => {
    requestAnimationFrame(animate);
    renderer.render(scene, camera);
  };
  animate();
}

main();
