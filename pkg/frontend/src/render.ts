/**
 * Dual orthographic projections (top-down XY, side XZ) of the arm chain,
 * the object disc, and the hand normal, drawn from the latest server
 * observation. Rendering is purely a view of server state.
 */

import { jointPositions, handNormal, chainLength, Vec3 } from "./fk.js";
import { StateFrame } from "./protocol.js";

// observation layout (matches the simulator)
const OBS_Q = 0;
const OBS_HAND = 6;
const OBS_NORMAL = 9;
const OBS_OBJECT = 12;
const OBS_APERTURE = 18;
const OBS_DIST = 19;

export interface SceneStats {
  handFromObs: Vec3;
  handFromFk: Vec3;
  dist: number;
  aperture: number;
}

export function sceneStats(obs: number[]): SceneStats {
  const q = obs.slice(OBS_Q, OBS_Q + 6);
  return {
    handFromObs: [obs[OBS_HAND], obs[OBS_HAND + 1], obs[OBS_HAND + 2]],
    handFromFk: jointPositions(q)[6],
    dist: obs[OBS_DIST],
    aperture: obs[OBS_APERTURE],
  };
}

const EVENT_COLORS: Record<string, string> = {
  success: "#2e9e44",
  collision: "#c62828",
  contact: "#e08000",
  none: "#607080",
};

interface Projection {
  label: string;
  x: number; // canvas offset
  pick: (p: Vec3) => [number, number]; // world -> plane coords
}

export function renderScene(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  frame: StateFrame,
  cumulativeReward: number,
  objectRadius: number,
): boolean {
  const obs = frame.obs;
  if (obs.some((x) => !Number.isFinite(x))) {
    ctx.fillStyle = "#c62828";
    ctx.font = "14px sans-serif";
    ctx.fillText("non-finite observation: frame frozen", 12, 20);
    return false;
  }
  ctx.clearRect(0, 0, width, height);
  const q = obs.slice(OBS_Q, OBS_Q + 6);
  const pts = jointPositions(q);
  const n = handNormal(q, wristFromObs(obs));
  const obj: Vec3 = [obs[OBS_OBJECT], obs[OBS_OBJECT + 1], obs[OBS_OBJECT + 2]];

  const half = width / 2;
  const reach = chainLength() * 1.15;
  const scale = Math.min(half, height) / (2 * reach);
  const projections: Projection[] = [
    { label: "top (x-y)", x: 0, pick: (p) => [p[0], p[1]] },
    { label: "side (x-z)", x: half, pick: (p) => [p[0], p[2] - reach * 0.8] },
  ];

  for (const proj of projections) {
    const cx = proj.x + half / 2;
    const cy = height / 2;
    const toCanvas = (p: Vec3): [number, number] => {
      const [u, v] = proj.pick(p);
      return [cx + u * scale, cy - v * scale];
    };

    ctx.strokeStyle = "#c9d2dc";
    ctx.strokeRect(proj.x + 1, 1, half - 2, height - 2);
    ctx.fillStyle = "#607080";
    ctx.font = "12px sans-serif";
    ctx.fillText(proj.label, proj.x + 8, 16);

    // arm chain
    ctx.strokeStyle = "#31506e";
    ctx.lineWidth = 3;
    ctx.beginPath();
    const [x0, y0] = toCanvas(pts[0]);
    ctx.moveTo(x0, y0);
    for (let i = 1; i < pts.length; i++) {
      const [x, y] = toCanvas(pts[i]);
      ctx.lineTo(x, y);
    }
    ctx.stroke();
    for (const p of pts) {
      const [x, y] = toCanvas(p);
      ctx.fillStyle = "#31506e";
      ctx.beginPath();
      ctx.arc(x, y, 3, 0, 2 * Math.PI);
      ctx.fill();
    }

    // object disc
    const [ox, oy] = toCanvas(obj);
    ctx.fillStyle = "rgba(224, 128, 0, 0.5)";
    ctx.beginPath();
    ctx.arc(ox, oy, Math.max(objectRadius * scale, 3), 0, 2 * Math.PI);
    ctx.fill();

    // hand normal arrow
    const hand = pts[6];
    const tip: Vec3 = [
      hand[0] + n[0] * 0.12,
      hand[1] + n[1] * 0.12,
      hand[2] + n[2] * 0.12,
    ];
    const [hx, hy] = toCanvas(hand);
    const [tx, ty] = toCanvas(tip);
    ctx.strokeStyle = "#2e9e44";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(hx, hy);
    ctx.lineTo(tx, ty);
    ctx.stroke();
  }

  // status line
  const color = EVENT_COLORS[frame.event] ?? EVENT_COLORS.none;
  ctx.fillStyle = color;
  ctx.font = "13px sans-serif";
  ctx.fillText(
    `t=${frame.t}  reward=${cumulativeReward.toFixed(1)}  ` +
      `event=${frame.event}${frame.done ? "  [episode over]" : ""}`,
    12,
    height - 10,
  );
  return true;
}

/** The wrist angle is not observable directly; recover the in-plane normal
 * angle from the observed normal and subtract the joint pitch sum. */
export function wristFromObs(obs: number[]): number {
  const yaw = obs[OBS_Q];
  const n = [obs[OBS_NORMAL], obs[OBS_NORMAL + 1], obs[OBS_NORMAL + 2]];
  const along = n[0] * Math.cos(yaw) + n[1] * Math.sin(yaw);
  const theta = Math.atan2(along, n[2]);
  let pitch = 0;
  for (let i = 1; i < 6; i++) pitch += obs[OBS_Q + i];
  return theta - pitch;
}
