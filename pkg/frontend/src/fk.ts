/**
 * Client-side forward kinematics for display only. Mirrors the simulator's
 * chain exactly: a yaw base joint, a fixed vertical first link, five pitch
 * joints in the yaw plane, and a wrist pitch for the hand normal.
 */

export type Vec3 = [number, number, number];

export const LINK_LENGTHS = [0.3, 0.25, 0.2, 0.15, 0.1, 0.08];

export function jointPositions(
  q: number[],
  linkLengths: number[] = LINK_LENGTHS,
  base: Vec3 = [0, 0, 0],
): Vec3[] {
  const yaw = q[0];
  const hx = Math.cos(yaw);
  const hy = Math.sin(yaw);
  const pts: Vec3[] = [[base[0], base[1], base[2]]];
  pts.push([base[0], base[1], base[2] + linkLengths[0]]);
  let c = 0;
  for (let i = 1; i < 6; i++) {
    c += q[i];
    const s = Math.sin(c);
    const prev = pts[i];
    pts.push([
      prev[0] + linkLengths[i] * s * hx,
      prev[1] + linkLengths[i] * s * hy,
      prev[2] + linkLengths[i] * Math.cos(c),
    ]);
  }
  return pts;
}

export function handPosition(
  q: number[],
  linkLengths: number[] = LINK_LENGTHS,
  base: Vec3 = [0, 0, 0],
): Vec3 {
  return jointPositions(q, linkLengths, base)[6];
}

export function handNormal(q: number[], wrist: number): Vec3 {
  const yaw = q[0];
  let c = wrist;
  for (let i = 1; i < 6; i++) c += q[i];
  const n: Vec3 = [
    Math.sin(c) * Math.cos(yaw),
    Math.sin(c) * Math.sin(yaw),
    Math.cos(c),
  ];
  const norm = Math.hypot(n[0], n[1], n[2]);
  return [n[0] / norm, n[1] / norm, n[2] / norm];
}

export function chainLength(linkLengths: number[] = LINK_LENGTHS): number {
  return linkLengths.reduce((a, b) => a + b, 0);
}
