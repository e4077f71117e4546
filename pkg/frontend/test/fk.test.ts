import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { chainLength, handNormal, jointPositions } from "../src/fk.js";

interface Fixture {
  link_lengths: number[];
  base: [number, number, number];
  cases: Array<{
    q: number[];
    wrist: number;
    joints: number[][];
    normal: number[];
  }>;
}

const here = dirname(fileURLToPath(import.meta.url));
const fixture: Fixture = JSON.parse(
  readFileSync(join(here, "fk_fixtures.json"), "utf-8"),
);

describe("forward kinematics", () => {
  it("matches the simulator on recorded configurations within 1e-6", () => {
    for (const c of fixture.cases) {
      const pts = jointPositions(c.q, fixture.link_lengths, fixture.base);
      for (let i = 0; i < 7; i++) {
        for (let k = 0; k < 3; k++) {
          expect(Math.abs(pts[i][k] - c.joints[i][k])).toBeLessThan(1e-6);
        }
      }
      const n = handNormal(c.q, c.wrist);
      for (let k = 0; k < 3; k++) {
        expect(Math.abs(n[k] - c.normal[k])).toBeLessThan(1e-6);
      }
    }
  });

  it("draws the arm straight up at zero angles with full length", () => {
    const pts = jointPositions([0, 0, 0, 0, 0, 0]);
    const hand = pts[6];
    expect(hand[0]).toBeCloseTo(0, 12);
    expect(hand[1]).toBeCloseTo(0, 12);
    expect(hand[2]).toBeCloseTo(chainLength(), 12);
  });

  it("produces unit normals", () => {
    const n = handNormal([0.3, 0.5, -0.2, 0.8, 0.1, -0.4], 1.2);
    expect(Math.hypot(n[0], n[1], n[2])).toBeCloseTo(1, 12);
  });
});
