import { describe, expect, it } from "vitest";

import { InputMap } from "../src/input.js";
import { wristFromObs } from "../src/render.js";
import { handNormal } from "../src/fk.js";

describe("InputMap", () => {
  it("maps no input to the zero action", () => {
    expect(new InputMap().action()).toEqual([0, 0, 0, 0, 0, 0, 0, 0]);
  });

  it("maps the first joint pair to action[0]", () => {
    const input = new InputMap();
    input.keyDown("q");
    expect(input.action()[0]).toBe(1);
    input.keyUp("q");
    input.keyDown("a");
    expect(input.action()[0]).toBe(-1);
  });

  it("opposed keys cancel", () => {
    const input = new InputMap();
    input.keyDown("w");
    input.keyDown("s");
    expect(input.action()[1]).toBe(0);
  });

  it("sliders feed wrist and aperture components", () => {
    const input = new InputMap();
    input.wristRate = 0.5;
    input.apertureRate = -2; // out-of-range slider values clamp
    const a = input.action();
    expect(a[6]).toBe(0.5);
    expect(a[7]).toBe(-1);
  });

  it("slider midpoint means a zero component", () => {
    const input = new InputMap();
    input.wristRate = 0;
    expect(input.action()[6]).toBe(0);
  });

  it("is case-insensitive and clearable", () => {
    const input = new InputMap();
    input.keyDown("Q");
    expect(input.action()[0]).toBe(1);
    input.clear();
    expect(input.action()[0]).toBe(0);
  });
});

describe("wrist recovery from the observation", () => {
  it("round-trips through the hand normal", () => {
    const q = [0.4, 0.6, -0.3, 0.5, 0.2, -0.1];
    const wrist = 0.85;
    const n = handNormal(q, wrist);
    const obs = new Array(20).fill(0);
    for (let i = 0; i < 6; i++) obs[i] = q[i];
    obs[9] = n[0];
    obs[10] = n[1];
    obs[11] = n[2];
    expect(wristFromObs(obs)).toBeCloseTo(wrist, 9);
  });
});
