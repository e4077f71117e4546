/**
 * Keyboard and slider state mapped onto the 8-component action vector:
 * six key pairs drive the joint deltas, two sliders drive the wrist and
 * aperture rates. No input means a zero action.
 */

import { ACT_DIM } from "./protocol.js";

export const JOINT_KEY_PAIRS: Array<[string, string]> = [
  ["q", "a"],
  ["w", "s"],
  ["e", "d"],
  ["r", "f"],
  ["t", "g"],
  ["y", "h"],
];

export class InputMap {
  private down = new Set<string>();
  wristRate = 0; // slider value in [-1, 1]
  apertureRate = 0; // slider value in [-1, 1]

  keyDown(key: string): void {
    this.down.add(key.toLowerCase());
  }

  keyUp(key: string): void {
    this.down.delete(key.toLowerCase());
  }

  clear(): void {
    this.down.clear();
  }

  /** Action for the current tick. Opposed keys cancel. */
  action(): number[] {
    const a = new Array(ACT_DIM).fill(0);
    JOINT_KEY_PAIRS.forEach(([plus, minus], i) => {
      if (this.down.has(plus)) a[i] += 1;
      if (this.down.has(minus)) a[i] -= 1;
    });
    a[6] = clamp(this.wristRate);
    a[7] = clamp(this.apertureRate);
    return a;
  }
}

function clamp(x: number): number {
  if (Number.isNaN(x)) return 0;
  return Math.min(1, Math.max(-1, x));
}
