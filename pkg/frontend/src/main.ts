/**
 * Browser wiring: WebSocket transport, keyboard/slider capture, the
 * fixed-rate action sender, and canvas redraw on every server frame.
 */

import { InputMap, JOINT_KEY_PAIRS } from "./input.js";
import { TeleopClient, Transport } from "./protocol.js";
import { renderScene } from "./render.js";

const TASK_RADII: Record<string, number> = { ball: 0.035, bottle: 0.03 };

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function connect(url: string, task: string): void {
  const canvas = el<HTMLCanvasElement>("scene");
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");
  const status = el<HTMLElement>("status");
  const savedList = el<HTMLElement>("saved");
  const input = new InputMap();

  const socket = new WebSocket(url);
  const transport: Transport = {
    send: (text) => socket.send(text),
    close: () => socket.close(),
  };
  const client = new TeleopClient(transport);
  let ticker: number | undefined;

  socket.onmessage = (ev) => client.handleMessage(String(ev.data));
  socket.onclose = () => {
    client.handleClose();
    if (ticker !== undefined) window.clearInterval(ticker);
    status.textContent =
      client.model.connection === "busy"
        ? "server busy: another operator is connected"
        : client.model.refuseReason ?? "disconnected - reload to retry";
  };

  client.onChange((m) => {
    if (m.connection === "live" && ticker === undefined) {
      ticker = window.setInterval(() => {
        client.sendAction(input.action());
      }, 1000 / m.tickHz);
      status.textContent = `live @ ${m.tickHz} Hz`;
    }
    if (m.lastState) {
      renderScene(ctx, canvas.width, canvas.height, m.lastState,
                  m.cumulativeReward, TASK_RADII[task] ?? 0.03);
    }
    if (m.errors.length) {
      status.textContent = `server error: ${m.errors[m.errors.length - 1]}`;
    }
    savedList.textContent = m.savedPaths.length
      ? `saved: ${m.savedPaths.join(", ")}`
      : "no trajectories saved yet";
  });

  window.addEventListener("keydown", (ev) => input.keyDown(ev.key));
  window.addEventListener("keyup", (ev) => input.keyUp(ev.key));
  window.addEventListener("blur", () => input.clear());
  el<HTMLInputElement>("wrist").addEventListener("input", (ev) => {
    input.wristRate = Number((ev.target as HTMLInputElement).value);
  });
  el<HTMLInputElement>("aperture").addEventListener("input", (ev) => {
    input.apertureRate = Number((ev.target as HTMLInputElement).value);
  });
  el<HTMLButtonElement>("reset").addEventListener("click", () => {
    client.sendReset(Number(el<HTMLInputElement>("seed").value) || 0);
  });

  const help = JOINT_KEY_PAIRS
    .map(([p, m], i) => `j${i}: ${p}/${m}`)
    .join("  ");
  el<HTMLElement>("bindings").textContent = help;
}

const params = new URLSearchParams(window.location.search);
connect(
  params.get("url") ?? "ws://127.0.0.1:8765",
  params.get("task") ?? "ball",
);
