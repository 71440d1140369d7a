/**
 * Application entry: connect, load a scenario, render frames, steer barriers
 * by dragging, toggle layers, filter the event timeline, teleport on click.
 */

import * as THREE from "three";
import { colorFor } from "./colormap";
import { FrameStore } from "./frameStore";
import { SteeringClient } from "./net";
import { FrameMessage } from "./protocol";
import { parseAsciiLayer, Scene3D } from "./render";
import { DragThrottle } from "./throttle";
import { filterEvents, glyphRadius, LandslideEvent, parseEventsCsv } from "./timeline";
import { LAYER_STYLES, ViewState } from "./viewstate";

const PUBLISH_RATE = 20; // server default; drags are throttled to this

const params = new URLSearchParams(window.location.search);
const host = params.get("server") ?? `${window.location.hostname}:8700`;
const scenarioId = params.get("scenario") ?? "vchannel";
const sessionId = params.get("session") ?? "default";

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const statusEl = document.getElementById("status")!;
const statsEl = document.getElementById("stats")!;
const layersEl = document.getElementById("layers")!;
const timelineEl = document.getElementById("timeline") as HTMLInputElement;
const timelineLabel = document.getElementById("timeline-label")!;
const eventPanel = document.getElementById("event-panel")!;
const wimEl = document.getElementById("wim") as HTMLCanvasElement;

const renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
renderer.setSize(window.innerWidth, window.innerHeight);
const scene = new Scene3D(window.innerWidth / window.innerHeight);
const view = new ViewState();
const frames = new FrameStore();
const client = new SteeringClient(`ws://${host}/session/${sessionId}`);
const throttle = new DragThrottle(PUBLISH_RATE, () => performance.now() / 1000);

let events: LandslideEvent[] = [];
let barrierCount = 0;
let draggingBarrier: string | null = null;
let pendingFrame: FrameMessage | null = null;

function setStatus(text: string): void {
  statusEl.textContent = text;
}

client.onStatus = (ok) => {
  view.connected = ok;
  setStatus(ok ? "connected" : "disconnected");
};

client.onFrame = (frame) => {
  // patches are queued and applied once per animation tick
  pendingFrame = frame;
};

async function loadLayer(name: string): Promise<void> {
  const res = await fetch(`http://${host}/layers/${scenarioId}.${name}`);
  const body = await res.json();
  if (body.error) throw new Error(body.error);
  const layer = parseAsciiLayer(body.ascii);
  if (name === "terrain") {
    scene.setTerrain(layer);
  } else {
    const style = LAYER_STYLES[name] ?? { colormap: body.colormap, opacity: 0.7 };
    scene.setOverlay(
      layer.values,
      {
        n_rows: layer.nRows,
        n_cols: layer.nCols,
        cell_size: layer.cellSize,
        origin: [layer.originX, layer.originY],
      },
      style.colormap,
      body.min,
      body.max,
    );
  }
}

async function loadEvents(): Promise<void> {
  try {
    const res = await fetch(`http://${host}/static/events.csv`);
    if (res.ok) events = parseEventsCsv(await res.text());
  } catch {
    events = [];
  }
  drawTimeline();
}

function drawTimeline(): void {
  const year = Number(timelineEl.value);
  timelineLabel.textContent = `${timelineEl.min}..${year}`;
  const visible = events.length ? filterEvents(events, Number(timelineEl.min), year) : [];
  eventPanel.innerHTML = visible
    .map(
      (e) =>
        `<div class="glyph" data-id="${e.id}" style="font-size:${glyphRadius(e.scale)}px">` +
        `&#9679; ${e.id} (${e.date})</div>`,
    )
    .join("");
  for (const el of Array.from(eventPanel.querySelectorAll(".glyph"))) {
    el.addEventListener("click", () => {
      const ev = visible.find((x) => x.id === (el as HTMLElement).dataset.id);
      if (ev) {
        setStatus(`${ev.id}: ${ev.date}, scale ${ev.scale}, ${ev.description}`);
      }
    });
  }
}

function buildLayerToggles(): void {
  for (const name of ["rainfall", "susceptibility", "depth"]) {
    const btn = document.createElement("button");
    btn.textContent = name;
    btn.onclick = () => {
      view.toggleLayer(name);
      if (view.activeLayers.has(name) && name !== "depth") void loadLayer(name);
      btn.classList.toggle("active", view.activeLayers.has(name));
    };
    layersEl.appendChild(btn);
  }
}

function screenToTerrain(ev: MouseEvent): [number, number] | null {
  const ndc = new THREE.Vector2(
    (ev.clientX / window.innerWidth) * 2 - 1,
    -(ev.clientY / window.innerHeight) * 2 + 1,
  );
  const ray = new THREE.Raycaster();
  ray.setFromCamera(ndc, scene.overviewCamera);
  const hits = ray.intersectObjects(scene.scene.children, false);
  for (const h of hits) {
    if (h.object.type === "Mesh") return [h.point.x, h.point.y];
  }
  return null;
}

canvas.addEventListener("dblclick", (ev) => {
  const hit = screenToTerrain(ev);
  if (hit) {
    view.teleport(hit[0], hit[1]);
    scene.teleportFirstPerson(hit[0], hit[1]);
    wimEl.style.display = "block"; // WIM inset always accompanies first person
  }
});

canvas.addEventListener("contextmenu", (ev) => {
  ev.preventDefault();
  view.toOverview();
  wimEl.style.display = "none";
});

canvas.addEventListener("mousedown", async (ev) => {
  if (ev.shiftKey) {
    const hit = screenToTerrain(ev);
    if (!hit) return;
    if (!view.steering) {
      view.steering = await client.claimSteering();
      if (!view.steering) {
        setStatus("observer mode: steering lock held elsewhere");
        return;
      }
    }
    const id = `b${++barrierCount}`;
    await client.send("place_barrier", { barrier: { id, center: hit, height: 6.0, width: 24.0, thickness: 1.6 } });
    scene.setBarrier(id, [hit[0], hit[1], scene.heightAt(hit[0], hit[1]) + 3], 0, {
      height: 6,
      width: 24,
      thickness: 1.6,
    });
    draggingBarrier = id;
  }
});

canvas.addEventListener("mousemove", (ev) => {
  if (!draggingBarrier || !view.steering) return;
  const hit = screenToTerrain(ev);
  if (!hit) return;
  const pose = throttle.submit({ x: hit[0], y: hit[1] });
  if (pose) {
    // ghost preview moves immediately; the ack confirms the real pose
    scene.setBarrier(draggingBarrier, [pose.x, pose.y, scene.heightAt(pose.x, pose.y) + 3], 0, {
      height: 6,
      width: 24,
      thickness: 1.6,
    });
    void client.send("move_barrier", { id: draggingBarrier, center: [pose.x, pose.y] });
  }
});

canvas.addEventListener("mouseup", () => {
  draggingBarrier = null;
});

function bindButtons(): void {
  (document.getElementById("btn-start") as HTMLButtonElement).onclick = async () => {
    if (!view.steering) view.steering = await client.claimSteering();
    await client.send("start");
  };
  (document.getElementById("btn-pause") as HTMLButtonElement).onclick = () => client.send("pause");
  (document.getElementById("btn-reset") as HTMLButtonElement).onclick = () => client.send("reset");
  timelineEl.oninput = drawTimeline;
}

function tick(): void {
  requestAnimationFrame(tick);
  if (pendingFrame) {
    if (frames.apply(pendingFrame)) scene.applyFrame(pendingFrame);
    pendingFrame = null;
    const s = frames.state;
    statsEl.textContent =
      `t=${s.t.toFixed(2)} s  particles=${s.particleCount}  ` +
      `max speed=${s.maxSpeed.toFixed(2)} m/s  max depth=${s.maxDepth.toFixed(2)} m  ` +
      `overtopped=${s.overtoppedVolume.toFixed(1)} m3`;
    const swatch = colorFor(s.maxDepth, 0, Math.max(s.maxDepth, 1e-6), "blue_red");
    statsEl.style.borderColor = `rgb(${swatch.r * 255},${swatch.g * 255},${swatch.b * 255})`;
  }
  const cam = view.camera.kind === "first_person" ? scene.firstPersonCamera : scene.overviewCamera;
  renderer.render(scene.scene, cam);
  if (view.wimVisible) {
    const wim = wimEl.getContext("2d");
    if (wim && frames.state.depth) drawWim(wim);
  }
}

function drawWim(ctx: CanvasRenderingContext2D): void {
  const s = frames.state;
  if (!s.depth) return;
  ctx.fillStyle = "#222";
  ctx.fillRect(0, 0, wimEl.width, wimEl.height);
  // coarse depth minimap
  const n = Math.floor(Math.sqrt(s.depth.length));
  const sx = wimEl.width / n;
  for (let i = 0; i < s.depth.length && i < n * n; i++) {
    const d = s.depth[i];
    if (d <= 0) continue;
    const c = colorFor(d, 0, Math.max(s.maxDepth, 1e-6), "blue_red");
    ctx.fillStyle = `rgb(${c.r * 255},${c.g * 255},${c.b * 255})`;
    ctx.fillRect((i % n) * sx, wimEl.height - Math.floor(i / n) * sx, sx, sx);
  }
}

async function start(): Promise<void> {
  buildLayerToggles();
  bindButtons();
  await loadEvents();
  try {
    await client.connect();
    await client.send("load_scenario", { id: scenarioId }).catch(() => undefined);
    await loadLayer("terrain");
  } catch (err) {
    setStatus(`offline: ${(err as Error).message}`);
  }
  tick();
}

void start();
