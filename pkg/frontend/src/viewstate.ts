/**
 * UI view state: camera mode, active layers, timeline range, lock status.
 * Exactly one camera mode is active; the first-person mode always carries
 * the overview inset (world-in-miniature) so situational context survives
 * the teleport.
 */

import { ColormapTag } from "./colormap";

export type CameraMode =
  | { kind: "overview" }
  | { kind: "first_person"; x: number; y: number };

export interface LayerStyle {
  name: string;
  colormap: ColormapTag;
  opacity: number;
}

export const EYE_HEIGHT_M = 1.7;

export class ViewState {
  camera: CameraMode = { kind: "overview" };
  activeLayers = new Set<string>();
  timeline: [number, number] = [1984, 2021];
  connected = false;
  steering = false;

  /** The WIM inset is visible whenever the camera is first-person. */
  get wimVisible(): boolean {
    return this.camera.kind === "first_person";
  }

  teleport(x: number, y: number): void {
    this.camera = { kind: "first_person", x, y };
  }

  toOverview(): void {
    this.camera = { kind: "overview" };
  }

  toggleLayer(name: string): void {
    if (this.activeLayers.has(name)) this.activeLayers.delete(name);
    else this.activeLayers.add(name);
  }
}

export const LAYER_STYLES: Record<string, LayerStyle> = {
  rainfall: { name: "rainfall", colormap: "blue_red", opacity: 0.65 },
  susceptibility: { name: "susceptibility", colormap: "blue_red", opacity: 0.65 },
  flow_paths: { name: "flow_paths", colormap: "orange_red", opacity: 0.8 },
  deposits: { name: "deposits", colormap: "purple", opacity: 0.85 },
  hazard: { name: "hazard", colormap: "red_yellow_green", opacity: 0.75 },
  risk: { name: "risk", colormap: "red_yellow_green", opacity: 0.75 },
  depth: { name: "depth", colormap: "blue_red", opacity: 0.9 },
};
