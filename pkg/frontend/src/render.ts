/**
 * Three.js scene: terrain mesh from an ESRI ASCII layer, depth overlay
 * colored per tag, particle sprites, barrier boxes, and the two cameras
 * (orbit overview and first-person with the overview inset).
 */

import * as THREE from "three";
import { colorFor, ColormapTag } from "./colormap";
import { FrameMessage, decodeDepth, FrameGrid } from "./protocol";
import { EYE_HEIGHT_M } from "./viewstate";

export interface TerrainLayer {
  nRows: number;
  nCols: number;
  cellSize: number;
  originX: number;
  originY: number;
  values: Float32Array;
  min: number;
  max: number;
}

/** Parse the `ascii` field of a /layers response. */
export function parseAsciiLayer(text: string): TerrainLayer {
  const lines = text.split("\n").filter((l) => l.trim().length > 0);
  const header: Record<string, number> = {};
  let i = 0;
  for (; i < lines.length; i++) {
    const m = lines[i].trim().split(/\s+/);
    if (!/^[a-zA-Z]/.test(m[0])) break;
    header[m[0].toLowerCase()] = Number(m[1]);
  }
  const nCols = header["ncols"];
  const nRows = header["nrows"];
  const values = new Float32Array(nRows * nCols);
  let min = Infinity;
  let max = -Infinity;
  // file rows run north to south; store row 0 as the southernmost
  for (let r = 0; r < nRows; r++) {
    const row = lines[i + r].trim().split(/\s+/).map(Number);
    for (let c = 0; c < nCols; c++) {
      const v = row[c];
      values[(nRows - 1 - r) * nCols + c] = v;
      if (v < min) min = v;
      if (v > max) max = v;
    }
  }
  return {
    nRows,
    nCols,
    cellSize: header["cellsize"],
    originX: header["xllcorner"],
    originY: header["yllcorner"],
    values,
    min,
    max,
  };
}

export class Scene3D {
  readonly scene = new THREE.Scene();
  readonly overviewCamera: THREE.PerspectiveCamera;
  readonly firstPersonCamera: THREE.PerspectiveCamera;
  private terrain: TerrainLayer | null = null;
  private terrainMesh: THREE.Mesh | null = null;
  private overlay: THREE.Mesh | null = null;
  private particles: THREE.Points | null = null;
  private barrierMeshes = new Map<string, THREE.Mesh>();

  constructor(aspect: number) {
    this.overviewCamera = new THREE.PerspectiveCamera(50, aspect, 0.1, 5000);
    this.firstPersonCamera = new THREE.PerspectiveCamera(70, aspect, 0.1, 2000);
    this.scene.background = new THREE.Color(0x10131a);
    const sun = new THREE.DirectionalLight(0xffffff, 1.4);
    sun.position.set(120, -80, 200);
    this.scene.add(sun, new THREE.AmbientLight(0x777777));
  }

  heightAt(x: number, y: number): number {
    const t = this.terrain;
    if (!t) return 0;
    const c = Math.min(t.nCols - 1, Math.max(0, Math.round((x - t.originX) / t.cellSize - 0.5)));
    const r = Math.min(t.nRows - 1, Math.max(0, Math.round((y - t.originY) / t.cellSize - 0.5)));
    return t.values[r * t.nCols + c];
  }

  setTerrain(layer: TerrainLayer): void {
    this.terrain = layer;
    if (this.terrainMesh) this.scene.remove(this.terrainMesh);
    const geo = new THREE.PlaneGeometry(
      layer.nCols * layer.cellSize,
      layer.nRows * layer.cellSize,
      layer.nCols - 1,
      layer.nRows - 1,
    );
    geo.translate(
      layer.originX + (layer.nCols * layer.cellSize) / 2,
      layer.originY + (layer.nRows * layer.cellSize) / 2,
      0,
    );
    const pos = geo.attributes.position as THREE.BufferAttribute;
    for (let v = 0; v < pos.count; v++) {
      pos.setZ(v, this.heightAt(pos.getX(v), pos.getY(v)));
    }
    geo.computeVertexNormals();
    const mat = new THREE.MeshStandardMaterial({ color: 0xcfc8bd, flatShading: false });
    this.terrainMesh = new THREE.Mesh(geo, mat);
    this.scene.add(this.terrainMesh);

    const cx = layer.originX + (layer.nCols * layer.cellSize) / 2;
    const cy = layer.originY + (layer.nRows * layer.cellSize) / 2;
    const span = Math.max(layer.nCols, layer.nRows) * layer.cellSize;
    this.overviewCamera.position.set(cx, cy - span * 0.9, layer.max + span * 0.7);
    this.overviewCamera.up.set(0, 0, 1);
    this.overviewCamera.lookAt(cx, cy, (layer.min + layer.max) / 2);
  }

  /** Color a raster overlay draped slightly above the terrain. */
  setOverlay(values: Float32Array, grid: FrameGrid, tag: ColormapTag, min: number, max: number): void {
    if (!this.terrain) return;
    if (this.overlay) this.scene.remove(this.overlay);
    const geo = new THREE.PlaneGeometry(
      grid.n_cols * grid.cell_size,
      grid.n_rows * grid.cell_size,
      grid.n_cols - 1,
      grid.n_rows - 1,
    );
    geo.translate(
      grid.origin[0] + (grid.n_cols * grid.cell_size) / 2,
      grid.origin[1] + (grid.n_rows * grid.cell_size) / 2,
      0,
    );
    const pos = geo.attributes.position as THREE.BufferAttribute;
    const colors = new Float32Array(pos.count * 4);
    for (let v = 0; v < pos.count; v++) {
      const x = pos.getX(v);
      const y = pos.getY(v);
      pos.setZ(v, this.heightAt(x, y) + 0.25);
      const c = Math.min(grid.n_cols - 1, Math.max(0, Math.floor((x - grid.origin[0]) / grid.cell_size)));
      const r = Math.min(grid.n_rows - 1, Math.max(0, Math.floor((y - grid.origin[1]) / grid.cell_size)));
      const rgba = colorFor(values[r * grid.n_cols + c], min, max, tag);
      colors.set([rgba.r, rgba.g, rgba.b, rgba.a], v * 4);
    }
    geo.setAttribute("color", new THREE.BufferAttribute(colors, 4));
    const mat = new THREE.MeshBasicMaterial({ vertexColors: true, transparent: true });
    this.overlay = new THREE.Mesh(geo, mat);
    this.scene.add(this.overlay);
  }

  applyFrame(frame: FrameMessage): void {
    const depth = decodeDepth(frame.depth_b64);
    let max = 0;
    for (let i = 0; i < depth.length; i++) if (depth[i] > max) max = depth[i];
    this.setOverlay(depth, frame.grid, "blue_red", 0, Math.max(max, 0.05));

    if (this.particles) this.scene.remove(this.particles);
    const pts = new Float32Array(frame.particles.length * 3);
    const cols = new Float32Array(frame.particles.length * 3);
    frame.particles.forEach((p, i) => {
      pts.set([p[0], p[1], p[2]], i * 3);
      const c = colorFor(p[3], 0, Math.max(frame.stats.max_speed, 1e-6), "orange_red");
      cols.set([c.r, c.g, c.b], i * 3);
    });
    const geo = new THREE.BufferGeometry();
    geo.setAttribute("position", new THREE.BufferAttribute(pts, 3));
    geo.setAttribute("color", new THREE.BufferAttribute(cols, 3));
    const mat = new THREE.PointsMaterial({ size: 1.6, vertexColors: true });
    this.particles = new THREE.Points(geo, mat);
    this.scene.add(this.particles);
  }

  setBarrier(id: string, center: [number, number, number], yaw: number,
             dims: { height: number; width: number; thickness: number }): void {
    let mesh = this.barrierMeshes.get(id);
    if (!mesh) {
      const geo = new THREE.BoxGeometry(dims.thickness, dims.width, dims.height);
      const mat = new THREE.MeshStandardMaterial({ color: 0x4488ee, transparent: true, opacity: 0.9 });
      mesh = new THREE.Mesh(geo, mat);
      this.barrierMeshes.set(id, mesh);
      this.scene.add(mesh);
    }
    mesh.position.set(center[0], center[1], center[2]);
    mesh.rotation.set(0, 0, yaw);
  }

  removeBarrier(id: string): void {
    const mesh = this.barrierMeshes.get(id);
    if (mesh) {
      this.scene.remove(mesh);
      this.barrierMeshes.delete(id);
    }
  }

  teleportFirstPerson(x: number, y: number): void {
    const z = this.heightAt(x, y) + EYE_HEIGHT_M;
    this.firstPersonCamera.position.set(x, y, z);
    this.firstPersonCamera.up.set(0, 0, 1);
    const t = this.terrain;
    const cx = t ? t.originX + (t.nCols * t.cellSize) / 2 : x + 10;
    const cy = t ? t.originY + (t.nRows * t.cellSize) / 2 : y;
    this.firstPersonCamera.lookAt(cx, cy, z);
  }
}
