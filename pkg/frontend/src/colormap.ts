/**
 * Layer color scales. Endpoints are fixed per tag: blue_red runs from blue
 * at the minimum to red at the maximum (causality layers), orange_red is the
 * sequential flow-path scale, purple is the constant deposit highlight with
 * value-driven opacity, and red_yellow_green grades impact force from green
 * (attenuated) through yellow to deep red (high impact).
 *
 * Pure functions of (value, min, max, tag); unit-testable without rendering.
 */

export type ColormapTag = "blue_red" | "orange_red" | "purple" | "red_yellow_green";

export interface Rgba {
  r: number;
  g: number;
  b: number;
  a: number;
}

export const COLORMAP_ENDPOINTS: Record<ColormapTag, { min: Rgba; max: Rgba }> = {
  blue_red: {
    min: { r: 0.0, g: 0.0, b: 1.0, a: 1.0 },
    max: { r: 1.0, g: 0.0, b: 0.0, a: 1.0 },
  },
  orange_red: {
    min: { r: 1.0, g: 0.55, b: 0.0, a: 1.0 },
    max: { r: 0.85, g: 0.0, b: 0.0, a: 1.0 },
  },
  purple: {
    min: { r: 0.55, g: 0.1, b: 0.7, a: 0.0 },
    max: { r: 0.55, g: 0.1, b: 0.7, a: 1.0 },
  },
  red_yellow_green: {
    min: { r: 0.0, g: 0.7, b: 0.2, a: 1.0 },
    max: { r: 0.85, g: 0.0, b: 0.0, a: 1.0 },
  },
};

const YELLOW: Rgba = { r: 1.0, g: 1.0, b: 0.0, a: 1.0 };

function lerp(a: Rgba, b: Rgba, t: number): Rgba {
  return {
    r: a.r + (b.r - a.r) * t,
    g: a.g + (b.g - a.g) * t,
    b: a.b + (b.b - a.b) * t,
    a: a.a + (b.a - a.a) * t,
  };
}

/** Normalized position of value in [min, max]; degenerate ranges map to 0. */
export function normalize(value: number, min: number, max: number): number {
  if (!(max > min)) return 0.0;
  const t = (value - min) / (max - min);
  return Math.min(1.0, Math.max(0.0, t));
}

export function colorFor(value: number, min: number, max: number, tag: ColormapTag): Rgba {
  const t = normalize(value, min, max);
  const ends = COLORMAP_ENDPOINTS[tag];
  if (tag === "red_yellow_green") {
    // low impact green, mid yellow, deep red at the top
    return t < 0.5 ? lerp(ends.min, YELLOW, t * 2) : lerp(YELLOW, ends.max, (t - 0.5) * 2);
  }
  return lerp(ends.min, ends.max, t);
}

export function cssColor(c: Rgba): string {
  const f = (x: number) => Math.round(x * 255);
  return `rgba(${f(c.r)}, ${f(c.g)}, ${f(c.b)}, ${c.a.toFixed(3)})`;
}
