import { describe, expect, it } from "vitest";

import { COLORMAP_ENDPOINTS, ColormapTag, colorFor, normalize } from "./colormap";

const TAGS: ColormapTag[] = ["blue_red", "orange_red", "purple", "red_yellow_green"];

describe("colormap endpoints", () => {
  it("hits the exact endpoint color at min and max for all four tags", () => {
    for (const tag of TAGS) {
      expect(colorFor(0.0, 0.0, 10.0, tag)).toEqual(COLORMAP_ENDPOINTS[tag].min);
      expect(colorFor(10.0, 0.0, 10.0, tag)).toEqual(COLORMAP_ENDPOINTS[tag].max);
    }
  });

  it("blue_red runs blue to red", () => {
    expect(colorFor(0, 0, 1, "blue_red")).toEqual({ r: 0, g: 0, b: 1, a: 1 });
    expect(colorFor(1, 0, 1, "blue_red")).toEqual({ r: 1, g: 0, b: 0, a: 1 });
  });

  it("red_yellow_green grades green, yellow, red", () => {
    const lo = colorFor(0, 0, 1, "red_yellow_green");
    const mid = colorFor(0.5, 0, 1, "red_yellow_green");
    const hi = colorFor(1, 0, 1, "red_yellow_green");
    expect(lo.g).toBeGreaterThan(lo.r);
    expect(mid).toEqual({ r: 1, g: 1, b: 0, a: 1 });
    expect(hi.r).toBeGreaterThan(hi.g);
  });

  it("purple keeps hue constant and ramps opacity", () => {
    const lo = colorFor(0, 0, 1, "purple");
    const hi = colorFor(1, 0, 1, "purple");
    expect([lo.r, lo.g, lo.b]).toEqual([hi.r, hi.g, hi.b]);
    expect(lo.a).toBe(0.0);
    expect(hi.a).toBe(1.0);
  });

  it("clamps out-of-range values to the endpoints", () => {
    for (const tag of TAGS) {
      expect(colorFor(-5, 0, 1, tag)).toEqual(COLORMAP_ENDPOINTS[tag].min);
      expect(colorFor(99, 0, 1, tag)).toEqual(COLORMAP_ENDPOINTS[tag].max);
    }
  });

  it("degenerate range maps everything to the minimum", () => {
    expect(normalize(3.0, 2.0, 2.0)).toBe(0.0);
  });
});
