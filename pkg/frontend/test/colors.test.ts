import { describe, expect, it } from "vitest";

import { lightnessOf, SPECIAL_COLORS, topicColor, TOPIC_LIGHTNESS } from "../src/colors.js";

describe("color encoding rules", () => {
  it("all topic colors share one lightness", () => {
    const lightnesses = new Set(
      Array.from({ length: 10 }, (_, i) => lightnessOf(topicColor(i))),
    );
    expect(lightnesses).toEqual(new Set([TOPIC_LIGHTNESS]));
  });

  it("distinct hues across the palette", () => {
    const colors = new Set(Array.from({ length: 10 }, (_, i) => topicColor(i)));
    expect(colors.size).toBe(10);
  });

  it("special change colors are darker than every topic color", () => {
    for (const key of ["added", "removed", "moved", "marker"] as const) {
      expect(lightnessOf(SPECIAL_COLORS[key])).toBeLessThan(TOPIC_LIGHTNESS);
    }
  });
});
