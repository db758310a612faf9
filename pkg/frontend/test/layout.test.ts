import { describe, expect, it } from "vitest";

import {
  barcodeShade,
  barWidth,
  coverageBarColor,
  flowStyle,
  maxMovedCount,
  phraseFontSize,
  stackedSegments,
  MAX_FLOW_THICKNESS,
} from "../src/layout.js";

describe("flow curves", () => {
  it("thickness and gray level follow sqrt of moved count", () => {
    const quarter = flowStyle(25, 100);
    expect(quarter.thickness).toBeCloseTo(MAX_FLOW_THICKNESS / 2);
    expect(quarter.gray).toBeCloseTo(0.5);
    const full = flowStyle(100, 100);
    expect(full.thickness).toBeCloseTo(MAX_FLOW_THICKNESS);
    expect(full.gray).toBeCloseTo(1);
  });

  it("larger moves are thicker and darker", () => {
    const small = flowStyle(4, 100);
    const big = flowStyle(64, 100);
    expect(big.thickness).toBeGreaterThan(small.thickness);
    expect(big.gray).toBeGreaterThan(small.gray);
  });

  it("zero moves produce no curve", () => {
    expect(flowStyle(0, 10)).toEqual({ thickness: 0, gray: 0 });
  });
});

describe("bars and segments", () => {
  it("bar width scales to the largest topic", () => {
    expect(barWidth(50, 100, 200)).toBe(100);
    expect(barWidth(100, 100, 200)).toBe(200);
  });

  it("stacked segments cover removed, moved, added, and retained", () => {
    const seg = stackedSegments({ removed: 2, retained: 5, moved_out: { "4": 3 } }, 10);
    expect(seg.removed).toBeCloseTo(0.1);
    expect(seg.moved).toBeCloseTo(0.15);
    expect(seg.added).toBeCloseTo(0.5);
    expect(seg.retained).toBeCloseTo(0.25);
    expect(seg.removed + seg.moved + seg.added + seg.retained).toBeCloseTo(1);
  });

  it("max moved count scans the whole delta", () => {
    expect(
      maxMovedCount({
        flows: {
          "1": { removed: 0, retained: 1, moved_out: { "2": 7 } },
          "2": { removed: 0, retained: 1, moved_out: { "1": 3, "3": 9 } },
        },
        added: {},
        matched: {},
        vanished: [],
        appeared: [],
      }),
    ).toBe(9);
  });
});

describe("scales", () => {
  it("font size grows with score", () => {
    expect(phraseFontSize(100, 100)).toBeGreaterThan(phraseFontSize(25, 100));
    expect(phraseFontSize(0, 0)).toBe(12);
  });

  it("barcode shade maps 0..1 to white..black", () => {
    expect(barcodeShade(0)).toBe("hsl(0, 0%, 100%)");
    expect(barcodeShade(1)).toBe("hsl(0, 0%, 0%)");
  });

  it("coverage ramp runs red to blue", () => {
    expect(coverageBarColor(0)).toContain("hsl(5");
    expect(coverageBarColor(4)).toContain("hsl(225");
  });
});
