import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { heatmapCells, HeatmapLengthMismatch, shade, shadeAlpha } from "../src/heatmap.js";
import type { PplGainPayload } from "../src/types.js";

const fixture = JSON.parse(
  readFileSync(new URL("../fixtures/ppl_gain.json", import.meta.url), "utf-8"),
) as PplGainPayload;

describe("heatmap shading", () => {
  it("is monotone in intensity", () => {
    const samples = [0, 0.1, 0.25, 0.5, 0.75, 0.9, 1];
    const alphas = samples.map((s) => shadeAlpha(shade(s)));
    for (let i = 1; i < alphas.length; i++) {
      expect(alphas[i]).toBeGreaterThan(alphas[i - 1]);
    }
  });

  it("renders intensity 0 unshaded", () => {
    expect(shade(0)).toBe("transparent");
  });

  it("renders the max-intensity unit darkest (fixture)", () => {
    const intensities = fixture.scores.map((s) => s.intensity);
    const cells = heatmapCells(fixture.units, intensities);
    const alphas = cells.map((c) => shadeAlpha(c.background));
    const peak = intensities.indexOf(Math.max(...intensities));
    expect(Math.max(...intensities)).toBe(1);
    for (let i = 0; i < alphas.length; i++) {
      expect(alphas[peak]).toBeGreaterThanOrEqual(alphas[i]);
    }
  });

  it("shades strictly decreasing intensities in decreasing order", () => {
    const units = [1, 2, 3].map((i) => ({ index: i, text: `turn ${i}` }));
    const cells = heatmapCells(units, [1.0, 0.5, 0.0]);
    const alphas = cells.map((c) => shadeAlpha(c.background));
    expect(alphas[0]).toBeGreaterThan(alphas[1]);
    expect(alphas[1]).toBeGreaterThan(alphas[2]);
    expect(cells[2].background).toBe("transparent");
  });

  it("renders all zeros with no shading", () => {
    const units = [1, 2].map((i) => ({ index: i, text: "t" }));
    for (const cell of heatmapCells(units, [0, 0])) {
      expect(cell.background).toBe("transparent");
    }
  });

  it("throws on length mismatch, producing no partial render", () => {
    const units = [1, 2].map((i) => ({ index: i, text: "t" }));
    expect(() => heatmapCells(units, [0.5])).toThrow(HeatmapLengthMismatch);
  });

  it("keeps unit text verbatim from the payload", () => {
    const cells = heatmapCells(
      fixture.units,
      fixture.scores.map((s) => s.intensity),
    );
    cells.forEach((cell, i) => {
      expect(cell.text).toBe(fixture.units[i].text);
      expect(cell.intensity).toBe(fixture.scores[i].intensity);
    });
  });
});
