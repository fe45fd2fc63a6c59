import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import {
  AXIS_MAX,
  clipScore,
  MissingTrait,
  radarGeometry,
  radarSvg,
  TRAIT_ORDER,
} from "../src/radar.js";
import type { PersonaPayload } from "../src/types.js";

const fixture = JSON.parse(
  readFileSync(new URL("../fixtures/persona.json", import.meta.url), "utf-8"),
) as PersonaPayload;

describe("persona radar", () => {
  it("draws five axes in fixed trait order", () => {
    const geometry = radarGeometry(fixture.scores);
    expect(geometry.axes.map((a) => a.trait)).toEqual([...TRAIT_ORDER]);
    expect(geometry.vertices).toHaveLength(5);
  });

  it("places vertices at radii proportional to the worked scores", () => {
    // recorded profile carries the worked scores (7, 5, 6, 3, 8)
    expect(TRAIT_ORDER.map((t) => fixture.scores[t])).toEqual([7, 5, 6, 3, 8]);
    const geometry = radarGeometry(fixture.scores);
    geometry.vertices.forEach((vertex, i) => {
      const score = fixture.scores[TRAIT_ORDER[i]];
      expect(vertex.radius).toBeCloseTo(score / AXIS_MAX, 12);
      const dx = vertex.x - geometry.center;
      const dy = vertex.y - geometry.center;
      const distance = Math.hypot(dx, dy);
      expect(distance).toBeCloseTo(geometry.center * 0.82 * (score / AXIS_MAX), 6);
    });
  });

  it("clips scores to the [1, 10] axis range", () => {
    expect(clipScore(0)).toBe(1);
    expect(clipScore(42)).toBe(10);
    const geometry = radarGeometry({
      openness: 99,
      conscientiousness: -5,
      extraversion: 5,
      agreeableness: 5,
      neuroticism: 5,
    });
    expect(geometry.vertices[0].radius).toBe(1);
    expect(geometry.vertices[1].radius).toBeCloseTo(1 / AXIS_MAX, 12);
  });

  it("renders a minimal pentagon for all-1 scores", () => {
    const ones = Object.fromEntries(TRAIT_ORDER.map((t) => [t, 1]));
    const geometry = radarGeometry(ones);
    for (const vertex of geometry.vertices) {
      expect(vertex.radius).toBeCloseTo(0.1, 12);
    }
  });

  it("rejects profiles missing a trait", () => {
    const broken: Record<string, number> = { ...fixture.scores };
    delete broken.agreeableness;
    expect(() => radarGeometry(broken)).toThrow(MissingTrait);
  });

  it("embeds per-trait tooltips in the svg markup", () => {
    const markup = radarSvg(radarGeometry(fixture.scores));
    expect(markup).toContain("<title>Agreeableness: 3</title>");
    expect(markup).toContain("polygon");
  });

  it("fixture carries a visible disclaimer", () => {
    expect(fixture.disclaimer.length).toBeGreaterThan(20);
  });
});
