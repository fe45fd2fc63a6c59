// Five-axis radar geometry for Big-Five persona profiles.
//
// Fixed trait order, axis range [1, 10]; scores outside the range clip to it.
// Pure geometry so tests can assert vertex radii without a DOM.

export const TRAIT_ORDER = [
  "openness",
  "conscientiousness",
  "extraversion",
  "agreeableness",
  "neuroticism",
] as const;

export const TRAIT_LABELS: Record<string, string> = {
  openness: "Openness to Experience",
  conscientiousness: "Conscientiousness",
  extraversion: "Extraversion",
  agreeableness: "Agreeableness",
  neuroticism: "Neuroticism",
};

export const AXIS_MIN = 1;
export const AXIS_MAX = 10;

export interface RadarVertex {
  trait: string;
  score: number; // clipped to [1, 10]
  radius: number; // fraction of the plot radius
  x: number;
  y: number;
}

export interface RadarGeometry {
  size: number;
  center: number;
  vertices: RadarVertex[];
  axes: { trait: string; label: string; x: number; y: number }[];
  polygonPoints: string;
}

export class MissingTrait extends Error {
  constructor(trait: string) {
    super(`profile is missing trait ${trait}`);
  }
}

export function clipScore(value: number): number {
  return Math.min(AXIS_MAX, Math.max(AXIS_MIN, value));
}

export function radarGeometry(
  scores: Record<string, number>,
  size = 260,
): RadarGeometry {
  for (const trait of TRAIT_ORDER) {
    if (!(trait in scores) || typeof scores[trait] !== "number") {
      throw new MissingTrait(trait);
    }
  }
  const center = size / 2;
  const plotRadius = center * 0.82;
  const vertices: RadarVertex[] = TRAIT_ORDER.map((trait, i) => {
    const angle = -Math.PI / 2 + (2 * Math.PI * i) / TRAIT_ORDER.length;
    const score = clipScore(scores[trait]);
    const radius = score / AXIS_MAX;
    return {
      trait,
      score,
      radius,
      x: center + plotRadius * radius * Math.cos(angle),
      y: center + plotRadius * radius * Math.sin(angle),
    };
  });
  const axes = TRAIT_ORDER.map((trait, i) => {
    const angle = -Math.PI / 2 + (2 * Math.PI * i) / TRAIT_ORDER.length;
    return {
      trait,
      label: TRAIT_LABELS[trait],
      x: center + plotRadius * Math.cos(angle),
      y: center + plotRadius * Math.sin(angle),
    };
  });
  return {
    size,
    center,
    vertices,
    axes,
    polygonPoints: vertices.map((v) => `${v.x.toFixed(2)},${v.y.toFixed(2)}`).join(" "),
  };
}

export function radarSvg(geometry: RadarGeometry): string {
  const rings = [0.25, 0.5, 0.75, 1.0]
    .map((f) => {
      const r = (geometry.center * 0.82 * f).toFixed(2);
      return `<circle cx="${geometry.center}" cy="${geometry.center}" r="${r}" class="radar-ring"/>`;
    })
    .join("");
  const axes = geometry.axes
    .map(
      (a) =>
        `<line x1="${geometry.center}" y1="${geometry.center}" x2="${a.x.toFixed(2)}" y2="${a.y.toFixed(2)}" class="radar-axis"/>` +
        `<text x="${a.x.toFixed(2)}" y="${a.y.toFixed(2)}" class="radar-label">${a.label}</text>`,
    )
    .join("");
  const dots = geometry.vertices
    .map(
      (v) =>
        `<circle cx="${v.x.toFixed(2)}" cy="${v.y.toFixed(2)}" r="3" class="radar-dot"><title>${TRAIT_LABELS[v.trait]}: ${v.score}</title></circle>`,
    )
    .join("");
  return (
    `<svg viewBox="0 0 ${geometry.size} ${geometry.size}" class="radar">` +
    rings +
    axes +
    `<polygon points="${geometry.polygonPoints}" class="radar-area"/>` +
    dots +
    `</svg>`
  );
}
