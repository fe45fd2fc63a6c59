// Heatmap view model: conversation units shaded by attribution intensity.
//
// Single-hue ramp (colorblind-safe blue); shading is monotone in intensity,
// zero intensity renders unshaded.

import type { AttributionUnit } from "./types.js";

export interface HeatmapCell {
  index: number;
  text: string;
  intensity: number;
  background: string;
}

export class HeatmapLengthMismatch extends Error {
  constructor(units: number, intensities: number[]) {
    super(`got ${units} units but ${intensities.length} intensities`);
  }
}

const HUE = "33, 102, 172"; // single blue hue, alpha carries the signal

export function shade(intensity: number): string {
  const clamped = Math.min(1, Math.max(0, intensity));
  if (clamped === 0) return "transparent";
  return `rgba(${HUE}, ${clamped})`;
}

/** Alpha channel of a shade() value, for monotonicity checks and tests. */
export function shadeAlpha(background: string): number {
  if (background === "transparent") return 0;
  const match = /rgba\([0-9, ]+, ([0-9.]+)\)/.exec(background);
  return match ? Number(match[1]) : NaN;
}

export function heatmapCells(
  units: Pick<AttributionUnit, "index" | "text">[],
  intensities: number[],
): HeatmapCell[] {
  if (units.length !== intensities.length) {
    throw new HeatmapLengthMismatch(units.length, intensities);
  }
  return units.map((unit, i) => ({
    index: unit.index,
    text: unit.text,
    intensity: intensities[i],
    background: shade(intensities[i]),
  }));
}
