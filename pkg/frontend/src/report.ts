// Classification report and result-viewer view models.
//
// Every number shown comes straight from the API payload; the only client
// work is formatting and display ordering.

import type { Prediction, ReportPayload } from "./types.js";

export function formatMetric(value: number): string {
  return value.toFixed(4);
}

export interface ReportRow {
  label: string;
  precision: string;
  recall: string;
  f1: string;
  support: number;
}

export function reportRows(payload: ReportPayload): ReportRow[] {
  return payload.labels.map((label) => {
    const metrics = payload.per_label[label];
    return {
      label,
      precision: formatMetric(metrics.precision),
      recall: formatMetric(metrics.recall),
      f1: formatMetric(metrics.f1),
      support: metrics.support,
    };
  });
}

export interface ReportSummary {
  macroF1: string;
  accuracy: string;
}

export function reportSummary(payload: ReportPayload): ReportSummary {
  return {
    macroF1: formatMetric(payload.macro_f1),
    accuracy: formatMetric(payload.accuracy),
  };
}

export interface RankedLabel {
  rank: number;
  label: string;
  probability: number;
}

/** Display ordering of a prediction's distribution (probabilities are the
 * API's own numbers; ties keep the schema's label order as served). */
export function rankedLabels(prediction: Prediction, k: number): RankedLabel[] {
  const entries = Object.entries(prediction.distribution);
  entries.sort((a, b) => b[1] - a[1]);
  return entries.slice(0, k).map(([label, probability], i) => ({
    rank: i + 1,
    label,
    probability,
  }));
}
