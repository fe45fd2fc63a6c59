// Payload shapes of the /v1 API. The UI renders these verbatim and never
// recomputes analytics locally.

export interface DatasetDescriptor {
  dataset_id: string;
  name: string;
  layout: "message-level" | "conversation-level";
  column_map: Record<string, string>;
  record_count: number;
  origin: "user-upload" | "builtin-benchmark";
}

export interface IngestReport {
  record_count: number;
  dropped_empty: number;
}

export interface UploadResponse {
  dataset: DatasetDescriptor;
  report: IngestReport;
}

export interface Turn {
  id: string;
  text: string;
  conversation_id?: string;
  speaker?: string;
  turn_index?: number;
  label?: string;
}

export interface ConversationPayload {
  key: string;
  participants: string[];
  turns: Turn[];
}

export interface Prediction {
  message_id: string;
  schema_id: string;
  distribution: Record<string, number>;
  argmax_label: string;
}

export interface PerLabelMetrics {
  precision: number;
  recall: number;
  f1: number;
  support: number;
}

export interface ReportPayload {
  schema_id: string;
  labels: string[];
  per_label: Record<string, PerLabelMetrics>;
  macro_f1: number;
  accuracy: number;
  confusion_matrix: number[][];
}

export interface ClassificationPayload {
  dataset_id: string;
  classifier_id: string;
  schema_id: string;
  predictions: Prediction[];
  report?: ReportPayload;
}

export interface AttributionUnit {
  index: number;
  text: string;
  granularity: string;
  turn: number;
  sentence: number | null;
}

export interface AttributionScore {
  index: number;
  gain: number;
  intensity: number;
}

export interface PplGainPayload {
  units: AttributionUnit[];
  ppl_full: number;
  scores: AttributionScore[];
  conversation_key?: string;
  output_text?: string;
}

export interface JobHandle {
  job_id: string;
  kind: string;
  state: "pending" | "running" | "done" | "failed" | "cancelled";
  progress: number;
  total: number;
  completed: number;
  error?: string | null;
  result?: unknown;
}

export interface ChunkSummary {
  chunk_id: string;
  start: number;
  end: number;
  per_speaker: Record<string, string>;
  flagged_refs: string[];
  failed_speakers: string[];
}

export interface SummariesPayload {
  conversation_key: string;
  groups: { group_id: string; chunks: ChunkSummary[] }[];
}

export interface PersonaPayload {
  speaker: string;
  scores: Record<string, number>;
  explanations: Record<string, string>;
  overall: string;
  warnings: string[];
  disclaimer: string;
  source_summary_hash: string;
}
