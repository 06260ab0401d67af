/** Shapes exchanged with the retrieval service. */

export type FieldKind = "boolean" | "categorical" | "numeric";

export interface FieldDescriptor {
  name: string;
  kind: FieldKind;
  values?: string[];
  bins?: number[];
  allow_unknown?: boolean;
  /** Human-readable label per bit slot, in schema order. */
  slots: string[];
}

export interface Metadata {
  schema: { fields: FieldDescriptor[] };
  class_labels: string[];
  size: number;
  dim: number;
  bit_width: number;
  ids: number[];
}

export interface ItemDetail {
  id: number;
  label: string;
  clinical: Record<string, string>;
  embedding_norm: number;
}

export type QueryMode = "cbir" | "cbidr";

export type ClinicalValues = Record<string, string | number>;

export interface QueryRequestBody {
  mode: QueryMode;
  k: number;
  weights: [number, number];
  embedding?: number[];
  item_id?: number;
  clinical?: ClinicalValues;
}

export interface ResponseEntry {
  id: number;
  label: string;
  score: number;
  d_image: number;
  d_clinical: number | null;
  clinical: Record<string, string>;
}

export interface QueryResponse {
  entries: ResponseEntry[];
  mode: string;
  weights: [number, number];
  timing_ms: number;
}

export interface ErrorEnvelope {
  error: { code: string; message: string; field: string | null };
}
