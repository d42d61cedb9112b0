/** Wire types (field names mirror the service JSON) and the composer state. */

export type Mode = "perfect" | "abbrev";

export interface Candidate {
  text: string;
  score: number;
}

export interface PredictRequest {
  context: string;
  pinyin: string[];
  mode: Mode;
  top_k: number;
  beam_size: number;
}

export interface PredictResponse {
  candidates: Candidate[];
  model_id: string;
  elapsed_ms: number;
}

export interface HealthInfo {
  status: string;
  model_id: string;
  lexicon: Record<string, number>;
  uptime_s: number;
}

export type Status =
  | { kind: "idle" }
  | { kind: "loading" }
  | { kind: "error"; message: string; position: number | null };

export interface ComposerState {
  /** The growing context; candidate selection appends to it. */
  committed_text: string;
  /** Pinyin tokens currently being typed, already split on whitespace. */
  pending_pinyin: string[];
  mode: Mode;
  top_k: number;
  beam_size: number;
  /** Last response that still matches (committed_text, pending_pinyin). */
  candidates: PredictResponse | null;
  /** Index into candidates committed by Enter/click. */
  highlighted: number;
  status: Status;
}
