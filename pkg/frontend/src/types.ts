/** Payload shapes of the review service REST API. */

export interface SpeechView {
  speech_id: string;
  date: string;
  speaker_name: string;
  speaker_party: string;
  text: string;
}

export interface GoldRecord {
  speech_id: string;
  coder: string;
  actor_surface: string;
  sentiment: number;
}

export interface AiFinding {
  ai_id: string;
  actor_surface: string;
  sentiment: number;
}

export interface GoldFinding {
  gold_id: string;
  actor_surface: string;
  sentiment: number;
  coder: string;
}

export interface MatchTriple {
  match_id: string;
  speech_id: string;
  ai: AiFinding | null;
  gold: GoldFinding | null;
  supergold_id: string | null;
  score: number | null;
  duplicate_gold: boolean;
}

export interface MatchSetView {
  revision: number;
  threshold: number;
  triples: MatchTriple[];
}

export interface SupergoldView {
  supergold_id: string;
  speech_id: string;
  actor_surface: string;
  provenance: "human-only" | "ai-verified" | "both";
  confirmed: boolean;
  verifier: string;
  rationale: string;
  revision: number;
}

export interface ResolutionItem {
  mention_id: string;
  speech_id: string;
  actor_surface: string;
  country: string;
  date: string;
  suggested_class: string;
  rationale: string;
  status: string;
  revision: number;
}

export interface TaskView {
  task_id: string;
  kind: "code-speech" | "fix-match" | "confirm-supergold" | "approve-resolution";
  payload: Record<string, unknown>;
  status: "open" | "done" | "skipped";
  completed_by: string;
  created: number;
  revision: number;
}

export interface Metrics {
  sensitivity_vs_supergold: number | null;
  sensitivity_vs_human: number | null;
  fdr: number | null;
  mean_abs_diff: number | null;
  mean_signed_diff: number | null;
  n_supergold: number;
  n_gold: number;
  n_ai: number;
  n_valid_ai: number;
  n_matched_pairs: number;
  entity_precision: number | null;
  entity_recall: number | null;
  entity_f1: number | null;
}
