// Payload shapes of the /api/v1 inventory service. The console never
// computes anything from license semantics: every verdict, score, and
// expression shown on screen is one of these fields, verbatim.

export interface Coords {
  ecosystem: string;
  name: string;
  version: string;
}

export interface FindingSummary {
  path: string;
  method: "tag" | "text_match";
  expression: string;
  score: number;
  span: [number, number];
}

export interface DecisionRecord {
  reviewer: string;
  role: string;
  timestamp: string;
  verdict: "cleared" | "rejected";
  rationale: string;
  policy_version: string;
}

export type ReleaseState =
  | "NEW"
  | "SCANNED"
  | "PENDING_REVIEW"
  | "CLEARED"
  | "REJECTED";

export interface Release {
  release_id: string;
  component_id: string;
  canonical_name: string;
  coords: Coords;
  state: ReleaseState;
  requested_at: string | null;
  declared_license: string | null;
  detected_license: string | null;
  findings_summary: FindingSummary[];
  decisions: DecisionRecord[];
}

export interface QueuePage {
  items: Release[];
  total: number;
  page: number;
  page_size: number;
}

export interface FindingsDoc {
  release_id: string;
  findings: Array<FindingSummary & { copyright_lines: string[] }>;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  details: Record<string, unknown>;
}

export interface QueueFilters {
  ecosystem?: string;
  license?: string;
  state?: ReleaseState;
}
