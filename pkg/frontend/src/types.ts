/** Wire types mirroring the review service API, one-to-one. */

export type Verdict = "keep" | "drop";

export type DropReason =
  | "near_duplicates"
  | "pornography"
  | "navigation_bars"
  | "product_specifications"
  | "named_entity_lists"
  | "other";

export type Reason = DropReason | "not_applicable";

export const DROP_REASONS: readonly DropReason[] = [
  "near_duplicates",
  "pornography",
  "navigation_bars",
  "product_specifications",
  "named_entity_lists",
  "other",
];

export const REASON_LABELS: Record<string, string> = {
  near_duplicates: "Near-duplicates",
  pornography: "Pornography",
  navigation_bars: "Navigation bars",
  product_specifications: "Product specifications",
  named_entity_lists: "Named-entity lists",
  other: "Other",
  not_applicable: "Not applicable",
};

/** Row of GET /api/clusters; the UI never derives verdict state itself. */
export interface ClusterCard {
  cluster_id: number;
  size: number;
  mean_distance: number;
  decided: boolean;
  verdict: Verdict | null;
}

export interface Exemplar {
  doc_id: string;
  distance: number;
  excerpt: string;
}

export interface ExemplarSet {
  cluster_id: number;
  size: number;
  closest: Exemplar[];
  farthest: Exemplar[];
}

export interface DocumentPayload {
  id: string;
  text: string;
  subset: string | null;
}

export interface Progress {
  total_clusters: number;
  decided: number;
  undecided: number;
  kept: number;
  dropped: number;
  drop_reasons: Record<string, number>;
}

export interface DecisionRequest {
  verdict: Verdict;
  reason: Reason;
  annotator: string;
  note?: string | null;
}
