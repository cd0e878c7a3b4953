// JSON shapes of the review service. Field names mirror the wire format
// exactly; everything the UI displays about counts and percentages comes
// from these payloads, never from client-side recounts.

export type ReviewStatus = "unreviewed" | "reviewed";

export interface AssignmentJson {
  video_id: string;
  categories: string[];
  comment: string;
  reviewer: string;
  timestamp: number;
}

export interface CaseJson {
  video_id: string;
  true_label: string;
  predicted_label: string;
  score_vector: number[];
  review_status: ReviewStatus;
  wrong_confidence: number;
  media_url: string;
  current: AssignmentJson | null;
  history_length: number;
}

export interface MetaJson {
  total_errors: number;
  class_names: string[];
  source_split: string;
  categories: string[];
}

export interface ReportRowJson {
  category: string;
  count: number;
  percent: number;
}

export interface ReportJson {
  total_errors: number;
  reviewed: number;
  unreviewed: number;
  source_split: string;
  rows: ReportRowJson[];
  ranked: string[];
}

export interface ConfusionJson {
  class_names: string[];
  counts: number[][];
  per_class_accuracy: (number | null)[];
}

export interface AssignmentBody {
  categories: string[];
  comment?: string;
  reviewer?: string;
}

export interface CaseFilter {
  status?: ReviewStatus;
  true_class?: string;
}
