/** Payload shapes of the annotation service HTTP API. */

export interface ClassSummary {
  class_id: string;
  name: string;
  status: 'pending' | 'done';
  version: number;
}

export interface ClassListResponse {
  classes: ClassSummary[];
  counts: { pending: number; done: number };
}

export interface Candidate {
  idx: number;
  sentence: string;
  source: string;
}

export interface ClassDetail {
  class_id: string;
  name: string;
  status: 'pending' | 'done';
  version: number;
  definition: string | null;
  exemplar_url: string | null;
  candidates: Candidate[];
}

export interface SubmissionBody {
  selected: number[];
  text: string;
  annotator: string;
  duration_s: number;
  version: number;
}

export interface SubmissionResponse {
  ok: boolean;
  class_id: string;
  version: number;
  conflict: boolean;
  definition: string;
}

export interface ExportRecord {
  subject_id: string;
  name: string;
  body: string;
  definition: string;
}
