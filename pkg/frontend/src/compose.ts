/** Pure annotation-view state: candidate selection, text composition, and
 * queue navigation. No DOM, no network — everything here is unit-testable
 * and the app shell only renders it. */

import type { Candidate, ClassSummary, SubmissionBody } from './types.js';

export interface Draft {
  /** checked candidate indices, in candidate order */
  selected: number[];
  /** the editable description text */
  text: string;
  /** manual edits decouple the text from the checkboxes */
  modified: boolean;
  /** unsaved changes exist (drives the navigation prompt) */
  dirty: boolean;
}

export function emptyDraft(): Draft {
  return { selected: [], text: '', modified: false, dirty: false };
}

export function composeFromSelection(
  candidates: Candidate[],
  selected: number[],
): string {
  const byIdx = new Map(candidates.map((c) => [c.idx, c.sentence]));
  return selected
    .map((i) => byIdx.get(i))
    .filter((s): s is string => s !== undefined)
    .join(' ');
}

export function toggleCandidate(
  draft: Draft,
  candidates: Candidate[],
  idx: number,
): Draft {
  const selected = draft.selected.includes(idx)
    ? draft.selected.filter((i) => i !== idx)
    : [...draft.selected, idx].sort((a, b) => a - b);
  // while unmodified the text tracks the checkboxes; after a manual edit it
  // stays the annotator's text
  const text = draft.modified
    ? draft.text
    : composeFromSelection(candidates, selected);
  return { selected, text, modified: draft.modified, dirty: true };
}

export function editText(draft: Draft, text: string): Draft {
  return { ...draft, text, modified: true, dirty: true };
}

/** Re-attach the text to the checkboxes (clears the modified badge). */
export function resetToSelection(draft: Draft, candidates: Candidate[]): Draft {
  return {
    selected: draft.selected,
    text: composeFromSelection(candidates, draft.selected),
    modified: false,
    dirty: true,
  };
}

export function canSubmit(draft: Draft): boolean {
  return draft.text.trim().length > 0;
}

export function buildSubmission(
  draft: Draft,
  version: number,
  annotator: string,
  durationSeconds: number,
): SubmissionBody {
  return {
    selected: draft.selected,
    text: draft.text,
    annotator,
    duration_s: durationSeconds,
    version,
  };
}

// ---------------------------------------------------------------------------
// queue navigation
// ---------------------------------------------------------------------------

export interface Queue {
  /** server list order is authoritative */
  classes: ClassSummary[];
  position: number;
  /** default true: movement lands only on pending classes */
  skipDone: boolean;
}

export function progress(queue: Queue): { done: number; total: number } {
  const done = queue.classes.filter((c) => c.status === 'done').length;
  return { done, total: queue.classes.length };
}

export function allDone(queue: Queue): boolean {
  return queue.classes.length > 0 &&
    queue.classes.every((c) => c.status === 'done');
}

function nextIndex(queue: Queue, from: number, step: 1 | -1): number {
  const n = queue.classes.length;
  if (n === 0) return -1;
  for (let hop = 1; hop <= n; hop++) {
    const i = (from + step * hop + n * hop) % n;
    if (!queue.skipDone || queue.classes[i].status === 'pending') return i;
  }
  return -1;
}

export function advance(queue: Queue, step: 1 | -1): Queue {
  const target = nextIndex(queue, queue.position, step);
  return target < 0 ? queue : { ...queue, position: target };
}

export function current(queue: Queue): ClassSummary | null {
  return queue.classes[queue.position] ?? null;
}

/** Land on the first workable class after (re)loading the list. */
export function initialPosition(classes: ClassSummary[], skipDone: boolean): number {
  if (!skipDone) return classes.length ? 0 : -1;
  const i = classes.findIndex((c) => c.status === 'pending');
  return i >= 0 ? i : -1;
}

export function markDone(queue: Queue, classId: string, version: number): Queue {
  const classes = queue.classes.map((c) =>
    c.class_id === classId ? { ...c, status: 'done' as const, version } : c,
  );
  return { ...queue, classes };
}
