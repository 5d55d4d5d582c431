/** DOM shell: renders the queue and current class, wires events to the pure
 * state functions, and talks to the service through ApiClient only. */

import { ApiClient, ApiError } from './api.js';
import {
  Draft,
  Queue,
  advance,
  allDone,
  buildSubmission,
  canSubmit,
  composeFromSelection,
  current,
  editText,
  emptyDraft,
  initialPosition,
  markDone,
  progress,
  resetToSelection,
  toggleCandidate,
} from './compose.js';
import type { ClassDetail } from './types.js';

const api = new ApiClient('');
const drafts = new Map<string, Draft>();

let queue: Queue = { classes: [], position: -1, skipDone: true };
let detail: ClassDetail | null = null;
let openedAt = Date.now();

const $ = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

function draftFor(classId: string): Draft {
  let d = drafts.get(classId);
  if (!d) {
    d = emptyDraft();
    drafts.set(classId, d);
  }
  return d;
}

function setDraft(classId: string, d: Draft): void {
  drafts.set(classId, d);
  renderEditor();
}

function showBanner(message: string, retry: () => void): void {
  const banner = $('banner');
  banner.hidden = false;
  banner.textContent = message + ' ';
  const button = document.createElement('button');
  button.textContent = 'retry';
  button.onclick = () => {
    banner.hidden = true;
    retry();
  };
  banner.appendChild(button);
}

function hideBanner(): void {
  $('banner').hidden = true;
}

async function loadQueue(): Promise<void> {
  try {
    const listing = await api.listClasses();
    const skipDone = ($('skip-done') as HTMLInputElement).checked;
    queue = {
      classes: listing.classes,
      position: initialPosition(listing.classes, skipDone),
      skipDone,
    };
    await openCurrent();
  } catch (err) {
    showBanner(`could not load classes: ${(err as ApiError).message}`, () => {
      void loadQueue();
    });
  }
}

async function openCurrent(): Promise<void> {
  renderProgress();
  const summary = current(queue);
  if (!summary) {
    detail = null;
    renderCompletion();
    return;
  }
  try {
    detail = await api.getClass(summary.class_id);
    openedAt = Date.now();
    renderClass();
  } catch (err) {
    showBanner(
      `could not load ${summary.class_id}: ${(err as ApiError).message}`,
      () => void openCurrent(),
    );
  }
}

function confirmUnsaved(): boolean {
  const summary = current(queue);
  if (!summary) return true;
  const d = drafts.get(summary.class_id);
  if (d?.dirty) {
    return window.confirm(
      'Unsaved edits on this class are kept as a draft. Move on?');
  }
  return true;
}

function move(step: 1 | -1): void {
  if (!confirmUnsaved()) return;
  queue = advance(queue, step);
  void openCurrent();
}

async function submit(): Promise<void> {
  if (!detail) return;
  const d = draftFor(detail.class_id);
  if (!canSubmit(d)) return;
  const body = buildSubmission(
    d,
    detail.version,
    ($('annotator') as HTMLInputElement).value || 'anonymous',
    (Date.now() - openedAt) / 1000,
  );
  try {
    const result = await api.submitAnnotation(detail.class_id, body);
    if (result.conflict) {
      showBanner(
        `version conflict on ${detail.class_id}: your submission won, ` +
          'but someone else wrote first',
        () => undefined,
      );
    }
    drafts.set(detail.class_id, { ...d, dirty: false });
    queue = markDone(queue, detail.class_id, result.version);
    renderProgress();
    move(1);
  } catch (err) {
    showBanner(`submit failed: ${(err as ApiError).message}`, () => {
      void submit();
    });
  }
}

// ---------------------------------------------------------------------------
// rendering
// ---------------------------------------------------------------------------

function renderProgress(): void {
  const { done, total } = progress(queue);
  $('progress').textContent = `${done} / ${total} done`;
}

function renderCompletion(): void {
  $('class-view').hidden = true;
  const empty = $('completion');
  empty.hidden = false;
  empty.textContent = allDone(queue)
    ? 'All classes are annotated.'
    : 'No classes to annotate.';
}

function renderClass(): void {
  if (!detail) return;
  hideBanner();
  $('completion').hidden = true;
  $('class-view').hidden = false;
  $('class-name').textContent = detail.name;
  $('class-id').textContent = detail.class_id;
  const link = $('exemplar') as HTMLAnchorElement;
  if (detail.exemplar_url) {
    link.hidden = false;
    link.href = detail.exemplar_url;
  } else {
    link.hidden = true;
  }

  const readOnly = detail.status === 'done';
  const list = $('candidates');
  list.replaceChildren();
  const d = draftFor(detail.class_id);
  detail.candidates.forEach((candidate) => {
    const item = document.createElement('li');
    const label = document.createElement('label');
    const box = document.createElement('input');
    box.type = 'checkbox';
    box.checked = d.selected.includes(candidate.idx);
    box.disabled = readOnly;
    box.onchange = () => {
      if (!detail) return;
      setDraft(detail.class_id,
               toggleCandidate(draftFor(detail.class_id), detail.candidates,
                               candidate.idx));
    };
    label.appendChild(box);
    label.appendChild(
      document.createTextNode(
        ` [${candidate.idx}] (${candidate.source}) ${candidate.sentence}`));
    item.appendChild(label);
    list.appendChild(item);
  });

  const text = $('composed') as HTMLTextAreaElement;
  text.readOnly = readOnly;
  text.value = readOnly ? detail.definition ?? '' : d.text;
  ($('submit') as HTMLButtonElement).hidden = readOnly;
  $('readonly-note').hidden = !readOnly;
  renderEditor();
}

function renderEditor(): void {
  if (!detail || detail.status === 'done') return;
  const d = draftFor(detail.class_id);
  const text = $('composed') as HTMLTextAreaElement;
  if (text.value !== d.text) text.value = d.text;
  $('modified-badge').hidden = !d.modified;
  ($('submit') as HTMLButtonElement).disabled = !canSubmit(d);
}

// ---------------------------------------------------------------------------
// wiring
// ---------------------------------------------------------------------------

export function start(): void {
  $('next').onclick = () => move(1);
  $('prev').onclick = () => move(-1);
  $('submit').onclick = () => void submit();
  ($('skip-done') as HTMLInputElement).onchange = () => void loadQueue();
  $('reset-text').onclick = () => {
    if (!detail) return;
    setDraft(detail.class_id,
             resetToSelection(draftFor(detail.class_id), detail.candidates));
  };
  ($('composed') as HTMLTextAreaElement).oninput = (event) => {
    if (!detail || detail.status === 'done') return;
    const value = (event.target as HTMLTextAreaElement).value;
    const d = draftFor(detail.class_id);
    // typing exactly the composed selection text is not a manual edit
    if (value === composeFromSelection(detail.candidates, d.selected)) {
      setDraft(detail.class_id, { ...d, text: value, dirty: true });
    } else {
      setDraft(detail.class_id, editText(d, value));
    }
  };

  document.addEventListener('keydown', (event) => {
    const tag = (event.target as HTMLElement).tagName;
    if (tag === 'TEXTAREA' || tag === 'INPUT') {
      if (event.key === 'Enter' && (event.ctrlKey || event.metaKey)) {
        void submit();
      }
      return;
    }
    if (event.key === 'n' || event.key === 'ArrowRight') move(1);
    else if (event.key === 'p' || event.key === 'ArrowLeft') move(-1);
    else if (event.key >= '1' && event.key <= '9' && detail) {
      const candidate = detail.candidates[Number(event.key) - 1];
      if (candidate && detail.status !== 'done') {
        setDraft(detail.class_id,
                 toggleCandidate(draftFor(detail.class_id), detail.candidates,
                                 candidate.idx));
        renderClass();
      }
    } else if (event.key === 'Enter' && (event.ctrlKey || event.metaKey)) {
      void submit();
    }
  });

  window.addEventListener('beforeunload', (event) => {
    if ([...drafts.values()].some((d) => d.dirty)) event.preventDefault();
  });

  void loadQueue();
}

if (typeof document !== 'undefined' && document.getElementById('class-view')) {
  start();
}
