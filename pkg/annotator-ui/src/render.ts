/** DOM rendering for the study screens. Each render fully replaces the
 * root's children; the app is small enough that diffing buys nothing.
 */

import type { PairPayload, Verdict } from "./api.js";
import { gtOnLeft } from "./hash.js";
import type { UiState } from "./state.js";

export const QUESTION_TEXT =
  "Does the high-level semantic fidelity change between the two images";

export interface LoginHandlers {
  onLogin(name: string): void;
}

export interface PairHandlers {
  onAnswer(verdict: Verdict): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function clear(root: HTMLElement): void {
  while (root.firstChild) root.removeChild(root.firstChild);
}

/** Non-interactive status line, e.g. while an automatic retry runs. */
export function renderNotice(root: HTMLElement, message: string): void {
  const existing = root.querySelector(".notice");
  if (existing) {
    existing.textContent = message;
    return;
  }
  root.prepend(el("p", "notice", message));
}

/** Inline error banner with a retry control. */
export function renderBanner(root: HTMLElement, message: string, onRetry: () => void): void {
  root.querySelector(".banner")?.remove();
  const banner = el("div", "banner");
  banner.append(el("span", undefined, message));
  const retry = el("button", "secondary", "Retry");
  retry.addEventListener("click", () => {
    banner.remove();
    onRetry();
  });
  banner.append(retry);
  root.prepend(banner);
}

export function renderLogin(
  root: HTMLElement,
  handlers: LoginHandlers,
  validationMessage?: string,
  presetName?: string,
): void {
  clear(root);
  root.append(el("h1", undefined, "Image fidelity study"));
  root.append(
    el(
      "p",
      undefined,
      "You will see pairs of images side by side. Enter your name to begin.",
    ),
  );

  const form = el("form", "login-form");
  const input = el("input");
  input.name = "annotator-name";
  input.placeholder = "Your name";
  input.autocomplete = "off";
  if (presetName) input.value = presetName;
  const start = el("button", undefined, "Start");
  start.type = "submit";
  form.append(input, start);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    handlers.onLogin(input.value);
  });
  root.append(form);

  if (validationMessage) {
    root.append(el("p", "validation", validationMessage));
  }
}

function imageSlot(url: string, alt: string): HTMLElement {
  const slot = el("div", "image-slot");
  const attach = (attempt: number) => {
    clear(slot);
    const img = el("img");
    img.alt = alt;
    // Cache-busting query so a retry actually refetches.
    img.src = attempt === 0 ? url : `${url}${url.includes("?") ? "&" : "?"}retry=${attempt}`;
    img.addEventListener("error", () => {
      clear(slot);
      const note = el("span", "validation", "Image failed to load.");
      const retry = el("button", "secondary retry-image", "Retry image");
      retry.addEventListener("click", () => attach(attempt + 1));
      slot.append(note, retry);
    });
    slot.append(img);
  };
  attach(0);
  return slot;
}

export function renderPair(root: HTMLElement, state: UiState, handlers: PairHandlers): void {
  const pair = state.pair as PairPayload;
  clear(root);

  const screen = el("section", "pair-screen");
  screen.dataset.pairId = pair.pair_id;

  screen.append(
    el("p", "progress", `${state.answered_count} of ${state.total_pairs} answered`),
  );

  const row = el("div", "pair-row");
  const left = gtOnLeft(pair.pair_id) ? pair.gt_url : pair.sr_url;
  const right = gtOnLeft(pair.pair_id) ? pair.sr_url : pair.gt_url;
  row.append(imageSlot(left, "left image"), imageSlot(right, "right image"));
  screen.append(row);

  screen.append(el("p", "question", QUESTION_TEXT));

  const answers = el("div", "answers");
  const yes = el("button", "answer-yes", "Yes");
  const no = el("button", "answer-no", "No");
  yes.disabled = state.submitting;
  no.disabled = state.submitting;
  yes.addEventListener("click", () => handlers.onAnswer("yes"));
  no.addEventListener("click", () => handlers.onAnswer("no"));
  answers.append(yes, no);
  screen.append(answers);

  root.append(screen);
}

export function renderDone(root: HTMLElement, state: UiState): void {
  clear(root);
  const box = el("section", "done");
  box.append(el("h1", undefined, "All done"));
  box.append(
    el(
      "p",
      undefined,
      `You answered ${state.answered_count} of ${state.total_pairs} pairs. Thank you!`,
    ),
  );
  root.append(box);
}
