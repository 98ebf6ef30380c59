/**
 * Inline translation tooltip shared by the reader and video views.
 *
 * One tooltip element per view; showing it for a new anchor replaces the
 * previous content, and any click outside the tooltip dismisses it. The
 * pronunciation button is disabled when the API returns no audio URL.
 */

import type { ApiClient } from "./api.js";
import { ApiError } from "./api.js";

export class TranslationTooltip {
  private element: HTMLElement;
  private inflight: Promise<void> | null = null;

  constructor(
    host: HTMLElement,
    private api: ApiClient,
  ) {
    this.element = document.createElement("div");
    this.element.className = "tooltip";
    this.element.hidden = true;
    host.append(this.element);
    document.addEventListener("click", (event) => {
      if (this.element.hidden) {
        return;
      }
      const target = event.target as Node;
      if (!this.element.contains(target) && !(target instanceof HTMLElement && target.dataset.translatable)) {
        this.dismiss();
      }
    });
  }

  showFor(anchor: HTMLElement, text: string): Promise<void> {
    if (this.inflight) {
      return this.inflight;
    }
    this.inflight = this.api
      .translate(text)
      .then((response) => {
        this.element.replaceChildren();
        const original = document.createElement("span");
        original.className = "original";
        original.textContent = text;
        const translation = document.createElement("span");
        translation.className = "translation";
        translation.textContent = response.translation;
        const pronounce = document.createElement("button");
        pronounce.className = "pronounce";
        pronounce.textContent = "play";
        if (response.pronunciation_url) {
          pronounce.dataset.url = response.pronunciation_url;
        } else {
          pronounce.disabled = true;
        }
        this.element.append(original, translation, pronounce);
        this.element.hidden = false;
        const rect = anchor.getBoundingClientRect();
        this.element.style.left = `${rect.left + window.scrollX}px`;
        this.element.style.top = `${rect.bottom + window.scrollY}px`;
      })
      .catch((error: unknown) => {
        this.element.replaceChildren();
        const failure = document.createElement("span");
        failure.className = "translation error";
        failure.textContent =
          error instanceof ApiError ? error.message : "translation failed";
        this.element.append(failure);
        this.element.hidden = false;
      })
      .finally(() => {
        this.inflight = null;
      });
    return this.inflight;
  }

  dismiss(): void {
    this.element.hidden = true;
  }

  get open(): boolean {
    return !this.element.hidden;
  }

  settled(): Promise<void> {
    return this.inflight ?? Promise.resolve();
  }
}

const WORD_PATTERN = /\p{L}[\p{L}'’-]*/gu;

/** Wrap each word of `text` in a clickable span, keeping everything else. */
export function wrapWords(text: string, onWordClick: (word: string, el: HTMLElement) => void): DocumentFragment {
  const fragment = document.createDocumentFragment();
  let cursor = 0;
  for (const match of text.matchAll(WORD_PATTERN)) {
    const start = match.index ?? 0;
    if (start > cursor) {
      fragment.append(document.createTextNode(text.slice(cursor, start)));
    }
    const span = document.createElement("span");
    span.className = "w";
    span.dataset.translatable = "1";
    span.textContent = match[0];
    span.addEventListener("click", () => {
      onWordClick(match[0], span);
    });
    fragment.append(span);
    cursor = start + match[0].length;
  }
  if (cursor < text.length) {
    fragment.append(document.createTextNode(text.slice(cursor)));
  }
  return fragment;
}
