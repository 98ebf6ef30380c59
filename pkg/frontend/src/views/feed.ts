/**
 * Personalized feed: GET /api/users/{id}/feed rendered as cards with
 * too_easy / ok / too_hard buttons. A feedback click posts the verdict,
 * disables the card's buttons while in flight, and replaces the level
 * readout with the estimate the API returns.
 */

import type { ApiClient, Verdict } from "../api.js";
import { ApiError } from "../api.js";
import { renderEmptyState, renderItemCard } from "../cards.js";

const VERDICTS: Verdict[] = ["too_easy", "ok", "too_hard"];

export class FeedView {
  private inflight: Promise<void> | null = null;
  private level!: HTMLElement;
  private list!: HTMLElement;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private userId: string,
  ) {}

  render(): Promise<void> {
    this.root.innerHTML = `
      <div class="feed-header">
        <div class="level">Level estimate: —</div>
        <button class="refresh">New mix</button>
      </div>
      <div class="feed-items"></div>
    `;
    this.level = this.root.querySelector(".level")!;
    this.list = this.root.querySelector(".feed-items")!;
    this.root.querySelector(".refresh")!.addEventListener("click", () => {
      this.refresh();
    });
    return this.refresh();
  }

  private showLevel(estimate: number): void {
    this.level.textContent = `Level estimate: ${estimate.toFixed(2)}`;
    this.level.setAttribute("data-level", String(estimate));
  }

  refresh(): Promise<void> {
    if (this.inflight) {
      return this.inflight;
    }
    this.inflight = this.api
      .feed(this.userId)
      .then((response) => {
        this.showLevel(response.level_estimate);
        this.list.replaceChildren();
        if (response.items.length === 0) {
          this.list.append(renderEmptyState("Nothing new right now."));
          return;
        }
        for (const item of response.items) {
          const card = renderItemCard(item);
          card.append(this.feedbackBar(item.id));
          this.list.append(card);
        }
      })
      .catch((error: unknown) => {
        const message = error instanceof ApiError ? error.message : "feed failed";
        this.list.replaceChildren(renderEmptyState(message));
      })
      .finally(() => {
        this.inflight = null;
      });
    return this.inflight;
  }

  private feedbackBar(itemId: string): HTMLElement {
    const bar = document.createElement("div");
    bar.className = "feedback";
    for (const verdict of VERDICTS) {
      const button = document.createElement("button");
      button.dataset.verdict = verdict;
      button.textContent = verdict.replace("_", " ");
      button.addEventListener("click", () => {
        this.sendFeedback(itemId, verdict, bar);
      });
      bar.append(button);
    }
    return bar;
  }

  sendFeedback(itemId: string, verdict: Verdict, bar: HTMLElement): Promise<void> {
    if (this.inflight) {
      return this.inflight;
    }
    for (const button of bar.querySelectorAll("button")) {
      button.disabled = true;
    }
    this.inflight = this.api
      .sendFeedback(this.userId, itemId, verdict)
      .then((response) => {
        this.showLevel(response.level_estimate);
        bar.replaceChildren();
        const note = document.createElement("span");
        note.className = "recorded";
        note.textContent = `recorded: ${verdict.replace("_", " ")}`;
        bar.append(note);
      })
      .catch((error: unknown) => {
        for (const button of bar.querySelectorAll("button")) {
          button.disabled = false;
        }
        const message = error instanceof ApiError ? error.message : "feedback failed";
        this.level.textContent = message;
      })
      .finally(() => {
        this.inflight = null;
      });
    return this.inflight;
  }

  settled(): Promise<void> {
    return this.inflight ?? Promise.resolve();
  }
}
