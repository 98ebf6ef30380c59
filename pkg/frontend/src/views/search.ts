/**
 * Search view: query box with topic, level range, and kind filters over
 * GET /api/search. Results are rendered as mixed article/video cards.
 */

import type { ApiClient, SearchParams } from "../api.js";
import { ApiError } from "../api.js";
import { SCALE_LABELS } from "../badges.js";
import { renderEmptyState, renderItemCard } from "../cards.js";

export class SearchView {
  private inflight: Promise<void> | null = null;
  private results!: HTMLElement;
  private form!: HTMLFormElement;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
  ) {}

  render(): void {
    const levelOptions = ['<option value="">any</option>']
      .concat(SCALE_LABELS.map((label) => `<option value="${label}">${label}</option>`))
      .join("");
    this.root.innerHTML = `
      <form class="search-form">
        <input name="q" type="search" placeholder="Search articles and videos" />
        <input name="topics" type="text" placeholder="topics (comma separated)" />
        <select name="min_level">${levelOptions}</select>
        <select name="max_level">${levelOptions}</select>
        <select name="kind">
          <option value="">any kind</option>
          <option value="article">article</option>
          <option value="video">video</option>
        </select>
        <button type="submit">Search</button>
      </form>
      <div class="results"></div>
    `;
    this.form = this.root.querySelector("form")!;
    this.results = this.root.querySelector(".results")!;
    this.form.addEventListener("submit", (event) => {
      event.preventDefault();
      this.runSearch();
    });
  }

  /** Kick off a search; a submit while one is in flight is ignored. */
  runSearch(): Promise<void> {
    if (this.inflight) {
      return this.inflight;
    }
    const data = new FormData(this.form);
    const params: SearchParams = {};
    for (const key of ["q", "topics", "min_level", "max_level", "kind"] as const) {
      const value = (data.get(key) as string | null) ?? "";
      if (value) params[key] = value;
    }
    this.inflight = this.api
      .search(params)
      .then((response) => {
        this.results.replaceChildren();
        if (response.items.length === 0) {
          this.results.append(renderEmptyState("No results. Try fewer filters."));
          return;
        }
        for (const item of response.items) {
          this.results.append(renderItemCard(item));
        }
      })
      .catch((error: unknown) => {
        const message = error instanceof ApiError ? error.message : "search failed";
        this.results.replaceChildren(renderEmptyState(message));
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
