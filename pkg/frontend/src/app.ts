/**
 * Hash router wiring the four views into the page shell. Routes:
 * #/search (default), #/feed, #/interests, #/items/{id} (reader or
 * video view, chosen by the item's kind).
 */

import type { ApiClient } from "./api.js";
import { FeedView } from "./views/feed.js";
import { InterestsView } from "./views/interests.js";
import { ReaderView, VideoView } from "./views/reader.js";
import { SearchView } from "./views/search.js";

export function startApp(root: HTMLElement, api: ApiClient, userId: string): void {
  root.innerHTML = `
    <nav class="tabs">
      <a href="#/search">Search</a>
      <a href="#/feed">Feed</a>
      <a href="#/interests">Interests</a>
    </nav>
    <main id="view"></main>
  `;
  const view = root.querySelector<HTMLElement>("#view")!;

  async function route(): Promise<void> {
    const hash = window.location.hash || "#/search";
    view.replaceChildren();
    const itemMatch = hash.match(/^#\/items\/(.+)$/);
    if (itemMatch) {
      const detail = await api.item(decodeURIComponent(itemMatch[1]));
      const viewer =
        detail.kind === "video"
          ? new VideoView(view, api, detail.id, detail)
          : new ReaderView(view, api, detail.id, detail);
      await viewer.render();
      return;
    }
    if (hash === "#/feed") {
      await new FeedView(view, api, userId).render();
      return;
    }
    if (hash === "#/interests") {
      await new InterestsView(view, api, userId).render();
      return;
    }
    new SearchView(view, api).render();
  }

  window.addEventListener("hashchange", () => {
    void route();
  });
  void route();
}
