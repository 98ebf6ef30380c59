/**
 * Reading views. ReaderView shows an article body with per-word
 * click-to-translate; VideoView lists caption cues in time order, each
 * clickable for a whole-cue translation. Both surface the same
 * translation tooltip and the item's badges.
 */

import type { ApiClient, ItemDetail } from "../api.js";
import { ApiError } from "../api.js";
import { difficultyBadge, kindBadge } from "../badges.js";
import { TranslationTooltip, wrapWords } from "../translate.js";

function formatTime(seconds: number): string {
  const minutes = Math.floor(seconds / 60);
  const rest = Math.floor(seconds % 60);
  return `${minutes}:${String(rest).padStart(2, "0")}`;
}

abstract class ItemView {
  protected tooltip!: TranslationTooltip;
  private loading: Promise<void> | null = null;

  constructor(
    protected root: HTMLElement,
    protected api: ApiClient,
    private itemId: string,
    private prefetched?: ItemDetail,
  ) {}

  render(): Promise<void> {
    if (this.loading) {
      return this.loading;
    }
    const detail = this.prefetched
      ? Promise.resolve(this.prefetched)
      : this.api.item(this.itemId);
    this.loading = detail
      .then((item) => {
        this.root.innerHTML = `
          <header class="item-header">
            <h2></h2>
            <a class="source" target="_blank" rel="noopener">source</a>
          </header>
          <div class="item-content"></div>
        `;
        this.root.querySelector("h2")!.textContent = item.title;
        const source = this.root.querySelector<HTMLAnchorElement>(".source")!;
        source.href = item.url;
        const header = this.root.querySelector(".item-header")!;
        header.prepend(kindBadge(item.kind), difficultyBadge(item.difficulty));
        this.tooltip = new TranslationTooltip(this.root, this.api);
        this.renderContent(this.root.querySelector<HTMLElement>(".item-content")!, item);
      })
      .catch((error: unknown) => {
        this.root.textContent =
          error instanceof ApiError ? error.message : "could not load item";
      })
      .finally(() => {
        this.loading = null;
      });
    return this.loading;
  }

  protected abstract renderContent(content: HTMLElement, item: ItemDetail): void;

  settled(): Promise<void> {
    return this.loading ?? this.tooltip?.settled() ?? Promise.resolve();
  }
}

export class ReaderView extends ItemView {
  protected renderContent(content: HTMLElement, item: ItemDetail): void {
    const body = document.createElement("div");
    body.className = "body";
    const text = item.body || item.description;
    body.append(
      wrapWords(text, (word, el) => {
        this.tooltip.showFor(el, word);
      }),
    );
    content.append(body);
  }
}

export class VideoView extends ItemView {
  protected renderContent(content: HTMLElement, item: ItemDetail): void {
    const watch = document.createElement("p");
    watch.className = "watch-hint";
    watch.textContent = "Captions below; follow the source link to watch.";
    content.append(watch);
    const list = document.createElement("ol");
    list.className = "cues";
    for (const cue of item.cues) {
      const row = document.createElement("li");
      row.className = "cue";
      row.dataset.start = String(cue.start);
      const stamp = document.createElement("span");
      stamp.className = "stamp";
      stamp.textContent = formatTime(cue.start);
      const text = document.createElement("span");
      text.className = "cue-text";
      text.dataset.translatable = "1";
      text.textContent = cue.text;
      text.addEventListener("click", () => {
        this.tooltip.showFor(text, cue.text);
      });
      row.append(stamp, text);
      list.append(row);
    }
    content.append(list);
  }
}
