/**
 * Item cards shared by the search and feed views.
 */

import type { ItemSummary } from "./api.js";
import { difficultyBadge, kindBadge } from "./badges.js";

export function renderItemCard(item: ItemSummary): HTMLElement {
  const card = document.createElement("article");
  card.className = "card";
  card.dataset.id = item.id;
  card.dataset.kind = item.kind;

  const header = document.createElement("header");
  header.append(kindBadge(item.kind), difficultyBadge(item.difficulty));
  card.append(header);

  const title = document.createElement("h3");
  const link = document.createElement("a");
  link.href = `#/items/${item.id}`;
  link.textContent = item.title;
  title.append(link);
  card.append(title);

  if (item.description) {
    const description = document.createElement("p");
    description.className = "description";
    description.textContent = item.description;
    card.append(description);
  }

  const meta = document.createElement("div");
  meta.className = "meta";
  for (const topic of item.topics) {
    const chip = document.createElement("span");
    chip.className = "chip";
    chip.textContent = topic;
    meta.append(chip);
  }
  if (item.published_at) {
    const date = document.createElement("time");
    date.dateTime = item.published_at;
    date.textContent = item.published_at.slice(0, 10);
    meta.append(date);
  }
  card.append(meta);
  return card;
}

export function renderEmptyState(message: string): HTMLElement {
  const empty = document.createElement("p");
  empty.className = "empty";
  empty.textContent = message;
  return empty;
}
