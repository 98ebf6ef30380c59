import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { LEVEL_BANDS, SCALE_LABELS } from "../src/badges.js";
import { SearchView } from "../src/views/search.js";
import { makeMockApi } from "./mock_api.js";

function setup() {
  const { fetchFn, state } = makeMockApi();
  const root = document.createElement("div");
  document.body.replaceChildren(root);
  const view = new SearchView(root, new ApiClient(fetchFn));
  view.render();
  return { view, root, state };
}

describe("SearchView", () => {
  beforeEach(() => {
    document.body.replaceChildren();
  });

  it("renders mixed article and video results with difficulty badges", async () => {
    const { view, root } = setup();
    await view.runSearch();

    const cards = root.querySelectorAll(".card");
    expect(cards.length).toBe(3);
    const kinds = new Set(
      [...cards].map((card) => (card as HTMLElement).dataset.kind),
    );
    expect(kinds).toEqual(new Set(["article", "video"]));

    for (const card of cards) {
      const badge = card.querySelector<HTMLElement>(".badge.difficulty")!;
      const label = badge.dataset.label!;
      expect(SCALE_LABELS).toContain(label);
      expect(badge.textContent).toBe(label);
      expect(badge.style.background).not.toBe("");
    }
  });

  it("applies the level cap filter", async () => {
    const { view, root } = setup();
    root.querySelector<HTMLSelectElement>('select[name="max_level"]')!.value = "A2";
    await view.runSearch();
    const labels = [...root.querySelectorAll<HTMLElement>(".badge.difficulty")].map(
      (badge) => badge.dataset.label,
    );
    expect(labels).toEqual(["A2"]);
  });

  it("shows an empty state when nothing matches", async () => {
    const { view, root } = setup();
    root.querySelector<HTMLInputElement>('input[name="q"]')!.value = "zzz-introuvable";
    await view.runSearch();
    expect(root.querySelectorAll(".card").length).toBe(0);
    expect(root.querySelector(".empty")).not.toBeNull();
  });

  it("maps badge colors from the fixed band palette", async () => {
    const { view, root } = setup();
    await view.runSearch();
    const badge = root.querySelector<HTMLElement>('.badge.difficulty[data-label="A2"]')!;
    // jsdom normalizes hex to rgb(); compare through a scratch element.
    const probe = document.createElement("span");
    probe.style.background = LEVEL_BANDS[SCALE_LABELS.indexOf("A2")];
    expect(badge.style.background).toBe(probe.style.background);
  });
});
