/**
 * In-memory stand-in for the content service, exposed as an injectable
 * fetch function. It mirrors the real contract the views rely on:
 * error envelopes, the feed's non-interest and seen-item exclusions,
 * the feedback level update, and the stub translator that reverses the
 * text and returns no pronunciation URL.
 */

import type { FetchLike, ItemDetail, ResponseLike } from "../src/api.js";

const SCALE = ["A1", "A2", "B1", "B2", "C1", "C2"];
const ALPHA = 0.2;

export interface MockProfile {
  level_estimate: number;
  interests: string[];
  non_interests: string[];
  seen: string[];
}

export interface MockState {
  items: ItemDetail[];
  profiles: Map<string, MockProfile>;
  requests: string[];
}

function defaultItems(): ItemDetail[] {
  return [
    {
      id: "itm-recette",
      kind: "article",
      url: "https://presse.example/articles/recette",
      title: "Une recette de saison",
      language: "fr",
      source_id: "src-gazette",
      description: "Le marché propose des légumes pour une soupe simple.",
      body: "La soupe demande trois légumes du marché. Elle mijote une heure.",
      published_at: "2024-08-09T06:30:00+00:00",
      topics: [{ topic: "cuisine", confidence: 1.0, origin: "pretagged", accepted: true }],
      difficulty: { label: "A2", probs: [0.1, 0.6, 0.15, 0.1, 0.03, 0.02] },
      readability: { gfi: 4.1, ari: 2.2, fkgl: 2.9 },
      cues: [],
    },
    {
      id: "itm-gorges",
      kind: "video",
      url: "https://video.example/gorges",
      title: "Descente des gorges en canoë",
      language: "fr",
      source_id: "src-gazette",
      description: "Une visite guidée des gorges.",
      body: "",
      published_at: "2024-08-08T10:00:00+00:00",
      topics: [{ topic: "nature", confidence: 1.0, origin: "pretagged", accepted: true }],
      difficulty: { label: "B1", probs: [0.05, 0.1, 0.6, 0.15, 0.06, 0.04] },
      readability: { gfi: 6.0, ari: 4.4, fkgl: 5.1 },
      cues: [
        { start: 0.0, end: 4.0, text: "Bienvenue dans les gorges." },
        { start: 4.0, end: 8.5, text: "L'eau est calme ce matin." },
        { start: 8.5, end: 12.0, text: "Nous passons sous le pont." },
      ],
    },
    {
      id: "itm-match",
      kind: "article",
      url: "https://presse.example/articles/match",
      title: "Le match de samedi",
      language: "fr",
      source_id: "src-gazette",
      description: "L'équipe locale gagne le match.",
      body: "L'équipe locale a gagné le match de samedi devant ses supporters.",
      published_at: "2024-08-07T18:00:00+00:00",
      topics: [{ topic: "sport", confidence: 1.0, origin: "pretagged", accepted: true }],
      difficulty: { label: "B2", probs: [0.02, 0.08, 0.2, 0.55, 0.1, 0.05] },
      readability: { gfi: 7.2, ari: 5.6, fkgl: 6.3 },
      cues: [],
    },
  ];
}

function summary(item: ItemDetail): Record<string, unknown> {
  return {
    id: item.id,
    kind: item.kind,
    title: item.title,
    url: item.url,
    language: item.language,
    description: item.description,
    published_at: item.published_at,
    topics: item.topics.filter((t) => t.accepted).map((t) => t.topic),
    difficulty: item.difficulty,
    readability: item.readability,
  };
}

function json(status: number, body: unknown): ResponseLike {
  return {
    ok: status >= 200 && status < 300,
    status,
    headers: {
      get: (name: string) => (name.toLowerCase() === "x-schema-version" ? "1" : null),
    },
    json: async () => body,
  };
}

function failure(status: number, code: string, message: string): ResponseLike {
  return json(status, { status, code, message });
}

export function makeMockApi(items: ItemDetail[] = defaultItems()): {
  fetchFn: FetchLike;
  state: MockState;
} {
  const state: MockState = { items, profiles: new Map(), requests: [] };

  function profileFor(userId: string): MockProfile {
    let profile = state.profiles.get(userId);
    if (!profile) {
      profile = { level_estimate: 2.5, interests: [], non_interests: [], seen: [] };
      state.profiles.set(userId, profile);
    }
    return profile;
  }

  const fetchFn: FetchLike = async (input, init = {}) => {
    const method = init.method ?? "GET";
    const url = new URL(input, "http://mock.test");
    const path = url.pathname;
    state.requests.push(`${method} ${path}`);
    const body = init.body ? (JSON.parse(init.body as string) as Record<string, unknown>) : {};

    if (method === "GET" && path === "/api/search") {
      const q = (url.searchParams.get("q") ?? "").toLowerCase();
      const kind = url.searchParams.get("kind") ?? "";
      const maxLevel = url.searchParams.get("max_level") ?? "";
      let hits = state.items.filter((item) => {
        const haystack = `${item.title} ${item.description} ${item.body}`.toLowerCase();
        return q === "" || haystack.includes(q);
      });
      if (kind) hits = hits.filter((item) => item.kind === kind);
      if (maxLevel) {
        const cap = SCALE.indexOf(maxLevel);
        hits = hits.filter(
          (item) => item.difficulty !== null && SCALE.indexOf(item.difficulty.label) <= cap,
        );
      }
      return json(200, { items: hits.map((item) => ({ ...summary(item), score: 1.0 })) });
    }

    const feedMatch = path.match(/^\/api\/users\/([^/]+)\/feed$/);
    if (method === "GET" && feedMatch) {
      const profile = profileFor(decodeURIComponent(feedMatch[1]));
      const visible = state.items.filter((item) => {
        if (profile.seen.includes(item.id)) return false;
        const topics = item.topics.filter((t) => t.accepted).map((t) => t.topic);
        return !topics.some((topic) => profile.non_interests.includes(topic));
      });
      return json(200, {
        items: visible.map(summary),
        level_estimate: profile.level_estimate,
      });
    }

    const interestsMatch = path.match(/^\/api\/users\/([^/]+)\/interests$/);
    if (interestsMatch) {
      const profile = profileFor(decodeURIComponent(interestsMatch[1]));
      if (method === "GET") {
        return json(200, {
          interests: [...profile.interests].sort(),
          non_interests: [...profile.non_interests].sort(),
          level_estimate: profile.level_estimate,
        });
      }
      if (method === "PUT") {
        const interests = (body.interests as string[]) ?? [];
        const nonInterests = (body.non_interests as string[]) ?? [];
        const overlap = interests.filter((topic) => nonInterests.includes(topic));
        if (overlap.length > 0) {
          return failure(409, "interests_overlap", `topics in both lists: ${overlap.join(", ")}`);
        }
        profile.interests = interests;
        profile.non_interests = nonInterests;
        return json(204, null);
      }
    }

    const feedbackMatch = path.match(/^\/api\/users\/([^/]+)\/feedback$/);
    if (method === "POST" && feedbackMatch) {
      const profile = profileFor(decodeURIComponent(feedbackMatch[1]));
      const item = state.items.find((candidate) => candidate.id === body.item_id);
      if (!item) {
        return failure(404, "item_not_found", `unknown item ${String(body.item_id)}`);
      }
      if (item.difficulty === null) {
        return failure(422, "item_not_scorable", "item has no difficulty annotation");
      }
      const delta = { too_easy: 1, ok: 0, too_hard: -1 }[body.verdict as string];
      if (delta === undefined) {
        return failure(422, "bad_verdict", "verdict must be too_easy, ok or too_hard");
      }
      const implied = SCALE.indexOf(item.difficulty.label) + delta;
      const updated = (1 - ALPHA) * profile.level_estimate + ALPHA * implied;
      profile.level_estimate = Math.min(SCALE.length - 1, Math.max(0, updated));
      profile.seen.push(item.id);
      return json(200, { level_estimate: profile.level_estimate });
    }

    const itemMatch = path.match(/^\/api\/items\/([^/]+)$/);
    if (method === "GET" && itemMatch) {
      const itemId = decodeURIComponent(itemMatch[1]);
      const item = state.items.find((candidate) => candidate.id === itemId);
      if (!item) {
        return failure(404, "item_not_found", `unknown item ${itemId}`);
      }
      return json(200, item);
    }

    if (method === "POST" && path === "/api/translate") {
      const text = (body.text as string) ?? "";
      if (!text.trim()) {
        return failure(422, "bad_text", "text must be non-blank");
      }
      return json(200, {
        translation: [...text].reverse().join(""),
        pronunciation_url: null,
      });
    }

    return failure(404, "not_found", `no mock route for ${method} ${path}`);
  };

  return { fetchFn, state };
}
