/**
 * Interest management: two chip lists (interests, non-interests) kept in
 * sync with PUT /api/users/{id}/interests. Adding a topic that already
 * sits in the other list is rejected client-side, mirroring the
 * service's 409 on overlapping sets.
 */

import type { ApiClient } from "../api.js";
import { ApiError } from "../api.js";

export class InterestsView {
  private inflight: Promise<void> | null = null;
  private interests: string[] = [];
  private nonInterests: string[] = [];
  private notice!: HTMLElement;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private userId: string,
  ) {}

  render(): Promise<void> {
    this.root.innerHTML = `
      <div class="notice" hidden></div>
      <section class="interest-set" data-set="interests">
        <h3>Interests</h3>
        <ul class="chips"></ul>
        <form>
          <input name="topic" type="text" placeholder="add an interest" />
          <button type="submit">Add</button>
        </form>
      </section>
      <section class="interest-set" data-set="non_interests">
        <h3>Non-interests</h3>
        <ul class="chips"></ul>
        <form>
          <input name="topic" type="text" placeholder="add a non-interest" />
          <button type="submit">Add</button>
        </form>
      </section>
    `;
    this.notice = this.root.querySelector(".notice")!;
    for (const section of this.root.querySelectorAll<HTMLElement>(".interest-set")) {
      const form = section.querySelector("form")!;
      form.addEventListener("submit", (event) => {
        event.preventDefault();
        const input = form.querySelector("input")!;
        this.add(section.dataset.set === "interests", input.value);
        input.value = "";
      });
    }
    return this.load();
  }

  private load(): Promise<void> {
    if (this.inflight) {
      return this.inflight;
    }
    this.inflight = this.api
      .interests(this.userId)
      .then((response) => {
        this.interests = response.interests;
        this.nonInterests = response.non_interests;
        this.renderChips();
      })
      .catch((error: unknown) => {
        this.showNotice(error instanceof ApiError ? error.message : "could not load interests");
      })
      .finally(() => {
        this.inflight = null;
      });
    return this.inflight;
  }

  private showNotice(message: string): void {
    this.notice.textContent = message;
    this.notice.hidden = message === "";
  }

  private renderChips(): void {
    const sets: Array<[string, string[]]> = [
      ["interests", this.interests],
      ["non_interests", this.nonInterests],
    ];
    for (const [name, topics] of sets) {
      const list = this.root.querySelector(`[data-set="${name}"] .chips`)!;
      list.replaceChildren();
      for (const topic of topics) {
        const chip = document.createElement("li");
        chip.className = "chip";
        chip.textContent = topic;
        const remove = document.createElement("button");
        remove.className = "remove";
        remove.textContent = "×";
        remove.addEventListener("click", () => {
          this.remove(name === "interests", topic);
        });
        chip.append(remove);
        list.append(chip);
      }
    }
  }

  add(toInterests: boolean, rawTopic: string): Promise<void> {
    const topic = rawTopic.trim().toLowerCase();
    if (!topic) {
      return Promise.resolve();
    }
    const other = toInterests ? this.nonInterests : this.interests;
    if (other.includes(topic)) {
      this.showNotice(`"${topic}" is already in the other list`);
      return Promise.resolve();
    }
    const target = toInterests ? this.interests : this.nonInterests;
    if (target.includes(topic)) {
      return Promise.resolve();
    }
    return this.save(
      toInterests ? [...this.interests, topic] : this.interests,
      toInterests ? this.nonInterests : [...this.nonInterests, topic],
    );
  }

  remove(fromInterests: boolean, topic: string): Promise<void> {
    return this.save(
      fromInterests ? this.interests.filter((t) => t !== topic) : this.interests,
      fromInterests ? this.nonInterests : this.nonInterests.filter((t) => t !== topic),
    );
  }

  private save(interests: string[], nonInterests: string[]): Promise<void> {
    if (this.inflight) {
      return this.inflight;
    }
    this.showNotice("");
    this.inflight = this.api
      .putInterests(this.userId, interests, nonInterests)
      .then(() => {
        this.interests = interests;
        this.nonInterests = nonInterests;
        this.renderChips();
      })
      .catch((error: unknown) => {
        this.showNotice(error instanceof ApiError ? error.message : "could not save interests");
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
