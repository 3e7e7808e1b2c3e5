import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { SearchView } from "../src/search_view.js";
import type { MetaResponse } from "../src/types.js";
import {
  fixtureFetch,
  metaFixture,
  searchFixture,
  stubCanvas,
  type RecordedCall,
} from "./helpers.js";

function makeView(calls: RecordedCall[] = []): SearchView {
  const root = document.createElement("div");
  document.body.appendChild(root);
  return new SearchView(
    root,
    new ApiClient(fixtureFetch(calls)),
    metaFixture as MetaResponse,
  );
}

async function settle(): Promise<void> {
  // drain the microtask queue so card players finish attaching
  for (let i = 0; i < 5; i++) await Promise.resolve();
}

describe("SearchView", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
    stubCanvas();
  });

  it("renders top-k cards in API order with 2-decimal scores", async () => {
    const view = makeView();
    view.input.value = searchFixture.query;
    view.kInput.value = "5";
    await view.submit();
    await settle();

    const cards = [...view.root.querySelectorAll<HTMLElement>(".card")];
    expect(cards.map((c) => c.dataset.id)).toEqual(
      searchFixture.results.map((r) => r.id),
    );
    const scores = [...view.root.querySelectorAll(".score")].map(
      (s) => s.textContent,
    );
    expect(scores).toEqual(
      searchFixture.results.map((r) => r.score.toFixed(2)),
    );
    for (const p of view.players) p.pause();
  });

  it("empty query shows inline validation and sends no request", async () => {
    const calls: RecordedCall[] = [];
    const view = makeView(calls);
    view.input.value = "   ";
    await view.submit();
    expect(view.error.hidden).toBe(false);
    expect(calls).toHaveLength(0);
    expect(view.root.querySelectorAll(".card")).toHaveLength(0);
  });

  it("clamps the k selector to the gallery size", async () => {
    const calls: RecordedCall[] = [];
    const view = makeView(calls);
    view.input.value = searchFixture.query;
    view.kInput.value = "50";
    await view.submit();
    await settle();
    expect(view.kInput.value).toBe(String(metaFixture.count));
    expect(calls[0].url).toContain(`k=${metaFixture.count}`);
    for (const p of view.players) p.pause();
  });

  it("clicking a caption pre-fills it as the next query", async () => {
    const view = makeView();
    view.input.value = searchFixture.query;
    await view.submit();
    await settle();
    const caption = view.root.querySelector(
      ".card:nth-child(2) .caption",
    ) as HTMLAnchorElement;
    caption.dispatchEvent(new MouseEvent("click", { bubbles: true }));
    expect(view.input.value).toBe(searchFixture.results[1].text);
    for (const p of view.players) p.pause();
  });

  it("attaches an animated player per card with stored joints", async () => {
    const view = makeView();
    view.input.value = searchFixture.query;
    await view.submit();
    await settle();
    // only the first fixture id has a recorded motion; others 404 silently
    expect(view.players.length).toBe(1);
    expect(view.players[0].frameCount).toBeGreaterThan(0);
    for (const p of view.players) p.pause();
  });
});
