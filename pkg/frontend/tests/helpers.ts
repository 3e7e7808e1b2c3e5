import type { FetchLike } from "../src/api.js";

import localizeFixture from "./fixtures/localize.json";
import metaFixture from "./fixtures/meta.json";
import motionFixture from "./fixtures/motion.json";
import searchFixture from "./fixtures/search.json";

export { localizeFixture, metaFixture, motionFixture, searchFixture };

export interface RecordedCall {
  url: string;
  method: string;
  body?: string;
}

/** Fetch stub serving the recorded API fixtures; logs every request. */
export function fixtureFetch(calls: RecordedCall[] = []): FetchLike {
  return async (url, init) => {
    calls.push({ url, method: init?.method ?? "GET", body: init?.body });
    const respond = (payload: unknown, status = 200) => ({
      ok: status < 400,
      status,
      json: async () => payload,
    });
    if (url.startsWith("/api/search")) {
      return respond(searchFixture.results);
    }
    if (url.startsWith("/api/meta")) {
      return respond(metaFixture);
    }
    if (url.startsWith(`/api/motion/${motionFixture.id}`)) {
      return respond(motionFixture.payload);
    }
    if (url.startsWith("/api/motion/")) {
      return respond({ error: "unknown id" }, 404);
    }
    if (url.startsWith("/api/localize")) {
      return respond(localizeFixture.response);
    }
    return respond({ error: "unexpected url " + url }, 500);
  };
}

interface FakeCtxCall {
  op: string;
  args: unknown[];
}

/** jsdom has no canvas backend; substitute a call-recording 2D context. */
export function stubCanvas(): FakeCtxCall[] {
  const calls: FakeCtxCall[] = [];
  const record =
    (op: string) =>
    (...args: unknown[]) => {
      calls.push({ op, args });
    };
  const ctx = {
    clearRect: record("clearRect"),
    beginPath: record("beginPath"),
    moveTo: record("moveTo"),
    lineTo: record("lineTo"),
    stroke: record("stroke"),
    arc: record("arc"),
    fill: record("fill"),
    strokeStyle: "",
    fillStyle: "",
    lineWidth: 1,
  };
  (HTMLCanvasElement.prototype as unknown as Record<string, unknown>)
    .getContext = () => ctx;
  return calls;
}
