import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { ServiceError } from "../src/client.js";
import { Composer } from "../src/composer.js";
import { FakeClient, flush, resp } from "./helpers.js";

describe("composer", () => {
  let client: FakeClient;
  let composer: Composer;

  beforeEach(() => {
    vi.useFakeTimers();
    client = new FakeClient();
    composer = new Composer({ client, debounceMs: 150 });
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("debounces typing into a single request with the final tokens", async () => {
    composer.setPinyinText("w");
    await vi.advanceTimersByTimeAsync(100);
    expect(client.calls).toHaveLength(0);

    composer.setPinyinText("w m");
    await vi.advanceTimersByTimeAsync(100);
    expect(client.calls).toHaveLength(0); // second edit reset the timer

    await vi.advanceTimersByTimeAsync(60);
    expect(client.calls).toHaveLength(1);
    expect(client.calls[0]).toMatchObject({ pinyin: ["w", "m"], mode: "abbrev" });
  });

  it("issues no request for empty pinyin, and cancels a scheduled one", async () => {
    composer.setPinyinText("");
    await vi.advanceTimersByTimeAsync(1000);
    expect(client.calls).toHaveLength(0);

    composer.setPinyinText("w");
    composer.setPinyinText("   ");
    await vi.advanceTimersByTimeAsync(1000);
    expect(client.calls).toHaveLength(0);
    expect(composer.state.status.kind).toBe("idle");
  });

  it("discards a stale response that arrives after a newer one", async () => {
    composer.setPinyinText("w");
    await vi.advanceTimersByTimeAsync(150);
    composer.setPinyinText("w m");
    await vi.advanceTimersByTimeAsync(150);
    expect(client.calls).toHaveLength(2);

    client.resolve(1, resp(["我们", "我吗"]));
    await flush();
    expect(composer.state.candidates?.candidates[0]?.text).toBe("我们");

    client.resolve(0, resp(["我"])); // the older request lands late
    await flush();
    expect(composer.state.candidates?.candidates[0]?.text).toBe("我们");
    expect(composer.state.pending_pinyin).toEqual(["w", "m"]);
  });

  it("ignores a response that outlived its pinyin buffer", async () => {
    composer.setPinyinText("w");
    await vi.advanceTimersByTimeAsync(150);
    expect(client.calls).toHaveLength(1);

    composer.clearPinyin();
    await vi.advanceTimersByTimeAsync(1000);
    client.resolve(0, resp(["我"]));
    await flush();
    expect(composer.state.candidates).toBeNull();
    expect(composer.state.status.kind).toBe("idle");
  });

  it("selection appends exactly the candidate text and clears the buffer", async () => {
    composer.setContext("你");
    composer.setPinyinText("h s");
    await vi.advanceTimersByTimeAsync(150);
    client.resolve(0, resp(["喝水", "河上", "很少"]));
    await flush();

    expect(composer.selectCandidate(1)).toBe(true);
    expect(composer.state.committed_text).toBe("你河上");
    expect(composer.state.pending_pinyin).toEqual([]);
    expect(composer.state.candidates).toBeNull();
    expect(composer.state.status.kind).toBe("idle");
    await vi.advanceTimersByTimeAsync(1000);
    expect(client.calls).toHaveLength(1); // empty buffer: no follow-up request

    composer.setPinyinText("m");
    await vi.advanceTimersByTimeAsync(150);
    expect(client.calls[1]?.context).toBe("你河上"); // next request sees the commit
  });

  it("rejects out-of-range selection without touching state", async () => {
    composer.setPinyinText("w");
    await vi.advanceTimersByTimeAsync(150);
    client.resolve(0, resp(["我", "握"]));
    await flush();

    expect(composer.selectCandidate(2)).toBe(false);
    expect(composer.selectCandidate(-1)).toBe(false);
    expect(composer.state.committed_text).toBe("");
    expect(composer.state.candidates?.candidates).toHaveLength(2);
  });

  it("commitHighlighted follows the moved highlight", async () => {
    composer.setPinyinText("w");
    await vi.advanceTimersByTimeAsync(150);
    client.resolve(0, resp(["我", "握", "窝"]));
    await flush();

    composer.moveHighlight(1);
    composer.moveHighlight(1);
    expect(composer.commitHighlighted()).toBe(true);
    expect(composer.state.committed_text).toBe("窝");
  });

  it("mode toggle re-queries immediately with the same tokens", async () => {
    composer.setPinyinText("wo men");
    await vi.advanceTimersByTimeAsync(150);
    expect(client.calls).toHaveLength(1);

    composer.setMode("perfect");
    expect(client.calls).toHaveLength(2); // no debounce wait
    expect(client.calls[1]).toMatchObject({ pinyin: ["wo", "men"], mode: "perfect" });
  });

  it("context edits re-condition a pending query", async () => {
    composer.setPinyinText("m");
    await vi.advanceTimersByTimeAsync(150);
    client.resolve(0, resp(["马"]));
    await flush();
    expect(composer.state.candidates).not.toBeNull();

    composer.setContext("你的");
    expect(composer.state.candidates).toBeNull(); // strip no longer matches the pair
    await vi.advanceTimersByTimeAsync(150);
    expect(client.calls[1]).toMatchObject({ context: "你的", pinyin: ["m"] });
  });

  it("carries changed top_k and beam_size into the next request", async () => {
    composer.setPinyinText("w");
    await vi.advanceTimersByTimeAsync(150);
    composer.setTopK(3);
    composer.setBeamSize(8);
    expect(client.calls).toHaveLength(3);
    expect(client.calls[2]).toMatchObject({ top_k: 3, beam_size: 8 });
  });

  it("surfaces unknown_pinyin errors with the offending position", async () => {
    composer.setPinyinText("w blarg");
    await vi.advanceTimersByTimeAsync(150);
    client.reject(
      0,
      new ServiceError(422, "unknown_pinyin", "pinyin token 'blarg' at position 1", "pinyin", 1),
    );
    await flush();

    expect(composer.state.status).toEqual({
      kind: "error",
      message: "pinyin token 'blarg' at position 1",
      position: 1,
    });

    composer.retry();
    expect(client.calls).toHaveLength(2);
    expect(client.calls[1]?.pinyin).toEqual(["w", "blarg"]);
  });

  it("keeps non-422 failures as plain error status", async () => {
    composer.setPinyinText("w");
    await vi.advanceTimersByTimeAsync(150);
    client.reject(0, new TypeError("fetch failed"));
    await flush();
    expect(composer.state.status).toEqual({
      kind: "error",
      message: "fetch failed",
      position: null,
    });
  });

  it("drops an error whose request is already stale", async () => {
    composer.setPinyinText("w");
    await vi.advanceTimersByTimeAsync(150);
    composer.setPinyinText("w m");
    await vi.advanceTimersByTimeAsync(150);

    client.reject(0, new TypeError("fetch failed"));
    await flush();
    expect(composer.state.status.kind).toBe("loading"); // still waiting on request 1

    client.resolve(1, resp(["我们"]));
    await flush();
    expect(composer.state.candidates?.candidates[0]?.text).toBe("我们");
  });

  it("notifies onChange with the live state object", async () => {
    const seen: string[] = [];
    const c2 = new Composer({
      client,
      debounceMs: 150,
      onChange: (s) => seen.push(s.status.kind),
    });
    c2.setPinyinText("w");
    await vi.advanceTimersByTimeAsync(150);
    client.resolve(0, resp(["我"]));
    await flush();
    expect(seen).toEqual(["loading", "idle"]);
  });
});
